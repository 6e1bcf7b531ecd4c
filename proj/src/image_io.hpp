#pragma once

#include <string>
#include <vector>

namespace tpdr {

// Binary PPM (P6) / PGM (P5), 8-bit, maxval 255. Values are [0,1] doubles on
// the API side; writes clamp then round, so a write/read round-trip is stable
// once values are quantized.
void write_ppm(const std::string& path, const std::vector<double>& rgb, int width, int height);
void write_pgm(const std::string& path, const std::vector<double>& gray, int width, int height);
std::vector<double> read_ppm(const std::string& path, int& width, int& height);
std::vector<double> read_pgm(const std::string& path, int& width, int& height);

// Separable bilinear resize of channel-major [C,H,W] data.
std::vector<double> resize_bilinear_chw(const std::vector<double>& data, int channels, int height,
                                        int width, int out_height, int out_width);

}  // namespace tpdr
