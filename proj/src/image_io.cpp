#include "image_io.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace tpdr {

namespace {

uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

void write_pnm(const std::string& path, const char* magic, const std::vector<double>& values,
               int width, int height, int channels) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("image write: non-positive size " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  const size_t expected = static_cast<size_t>(width) * height * channels;
  if (values.size() != expected) {
    throw std::invalid_argument("image write: " + path + ": got " +
                                std::to_string(values.size()) + " values, expected " +
                                std::to_string(expected));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("image write: cannot open " + path);
  out << magic << "\n" << width << " " << height << "\n255\n";
  std::vector<uint8_t> bytes(expected);
  for (size_t i = 0; i < expected; ++i) bytes[i] = quantize(values[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(expected));
  if (!out) throw IoError("image write: short write to " + path);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
  std::string tok;
  for (;;) {
    const int c = in.get();
    if (c == EOF) {
      if (tok.empty()) throw ParseError("image read: " + path + ": truncated header");
      return tok;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

std::vector<double> read_pnm(const std::string& path, const char* magic, int channels, int& width,
                             int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("image read: cannot open " + path);
  if (next_token(in, path) != magic) {
    throw ParseError("image read: " + path + ": bad magic, expected " + magic);
  }
  width = std::stoi(next_token(in, path));
  height = std::stoi(next_token(in, path));
  const int maxval = std::stoi(next_token(in, path));
  if (width <= 0 || height <= 0) throw ParseError("image read: " + path + ": bad size");
  if (maxval != 255) throw ParseError("image read: " + path + ": unsupported maxval");
  const size_t n = static_cast<size_t>(width) * height * channels;
  std::vector<uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw ParseError("image read: " + path + ": truncated pixel data");
  }
  std::vector<double> values(n);
  for (size_t i = 0; i < n; ++i) values[i] = bytes[i] / 255.0;
  return values;
}

}  // namespace

void write_ppm(const std::string& path, const std::vector<double>& rgb, int width, int height) {
  write_pnm(path, "P6", rgb, width, height, 3);
}

void write_pgm(const std::string& path, const std::vector<double>& gray, int width, int height) {
  write_pnm(path, "P5", gray, width, height, 1);
}

std::vector<double> read_ppm(const std::string& path, int& width, int& height) {
  return read_pnm(path, "P6", 3, width, height);
}

std::vector<double> read_pgm(const std::string& path, int& width, int& height) {
  return read_pnm(path, "P5", 1, width, height);
}

std::vector<double> resize_bilinear_chw(const std::vector<double>& data, int channels, int height,
                                        int width, int out_height, int out_width) {
  if (channels <= 0 || height <= 0 || width <= 0 || out_height <= 0 || out_width <= 0) {
    throw std::invalid_argument("resize: non-positive dimension");
  }
  if (data.size() != static_cast<size_t>(channels) * height * width) {
    throw std::invalid_argument("resize: data size does not match [C,H,W]");
  }
  // Align-corners mapping: output corners sample input corners exactly.
  std::vector<double> out(static_cast<size_t>(channels) * out_height * out_width);
  const double sy = out_height > 1 ? double(height - 1) / (out_height - 1) : 0.0;
  const double sx = out_width > 1 ? double(width - 1) / (out_width - 1) : 0.0;
  for (int oy = 0; oy < out_height; ++oy) {
    const double fy = oy * sy;
    const int y0 = std::min(static_cast<int>(fy), height - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_width; ++ox) {
      const double fx = ox * sx;
      const int x0 = std::min(static_cast<int>(fx), width - 1);
      const int x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        const double* plane = data.data() + static_cast<size_t>(c) * height * width;
        const double top = plane[y0 * width + x0] * (1 - wx) + plane[y0 * width + x1] * wx;
        const double bot = plane[y1 * width + x0] * (1 - wx) + plane[y1 * width + x1] * wx;
        out[(static_cast<size_t>(c) * out_height + oy) * out_width + ox] =
            top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

}  // namespace tpdr
