#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "morphable.hpp"

namespace tpdr {

// Image-quality and identity metrics. psnr_masked is +infinity when the
// masked regions are bit-identical; avd fields are NaN until computed.
struct MetricReport {
  double psnr_masked = 0.0;
  double ssim = 0.0;
  double avd_s = std::numeric_limits<double>::quiet_NaN();
  double avd_d = std::numeric_limits<double>::quiet_NaN();
};

// Mean over masked pixels (all channels) of squared difference. Images are
// interleaved [H*W*channels] in [0,1]; mask is per-pixel [H*W].
double psnr_masked(const std::vector<double>& a, const std::vector<double>& b,
                   const std::vector<uint8_t>& mask, int channels = 3);

std::vector<double> to_grayscale(const std::vector<double>& rgb);

// Windowed structural similarity on grayscale images, 11x11 Gaussian window
// sigma 1.5, K1=0.01, K2=0.03, dynamic range 1. The map is evaluated at all
// fully interior window positions and averaged; both sides must be >= 11.
double ssim(const std::vector<double>& gray_a, const std::vector<double>& gray_b, int width,
            int height);

std::vector<uint8_t> mask_from_alpha(const std::vector<double>& alpha, double threshold = 0.5);

// Identity distance: neutralize both coefficient sets (expression and pose
// zeroed, shape kept), then mean vertex-wise Euclidean distance.
double avd(const MorphableModel& model, const FaceCoefficients& a, const FaceCoefficients& b);

// JSON object; infinities serialize as the string "inf", NaN fields are
// omitted.
std::string metric_report_json(const MetricReport& rep);

}  // namespace tpdr
