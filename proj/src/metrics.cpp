#include "metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tpdr {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window() {
  std::vector<double> k(kWin);
  double total = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

// Separable valid-mode convolution with the normalized Gaussian window:
// output is (height - 10) x (width - 10).
std::vector<double> blur_valid(const std::vector<double>& img, int width, int height) {
  static const std::vector<double> k = gaussian_window();
  const int ow = width - kWin + 1, oh = height - kWin + 1;
  std::vector<double> rows(static_cast<size_t>(height) * ow);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[i] * img[y * width + x + i];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr_masked(const std::vector<double>& a, const std::vector<double>& b,
                   const std::vector<uint8_t>& mask, int channels) {
  if (channels <= 0) throw std::invalid_argument("psnr: channels must be positive");
  if (a.size() != b.size()) throw std::invalid_argument("psnr: image sizes differ");
  if (a.size() != mask.size() * static_cast<size_t>(channels)) {
    throw std::invalid_argument("psnr: mask size does not match images");
  }
  double se = 0.0;
  size_t count = 0;
  for (size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    ++count;
    for (int c = 0; c < channels; ++c) {
      const double d = a[p * channels + c] - b[p * channels + c];
      se += d * d;
    }
  }
  if (count == 0) throw std::invalid_argument("psnr: mask is empty");
  const double mse = se / (static_cast<double>(count) * channels);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> to_grayscale(const std::vector<double>& rgb) {
  if (rgb.size() % 3 != 0) throw std::invalid_argument("to_grayscale: size not divisible by 3");
  std::vector<double> gray(rgb.size() / 3);
  for (size_t p = 0; p < gray.size(); ++p) {
    gray[p] = 0.299 * rgb[p * 3] + 0.587 * rgb[p * 3 + 1] + 0.114 * rgb[p * 3 + 2];
  }
  return gray;
}

double ssim(const std::vector<double>& gray_a, const std::vector<double>& gray_b, int width,
            int height) {
  if (width < kWin || height < kWin) throw std::invalid_argument("ssim: images smaller than 11x11");
  const size_t numel = static_cast<size_t>(width) * height;
  if (gray_a.size() != numel || gray_b.size() != numel) {
    throw std::invalid_argument("ssim: image sizes do not match width*height");
  }
  std::vector<double> aa(numel), bb(numel), ab(numel);
  for (size_t i = 0; i < numel; ++i) {
    aa[i] = gray_a[i] * gray_a[i];
    bb[i] = gray_b[i] * gray_b[i];
    ab[i] = gray_a[i] * gray_b[i];
  }
  const std::vector<double> mu_a = blur_valid(gray_a, width, height);
  const std::vector<double> mu_b = blur_valid(gray_b, width, height);
  const std::vector<double> m_aa = blur_valid(aa, width, height);
  const std::vector<double> m_bb = blur_valid(bb, width, height);
  const std::vector<double> m_ab = blur_valid(ab, width, height);
  double total = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

std::vector<uint8_t> mask_from_alpha(const std::vector<double>& alpha, double threshold) {
  std::vector<uint8_t> mask(alpha.size());
  for (size_t i = 0; i < alpha.size(); ++i) mask[i] = alpha[i] > threshold ? 1 : 0;
  return mask;
}

double avd(const MorphableModel& model, const FaceCoefficients& a, const FaceCoefficients& b) {
  const std::vector<double> va = compute_vertices(model, neutralize(a));
  const std::vector<double> vb = compute_vertices(model, neutralize(b));
  double total = 0.0;
  for (int64_t v = 0; v < model.n_vertices; ++v) {
    double sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = va[v * 3 + c] - vb[v * 3 + c];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(model.n_vertices);
}

std::string metric_report_json(const MetricReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "{";
  if (std::isinf(rep.psnr_masked)) {
    os << "\"psnr_masked\":\"inf\"";
  } else {
    os << "\"psnr_masked\":" << rep.psnr_masked;
  }
  os << ",\"ssim\":" << rep.ssim;
  if (!std::isnan(rep.avd_s)) os << ",\"avd_s\":" << rep.avd_s;
  if (!std::isnan(rep.avd_d)) os << ",\"avd_d\":" << rep.avd_d;
  os << "}";
  return os.str();
}

}  // namespace tpdr
