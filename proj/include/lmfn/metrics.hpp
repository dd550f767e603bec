#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lmfn/image.hpp"

namespace lmfn {

inline constexpr double kPsnrCapDb = 100.0;

inline void require_same_dims(const ImagePlane& a, const ImagePlane& b, const char* op) {
  if (!a.same_dims(b)) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch " + a.dims() + " vs " +
                                b.dims());
  }
}

inline double mean_squared_error(const ImagePlane& a, const ImagePlane& b) {
  require_same_dims(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - b.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.values.size());
}

/// 10·log10(1 / MSE) for unit-range data, capped at 100 dB.
inline double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

inline double psnr(const ImagePlane& a, const ImagePlane& b) {
  return psnr_from_mse(mean_squared_error(a, b));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> g(size);
  const int r = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-static_cast<double>((i - r) * (i - r)) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

/// Mean SSIM over all fully contained windows, averaged over channels.
/// Local statistics use a separable Gaussian window.
inline double ssim(const ImagePlane& a, const ImagePlane& b, const SsimParams& p = {}) {
  require_same_dims(a, b, "ssim");
  if (a.width < p.window || a.height < p.window) {
    throw std::invalid_argument("ssim: image " + a.dims() + " smaller than the " +
                                std::to_string(p.window) + "x" + std::to_string(p.window) +
                                " window");
  }
  const std::vector<double> g = gaussian_window_1d(p.window, p.sigma);
  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  const int ow = a.width - p.window + 1;
  const int oh = a.height - p.window + 1;

  // Horizontal pass over each of the five moment planes, then vertical.
  auto filter = [&](const std::vector<double>& src) {
    std::vector<double> tmp(static_cast<std::size_t>(a.height) * ow);
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < p.window; ++k) s += g[k] * src[static_cast<std::size_t>(y) * a.width + x + k];
        tmp[static_cast<std::size_t>(y) * ow + x] = s;
      }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < p.window; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = s;
      }
    return out;
  };

  const std::size_t plane = static_cast<std::size_t>(a.width) * a.height;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = a.values[c * plane + i];
      y[i] = b.values[c * plane + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x), my = filter(y), sxx = filter(xx), syy = filter(yy), sxy = filter(xy);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / a.channels;
}

}  // namespace lmfn
