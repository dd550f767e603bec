#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lmfn/image.hpp"

namespace lmfn {

enum class BlurKind { Gaussian, Motion };

/// Synthetic blur description. `seed` keys any randomness drawn when the spec
/// itself is sampled (see random_blur_spec); kernels are deterministic in the
/// remaining fields.
struct BlurSpec {
  BlurKind kind = BlurKind::Gaussian;
  double sigma = 1.0;      // gaussian
  int length = 3;          // motion, odd
  double angle_deg = 0.0;  // motion, [0, 180), counter-clockwise from +x
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == BlurKind::Gaussian) {
      if (!(sigma > 0.0) || !std::isfinite(sigma) || sigma > 64.0) {
        throw std::invalid_argument("BlurSpec: gaussian sigma must be in (0, 64], got " +
                                    std::to_string(sigma));
      }
    } else {
      if (length < 3 || length % 2 == 0 || length > 255) {
        throw std::invalid_argument("BlurSpec: motion length must be an odd integer in [3, 255], got " +
                                    std::to_string(length));
      }
      if (!(angle_deg >= 0.0 && angle_deg < 180.0)) {
        throw std::invalid_argument("BlurSpec: motion angle must be in [0, 180), got " +
                                    std::to_string(angle_deg));
      }
    }
  }
};

/// Square kernel of odd size, row-major, nonnegative, summing to one.
struct BlurKernel {
  int size = 1;
  std::vector<double> weights;

  double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * size + x]; }
  int radius() const { return size / 2; }
  double sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Gaussian: separable density truncated at ±3σ (radius at least 1).
/// Motion: a centred segment of the given length, rasterized by dense
/// sampling with each sample credited to the pixel that contains it.
inline BlurKernel make_blur_kernel(const BlurSpec& spec) {
  spec.validate();
  BlurKernel k;
  if (spec.kind == BlurKind::Gaussian) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * spec.sigma)));
    k.size = 2 * r + 1;
    std::vector<double> g(k.size);
    double total = 0.0;
    for (int i = 0; i < k.size; ++i) {
      const double d = i - r;
      g[i] = std::exp(-d * d / (2.0 * spec.sigma * spec.sigma));
      total += g[i];
    }
    for (double& v : g) v /= total;
    k.weights.resize(static_cast<std::size_t>(k.size) * k.size);
    for (int y = 0; y < k.size; ++y)
      for (int x = 0; x < k.size; ++x) k.weights[static_cast<std::size_t>(y) * k.size + x] = g[y] * g[x];
    return k;
  }
  k.size = spec.length;
  k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
  const int r = k.radius();
  const double theta = spec.angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(theta);
  const double dy = -std::sin(theta);  // image rows grow downward
  const int samples = 64 * spec.length;
  const double len = spec.length;
  for (int i = 0; i < samples; ++i) {
    const double t = -len / 2.0 + (i + 0.5) * len / samples;
    const int x = static_cast<int>(std::lround(t * dx)) + r;
    const int y = static_cast<int>(std::lround(t * dy)) + r;
    k.weights[static_cast<std::size_t>(y) * k.size + x] += 1.0;
  }
  for (double& v : k.weights) v /= samples;
  return k;
}

/// Correlates every channel with the kernel using mirrored borders, then clamps to [0, 1].
inline ImagePlane apply_blur(const ImagePlane& img, const BlurKernel& k) {
  ImagePlane out = ImagePlane::filled(img.width, img.height, img.channels, 0.0f);
  const int r = k.radius();
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < k.size; ++i) {
          const int sy = reflect_index(y + i - r, img.height);
          for (int j = 0; j < k.size; ++j) {
            acc += k.at(i, j) * img.at(c, sy, reflect_index(x + j - r, img.width));
          }
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  out.clamp();
  return out;
}

/// Returns (blurred, sharp).
inline std::pair<ImagePlane, ImagePlane> synthesize_pair(const ImagePlane& sharp,
                                                         const BlurSpec& spec) {
  return {apply_blur(sharp, make_blur_kernel(spec)), sharp};
}

/// Draws a blur spec from `seed`: gaussian σ ~ U[0.5, 2.5] or motion with an
/// odd length in [5, 15] and angle ~ U[0, 180), with equal odds.
inline BlurSpec random_blur_spec(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BlurSpec s;
  s.seed = seed;
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
    s.kind = BlurKind::Gaussian;
    s.sigma = std::uniform_real_distribution<double>(0.5, 2.5)(rng);
  } else {
    s.kind = BlurKind::Motion;
    s.length = 5 + 2 * std::uniform_int_distribution<int>(0, 5)(rng);
    s.angle_deg = std::uniform_real_distribution<double>(0.0, 180.0)(rng);
  }
  return s;
}

}  // namespace lmfn
