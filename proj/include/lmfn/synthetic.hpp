#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "lmfn/image.hpp"

namespace lmfn {

/// Procedural RGB scene with hard edges: a smooth background gradient, then
/// random axis-aligned rectangles, discs and one stripe patch. Deterministic in seed.
inline ImagePlane synthetic_scene(int width, int height, std::uint64_t seed) {
  ImagePlane img = ImagePlane::filled(width, height, 3, 0.0f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  float c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = unit(rng);
    c1[c] = unit(rng);
  }
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float t = (static_cast<float>(x) + y) / static_cast<float>(width + height);
        img.at(c, y, x) = c0[c] + (c1[c] - c0[c]) * t;
      }

  const int shapes = 6 + static_cast<int>(rng() % 6);
  for (int s = 0; s < shapes; ++s) {
    float col[3] = {unit(rng), unit(rng), unit(rng)};
    const float cx = unit(rng) * width, cy = unit(rng) * height;
    const float ra = (0.08f + 0.25f * unit(rng)) * std::min(width, height);
    const float rb = (0.08f + 0.25f * unit(rng)) * std::min(width, height);
    const bool disc = (rng() & 1u) != 0;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float dx = x - cx, dy = y - cy;
        const bool inside = disc ? (dx * dx + dy * dy <= ra * ra)
                                 : (std::abs(dx) <= ra && std::abs(dy) <= rb);
        if (inside)
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
      }
  }

  // stripes
  const int period = 3 + static_cast<int>(rng() % 5);
  const int x0 = static_cast<int>(unit(rng) * width * 0.6f), y0 = static_cast<int>(unit(rng) * height * 0.6f);
  const int sw = std::max(4, width / 3), sh = std::max(4, height / 3);
  const bool vertical = (rng() & 1u) != 0;
  for (int y = y0; y < std::min(height, y0 + sh); ++y)
    for (int x = x0; x < std::min(width, x0 + sw); ++x) {
      const int k = vertical ? x : y;
      const float v = (k / period) % 2 == 0 ? 0.9f : 0.1f;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
    }
  img.clamp();
  return img;
}

}  // namespace lmfn
