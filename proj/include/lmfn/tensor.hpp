#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmfn {

/// NCHW extents of a rank-4 tensor. Every extent is strictly positive.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  constexpr std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  constexpr bool valid() const { return n > 0 && c > 0 && h > 0 && w > 0; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

/// Dense float tensor in row-major NCHW order.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(shape) {
    if (!shape.valid()) {
      throw std::invalid_argument("Tensor: non-positive extent in shape " + shape.str());
    }
    data_.assign(shape.numel(), fill);
  }

  Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (!shape.valid()) {
      throw std::invalid_argument("Tensor: non-positive extent in shape " + shape.str());
    }
    if (data_.size() != shape.numel()) {
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape.str());
    }
  }

  static Tensor zeros(Shape s) { return Tensor(s, 0.0f); }
  static Tensor ones(Shape s) { return Tensor(s, 1.0f); }
  static Tensor scalar(float v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  template <class Rng>
  static Tensor normal(Shape s, Rng& rng, float mean = 0.0f, float stddev = 1.0f) {
    Tensor t(s);
    std::normal_distribution<float> dist(mean, stddev);
    for (auto& v : t.data_) v = dist(rng);
    return t;
  }

  template <class Rng>
  static Tensor uniform(Shape s, Rng& rng, float lo, float hi) {
    Tensor t(s);
    std::uniform_real_distribution<float> dist(lo, hi);
    for (auto& v : t.data_) v = dist(rng);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }
  const std::vector<float>& storage() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape s) const {
    if (s.numel() != numel()) {
      throw std::invalid_argument("reshape: cannot view " + shape_.str() + " as " + s.str());
    }
    return Tensor(s, data_);
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_{};
  std::vector<float> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace lmfn
