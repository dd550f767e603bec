#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/autodiff.hpp"
#include "lmfn/tensor.hpp"

namespace lmfn {

namespace detail {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline Tape& tape_of(std::initializer_list<Var> vars, const char* op) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (v.tape == nullptr) throw std::logic_error(std::string(op) + ": unbound input");
    if (t != nullptr && t != v.tape) {
      throw std::logic_error(std::string(op) + ": inputs recorded on different tapes");
    }
    t = v.tape;
  }
  return *t;
}

inline bool any_grad(std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(), [](const Var& v) { return v.requires_grad(); });
}

inline void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution

/// Stride and zero-padding per spatial axis.
struct ConvGeometry {
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;

  static ConvGeometry uniform(int stride, int padding) {
    return ConvGeometry{stride, stride, padding, padding};
  }
};

inline Shape conv2d_output_shape(const Shape& x, const Shape& w, const ConvGeometry& g) {
  if (w.c != x.c) {
    throw std::invalid_argument("conv2d: input " + x.str() + " has " + std::to_string(x.c) +
                                " channels but weight " + w.str() + " expects " +
                                std::to_string(w.c));
  }
  if (g.stride_h < 1 || g.stride_w < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (g.pad_h < 0 || g.pad_w < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  const int ho = (x.h + 2 * g.pad_h - w.h) / g.stride_h + 1;
  const int wo = (x.w + 2 * g.pad_w - w.w) / g.stride_w + 1;
  if (x.h + 2 * g.pad_h < w.h || x.w + 2 * g.pad_w < w.w || ho < 1 || wo < 1) {
    throw std::invalid_argument("conv2d: kernel " + w.str() + " larger than padded input " +
                                x.str());
  }
  return Shape{x.n, w.n, ho, wo};
}

namespace detail {

/// Unfolds one batch item into a (C·kh·kw) × (ho·wo) row-major matrix.
inline void im2col(const float* x, int c, int h, int w, int kh, int kw, const ConvGeometry& g,
                   int ho, int wo, float* col) {
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    const float* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        float* row = col + ((static_cast<std::size_t>(ci) * kh + i) * kw + j) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride_h - g.pad_h + i;
          float* out = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride_w - g.pad_w + j;
            out[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

inline void col2im(const float* col, int c, int h, int w, int kh, int kw, const ConvGeometry& g,
                   int ho, int wo, float* x) {
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    float* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const float* row = col + ((static_cast<std::size_t>(ci) * kh + i) * kw + j) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride_h - g.pad_h + i;
          if (iy < 0 || iy >= h) continue;
          const float* in = row + static_cast<std::size_t>(oy) * wo;
          float* dst = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride_w - g.pad_w + j;
            if (ix >= 0 && ix < w) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

inline bool is_pointwise(const Shape& w, const ConvGeometry& g) {
  return w.h == 1 && w.w == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 &&
         g.pad_w == 0;
}

}  // namespace detail

/// Cross-correlation of x (N,Cin,H,W) with weight (Cout,Cin,kh,kw) plus bias (Cout,1,1,1).
inline Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                             const ConvGeometry& g) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape ys = conv2d_output_shape(xs, ws, g);
  if (bias.numel() != static_cast<std::size_t>(ws.n)) {
    throw std::invalid_argument("conv2d: bias " + bias.shape().str() + " does not match " +
                                std::to_string(ws.n) + " output channels");
  }
  const int k = ws.c * ws.h * ws.w;
  const std::size_t p = ys.plane();
  Tensor y(ys);
  detail::ConstMatMap wm(weight.data().data(), ws.n, k);
  std::vector<float> col;
  const bool pointwise = detail::is_pointwise(ws, g);
  if (!pointwise) col.resize(static_cast<std::size_t>(k) * p);
  for (int n = 0; n < xs.n; ++n) {
    const float* xn = x.data().data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
    const float* src = xn;
    if (!pointwise) {
      detail::im2col(xn, xs.c, xs.h, xs.w, ws.h, ws.w, g, ys.h, ys.w, col.data());
      src = col.data();
    }
    detail::ConstMatMap cm(src, k, static_cast<Eigen::Index>(p));
    detail::MatMap ym(y.data().data() + static_cast<std::size_t>(n) * ys.c * p, ys.c,
                      static_cast<Eigen::Index>(p));
    ym.noalias() = wm * cm;
    for (int co = 0; co < ys.c; ++co) ym.row(co).array() += bias[co];
  }
  return y;
}

inline Var conv2d(Var x, Var weight, Var bias, const ConvGeometry& g) {
  Tape& t = detail::tape_of({x, weight, bias}, "conv2d");
  Tensor y = conv2d_forward(x.value(), weight.value(), bias.value(), g);
  const bool rg = detail::any_grad({x, weight, bias});
  return t.record(std::move(y), rg, [x, weight, bias, g](Tape& t, const Tensor& gy) {
    const Tensor& xv = t.value(x.id);
    const Tensor& wv = t.value(weight.id);
    const Shape xs = xv.shape();
    const Shape ws = wv.shape();
    const Shape ys = gy.shape();
    const int k = ws.c * ws.h * ws.w;
    const std::size_t p = ys.plane();
    const bool pointwise = detail::is_pointwise(ws, g);
    std::vector<float> col(pointwise ? 0 : static_cast<std::size_t>(k) * p);
    std::vector<float> dcol(static_cast<std::size_t>(k) * p);
    detail::ConstMatMap wm(wv.data().data(), ws.n, k);
    for (int n = 0; n < xs.n; ++n) {
      detail::ConstMatMap gm(gy.data().data() + static_cast<std::size_t>(n) * ys.c * p, ys.c,
                             static_cast<Eigen::Index>(p));
      const float* xn = xv.data().data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
      if (weight.requires_grad()) {
        const float* src = xn;
        if (!pointwise) {
          detail::im2col(xn, xs.c, xs.h, xs.w, ws.h, ws.w, g, ys.h, ys.w, col.data());
          src = col.data();
        }
        detail::ConstMatMap cm(src, k, static_cast<Eigen::Index>(p));
        detail::MatMap dw(t.grad(weight.id).data().data(), ws.n, k);
        dw.noalias() += gm * cm.transpose();
      }
      if (bias.requires_grad()) {
        Tensor& db = t.grad(bias.id);
        for (int co = 0; co < ys.c; ++co) db[co] += gm.row(co).sum();
      }
      if (x.requires_grad()) {
        float* dxn = t.grad(x.id).data().data() + static_cast<std::size_t>(n) * xs.c * xs.plane();
        if (pointwise) {
          detail::MatMap dx(dxn, xs.c, static_cast<Eigen::Index>(p));
          dx.noalias() += wm.transpose() * gm;
        } else {
          detail::MatMap dc(dcol.data(), k, static_cast<Eigen::Index>(p));
          dc.noalias() = wm.transpose() * gm;
          detail::col2im(dcol.data(), xs.c, xs.h, xs.w, ws.h, ws.w, g, ys.h, ys.w, dxn);
        }
      }
    }
  });
}

inline Var conv2d(Var x, Var weight, Var bias, int stride, int padding) {
  return conv2d(x, weight, bias, ConvGeometry::uniform(stride, padding));
}

// ---------------------------------------------------------------------------
// Layout ops

inline Tensor pixel_shuffle_forward(const Tensor& x, int r) {
  const Shape s = x.shape();
  if (r < 1) throw std::invalid_argument("pixel_shuffle: factor must be >= 1");
  if (s.c % (r * r) != 0) {
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(s.c) +
                                " not divisible by r^2 = " + std::to_string(r * r));
  }
  const int oc = s.c / (r * r);
  Tensor y(Shape{s.n, oc, s.h * r, s.w * r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < oc; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
              y.at(n, c, h * r + i, w * r + j) = x.at(n, (c * r + i) * r + j, h, w);
  return y;
}

inline Tensor pixel_unshuffle_forward(const Tensor& x, int r) {
  const Shape s = x.shape();
  if (r < 1) throw std::invalid_argument("pixel_unshuffle: factor must be >= 1");
  if (s.h % r != 0 || s.w % r != 0) {
    throw std::invalid_argument("pixel_unshuffle: spatial dims of " + s.str() +
                                " not divisible by " + std::to_string(r));
  }
  Tensor y(Shape{s.n, s.c * r * r, s.h / r, s.w / r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int h = 0; h < s.h / r; ++h)
            for (int w = 0; w < s.w / r; ++w)
              y.at(n, (c * r + i) * r + j, h, w) = x.at(n, c, h * r + i, w * r + j);
  return y;
}

/// (N, C·r², H, W) -> (N, C, H·r, W·r).
inline Var pixel_shuffle(Var x, int r) {
  Tape& t = detail::tape_of({x}, "pixel_shuffle");
  return t.record(pixel_shuffle_forward(x.value(), r), x.requires_grad(),
                  [x, r](Tape& t, const Tensor& gy) {
                    detail::accumulate(t.grad(x.id), pixel_unshuffle_forward(gy, r));
                  });
}

inline Var pixel_unshuffle(Var x, int r) {
  Tape& t = detail::tape_of({x}, "pixel_unshuffle");
  return t.record(pixel_unshuffle_forward(x.value(), r), x.requires_grad(),
                  [x, r](Tape& t, const Tensor& gy) {
                    detail::accumulate(t.grad(x.id), pixel_shuffle_forward(gy, r));
                  });
}

inline Var reshape(Var x, Shape s) {
  Tape& t = detail::tape_of({x}, "reshape");
  return t.record(x.value().reshaped(s), x.requires_grad(), [x](Tape& t, const Tensor& gy) {
    auto d = t.grad(x.id).data();
    auto g = gy.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

/// Concatenates along the channel axis; all inputs share N, H, W.
inline Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Tape& t = *xs.front().tape;
  const Shape s0 = xs.front().shape();
  int total_c = 0;
  bool rg = false;
  for (const Var& v : xs) {
    if (v.tape != &t) throw std::logic_error("concat_channels: inputs on different tapes");
    const Shape s = v.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw std::invalid_argument("concat_channels: shape mismatch " + s0.str() + " vs " +
                                  s.str());
    }
    total_c += s.c;
    rg = rg || v.requires_grad();
  }
  Tensor y(Shape{s0.n, total_c, s0.h, s0.w});
  const std::size_t plane = s0.plane();
  for (int n = 0; n < s0.n; ++n) {
    float* dst = y.data().data() + static_cast<std::size_t>(n) * total_c * plane;
    for (const Var& v : xs) {
      const std::size_t chunk = static_cast<std::size_t>(v.shape().c) * plane;
      const float* src = v.value().data().data() + static_cast<std::size_t>(n) * chunk;
      dst = std::copy(src, src + chunk, dst);
    }
  }
  return t.record(std::move(y), rg, [xs, total_c, plane](Tape& t, const Tensor& gy) {
    const int batch = gy.shape().n;
    std::size_t c_off = 0;
    for (const Var& v : xs) {
      const std::size_t chunk = static_cast<std::size_t>(t.value(v.id).shape().c) * plane;
      if (v.requires_grad()) {
        Tensor& gv = t.grad(v.id);
        for (int n = 0; n < batch; ++n) {
          const float* src =
              gy.data().data() + static_cast<std::size_t>(n) * total_c * plane + c_off;
          float* dst = gv.data().data() + static_cast<std::size_t>(n) * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      c_off += chunk;
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix ops on (N, C, rows, cols) batches

/// Row-wise softmax over the last axis, with max subtraction.
inline Tensor softmax_forward(const Tensor& x) {
  const Shape s = x.shape();
  Tensor y(s);
  const std::size_t rows = x.numel() / s.w;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x.data().data() + r * s.w;
    float* out = y.data().data() + r * s.w;
    const float mx = *std::max_element(in, in + s.w);
    double sum = 0.0;
    for (int i = 0; i < s.w; ++i) {
      out[i] = std::exp(in[i] - mx);
      sum += out[i];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int i = 0; i < s.w; ++i) out[i] *= inv;
  }
  return y;
}

inline Var softmax(Var x) {
  Tape& t = detail::tape_of({x}, "softmax");
  Tensor y = softmax_forward(x.value());
  Tensor y_copy = y;
  return t.record(std::move(y), x.requires_grad(),
                  [x, y = std::move(y_copy)](Tape& t, const Tensor& gy) {
                    const int w = y.shape().w;
                    const std::size_t rows = y.numel() / w;
                    Tensor& gx = t.grad(x.id);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const float* yr = y.data().data() + r * w;
                      const float* gr = gy.data().data() + r * w;
                      float* dr = gx.data().data() + r * w;
                      double dot = 0.0;
                      for (int i = 0; i < w; ++i) dot += static_cast<double>(gr[i]) * yr[i];
                      const float d = static_cast<float>(dot);
                      for (int i = 0; i < w; ++i) dr[i] += yr[i] * (gr[i] - d);
                    }
                  });
}

/// Batched product over (N,C): a is (rows × inner); b is (inner × cols), or
/// (cols × inner) when transpose_b is set.
inline Var matmul(Var a, Var b, bool transpose_b = false) {
  Tape& t = detail::tape_of({a, b}, "matmul");
  const Shape as = a.shape();
  const Shape bs = b.shape();
  const int inner_b = transpose_b ? bs.w : bs.h;
  if (as.n != bs.n || as.c != bs.c || as.w != inner_b) {
    throw std::invalid_argument("matmul: incompatible operands " + as.str() + " and " +
                                bs.str() + (transpose_b ? " (transposed)" : ""));
  }
  const int rows = as.h;
  const int inner = as.w;
  const int cols = transpose_b ? bs.h : bs.w;
  Tensor y(Shape{as.n, as.c, rows, cols});
  const int batches = as.n * as.c;
  for (int bi = 0; bi < batches; ++bi) {
    detail::ConstMatMap am(a.value().data().data() + static_cast<std::size_t>(bi) * rows * inner,
                           rows, inner);
    detail::MatMap ym(y.data().data() + static_cast<std::size_t>(bi) * rows * cols, rows, cols);
    const float* bp = b.value().data().data() + static_cast<std::size_t>(bi) * inner * cols;
    if (transpose_b) {
      ym.noalias() = am * detail::ConstMatMap(bp, cols, inner).transpose();
    } else {
      ym.noalias() = am * detail::ConstMatMap(bp, inner, cols);
    }
  }
  const bool rg = detail::any_grad({a, b});
  return t.record(std::move(y), rg,
                  [a, b, transpose_b, rows, inner, cols, batches](Tape& t, const Tensor& gy) {
                    const float* ap = t.value(a.id).data().data();
                    const float* bp = t.value(b.id).data().data();
                    for (int bi = 0; bi < batches; ++bi) {
                      const std::size_t ao = static_cast<std::size_t>(bi) * rows * inner;
                      const std::size_t bo = static_cast<std::size_t>(bi) * inner * cols;
                      detail::ConstMatMap gm(gy.data().data() +
                                                 static_cast<std::size_t>(bi) * rows * cols,
                                             rows, cols);
                      detail::ConstMatMap am(ap + ao, rows, inner);
                      if (transpose_b) {
                        detail::ConstMatMap bm(bp + bo, cols, inner);
                        if (a.requires_grad()) {
                          detail::MatMap ga(t.grad(a.id).data().data() + ao, rows, inner);
                          ga.noalias() += gm * bm;
                        }
                        if (b.requires_grad()) {
                          detail::MatMap gb(t.grad(b.id).data().data() + bo, cols, inner);
                          gb.noalias() += gm.transpose() * am;
                        }
                      } else {
                        detail::ConstMatMap bm(bp + bo, inner, cols);
                        if (a.requires_grad()) {
                          detail::MatMap ga(t.grad(a.id).data().data() + ao, rows, inner);
                          ga.noalias() += gm * bm.transpose();
                        }
                        if (b.requires_grad()) {
                          detail::MatMap gb(t.grad(b.id).data().data() + bo, inner, cols);
                          gb.noalias() += am.transpose() * gm;
                        }
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// Elementwise ops

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of({a, b}, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  detail::accumulate(y, b.value());
  return t.record(std::move(y), detail::any_grad({a, b}), [a, b](Tape& t, const Tensor& gy) {
    if (a.requires_grad()) detail::accumulate(t.grad(a.id), gy);
    if (b.requires_grad()) detail::accumulate(t.grad(b.id), gy);
  });
}

/// Elementwise product.
inline Var hadamard(Var a, Var b) {
  Tape& t = detail::tape_of({a, b}, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor y = a.value();
  {
    auto yd = y.data();
    auto bd = b.value().data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] *= bd[i];
  }
  return t.record(std::move(y), detail::any_grad({a, b}), [a, b](Tape& t, const Tensor& gy) {
    const auto av = t.value(a.id).data();
    const auto bv = t.value(b.id).data();
    const auto g = gy.data();
    if (a.requires_grad()) {
      auto ga = t.grad(a.id).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto gb = t.grad(b.id).data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

inline Var leaky_relu(Var x, float slope) {
  Tape& t = detail::tape_of({x}, "leaky_relu");
  t.note_branches(x.value().data());
  Tensor y = x.value();
  for (float& v : y.data()) v = v > 0.0f ? v : v * slope;
  return t.record(std::move(y), x.requires_grad(), [x, slope](Tape& t, const Tensor& gy) {
    const auto xv = t.value(x.id).data();
    const auto g = gy.data();
    auto gx = t.grad(x.id).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0f ? g[i] : g[i] * slope;
  });
}

inline Var relu(Var x) { return leaky_relu(x, 0.0f); }

inline float sigmoid_scalar(float v) {
  if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
  const float e = std::exp(v);
  return e / (1.0f + e);
}

inline Var sigmoid(Var x) {
  Tape& t = detail::tape_of({x}, "sigmoid");
  Tensor y = x.value();
  for (float& v : y.data()) v = sigmoid_scalar(v);
  Tensor y_copy = y;
  return t.record(std::move(y), x.requires_grad(),
                  [x, y = std::move(y_copy)](Tape& t, const Tensor& gy) {
                    const auto yv = y.data();
                    const auto g = gy.data();
                    auto gx = t.grad(x.id).data();
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gx[i] += g[i] * yv[i] * (1.0f - yv[i]);
                    }
                  });
}

/// s·x for a scalar s of shape (1,1,1,1), typically a trainable parameter.
inline Var scale(Var x, Var s) {
  Tape& t = detail::tape_of({x, s}, "scale");
  if (s.value().numel() != 1) {
    throw std::invalid_argument("scale: factor must be a scalar, got " + s.shape().str());
  }
  const float k = s.value()[0];
  Tensor y = x.value();
  for (float& v : y.data()) v *= k;
  return t.record(std::move(y), detail::any_grad({x, s}), [x, s](Tape& t, const Tensor& gy) {
    const float k = t.value(s.id)[0];
    const auto g = gy.data();
    if (x.requires_grad()) {
      auto gx = t.grad(x.id).data();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += k * g[i];
    }
    if (s.requires_grad()) {
      const auto xv = t.value(x.id).data();
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += static_cast<double>(g[i]) * xv[i];
      t.grad(s.id)[0] += static_cast<float>(acc);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

/// Sum of all elements; the tape also keeps the double-precision total.
inline Var sum(Var x) {
  Tape& t = detail::tape_of({x}, "sum");
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  Var out = t.record(Tensor::scalar(static_cast<float>(acc)), x.requires_grad(),
                     [x](Tape& t, const Tensor& gy) {
                       const float g = gy[0];
                       for (float& v : t.grad(x.id).data()) v += g;
                     });
  t.set_precise_scalar(out, acc);
  return out;
}

/// Mean squared error over every element (batch, channel and pixel).
inline Var mse_loss(Var pred, Var target) {
  Tape& t = detail::tape_of({pred, target}, "mse_loss");
  require_same_shape(pred.value(), target.value(), "mse_loss");
  const auto p = pred.value().data();
  const auto q = target.value().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - q[i];
    acc += d * d;
  }
  const double mean = acc / static_cast<double>(p.size());
  Var out = t.record(Tensor::scalar(static_cast<float>(mean)), detail::any_grad({pred, target}),
                     [pred, target](Tape& t, const Tensor& gy) {
                       const auto p = t.value(pred.id).data();
                       const auto q = t.value(target.id).data();
                       const float k = 2.0f * gy[0] / static_cast<float>(p.size());
                       if (pred.requires_grad()) {
                         auto g = t.grad(pred.id).data();
                         for (std::size_t i = 0; i < p.size(); ++i) g[i] += k * (p[i] - q[i]);
                       }
                       if (target.requires_grad()) {
                         auto g = t.grad(target.id).data();
                         for (std::size_t i = 0; i < p.size(); ++i) g[i] -= k * (p[i] - q[i]);
                       }
                     });
  t.set_precise_scalar(out, mean);
  return out;
}

}  // namespace lmfn
