#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/blocks.hpp"
#include "lmfn/ops.hpp"

namespace lmfn {

/// Attention layer fusion.
///
/// The input holds the outputs of several blocks concatenated along channels,
/// (N, L·C, H, W). Per batch item the stack is viewed as an (L·C) × (H·W)
/// matrix F; every channel of every layer attends to every other through
/// M = softmax(F·Fᵀ), and the result θ·(M·F) + F is reshaped back. θ starts
/// at 0, so a freshly built ALFM is the identity.
struct Alfm {
  static constexpr BlockKind kind = BlockKind::Alfm;
  /// Default ceiling on attention-matrix entries, (L·C)², per batch item.
  static constexpr std::size_t kDefaultMaxAttentionEntries = std::size_t{1} << 24;

  Parameter* theta = nullptr;
  std::size_t max_attention_entries = kDefaultMaxAttentionEntries;

  static Alfm create(BlockBuilder& b, const std::string& path,
                     std::size_t max_entries = kDefaultMaxAttentionEntries) {
    return Alfm{&b.zeros(path + "/theta", Shape{1, 1, 1, 1}), max_entries};
  }

  void check_budget(int stacked_channels) const {
    const auto entries = static_cast<std::size_t>(stacked_channels) * stacked_channels;
    if (entries > max_attention_entries) {
      throw std::invalid_argument("alfm: attention matrix of " + std::to_string(entries) +
                                  " entries exceeds the budget of " +
                                  std::to_string(max_attention_entries));
    }
  }

  /// Returns M = softmax(F·Fᵀ) as (N, 1, L·C, L·C), recorded on the tape.
  Var attention(Var stack) const {
    const Shape s = stack.shape();
    check_budget(s.c);
    Var f = reshape(stack, Shape{s.n, 1, s.c, s.h * s.w});
    return softmax(matmul(f, f, /*transpose_b=*/true));
  }

  Var operator()(Tape& t, Var stack) const {
    const Shape s = stack.shape();
    check_budget(s.c);
    Var f = reshape(stack, Shape{s.n, 1, s.c, s.h * s.w});
    Var m = softmax(matmul(f, f, /*transpose_b=*/true));
    Var fused = add(scale(matmul(m, f), t.param(*theta)), f);
    return reshape(fused, s);
  }

  std::vector<Parameter*> params() const { return {theta}; }
  static constexpr std::size_t analytic_param_count() { return 1; }
};

/// Attention channel fusion with a pseudo-3D gate.
///
/// The feature map is treated as a depth-C volume with a single volume
/// channel. A 3x3 spatial kernel shared by every channel slice (the 1×3×3
/// factor) is followed by a length-3 kernel along the channel axis at every
/// pixel (the 3×1×1 factor), both zero-padded by one. The sigmoid of the
/// result gates x: out = x + α·(gate ⊙ x). α starts at 0.
struct Acfm {
  static constexpr BlockKind kind = BlockKind::Acfm;

  Parameter* spatial_weight = nullptr;  // (1,1,3,3)
  Parameter* spatial_bias = nullptr;    // (1,1,1,1)
  Parameter* channel_weight = nullptr;  // (1,1,3,1)
  Parameter* channel_bias = nullptr;    // (1,1,1,1)
  Parameter* alpha = nullptr;           // (1,1,1,1)

  static Acfm create(BlockBuilder& b, const std::string& path) {
    Acfm a;
    a.spatial_weight = &b.kaiming(path + "/spatial/weight", Shape{1, 1, 3, 3}, 9);
    a.spatial_bias = &b.zeros(path + "/spatial/bias", Shape{1, 1, 1, 1});
    a.channel_weight = &b.kaiming(path + "/channel/weight", Shape{1, 1, 3, 1}, 3);
    a.channel_bias = &b.zeros(path + "/channel/bias", Shape{1, 1, 1, 1});
    a.alpha = &b.zeros(path + "/alpha", Shape{1, 1, 1, 1});
    return a;
  }

  /// sigmoid(conv_channel(conv_spatial(x))), shaped like x.
  Var gate(Tape& t, Var x) const {
    const Shape s = x.shape();
    Var slices = reshape(x, Shape{s.n * s.c, 1, s.h, s.w});
    Var spatial = conv2d(slices, t.param(*spatial_weight), t.param(*spatial_bias),
                         ConvGeometry::uniform(1, 1));
    Var volume = reshape(spatial, Shape{s.n, 1, s.c, s.h * s.w});
    Var channel = conv2d(volume, t.param(*channel_weight), t.param(*channel_bias),
                         ConvGeometry{1, 1, 1, 0});
    return sigmoid(reshape(channel, s));
  }

  Var operator()(Tape& t, Var x) const {
    return add(x, scale(hadamard(gate(t, x), x), t.param(*alpha)));
  }

  std::vector<Parameter*> params() const {
    return {spatial_weight, spatial_bias, channel_weight, channel_bias, alpha};
  }
  static constexpr std::size_t analytic_param_count() { return 9 + 1 + 3 + 1 + 1; }
};

}  // namespace lmfn
