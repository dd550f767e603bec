#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/autodiff.hpp"
#include "lmfn/ops.hpp"

namespace lmfn {

/// Creates parameters in a store with Kaiming fan-in initialization.
class BlockBuilder {
 public:
  BlockBuilder(ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Parameter& kaiming(const std::string& path, Shape shape, int fan_in) {
    const float stddev = std::sqrt(1.0f / static_cast<float>(fan_in));
    return store_.add(path, Tensor::normal(shape, rng_, 0.0f, stddev));
  }
  Parameter& zeros(const std::string& path, Shape shape) {
    return store_.add(path, Tensor::zeros(shape));
  }

  ParamStore& store() { return store_; }

 private:
  ParamStore& store_;
  std::mt19937_64 rng_;
};

enum class BlockKind { Conv, ResBlock, DownBlock, UpsampleBlock, Srb, Rfdb, Alfm, Acfm };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Conv: return "conv";
    case BlockKind::ResBlock: return "resblock";
    case BlockKind::DownBlock: return "downblock";
    case BlockKind::UpsampleBlock: return "upsample";
    case BlockKind::Srb: return "srb";
    case BlockKind::Rfdb: return "rfdb";
    case BlockKind::Alfm: return "alfm";
    case BlockKind::Acfm: return "acfm";
  }
  return "?";
}

inline std::size_t sum_numel(const std::vector<Parameter*>& ps) {
  std::size_t n = 0;
  for (const Parameter* p : ps) n += p->numel();
  return n;
}

inline void require_width(const Var& x, int width, const char* block) {
  if (x.shape().c != width) {
    throw std::invalid_argument(std::string(block) + ": input " + x.shape().str() + " has " +
                                std::to_string(x.shape().c) + " channels, block width is " +
                                std::to_string(width));
  }
}

/// Convolution with bias; weight (out, in, k, k), bias (out, 1, 1, 1).
struct Conv {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  ConvGeometry geometry{};

  static Conv create(BlockBuilder& b, const std::string& path, int cin, int cout, int k,
                     int stride = 1, int pad = -1) {
    Conv c;
    c.in_channels = cin;
    c.out_channels = cout;
    c.kernel = k;
    c.geometry = ConvGeometry::uniform(stride, pad < 0 ? k / 2 : pad);
    c.weight = &b.kaiming(path + "/weight", Shape{cout, cin, k, k}, cin * k * k);
    c.bias = &b.zeros(path + "/bias", Shape{cout, 1, 1, 1});
    return c;
  }

  Var operator()(Tape& t, Var x) const {
    return conv2d(x, t.param(*weight), t.param(*bias), geometry);
  }

  std::vector<Parameter*> params() const { return {weight, bias}; }

  static constexpr std::size_t analytic_param_count(std::size_t cin, std::size_t cout,
                                                    std::size_t k) {
    return cin * cout * k * k + cout;
  }
};

inline void append(std::vector<Parameter*>& dst, const std::vector<Parameter*>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

/// x + conv3x3(relu(conv3x3(x))), no normalization.
struct ResBlock {
  static constexpr BlockKind kind = BlockKind::ResBlock;
  int width = 0;
  Conv conv1, conv2;

  static ResBlock create(BlockBuilder& b, const std::string& path, int c) {
    return ResBlock{c, Conv::create(b, path + "/conv1", c, c, 3),
                    Conv::create(b, path + "/conv2", c, c, 3)};
  }

  Var operator()(Tape& t, Var x) const {
    require_width(x, width, "resblock");
    return add(x, conv2(t, relu(conv1(t, x))));
  }

  std::vector<Parameter*> params() const {
    auto ps = conv1.params();
    append(ps, conv2.params());
    return ps;
  }

  static constexpr std::size_t analytic_param_count(std::size_t c) {
    return 2 * Conv::analytic_param_count(c, c, 3);
  }
};

/// Stride-2 3x3 convolution followed by leaky_relu(0.1); halves H and W.
struct DownBlock {
  static constexpr BlockKind kind = BlockKind::DownBlock;
  static constexpr float kSlope = 0.1f;
  int in_width = 0;
  int out_width = 0;
  Conv conv;

  static DownBlock create(BlockBuilder& b, const std::string& path, int cin, int cout) {
    return DownBlock{cin, cout, Conv::create(b, path + "/conv", cin, cout, 3, 2, 1)};
  }

  Var operator()(Tape& t, Var x) const {
    require_width(x, in_width, "downblock");
    const Shape s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0) {
      throw std::invalid_argument("downblock: spatial size " + std::to_string(s.h) + "x" +
                                  std::to_string(s.w) +
                                  " is odd; pad the input to an even size first");
    }
    return leaky_relu(conv(t, x), kSlope);
  }

  std::vector<Parameter*> params() const { return conv.params(); }

  static constexpr std::size_t analytic_param_count(std::size_t cin, std::size_t cout) {
    return Conv::analytic_param_count(cin, cout, 3);
  }
};

/// conv3x3 to 4C channels then pixel_shuffle(2); doubles H and W.
struct UpsampleBlock {
  static constexpr BlockKind kind = BlockKind::UpsampleBlock;
  int width = 0;
  Conv conv;

  static UpsampleBlock create(BlockBuilder& b, const std::string& path, int c) {
    return UpsampleBlock{c, Conv::create(b, path + "/conv", c, 4 * c, 3)};
  }

  Var operator()(Tape& t, Var x) const {
    require_width(x, width, "upsample");
    return pixel_shuffle(conv(t, x), 2);
  }

  std::vector<Parameter*> params() const { return conv.params(); }

  static constexpr std::size_t analytic_param_count(std::size_t c) {
    return Conv::analytic_param_count(c, 4 * c, 3);
  }
};

/// Shallow residual block: leaky_relu(x + conv3x3(x), 0.05).
struct Srb {
  static constexpr BlockKind kind = BlockKind::Srb;
  static constexpr float kSlope = 0.05f;
  int width = 0;
  Conv conv;

  static Srb create(BlockBuilder& b, const std::string& path, int c) {
    return Srb{c, Conv::create(b, path + "/conv", c, c, 3)};
  }

  Var operator()(Tape& t, Var x) const {
    require_width(x, width, "srb");
    return leaky_relu(add(x, conv(t, x)), kSlope);
  }

  std::vector<Parameter*> params() const { return conv.params(); }

  static constexpr std::size_t analytic_param_count(std::size_t c) {
    return Conv::analytic_param_count(c, c, 3);
  }
};

/// Residual feature distillation block at distillation rate 1/2.
///
/// Each of three stages splits the running feature two ways: a 1x1 conv keeps
/// C/2 distilled channels, and an SRB refines the full-width feature for the
/// next stage. A final 1x1 conv distills the last refined feature. The four
/// distilled branches (2C channels) are fused by a 1x1 conv back to C and the
/// block input is added.
struct Rfdb {
  static constexpr BlockKind kind = BlockKind::Rfdb;
  static constexpr int kStages = 3;
  static constexpr float kSlope = 0.05f;
  int width = 0;
  std::vector<Conv> distill;  // kStages + 1 entries, the last applied after the final SRB
  std::vector<Srb> refine;    // kStages entries
  Conv fuse;

  static Rfdb create(BlockBuilder& b, const std::string& path, int c) {
    if (c < 2 || c % 2 != 0) {
      throw std::invalid_argument("rfdb: width must be even, got " + std::to_string(c));
    }
    Rfdb r;
    r.width = c;
    const int dc = c / 2;
    for (int k = 0; k < kStages; ++k) {
      r.distill.push_back(Conv::create(b, path + "/distill" + std::to_string(k + 1), c, dc, 1));
      r.refine.push_back(Srb::create(b, path + "/srb" + std::to_string(k + 1), c));
    }
    r.distill.push_back(Conv::create(b, path + "/distill4", c, dc, 1));
    r.fuse = Conv::create(b, path + "/fuse", 2 * c, c, 1);
    return r;
  }

  Var operator()(Tape& t, Var x) const {
    require_width(x, width, "rfdb");
    std::vector<Var> kept;
    Var running = x;
    for (int k = 0; k < kStages; ++k) {
      kept.push_back(leaky_relu(distill[k](t, running), kSlope));
      running = refine[k](t, running);
    }
    kept.push_back(leaky_relu(distill[kStages](t, running), kSlope));
    return add(fuse(t, concat_channels(kept)), x);
  }

  std::vector<Parameter*> params() const {
    std::vector<Parameter*> ps;
    for (int k = 0; k < kStages; ++k) {
      append(ps, distill[k].params());
      append(ps, refine[k].params());
    }
    append(ps, distill[kStages].params());
    append(ps, fuse.params());
    return ps;
  }

  static constexpr std::size_t analytic_param_count(std::size_t c) {
    const std::size_t dc = c / 2;
    return kStages * Srb::analytic_param_count(c) +
           (kStages + 1) * Conv::analytic_param_count(c, dc, 1) +
           Conv::analytic_param_count(2 * c, c, 1);
  }
};

}  // namespace lmfn
