#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/attention.hpp"
#include "lmfn/blocks.hpp"
#include "lmfn/config.hpp"
#include "lmfn/ops.hpp"

namespace lmfn {

/// One row of the parameter breakdown.
struct BlockSummary {
  std::string name;
  std::string kind;
  std::vector<Parameter*> params;

  std::size_t param_count() const { return sum_numel(params); }
};

/// Parameter count computed from the config alone, without building tensors.
struct ParamCountBreakdown {
  std::size_t head = 0;
  std::size_t encoder = 0;
  std::size_t transition = 0;
  std::size_t decoder_blocks = 0;
  std::size_t per_decoder_block = 0;
  std::size_t attention = 0;
  std::size_t merge = 0;
  std::size_t tail = 0;

  std::size_t total() const {
    return head + encoder + transition + decoder_blocks + attention + merge + tail;
  }
};

/// Width of the decoder stream. Without distillation blocks there is no transition conv
/// and the decoder keeps the encoder width.
inline int decoder_channels(const ModelConfig& c) {
  return c.rfdb_enabled ? c.decoder_width : c.encoder_width;
}

inline ParamCountBreakdown analytic_param_count(const ModelConfig& c) {
  c.validate();
  ParamCountBreakdown b;
  const std::size_t ce = c.encoder_width;
  const std::size_t cd = decoder_channels(c);
  const std::size_t levels = c.fusion_levels();
  b.head = Conv::analytic_param_count(3, ce, 3);
  if (c.mshf_enabled) {
    const std::size_t scales = c.num_scales;
    b.encoder = scales * (DownBlock::analytic_param_count(ce, ce) + ResBlock::analytic_param_count(ce)) +
                (scales - levels) * UpsampleBlock::analytic_param_count(ce);
  } else {
    b.encoder = levels * (DownBlock::analytic_param_count(ce, ce) +
                          2 * ResBlock::analytic_param_count(ce));
  }
  if (c.rfdb_enabled) b.transition = Conv::analytic_param_count(ce, cd, 1);
  b.per_decoder_block =
      c.rfdb_enabled ? Rfdb::analytic_param_count(cd) : ResBlock::analytic_param_count(cd);
  b.decoder_blocks = static_cast<std::size_t>(c.num_rfdb) * b.per_decoder_block;
  if (c.attention_enabled) b.attention = Alfm::analytic_param_count() + Acfm::analytic_param_count();
  b.merge = Conv::analytic_param_count(static_cast<std::size_t>(c.num_rfdb) * cd, cd, 1);
  b.tail = levels * UpsampleBlock::analytic_param_count(cd) + Conv::analytic_param_count(cd, 3, 3);
  return b;
}

/// Lightweight multi-information fusion network.
///
/// Encoder: a 3x3 head conv, then per scale a downblock followed by a
/// resblock; the per-scale features are fused top-down by upsampling the
/// coarser result and adding it to the next finer one, down to the configured
/// output scale, and a 1x1 conv changes width for the decoder.
///
/// Decoder: a chain of RFDBs. All their outputs go through ALFM and a 1x1
/// merge conv; the last one also goes through ACFM; the two are summed,
/// upsampled back to full resolution and projected to RGB by a 3x3 conv.
class LmfnModel {
 public:
  /// Builds with Kaiming-initialized kernels, zero biases and θ = α = 0.
  static LmfnModel build(const ModelConfig& config, std::uint64_t seed = 0) {
    config.validate();
    return LmfnModel(config, seed);
  }

  LmfnModel(LmfnModel&&) = default;
  LmfnModel& operator=(LmfnModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return *store_; }
  const ParamStore& params() const { return *store_; }

  std::size_t total_param_count() const { return store_->total_numel(); }
  const std::vector<BlockSummary>& blocks() const { return blocks_; }

  const Alfm* alfm() const { return alfm_ ? &*alfm_ : nullptr; }
  const Acfm* acfm() const { return acfm_ ? &*acfm_ : nullptr; }

  void check_input(const Shape& s) const {
    if (s.c != 3) {
      throw std::invalid_argument("lmfn: expected a 3-channel image, got " + s.str());
    }
    const int m = config_.required_multiple();
    if (s.h % m != 0 || s.w % m != 0) {
      const int ph = (m - s.h % m) % m;
      const int pw = (m - s.w % m) % m;
      throw std::invalid_argument("lmfn: input " + std::to_string(s.h) + "x" +
                                  std::to_string(s.w) + " must be a multiple of " +
                                  std::to_string(m) + "; pad by " + std::to_string(ph) +
                                  " rows and " + std::to_string(pw) + " columns");
    }
  }

  /// Encoder output f_M_out at 1/fusion_output_scale resolution and decoder width.
  Var encode(Tape& t, Var image) const {
    check_input(image.shape());
    Var f = head_(t, image);
    Var fused;
    if (config_.mshf_enabled) {
      std::vector<Var> scales;
      for (int i = 0; i < config_.num_scales; ++i) {
        f = res_[i](t, down_[i](t, f));
        scales.push_back(f);
      }
      const int levels = config_.fusion_levels();
      fused = scales.back();
      for (int i = config_.num_scales - 2; i >= levels - 1; --i) {
        fused = add(scales[i], up_[i](t, fused));
      }
    } else {
      for (int i = 0; i < config_.fusion_levels(); ++i) {
        f = down_[i](t, f);
        f = res_[2 * i + 1](t, res_[2 * i](t, f));
      }
      fused = f;
    }
    return transition_ ? (*transition_)(t, fused) : fused;
  }

  /// Decoder feature before the upsampling tail: merge(ALFM(stack)) + ACFM(last).
  Var decode_feature(Tape& t, Var feature) const {
    if (feature.shape().c != decoder_channels(config_)) {
      throw std::invalid_argument("lmfn: decoder expects " +
                                  std::to_string(decoder_channels(config_)) +
                                  " channels, got " + feature.shape().str());
    }
    std::vector<Var> outs;
    Var d = feature;
    for (int k = 0; k < config_.num_rfdb; ++k) {
      d = config_.rfdb_enabled ? rfdb_[k](t, d) : body_res_[k](t, d);
      outs.push_back(d);
    }
    Var stack = concat_channels(outs);
    if (config_.attention_enabled) {
      Var a = merge_(t, (*alfm_)(t, stack));
      Var c = (*acfm_)(t, outs.back());
      return add(a, c);
    }
    return add(merge_(t, stack), outs.back());
  }

  Var decode(Tape& t, Var feature) const {
    Var x = decode_feature(t, feature);
    for (const auto& up : tail_up_) x = up(t, x);
    return tail_conv_(t, x);
  }

  Var forward(Tape& t, Var image) const {
    Var out = decode(t, encode(t, image));
    return config_.global_skip ? add(out, image) : out;
  }

  /// Mean squared error between forward(blurred) and sharp.
  Var loss(Tape& t, Var blurred, Var sharp) const {
    return mse_loss(forward(t, blurred), sharp);
  }

  /// Inference without keeping backward rules.
  Tensor predict(const Tensor& image) const {
    Tape t(/*grad_enabled=*/false);
    return forward(t, t.constant(image)).value();
  }

  /// Human-readable table: block, kind, parameter shapes, count.
  std::string summary_table() const {
    std::ostringstream os;
    os << std::left << std::setw(28) << "block" << std::setw(12) << "kind" << std::setw(44)
       << "shapes" << std::right << std::setw(12) << "params" << '\n';
    for (const auto& b : blocks_) {
      std::string shapes;
      for (const Parameter* p : b.params) {
        if (!shapes.empty()) shapes += ' ';
        const Shape s = p->value.shape();
        shapes += s.str();
      }
      if (shapes.size() > 42) shapes = shapes.substr(0, 39) + "...";
      os << std::left << std::setw(28) << b.name << std::setw(12) << b.kind << std::setw(44)
         << shapes << std::right << std::setw(12) << b.param_count() << '\n';
    }
    os << std::left << std::setw(84) << "total" << std::right << std::setw(12)
       << total_param_count() << '\n';
    return os.str();
  }

 private:
  LmfnModel(const ModelConfig& config, std::uint64_t seed)
      : config_(config), store_(std::make_unique<ParamStore>()) {
    BlockBuilder b(*store_, seed);
    const int ce = config.encoder_width;
    const int cd = decoder_channels(config);
    const int levels = config.fusion_levels();

    head_ = Conv::create(b, "head", 3, ce, 3);
    blocks_.push_back({"head", "conv", head_.params()});

    if (config.mshf_enabled) {
      for (int i = 0; i < config.num_scales; ++i) {
        const std::string s = std::to_string(i + 1);
        down_.push_back(DownBlock::create(b, "mshf/down" + s, ce, ce));
        blocks_.push_back({"mshf/down" + s, "downblock", down_.back().params()});
        res_.push_back(ResBlock::create(b, "mshf/res" + s, ce));
        blocks_.push_back({"mshf/res" + s, "resblock", res_.back().params()});
      }
      // up_[i] lifts the fused feature from scale i+2 to scale i+1.
      for (int i = 0; i + 1 < config.num_scales; ++i) {
        if (i < levels - 1) {
          up_.push_back(UpsampleBlock{});
          continue;
        }
        const std::string s = std::to_string(i + 1);
        up_.push_back(UpsampleBlock::create(b, "mshf/up" + s, ce));
        blocks_.push_back({"mshf/up" + s, "upsample", up_.back().params()});
      }
    } else {
      for (int i = 0; i < levels; ++i) {
        const std::string s = std::to_string(i + 1);
        down_.push_back(DownBlock::create(b, "plain/down" + s, ce, ce));
        blocks_.push_back({"plain/down" + s, "downblock", down_.back().params()});
        for (int r = 0; r < 2; ++r) {
          const std::string name = "plain/res" + s + "_" + std::to_string(r + 1);
          res_.push_back(ResBlock::create(b, name, ce));
          blocks_.push_back({name, "resblock", res_.back().params()});
        }
      }
    }

    if (config.rfdb_enabled) {
      transition_ = Conv::create(b, "transition", ce, cd, 1);
      blocks_.push_back({"transition", "conv", transition_->params()});
    }

    for (int k = 0; k < config.num_rfdb; ++k) {
      const std::string s = std::to_string(k + 1);
      if (config.rfdb_enabled) {
        rfdb_.push_back(Rfdb::create(b, "decoder/rfdb" + s, cd));
        blocks_.push_back({"decoder/rfdb" + s, "rfdb", rfdb_.back().params()});
      } else {
        body_res_.push_back(ResBlock::create(b, "decoder/res" + s, cd));
        blocks_.push_back({"decoder/res" + s, "resblock", body_res_.back().params()});
      }
    }

    if (config.attention_enabled) {
      alfm_ = Alfm::create(b, "decoder/alfm", config.alfm_max_entries);
      blocks_.push_back({"decoder/alfm", "alfm", alfm_->params()});
      acfm_ = Acfm::create(b, "decoder/acfm");
      blocks_.push_back({"decoder/acfm", "acfm", acfm_->params()});
    }
    merge_ = Conv::create(b, "decoder/merge", config.num_rfdb * cd, cd, 1);
    blocks_.push_back({"decoder/merge", "conv", merge_.params()});

    for (int j = 0; j < levels; ++j) {
      const std::string s = std::to_string(j + 1);
      tail_up_.push_back(UpsampleBlock::create(b, "tail/up" + s, cd));
      blocks_.push_back({"tail/up" + s, "upsample", tail_up_.back().params()});
    }
    tail_conv_ = Conv::create(b, "tail/conv", cd, 3, 3);
    blocks_.push_back({"tail/conv", "conv", tail_conv_.params()});
  }

  ModelConfig config_;
  std::unique_ptr<ParamStore> store_;
  std::vector<BlockSummary> blocks_;

  Conv head_;
  std::vector<DownBlock> down_;
  std::vector<ResBlock> res_;
  std::vector<UpsampleBlock> up_;
  std::optional<Conv> transition_;
  std::vector<Rfdb> rfdb_;
  std::vector<ResBlock> body_res_;
  std::optional<Alfm> alfm_;
  std::optional<Acfm> acfm_;
  Conv merge_;
  std::vector<UpsampleBlock> tail_up_;
  Conv tail_conv_;
};

/// Builds one of the ablation variants. At most one of the three switches may be off.
inline LmfnModel build_ablation(const ModelConfig& config, std::uint64_t seed = 0) {
  if (config.disabled_ablations() > 1) {
    throw std::invalid_argument(
        "build_ablation: at most one of mshf_enabled, rfdb_enabled, attention_enabled may be "
        "false");
  }
  return LmfnModel::build(config, seed);
}

}  // namespace lmfn
