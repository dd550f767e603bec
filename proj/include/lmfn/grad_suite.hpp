#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lmfn/attention.hpp"
#include "lmfn/blocks.hpp"
#include "lmfn/gradcheck.hpp"
#include "lmfn/model.hpp"
#include "lmfn/ops.hpp"
#include "lmfn/seed.hpp"

namespace lmfn {

struct SuiteCheck {
  std::string name;
  GradcheckReport report;
};

/// sum(y ⊙ r): a scalar whose gradient w.r.t. y is r.
inline Var weighted_sum(Var y, const Tensor& r) { return sum(hadamard(y, y.tape->constant(r))); }

namespace detail {

using Rng = std::mt19937_64;

inline Tensor randn(Shape s, Rng& rng, float stddev = 1.0f) {
  return Tensor::normal(s, rng, 0.0f, stddev);
}

/// Gradcheck of sum(op(inputs...) ⊙ r) w.r.t. every input, for ops without parameters.
inline GradcheckReport check_op(std::vector<Parameter>& inputs,
                                const std::function<Var(Tape&, std::vector<Var>&)>& op,
                                Rng& rng, const GradcheckOptions& opt) {
  Tensor r;
  auto loss = [&](Tape& t) {
    std::vector<Var> vs;
    for (auto& p : inputs) vs.push_back(t.param(p));
    Var y = op(t, vs);
    if (r.empty()) r = randn(y.shape(), rng);
    return weighted_sum(y, r);
  };
  std::vector<Parameter*> targets;
  for (auto& p : inputs) targets.push_back(&p);
  return gradcheck(loss, targets, opt);
}

/// Gradcheck of sum(block(x) ⊙ r) w.r.t. x and every block parameter.
template <class Block>
GradcheckReport check_block(const Block& block, ParamStore& store, Tensor x, Rng& rng,
                            const GradcheckOptions& opt) {
  Parameter input("input", std::move(x));
  Tensor r;
  auto loss = [&](Tape& t) {
    Var y = block(t, t.param(input));
    if (r.empty()) r = randn(y.shape(), rng);
    return weighted_sum(y, r);
  };
  std::vector<Parameter*> targets{&input};
  for (auto& p : store) targets.push_back(p.get());
  return gradcheck(loss, targets, opt);
}

}  // namespace detail

/// Small configuration used by the full-model gradient check (1×3×16×16 input).
inline ModelConfig gradcheck_model_config() {
  ModelConfig c;
  c.encoder_width = 8;
  c.decoder_width = 8;
  c.num_scales = 2;
  c.num_rfdb = 2;
  return c;
}

/// θ, α and the first kernel of each block kind present in `config`.
inline std::vector<std::string> model_gradcheck_targets(const ModelConfig& config) {
  std::vector<std::string> names{"head/weight"};
  if (config.mshf_enabled) {
    names.insert(names.end(), {"mshf/down1/conv/weight", "mshf/res1/conv1/weight"});
    if (config.num_scales > config.fusion_levels()) names.push_back("mshf/up1/conv/weight");
  } else {
    names.insert(names.end(), {"plain/down1/conv/weight", "plain/res1_1/conv1/weight"});
  }
  if (config.rfdb_enabled) {
    const std::string last = "decoder/rfdb" + std::to_string(config.num_rfdb);
    names.insert(names.end(), {"transition/weight", last + "/distill1/weight",
                               last + "/srb1/conv/weight", last + "/fuse/weight"});
  } else {
    names.push_back("decoder/res1/conv1/weight");
  }
  if (config.attention_enabled) {
    names.insert(names.end(), {"decoder/alfm/theta", "decoder/acfm/spatial/weight",
                               "decoder/acfm/channel/weight", "decoder/acfm/alpha"});
  }
  names.push_back("decoder/merge/weight");
  if (config.fusion_levels() > 0) names.push_back("tail/up1/conv/weight");
  names.push_back("tail/conv/weight");
  return names;
}

/// Finite-difference checks of every differentiable op, every block and the
/// full model at one seed.
inline std::vector<SuiteCheck> run_gradient_suite(std::uint64_t seed,
                                                  GradcheckOptions opt = GradcheckOptions{}) {
  using detail::randn;
  std::vector<SuiteCheck> out;
  std::uint64_t index = 0;
  auto next_rng = [&]() { return detail::Rng(sample_seed(seed, index++)); };
  auto run = [&](const std::string& name, auto&& fn) {
    detail::Rng rng = next_rng();
    opt.seed = sample_seed(seed, 1000 + index);
    out.push_back({name, fn(rng)});
  };
  const float kink_margin = 10.0f * opt.epsilon;

  auto unary = [&](Shape s, auto op, bool kinked) {
    return [=, &opt](detail::Rng& rng) {
      Tensor x = randn(s, rng);
      if (kinked) resample_away_from_kinks(x, kink_margin, rng);
      std::vector<Parameter> in{Parameter("x", std::move(x))};
      return detail::check_op(in, [&](Tape&, std::vector<Var>& v) { return op(v[0]); }, rng, opt);
    };
  };
  auto binary = [&](Shape a, Shape b, auto op) {
    return [=, &opt](detail::Rng& rng) {
      std::vector<Parameter> in{Parameter("a", randn(a, rng)), Parameter("b", randn(b, rng))};
      return detail::check_op(in, [&](Tape&, std::vector<Var>& v) { return op(v[0], v[1]); },
                              rng, opt);
    };
  };

  // Primitive ops.
  run("add", binary({2, 3, 4, 5}, {2, 3, 4, 5}, [](Var a, Var b) { return add(a, b); }));
  run("hadamard", binary({2, 3, 4, 5}, {2, 3, 4, 5}, [](Var a, Var b) { return hadamard(a, b); }));
  run("scale", binary({2, 3, 4, 5}, {1, 1, 1, 1}, [](Var a, Var s) { return scale(a, s); }));
  run("matmul", binary({1, 2, 3, 4}, {1, 2, 4, 5}, [](Var a, Var b) { return matmul(a, b); }));
  run("matmul_transposed",
      binary({1, 2, 3, 4}, {1, 2, 5, 4}, [](Var a, Var b) { return matmul(a, b, true); }));
  run("mse_loss", binary({2, 3, 4, 4}, {2, 3, 4, 4}, [](Var a, Var b) { return mse_loss(a, b); }));
  run("relu", unary({2, 3, 4, 5}, [](Var x) { return relu(x); }, true));
  run("leaky_relu", unary({2, 3, 4, 5}, [](Var x) { return leaky_relu(x, 0.1f); }, true));
  run("sigmoid", unary({2, 3, 4, 5}, [](Var x) { return sigmoid(x); }, false));
  run("softmax", unary({2, 1, 4, 6}, [](Var x) { return softmax(x); }, false));
  run("sum", unary({2, 3, 4, 5}, [](Var x) { return sum(x); }, false));
  run("reshape", unary({2, 3, 4, 5}, [](Var x) { return reshape(x, Shape{1, 6, 2, 10}); }, false));
  run("pixel_shuffle", unary({1, 8, 3, 3}, [](Var x) { return pixel_shuffle(x, 2); }, false));
  run("pixel_unshuffle", unary({1, 2, 4, 6}, [](Var x) { return pixel_unshuffle(x, 2); }, false));
  run("concat_channels", binary({2, 2, 3, 3}, {2, 3, 3, 3}, [](Var a, Var b) {
        return concat_channels({a, b});
      }));
  for (int stride : {1, 2}) {
    run("conv2d_stride" + std::to_string(stride), [&, stride](detail::Rng& rng) {
      std::vector<Parameter> in{Parameter("x", randn({2, 3, 8, 8}, rng)),
                                Parameter("weight", randn({4, 3, 3, 3}, rng, 0.3f)),
                                Parameter("bias", randn({4, 1, 1, 1}, rng))};
      return detail::check_op(
          in,
          [stride](Tape&, std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], stride, 1); },
          rng, opt);
    });
  }
  run("conv2d_pointwise", [&](detail::Rng& rng) {
    std::vector<Parameter> in{Parameter("x", randn({2, 4, 5, 5}, rng)),
                              Parameter("weight", randn({3, 4, 1, 1}, rng, 0.5f)),
                              Parameter("bias", randn({3, 1, 1, 1}, rng))};
    return detail::check_op(
        in, [](Tape&, std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 1, 0); }, rng, opt);
  });

  // Blocks.
  auto block_check = [&](const std::string& name, auto make, Shape in) {
    run(name, [&, make, in](detail::Rng& rng) {
      ParamStore store;
      BlockBuilder b(store, rng());
      auto block = make(b);
      return detail::check_block(block, store, randn(in, rng), rng, opt);
    });
  };
  block_check("resblock", [](BlockBuilder& b) { return ResBlock::create(b, "res", 4); },
              {1, 4, 6, 6});
  block_check("downblock", [](BlockBuilder& b) { return DownBlock::create(b, "down", 4, 6); },
              {1, 4, 6, 6});
  block_check("upsample", [](BlockBuilder& b) { return UpsampleBlock::create(b, "up", 4); },
              {1, 4, 3, 3});
  block_check("srb", [](BlockBuilder& b) { return Srb::create(b, "srb", 4); }, {1, 4, 6, 6});
  block_check("rfdb", [](BlockBuilder& b) { return Rfdb::create(b, "rfdb", 8); }, {1, 8, 6, 6});
  block_check("alfm",
              [](BlockBuilder& b) {
                Alfm a = Alfm::create(b, "alfm");
                a.theta->value[0] = 0.5f;
                return a;
              },
              {2, 3 * 4, 5, 5});
  block_check("acfm",
              [](BlockBuilder& b) {
                Acfm a = Acfm::create(b, "acfm");
                a.alpha->value[0] = 1.0f;
                return a;
              },
              {2, 6, 5, 5});

  // Full model, mse loss against a random target. Probes θ, α, the input and
  // one kernel per block type. θ stays small: a saturated softmax inside ALFM
  // bends the loss too sharply for a float32 difference at this ε.
  run("lmfn_model", [&](detail::Rng& rng) {
    LmfnModel model = LmfnModel::build(gradcheck_model_config(), rng());
    ParamStore& ps = model.params();
    ps.find("decoder/alfm/theta")->value[0] = 0.1f;
    ps.find("decoder/acfm/alpha")->value[0] = 1.0f;
    Parameter input("input", Tensor::uniform({1, 3, 16, 16}, rng, 0.0f, 1.0f));
    const Tensor target = Tensor::uniform({1, 3, 16, 16}, rng, 0.0f, 1.0f);
    auto loss = [&](Tape& t) { return model.loss(t, t.param(input), t.constant(target)); };
    std::vector<Parameter*> targets{&input};
    for (const std::string& name : model_gradcheck_targets(model.config())) {
      targets.push_back(ps.find(name));
    }
    GradcheckOptions mopt = opt;
    mopt.epsilon = 3.0f * opt.epsilon;
    mopt.max_samples = 64;
    return gradcheck(loss, targets, mopt);
  });
  return out;
}

}  // namespace lmfn
