#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/autodiff.hpp"

namespace lmfn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Coupled L2: λ·param is added to the gradient before the moment updates.
  double weight_decay = 1e-4;
};

/// Piecewise-constant decay: base · factor^(−floor(iteration / step_size)).
struct StepSchedule {
  double base_lr = 1e-4;
  std::int64_t step_size = 500'000;
  double factor = 10.0;

  double operator()(std::int64_t iteration) const {
    if (iteration < 0) throw std::invalid_argument("lr_schedule: negative iteration");
    return base_lr / std::pow(factor, static_cast<double>(iteration / step_size));
  }
};

inline double lr_schedule(std::int64_t iteration) { return StepSchedule{}(iteration); }

/// Adam with bias correction over every parameter of a store.
class Adam {
 public:
  Adam(ParamStore& params, AdamConfig config = {}) : params_(&params), config_(config) {
    for (const auto& p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return t_; }

  /// Applies one update with learning rate `lr`. Rejects a step when no
  /// gradient has been produced since the previous one.
  void step(double lr) {
    bool any_fresh = false;
    for (const auto& p : *params_) any_fresh = any_fresh || p->grad_fresh;
    if (!any_fresh) throw std::logic_error("Adam::step: no gradients since the last step; run backward first");
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_->size(); ++k) {
      Parameter& p = (*params_)[k];
      auto w = p.value.data();
      auto g = p.grad.data();
      auto m = m_[k].data();
      auto v = v_[k].data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]) + config_.weight_decay * w[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon);
        w[i] = static_cast<float>(w[i] - update);
      }
      p.grad_fresh = false;
    }
  }

  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  /// Restores state saved from an optimizer over an identically shaped store.
  void restore(std::uint64_t step, std::vector<Tensor> m, std::vector<Tensor> v) {
    if (m.size() != m_.size() || v.size() != v_.size()) {
      throw std::invalid_argument("Adam::restore: moment count does not match parameters");
    }
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (m[k].shape() != m_[k].shape() || v[k].shape() != v_[k].shape()) {
        throw std::invalid_argument("Adam::restore: moment shape mismatch for " +
                                    (*params_)[k].name);
      }
    }
    t_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  ParamStore* params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

}  // namespace lmfn
