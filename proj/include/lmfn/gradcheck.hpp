#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lmfn/autodiff.hpp"
#include "lmfn/tensor.hpp"

namespace lmfn {

struct GradcheckOptions {
  float epsilon = 1e-3f;
  double tolerance = 1e-2;
  /// Coordinates probed per tensor; tensors at or below this size are probed fully.
  std::size_t max_samples = 24;
  /// Gradient norms below this are treated as this value when forming the ratio.
  double min_scale = 1e-6;
  std::uint64_t seed = 0;
  /// A probe whose perturbation flips a piecewise-linear branch is retried
  /// with epsilon halved, up to this many times, then skipped.
  int max_halvings = 3;
};

struct GradcheckEntry {
  std::string name;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||, min_scale) over probed coordinates.
  double relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t probed = 0;
  /// Probes dropped because every tried epsilon straddled a branch boundary.
  std::size_t skipped = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;

  double max_relative_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.relative_error);
    return m;
  }
  bool passed() const { return max_relative_error() < tolerance; }
};

/// Compares gradients from Tape::backward with central differences of the
/// scalar returned by `loss_fn`. Each target is a Parameter that `loss_fn`
/// binds with Tape::param; inputs under test are wrapped as Parameters too.
inline GradcheckReport gradcheck(const std::function<Var(Tape&)>& loss_fn,
                                 const std::vector<Parameter*>& targets,
                                 const GradcheckOptions& opt = {}) {
  for (Parameter* p : targets) p->zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  struct Eval {
    double value;
    std::uint64_t branches;
  };
  auto evaluate = [&loss_fn]() {
    Tape tape;
    Var loss = loss_fn(tape);
    return Eval{tape.scalar(loss), tape.kink_signature()};
  };
  const std::uint64_t base_branches = evaluate().branches;

  GradcheckReport report;
  report.tolerance = opt.tolerance;
  std::mt19937_64 rng(opt.seed);
  for (Parameter* p : targets) {
    std::vector<std::size_t> idx(p->numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    double diff2 = 0.0, an2 = 0.0, nu2 = 0.0, max_abs = 0.0;
    std::size_t probed = 0, skipped = 0;
    auto& values = p->value.storage();
    for (std::size_t i : idx) {
      if (probed == opt.max_samples) break;
      const float orig = values[i];
      bool ok = false;
      double numeric = 0.0;
      float eps = opt.epsilon;
      for (int attempt = 0; attempt <= opt.max_halvings && !ok; ++attempt, eps *= 0.5f) {
        auto probe = [&](float v) {
          values[i] = v;
          const Eval e = evaluate();
          ok = ok && e.branches == base_branches;
          return e.value;
        };
        ok = true;
        const float up = orig + eps;
        const float down = orig - eps;
        const double f_up = probe(up);
        const double f_down = probe(down);
        numeric = (f_up - f_down) / (static_cast<double>(up) - down);
        values[i] = orig;
      }
      if (!ok) {
        ++skipped;
        continue;
      }
      const double analytic = p->grad[i];
      const double d = analytic - numeric;
      diff2 += d * d;
      an2 += analytic * analytic;
      nu2 += numeric * numeric;
      max_abs = std::max(max_abs, std::abs(d));
      ++probed;
    }
    const double scale = std::max({std::sqrt(an2), std::sqrt(nu2), opt.min_scale});
    report.entries.push_back({p->name, std::sqrt(diff2) / scale, max_abs, probed, skipped});
  }
  return report;
}

/// Redraws entries lying within `margin` of a kink at zero so that a central
/// difference of half-width epsilon never straddles it.
template <class Rng>
void resample_away_from_kinks(Tensor& t, float margin, Rng& rng, float stddev = 1.0f) {
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& v : t.data()) {
    while (std::abs(v) < margin) v = dist(rng);
  }
}

}  // namespace lmfn
