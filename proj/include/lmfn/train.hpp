#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/blur.hpp"
#include "lmfn/checkpoint.hpp"
#include "lmfn/image.hpp"
#include "lmfn/model.hpp"
#include "lmfn/optim.hpp"
#include "lmfn/seed.hpp"

namespace lmfn {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A blurred input and its sharp target, each (1, 3, H, W).
struct TrainingPair {
  Tensor blurred;
  Tensor sharp;
};

inline TrainingPair make_training_pair(const ImagePlane& sharp, const BlurSpec& spec) {
  const ImagePlane rgb = to_rgb(sharp);
  auto [blurred, target] = synthesize_pair(rgb, spec);
  return {to_tensor(blurred), to_tensor(target)};
}

/// Draws `count` random patch crops from `images`, each blurred by a spec
/// drawn from the same per-sample seed. Sample i depends only on (seed, i).
inline std::vector<TrainingPair> make_patch_pool(const std::vector<ImagePlane>& images,
                                                 int patch, int count, std::uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("make_patch_pool: no images");
  std::vector<const ImagePlane*> usable;
  for (const auto& im : images)
    if (im.width >= patch && im.height >= patch) usable.push_back(&im);
  if (usable.empty()) {
    throw std::invalid_argument("make_patch_pool: no image is at least " + std::to_string(patch) +
                                "x" + std::to_string(patch));
  }
  std::vector<TrainingPair> pool;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = sample_seed(seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(s);
    const ImagePlane& im =
        *usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)];
    const int top = std::uniform_int_distribution<int>(0, im.height - patch)(rng);
    const int left = std::uniform_int_distribution<int>(0, im.width - patch)(rng);
    pool.push_back(make_training_pair(crop(im, top, left, patch, patch), random_blur_spec(rng())));
  }
  return pool;
}

struct TrainLogEntry {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  std::int64_t steps = 0;
  int batch_size = 4;
  std::uint64_t seed = 0;
  /// Trace every `log_every` steps (and always the last).
  int log_every = 10;
  AdamConfig adam{};
  StepSchedule schedule{};
  std::function<void(const TrainLogEntry&)> on_log;
};

struct TrainResult {
  LmfnModel model;
  Checkpoint final_checkpoint;
  Checkpoint best_checkpoint;
  double best_loss = 0.0;
  std::vector<TrainLogEntry> trace;
};

/// Stacks the pairs at `indices` into one batch.
inline std::pair<Tensor, Tensor> make_batch(const std::vector<TrainingPair>& data,
                                            const std::vector<std::size_t>& indices) {
  const Shape s0 = data[indices.front()].blurred.shape();
  std::vector<float> b, t;
  b.reserve(s0.numel() * indices.size());
  t.reserve(s0.numel() * indices.size());
  for (std::size_t i : indices) {
    const TrainingPair& p = data[i];
    if (p.blurred.shape() != s0 || p.sharp.shape() != s0) {
      throw std::invalid_argument("train: all pairs must share one shape, got " +
                                  p.blurred.shape().str() + " vs " + s0.str());
    }
    b.insert(b.end(), p.blurred.storage().begin(), p.blurred.storage().end());
    t.insert(t.end(), p.sharp.storage().begin(), p.sharp.storage().end());
  }
  const Shape s{static_cast<int>(indices.size()), s0.c, s0.h, s0.w};
  return {Tensor(s, std::move(b)), Tensor(s, std::move(t))};
}

/// Trains a freshly initialized model on `data` with Adam and the step
/// schedule. Deterministic in (data, config, options.seed). Batches are drawn
/// without replacement from a reshuffled order each epoch. The best checkpoint
/// holds the parameters that produced the lowest batch loss seen.
inline TrainResult train(const std::vector<TrainingPair>& data, const ModelConfig& config,
                         const TrainOptions& opt) {
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  if (opt.steps < 0) throw std::invalid_argument("train: steps must be >= 0");
  if (opt.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  LmfnModel model = LmfnModel::build(config, opt.seed);
  Adam adam(model.params(), opt.adam);
  std::mt19937_64 rng(sample_seed(opt.seed, 0xB47C));

  TrainResult result{std::move(model), {}, {}, 0.0, {}};
  LmfnModel& m = result.model;
  result.best_checkpoint = make_checkpoint(m);
  result.best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::size_t batch = std::min<std::size_t>(opt.batch_size, data.size());
  double lr = opt.schedule(0);

  for (std::int64_t step = 0; step < opt.steps; ++step) {
    std::vector<std::size_t> idx;
    while (idx.size() < batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    auto [blurred, sharp] = make_batch(data, idx);
    m.params().zero_grad();
    Tape tape;
    Var loss = m.loss(tape, tape.constant(std::move(blurred)), tape.constant(std::move(sharp)));
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) {
      throw NumericalError("train: non-finite loss " + std::to_string(value) + " at step " +
                           std::to_string(step));
    }
    if (value < result.best_loss) {
      result.best_loss = value;
      result.best_checkpoint = make_checkpoint(m);
    }
    tape.backward(loss);
    lr = opt.schedule(step);
    adam.step(lr);
    if ((opt.log_every > 0 && step % opt.log_every == 0) || step + 1 == opt.steps) {
      TrainLogEntry e{step, value, lr};
      result.trace.push_back(e);
      if (opt.on_log) opt.on_log(e);
    }
  }
  result.final_checkpoint = make_checkpoint(m, &adam, lr);
  if (opt.steps == 0) result.best_loss = std::numeric_limits<double>::quiet_NaN();
  return result;
}

inline void write_loss_csv(const std::filesystem::path& path,
                           const std::vector<TrainLogEntry>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path.string());
  out << "iteration,loss,lr\n";
  out << std::setprecision(9);
  for (const auto& e : trace) out << e.iteration << ',' << e.loss << ',' << e.lr << '\n';
}

}  // namespace lmfn
