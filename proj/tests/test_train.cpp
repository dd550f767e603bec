#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "lmfn/checkpoint.hpp"
#include "lmfn/synthetic.hpp"
#include "lmfn/train.hpp"

using namespace lmfn;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.encoder_width = 4;
  c.decoder_width = 4;
  c.num_scales = 2;
  c.num_rfdb = 1;
  return c;
}

std::vector<TrainingPair> tiny_data() {
  std::vector<ImagePlane> imgs;
  for (int i = 0; i < 2; ++i) imgs.push_back(synthetic_scene(24, 24, 40 + i));
  return make_patch_pool(imgs, 8, 6, 3);
}

TrainOptions opts(std::int64_t steps, std::uint64_t seed) {
  TrainOptions o;
  o.steps = steps;
  o.batch_size = 2;
  o.seed = seed;
  o.log_every = 1;
  return o;
}

}  // namespace

TEST(Train, ZeroStepsEqualsInitialization) {
  const TrainResult r = train(tiny_data(), tiny(), opts(0, 5));
  const LmfnModel init = LmfnModel::build(tiny(), 5);
  EXPECT_TRUE(r.final_checkpoint.tensors == make_checkpoint(init).tensors);
  EXPECT_TRUE(r.trace.empty());
}

TEST(Train, SameSeedBitIdentical) {
  const auto data = tiny_data();
  const TrainResult a = train(data, tiny(), opts(6, 9));
  const TrainResult b = train(data, tiny(), opts(6, 9));
  EXPECT_EQ(encode_checkpoint(a.final_checkpoint), encode_checkpoint(b.final_checkpoint));
  EXPECT_EQ(encode_checkpoint(a.best_checkpoint), encode_checkpoint(b.best_checkpoint));
  ASSERT_EQ(a.trace.size(), 6u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
  const TrainResult c = train(data, tiny(), opts(6, 10));
  EXPECT_NE(encode_checkpoint(a.final_checkpoint), encode_checkpoint(c.final_checkpoint));
}

TEST(Train, ParametersMoveAndOptimizerStateSaved) {
  const TrainResult r = train(tiny_data(), tiny(), opts(3, 2));
  EXPECT_FALSE(r.final_checkpoint.tensors == make_checkpoint(LmfnModel::build(tiny(), 2)).tensors);
  ASSERT_TRUE(r.final_checkpoint.optimizer.has_value());
  EXPECT_EQ(r.final_checkpoint.optimizer->step, 3u);
  EXPECT_DOUBLE_EQ(r.final_checkpoint.optimizer->lr, 1e-4);
  EXPECT_LE(r.best_loss, r.trace.front().loss);
}

TEST(Train, LogCadenceIncludesLastStep) {
  TrainOptions o = opts(8, 1);
  o.log_every = 3;
  int calls = 0;
  o.on_log = [&](const TrainLogEntry&) { ++calls; };
  const TrainResult r = train(tiny_data(), tiny(), o);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_EQ(r.trace[0].iteration, 0);
  EXPECT_EQ(r.trace[2].iteration, 6);
  EXPECT_EQ(r.trace[3].iteration, 7);
  EXPECT_EQ(calls, 4);
}

TEST(Train, NonFiniteLossAbortsNamingStep) {
  auto data = tiny_data();
  for (auto& d : data) d.sharp[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(data, tiny(), opts(3, 1));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Train, RejectsEmptyOrMixedData) {
  EXPECT_THROW(train({}, tiny(), opts(1, 0)), std::invalid_argument);
  auto data = tiny_data();
  data.push_back({Tensor::zeros({1, 3, 16, 16}), Tensor::zeros({1, 3, 16, 16})});
  TrainOptions o = opts(10, 0);
  o.batch_size = static_cast<int>(data.size());
  EXPECT_THROW(train(data, tiny(), o), std::invalid_argument);
}

TEST(Train, LossCsvFormat) {
  const fs::path p = fs::temp_directory_path() / "lmfn_loss_test.csv";
  write_loss_csv(p, {{0, 0.5, 1e-4}, {10, 0.25, 1e-4}});
  std::ifstream in(p);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "iteration,loss,lr");
  EXPECT_EQ(row, "0,0.5,0.0001");
  fs::remove(p);
}

TEST(PatchPool, DeterministicPerIndex) {
  std::vector<ImagePlane> imgs{synthetic_scene(32, 32, 1), synthetic_scene(20, 28, 2)};
  const auto a = make_patch_pool(imgs, 16, 5, 7);
  const auto b = make_patch_pool(imgs, 16, 9, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].blurred, b[i].blurred);
    EXPECT_EQ(a[i].sharp, b[i].sharp);
    EXPECT_EQ(a[i].sharp.shape(), (Shape{1, 3, 16, 16}));
  }
  EXPECT_THROW(make_patch_pool(imgs, 64, 1, 0), std::invalid_argument);
}

TEST(Synthetic, SceneDeterministicAndInRange) {
  const ImagePlane a = synthetic_scene(40, 30, 11), b = synthetic_scene(40, 30, 11);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, synthetic_scene(40, 30, 12).values);
  for (float v : a.values) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}
