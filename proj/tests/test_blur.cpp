#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lmfn/blur.hpp"
#include "oracles.hpp"

using namespace lmfn;

namespace {

ImagePlane random_image(int w, int h, int ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImagePlane img = ImagePlane::filled(w, h, ch, 0.0f);
  for (float& v : img.values) v = u(rng);
  return img;
}

BlurSpec gaussian(double sigma) {
  BlurSpec s;
  s.kind = BlurKind::Gaussian;
  s.sigma = sigma;
  return s;
}

BlurSpec motion(int length, double angle) {
  BlurSpec s;
  s.kind = BlurKind::Motion;
  s.length = length;
  s.angle_deg = angle;
  return s;
}

double max_diff(const ImagePlane& a, const ImagePlane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.values[i]) - b.values[i]));
  return m;
}

}  // namespace

TEST(BlurKernel, SmallSigmaNearDeltaMatchesDensity) {
  const BlurKernel k = make_blur_kernel(gaussian(0.1));
  ASSERT_EQ(k.size, 3);
  EXPECT_GT(k.at(1, 1), 0.99);
  int size = 0;
  const std::vector<double> ref = oracle::gaussian_kernel(0.1, size);
  ASSERT_EQ(size, 3);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(k.weights[i], ref[i], 1e-12);
}

TEST(BlurKernel, GaussianMatchesDensityOracleAndIsSymmetric) {
  for (double sigma : {0.5, 1.0, 1.5, 2.3}) {
    const BlurKernel k = make_blur_kernel(gaussian(sigma));
    int size = 0;
    const std::vector<double> ref = oracle::gaussian_kernel(sigma, size);
    ASSERT_EQ(k.size, size);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(k.weights[i], ref[i], 1e-12);
    for (int y = 0; y < k.size; ++y)
      for (int x = 0; x < k.size; ++x) {
        EXPECT_DOUBLE_EQ(k.at(y, x), k.at(x, y));
        EXPECT_DOUBLE_EQ(k.at(y, x), k.at(k.size - 1 - y, x));
      }
  }
}

TEST(BlurKernel, MotionHorizontalThirds) {
  const BlurKernel k = make_blur_kernel(motion(3, 0.0));
  ASSERT_EQ(k.size, 3);
  for (int x = 0; x < 3; ++x) {
    EXPECT_NEAR(k.at(1, x), 1.0 / 3.0, 1e-12);
    EXPECT_EQ(k.at(0, x), 0.0);
    EXPECT_EQ(k.at(2, x), 0.0);
  }
  const BlurKernel v = make_blur_kernel(motion(5, 90.0));
  for (int y = 0; y < 5; ++y) EXPECT_NEAR(v.at(y, 2), 0.2, 1e-12);
}

TEST(BlurKernel, AlwaysNormalizedAndNonnegative) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const BlurKernel k = make_blur_kernel(random_blur_spec(s));
    EXPECT_NEAR(k.sum(), 1.0, 1e-6) << s;
    for (double w : k.weights) EXPECT_GE(w, 0.0);
  }
  for (double a : {0.0, 17.0, 45.0, 90.0, 135.0, 179.9})
    for (int l : {3, 7, 15}) EXPECT_NEAR(make_blur_kernel(motion(l, a)).sum(), 1.0, 1e-6);
}

TEST(BlurKernel, RejectsInvalidSpecs) {
  EXPECT_THROW(make_blur_kernel(gaussian(0.0)), std::invalid_argument);
  EXPECT_THROW(make_blur_kernel(gaussian(-1.0)), std::invalid_argument);
  EXPECT_THROW(make_blur_kernel(motion(4, 0.0)), std::invalid_argument);
  EXPECT_THROW(make_blur_kernel(motion(1, 0.0)), std::invalid_argument);
  EXPECT_THROW(make_blur_kernel(motion(5, 180.0)), std::invalid_argument);
}

TEST(Synthesize, DeltaKernelReproducesInput) {
  const ImagePlane img = random_image(9, 7, 3, 1);
  BlurKernel delta;
  delta.size = 1;
  delta.weights = {1.0};
  EXPECT_EQ(apply_blur(img, delta).values, img.values);
  const auto [blurred, sharp] = synthesize_pair(img, gaussian(0.05));
  EXPECT_EQ(sharp.values, img.values);
  EXPECT_LT(max_diff(blurred, img), 1e-6);
}

TEST(Synthesize, ConstantImageUnchanged) {
  const ImagePlane img = ImagePlane::filled(12, 10, 3, 0.37f);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto [blurred, sharp] = synthesize_pair(img, random_blur_spec(s));
    EXPECT_LT(max_diff(blurred, img), 1e-6);
  }
}

TEST(Synthesize, CheckerMatchesLoopOracle) {
  ImagePlane img = ImagePlane::filled(16, 12, 1, 0.0f);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) img.at(0, y, x) = ((x + y) % 2) ? 1.0f : 0.0f;
  int size = 0;
  const std::vector<double> k = oracle::gaussian_kernel(1.0, size);
  EXPECT_LT(max_diff(synthesize_pair(img, gaussian(1.0)).first, oracle::blur(img, k, size)), 1e-5);
}

TEST(Synthesize, RandomImagesMatchLoopOracle) {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const ImagePlane img = random_image(3 + static_cast<int>(s % 6), 8 - static_cast<int>(s % 5), 3, s);
    const BlurKernel kernel = make_blur_kernel(random_blur_spec(100 + s));
    EXPECT_LT(max_diff(apply_blur(img, kernel), oracle::blur(img, kernel.weights, kernel.size)), 1e-5);
  }
}

TEST(Synthesize, ClampsToUnitRange) {
  const ImagePlane img = random_image(10, 10, 3, 5);
  const auto [blurred, sharp] = synthesize_pair(img, motion(9, 30.0));
  for (float v : blurred.values) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(RandomBlurSpec, DeterministicAndValid) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const BlurSpec a = random_blur_spec(s), b = random_blur_spec(s);
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.sigma, b.sigma);
    EXPECT_EQ(a.length, b.length);
    EXPECT_EQ(a.angle_deg, b.angle_deg);
    EXPECT_NO_THROW(a.validate());
  }
}
