#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "lmfn/report.hpp"
#include "oracles.hpp"

using namespace lmfn;
namespace fs = std::filesystem;

namespace {

ImagePlane random_image(int w, int h, int ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImagePlane img = ImagePlane::filled(w, h, ch, 0.0f);
  for (float& v : img.values) v = u(rng);
  return img;
}

ImagePlane noisy(const ImagePlane& a, float sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, sd);
  ImagePlane b = a;
  for (float& v : b.values) v = std::clamp(v + n(rng), 0.0f, 1.0f);
  return b;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("lmfn_metrics_" + name); }

}  // namespace

TEST(Psnr, CapsAndClosedForm) {
  const ImagePlane a = random_image(8, 8, 3, 1);
  EXPECT_EQ(psnr(a, a), 100.0);
  EXPECT_NEAR(psnr(ImagePlane::filled(5, 5, 1, 0.2f), ImagePlane::filled(5, 5, 1, 0.3f)), 20.0, 1e-5);
}

TEST(Psnr, MatchesFormulaOracleAndSymmetric) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ImagePlane a = random_image(7, 5, 3, s), b = noisy(a, 0.05f, s + 100);
    EXPECT_NEAR(psnr(a, b), oracle::psnr(a, b), 1e-6);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
  }
}

TEST(Psnr, DecreasingInMse) {
  const ImagePlane a = ImagePlane::filled(4, 4, 1, 0.5f);
  double prev = 1e9;
  for (float d : {0.01f, 0.02f, 0.05f, 0.1f, 0.3f}) {
    const double p = psnr(a, ImagePlane::filled(4, 4, 1, 0.5f + d));
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Psnr, RejectsDimMismatch) {
  EXPECT_THROW(psnr(ImagePlane::filled(4, 4, 1, 0), ImagePlane::filled(4, 5, 1, 0)), std::invalid_argument);
}

TEST(Ssim, IdentityIsOne) {
  const ImagePlane a = random_image(16, 13, 3, 2);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
}

TEST(Ssim, MatchesWindowedOracle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ImagePlane a = random_image(11 + static_cast<int>(s), 14, s % 2 ? 3 : 1, s);
    const ImagePlane b = noisy(a, 0.1f, s + 50);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-5);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
  }
}

TEST(Ssim, AnticorrelatedBinaryImageNegative) {
  ImagePlane a = ImagePlane::filled(16, 16, 1, 0.0f);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) a.at(0, y, x) = ((x / 2 + y / 3) % 2) ? 1.0f : 0.0f;
  ImagePlane b = a;
  for (float& v : b.values) v = 1.0f - v;
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, RejectsSmallImages) {
  const ImagePlane a = ImagePlane::filled(10, 20, 1, 0.5f);
  EXPECT_THROW(ssim(a, a), std::invalid_argument);
}

TEST(Ssim, ChannelPermutationInvariant) {
  const ImagePlane a = random_image(12, 12, 3, 3), b = noisy(a, 0.1f, 4);
  auto permute = [](const ImagePlane& img) {
    ImagePlane out = img;
    const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    const int order[3] = {2, 0, 1};
    for (int c = 0; c < 3; ++c)
      std::copy_n(img.values.begin() + order[c] * plane, plane, out.values.begin() + c * plane);
    return out;
  };
  EXPECT_NEAR(ssim(a, b), ssim(permute(a), permute(b)), 1e-12);
}

TEST(Png, RoundTripAndQuantization) {
  ImagePlane img = ImagePlane::filled(5, 3, 3, 0.0f);
  std::mt19937_64 rng(5);
  for (float& v : img.values) v = static_cast<float>(rng() % 256) / 255.0f;
  const fs::path p = temp_file("rt.png");
  save_png(p, img);
  const ImagePlane back = load_png(p);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.values, img.values);

  const ImagePlane gray = ImagePlane::filled(1, 1, 1, 128.0f / 255.0f);
  save_png(p, gray);
  EXPECT_NEAR(load_png(p).values[0], 0.50196f, 1e-5f);
  save_png(p, ImagePlane::filled(1, 1, 1, 0.0f));
  EXPECT_EQ(load_png(p).values[0], 0.0f);
  fs::remove(p);
}

TEST(Png, ErrorsNamePath) {
  const fs::path p = temp_file("garbage.png");
  {
    std::ofstream out(p);
    out << "not a png";
  }
  try {
    load_png(p);
    FAIL();
  } catch (const ImageIoError& e) {
    EXPECT_NE(std::string(e.what()).find(p.string()), std::string::npos);
  }
  fs::remove(p);
  EXPECT_THROW(load_png(temp_file("missing.png")), ImageIoError);
}

TEST(Image, ReflectPadAndCropRestore) {
  const ImagePlane a = random_image(7, 5, 3, 6);
  const ImagePlane padded = reflect_pad(a, 3, 1);
  EXPECT_EQ(padded.height, 8);
  EXPECT_EQ(padded.width, 8);
  EXPECT_EQ(padded.at(1, 5, 2), a.at(1, 3, 2));
  EXPECT_EQ(padded.at(0, 1, 7), a.at(0, 1, 5));
  EXPECT_EQ(crop(padded, 0, 0, 5, 7).values, a.values);
}

TEST(Report, IdenticalSetScoresPerfect) {
  const std::vector<ImagePlane> imgs{random_image(12, 12, 3, 7), random_image(14, 11, 3, 8)};
  const EvalReport r = report_pairs({"a", "b"}, imgs, imgs);
  EXPECT_EQ(r.mean_psnr(), 100.0);
  EXPECT_NEAR(r.mean_ssim(), 1.0, 1e-9);
  EXPECT_NE(r.table().find("mean"), std::string::npos);
  std::ostringstream csv;
  r.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, 24), "image,psnr,ssim,seconds\n");
}

TEST(Report, ZeroModelPsnrFormula) {
  ModelConfig c;
  c.encoder_width = 4;
  c.decoder_width = 4;
  c.num_scales = 2;
  c.num_rfdb = 1;
  LmfnModel m = LmfnModel::build(c);
  m.params().find("tail/conv/weight")->value.fill(0.0f);
  const ImagePlane blurred = random_image(13, 11, 3, 9), target = random_image(13, 11, 3, 10);
  const EvalReport r = report(m, {"x"}, {blurred}, {target});
  double ms = 0.0;
  for (float v : target.values) ms += static_cast<double>(v) * v;
  ms /= static_cast<double>(target.values.size());
  EXPECT_NEAR(r.rows[0].psnr_db, 10.0 * std::log10(1.0 / ms), 1e-6);
  ASSERT_TRUE(r.param_count.has_value());
  EXPECT_EQ(*r.param_count, m.total_param_count());
  EXPECT_TRUE(r.rows[0].seconds.has_value());
}
