#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <algorithm>
#include <random>

#include "peanoseg/error.hpp"
#include "peanoseg/imaging.hpp"
#include "peanoseg/shapes.hpp"

namespace peanoseg {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("peanoseg_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write_text(const std::string& name, const std::string& body) {
    const auto p = dir / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
  }

  fs::path dir;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

LabelImage labels_of(std::size_t side, std::size_t k, std::vector<std::uint32_t> v) {
  LabelImage l;
  l.shape = *GridShape::from_side(side);
  l.classes = k;
  l.labels = std::move(v);
  return l;
}

TEST_F(TempDir, AsciiPgm) {
  std::string body = "P2\n# comment\n4 4\n15\n";
  for (int i = 0; i < 16; ++i) body += std::to_string(i) + (i % 4 == 3 ? "\n" : " ");
  const auto img = load_grayscale(write_text("a.pgm", body));
  EXPECT_EQ(img.shape.side, 4u);
  ASSERT_EQ(img.values.size(), 16u);
  // maxval 15 is rescaled to the 0..255 range.
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(img.values[i], i * 17.0, 1e-12);

  std::string body255 = "P2\n4 4\n255\n";
  for (int i = 0; i < 16; ++i) body255 += std::to_string(i) + " ";
  const auto raw = load_grayscale(write_text("b.pgm", body255));
  for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(raw.values[i], i);
}

TEST_F(TempDir, CropPolicy) {
  std::vector<std::uint8_t> px(300 * 300);
  for (std::size_t r = 0; r < 300; ++r) {
    for (std::size_t c = 0; c < 300; ++c) px[r * 300 + c] = static_cast<std::uint8_t>((r * 7 + c * 3) % 256);
  }
  const auto p = dir / "big.pgm";
  write_pgm(p, 300, 300, px);
  EXPECT_EQ(code_of([&] { load_grayscale(p); }), ErrorCode::kBadShape);
  const auto img = load_grayscale(p, true);
  EXPECT_EQ(img.shape.side, 256u);
  for (std::size_t r : {0u, 100u, 255u}) {
    for (std::size_t c : {0u, 17u, 255u}) {
      EXPECT_DOUBLE_EQ(img.values[r * 256 + c], px[(r + 22) * 300 + (c + 22)]);
    }
  }
}

TEST_F(TempDir, NonSquareIsRejected) {
  std::vector<std::uint8_t> px(8 * 4, 1);
  const auto p = dir / "rect.pgm";
  write_pgm(p, 8, 4, px);
  EXPECT_EQ(code_of([&] { load_grayscale(p); }), ErrorCode::kBadShape);
  EXPECT_EQ(load_grayscale(p, true).shape.side, 4u);
}

TEST_F(TempDir, MalformedFiles) {
  EXPECT_EQ(code_of([&] { load_grayscale(write_text("x.pgm", "P7\n1 1\n255\n0")); }), ErrorCode::kBadFormat);
  EXPECT_EQ(code_of([&] { load_grayscale(write_text("y.pgm", "P5\n4 4\n255\n")); }), ErrorCode::kBadFormat);
  EXPECT_EQ(code_of([&] { load_grayscale(write_text("z.pgm", "P2\n2 2\n255\n0 1 2 300")); }),
            ErrorCode::kBadFormat);
  EXPECT_EQ(code_of([&] { load_grayscale(dir / "missing.pgm"); }), ErrorCode::kBadFormat);
}

TEST_F(TempDir, SixteenBitPgm) {
  std::string body = "P5\n2 2\n65535\n";
  const std::uint16_t vals[] = {0, 65535, 257, 32768};
  for (auto v : vals) {
    body.push_back(static_cast<char>(v >> 8));
    body.push_back(static_cast<char>(v & 0xff));
  }
  const auto img = load_grayscale(write_text("w.pgm", body));
  EXPECT_NEAR(img.values[1], 255.0, 1e-12);
  EXPECT_NEAR(img.values[2], 1.0, 1e-12);
}

TEST_F(TempDir, LabelLevels) {
  std::vector<std::uint8_t> bin = {0, 255, 255, 0};
  write_pgm(dir / "bin.pgm", 2, 2, bin);
  const auto l = load_labels(dir / "bin.pgm", 2);
  EXPECT_EQ(l.labels, (std::vector<std::uint32_t>{1, 2, 2, 1}));

  std::vector<std::uint8_t> flat(4, 77);
  write_pgm(dir / "flat.pgm", 2, 2, flat);
  EXPECT_EQ(load_labels(dir / "flat.pgm", 2).labels, std::vector<std::uint32_t>(4, 1));

  std::vector<std::uint8_t> three = {0, 10, 200, 0};
  write_pgm(dir / "three.pgm", 2, 2, three);
  EXPECT_EQ(code_of([&] { load_labels(dir / "three.pgm", 2); }), ErrorCode::kTooManyLevels);
  EXPECT_EQ(load_labels(dir / "three.pgm", 3).labels, (std::vector<std::uint32_t>{1, 2, 3, 1}));
}

TEST_F(TempDir, SaveSegmentationIntensities) {
  const auto k2 = labels_of(2, 2, {1, 2, 2, 1});
  save_segmentation(k2, dir / "k2.pgm");
  auto r = read_raster(dir / "k2.pgm");
  EXPECT_EQ(r.pixels, (std::vector<double>{0, 255, 255, 0}));

  const auto k3 = labels_of(2, 3, {1, 2, 3, 2});
  save_segmentation(k3, dir / "k3.pgm");
  r = read_raster(dir / "k3.pgm");
  EXPECT_EQ(r.pixels, (std::vector<double>{0, 128, 255, 128}));

  const auto k1 = labels_of(2, 1, {1, 1, 1, 1});
  save_segmentation(k1, dir / "k1.pgm");
  EXPECT_EQ(read_raster(dir / "k1.pgm").pixels, std::vector<double>(4, 0.0));
}

TEST_F(TempDir, SegmentationRoundTrip) {
  std::mt19937_64 rng(3);
  for (std::size_t k = 1; k <= 5; ++k) {
    auto l = labels_of(16, k, std::vector<std::uint32_t>(256));
    // Every class appears at least once so the levels survive.
    for (std::size_t i = 0; i < 256; ++i) l.labels[i] = static_cast<std::uint32_t>(i < k ? i + 1 : 1 + rng() % k);
    save_segmentation(l, dir / "rt.pgm");
    EXPECT_EQ(load_labels(dir / "rt.pgm", k).labels, l.labels);
  }
}

TEST_F(TempDir, ObservationFormats) {
  ObservedImage img;
  img.shape = GridShape::of_order(2);
  img.values.resize(16);
  for (std::size_t i = 0; i < 16; ++i) img.values[i] = -1.5 + 0.25 * static_cast<double>(i);
  save_observation(img, dir / "o.pfm");
  const auto back = load_grayscale(dir / "o.pfm");
  for (std::size_t i = 0; i < 16; ++i) EXPECT_FLOAT_EQ(static_cast<float>(back.values[i]), static_cast<float>(img.values[i]));

  save_observation(img, dir / "o.pgm");
  const auto pgm = load_grayscale(dir / "o.pgm");
  EXPECT_DOUBLE_EQ(pgm.values.front(), 0.0);
  EXPECT_DOUBLE_EQ(pgm.values.back(), 255.0);
}

TEST(SynthNoise, ZeroVarianceIsNearlyExact) {
  const auto l = labels_of(4, 2, {1, 2, 1, 2, 1, 1, 2, 2, 1, 2, 1, 2, 2, 2, 1, 1});
  const std::vector<double> means = {3.0, -4.0}, vars = {0.0, 0.0};
  const auto y = synth_noise(l, means, vars, 1);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y.values[i], means[l.labels[i] - 1], 1e-2);
}

TEST(SynthNoise, ClassMomentsWithinThreeSigma) {
  std::vector<std::uint32_t> v(128 * 128);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 2 == 0 ? 1 : 2;
  const auto l = labels_of(128, 2, v);
  const std::vector<double> means = {0.0, 1.0}, vars = {1.0, 1.0};
  const auto y = synth_noise(l, means, vars, 42);
  double s[2] = {0, 0};
  for (std::size_t i = 0; i < v.size(); ++i) s[v[i] - 1] += y.values[i];
  const double n = static_cast<double>(v.size() / 2);
  EXPECT_LE(std::abs(s[0] / n - 0.0), 3.0 / std::sqrt(n));
  EXPECT_LE(std::abs(s[1] / n - 1.0), 3.0 / std::sqrt(n));
}

TEST(SynthNoise, SeedDeterminism) {
  const auto l = shapes::rings(5);
  const std::vector<double> means = {0.0, 1.0}, vars = {1.0, 1.0};
  EXPECT_EQ(synth_noise(l, means, vars, 7).values, synth_noise(l, means, vars, 7).values);
  EXPECT_NE(synth_noise(l, means, vars, 7).values, synth_noise(l, means, vars, 8).values);
}

TEST(ErrorRate, Examples) {
  std::vector<std::uint32_t> t(16);
  for (std::size_t i = 0; i < 16; ++i) t[i] = i < 8 ? 1 : 2;
  const auto truth = labels_of(4, 2, t);
  EXPECT_DOUBLE_EQ(error_rate(truth, truth), 0.0);

  auto swapped = truth;
  for (auto& x : swapped.labels) x = 3 - x;
  EXPECT_DOUBLE_EQ(error_rate(truth, swapped), 0.0);

  auto noisy = truth;
  noisy.labels[0] = 2;
  noisy.labels[5] = 2;
  noisy.labels[12] = 1;
  EXPECT_DOUBLE_EQ(error_rate(truth, noisy), 0.1875);
  // The swapped labelling with the same three flips scores the same.
  for (auto& x : noisy.labels) x = 3 - x;
  EXPECT_DOUBLE_EQ(error_rate(truth, noisy), 0.1875);
}

TEST(ErrorRate, MatchesBruteForcePermutations) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng() % 4;
    std::vector<std::uint32_t> a(64), b(64);
    for (auto& x : a) x = 1 + rng() % k;
    for (auto& x : b) x = 1 + rng() % k;
    std::vector<std::uint32_t> perm(k);
    std::iota(perm.begin(), perm.end(), 1u);
    std::size_t best = 64;
    do {
      std::size_t miss = 0;
      for (std::size_t i = 0; i < 64; ++i) miss += a[i] != perm[b[i] - 1];
      best = std::min(best, miss);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_DOUBLE_EQ(error_rate(labels_of(8, k, a), labels_of(8, k, b)), best / 64.0);
  }
}

TEST(ErrorRate, TooManyClasses) {
  const auto l = labels_of(4, 9, std::vector<std::uint32_t>(16, 1));
  EXPECT_EQ(code_of([&] { error_rate(l, l); }), ErrorCode::kTooManyClasses);
}

TEST(ErrorRate, ShapeMismatch) {
  const auto a = labels_of(4, 2, std::vector<std::uint32_t>(16, 1));
  const auto b = labels_of(2, 2, std::vector<std::uint32_t>(4, 1));
  EXPECT_THROW(error_rate(a, b), Error);
}

TEST(Shapes, GeneratorsMixAreasAndFineDetail) {
  const auto shape = GridShape::of_order(7);
  for (const auto& name : shapes::names()) {
    const auto l = shapes::by_name(name, 7, 1);
    EXPECT_NO_THROW(l.validate()) << name;
    EXPECT_EQ(l.classes, 2u) << name;
    std::size_t ones = 0;
    for (auto x : l.labels) ones += x == 1;
    EXPECT_GT(ones, shape.n_pixels / 10) << name;
    EXPECT_LT(ones, shape.n_pixels * 9 / 10) << name;
  }
}

}  // namespace
}  // namespace peanoseg

namespace peanoseg {
namespace {

TEST(ShippedData, TruthImagesAreConforming) {
  for (const std::string name : {"stripes", "walk", "stripes-blocks"}) {
    const auto l = load_labels(std::string(PEANOSEG_DATA_DIR) + "/" + name + ".pgm", 2);
    EXPECT_EQ(l.shape.side, 128u) << name;
    EXPECT_EQ(l.labels, shapes::by_name(name, 7, 1).labels) << name;
  }
}

}  // namespace
}  // namespace peanoseg
