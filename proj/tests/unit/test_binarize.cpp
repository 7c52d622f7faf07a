#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "wi/binarize.hpp"
#include "wi/error.hpp"
#include "wi/image_io.hpp"

using namespace wi;

TEST(Otsu, TwoLevelsSplitExactly) {
  GrayImage img(10, 10);
  for (int i = 0; i < 100; ++i) img.pixels[i] = (i % 2 == 0) ? 0.1 : 0.9;
  const BinaryMask m = otsu(img);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(m.bits[i] != 0, img.pixels[i] < 0.5) << i;
}

TEST(Otsu, ThresholdMaximisesBetweenClassVariance) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    const GrayImage img = test::random_image(24, 24, gen);
    std::vector<double> hist(256, 0.0);
    for (double v : img.pixels) hist[intensity_bin(v)] += 1.0;
    auto between = [&](int t) {
      double w0 = 0, m0 = 0, w1 = 0, m1 = 0;
      for (int b = 0; b <= t; ++b) w0 += hist[b], m0 += b * hist[b];
      for (int b = t + 1; b < 256; ++b) w1 += hist[b], m1 += b * hist[b];
      if (w0 == 0 || w1 == 0) return -1.0;
      const double diff = m0 / w0 - m1 / w1;
      return w0 * w1 * diff * diff;
    };
    double best = -1.0;
    for (int t = 0; t < 255; ++t) best = std::max(best, between(t));
    const int chosen = otsu_threshold_bin(img);
    ASSERT_GE(chosen, 0);
    EXPECT_GE(between(chosen), best * (1 - 1e-12)) << "trial " << trial;
  }
}

TEST(Otsu, ConstantImageHasNoInk) {
  const GrayImage img(8, 8, 0.7);
  EXPECT_EQ(otsu_threshold_bin(img), -1);
  EXPECT_EQ(otsu(img).count(), 0u);
}

TEST(Sauvola, DarkBlockIsInk) {
  GrayImage img(31, 31, 0.9);
  for (int y = 14; y <= 16; ++y)
    for (int x = 14; x <= 16; ++x) img.at(x, y) = 0.1;
  const BinaryMask m = sauvola(img, 15, 0.2);
  for (int y = 14; y <= 16; ++y)
    for (int x = 14; x <= 16; ++x) EXPECT_TRUE(m.at(x, y));
  EXPECT_FALSE(m.at(0, 0));
}

TEST(Sauvola, MatchesPerPixelOracle) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    const GrayImage img = test::random_image(32, 32, gen);
    const int window = 3 + 2 * static_cast<int>(gen() % 7);
    const double k = 0.05 + 0.1 * static_cast<double>(gen() % 8);
    ASSERT_EQ(sauvola(img, window, k), test::sauvola_oracle(img, window, k)) << "trial " << trial;
  }
}

TEST(Sauvola, InvalidParameters) {
  const GrayImage img(20, 20, 0.5);
  BinarizerSpec spec;
  spec.kind = BinarizerKind::sauvola;
  spec.sauvola_window = 4;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.sauvola_window = 15;
  spec.sauvola_k = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(sauvola(GrayImage(10, 10, 0.5), 15, 0.2), DataError);
}

TEST(ImportMask, WrongDimsIsError) {
  const auto dir = test::scratch_dir("import_dims");
  write_mask_pgm(BinaryMask(4, 3, true), dir / "m.pgm");
  EXPECT_THROW(import_mask(dir / "m.pgm", {5, 3}, true), DataError);
}

TEST(ImportMask, AllWhiteInkWhiteIsAllInk) {
  const auto dir = test::scratch_dir("import_white");
  write_png(GrayImage(6, 5, 1.0), dir / "m.png");
  EXPECT_EQ(import_mask(dir / "m.png", {6, 5}, true).count(), 30u);
  EXPECT_EQ(import_mask(dir / "m.png", {6, 5}, false).count(), 0u);
}

TEST(ImportMask, RoundTripsWrittenMask) {
  std::mt19937_64 gen(4);
  const BinaryMask m = test::random_mask(13, 9, 0.4, gen);
  const auto dir = test::scratch_dir("import_rt");
  write_mask_pgm(m, dir / "m.pgm");
  write_mask_png(m, dir / "m.png");
  EXPECT_EQ(import_mask(dir / "m.pgm", {13, 9}, true), m);
  EXPECT_EQ(import_mask(dir / "m.png", {13, 9}, true), m);
}

TEST(FMeasure, Identical) {
  std::mt19937_64 gen(5);
  const BinaryMask m = test::random_mask(10, 10, 0.3, gen);
  EXPECT_DOUBLE_EQ(f_measure(m, m), 1.0);
}

TEST(FMeasure, Disjoint) {
  BinaryMask a(4, 1), b(4, 1);
  a.set(0, 0, true);
  b.set(3, 0, true);
  EXPECT_DOUBLE_EQ(f_measure(a, b), 0.0);
}

TEST(FMeasure, HalfRecall) {
  BinaryMask truth(4, 1, true), pred(4, 1);
  pred.set(0, 0, true);
  pred.set(1, 0, true);
  EXPECT_NEAR(f_measure(pred, truth), 2.0 / 3.0, 1e-15);
}

TEST(Binarize, DispatchesExternal) {
  const auto dir = test::scratch_dir("external");
  BinaryMask m(5, 5);
  m.set(2, 2, true);
  write_mask_pgm(m, dir / "page_mask.pgm");
  BinarizerSpec spec;
  spec.kind = BinarizerKind::external;
  spec.external_path_template = (dir / "{stem}_mask.pgm").string();
  EXPECT_EQ(binarize(GrayImage(5, 5, 0.5), spec, dir / "page.png"), m);
}

TEST(Binarize, KindNames) {
  for (auto k : {BinarizerKind::otsu, BinarizerKind::sauvola, BinarizerKind::external})
    EXPECT_EQ(binarizer_kind_from_string(to_string(k)), k);
  EXPECT_THROW(binarizer_kind_from_string("niblack"), ConfigError);
}
