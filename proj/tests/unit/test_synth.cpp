#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "oracles.hpp"
#include "wi/error.hpp"
#include "wi/image_io.hpp"
#include "wi/rng.hpp"
#include "wi/synth.hpp"
#include "wi/text_aoi.hpp"

using namespace wi;

TEST(GenStyle, Deterministic) { EXPECT_EQ(gen_style(42), gen_style(42)); }

TEST(GenStyle, DistinctAcrossSeeds) {
  std::set<std::tuple<double, double, double, double>> seen;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto st = gen_style(s);
    seen.emplace(st.slant, st.stroke_width, st.x_height, st.curvature);
  }
  EXPECT_GE(seen.size(), 99u);
}

TEST(GenStyle, WithinBounds) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto st = gen_style(s);
    EXPECT_LE(std::abs(st.slant), StyleBounds::slant_max);
    EXPECT_GE(st.stroke_width, StyleBounds::stroke_min);
    EXPECT_LE(st.stroke_width, StyleBounds::stroke_max);
    EXPECT_GE(st.letter_spacing, StyleBounds::spacing_min);
    EXPECT_LE(st.letter_spacing, StyleBounds::spacing_max);
    EXPECT_GE(st.curvature, 0.0);
    EXPECT_LE(st.curvature, 1.0);
    EXPECT_GE(st.baseline_wobble, 0.0);
    EXPECT_LE(st.baseline_wobble, StyleBounds::wobble_max);
    EXPECT_GE(st.x_height, StyleBounds::x_height_min);
    EXPECT_LE(st.x_height, StyleBounds::x_height_max);
    EXPECT_GE(st.ink, StyleBounds::ink_min);
    EXPECT_LE(st.ink, StyleBounds::ink_max);
  }
}

TEST(RenderPage, DeterministicWithoutNoise) {
  const auto st = gen_style(7);
  EXPECT_EQ(render_document(st, 1, 256, 256), render_document(st, 1, 256, 256));
  EXPECT_NE(render_document(st, 1, 256, 256), render_document(st, 2, 256, 256));
}

TEST(RenderPage, NoiseIsSeededToo) {
  const auto st = gen_style(8);
  EXPECT_EQ(render_document(st, 1, 200, 200, 0.7), render_document(st, 1, 200, 200, 0.7));
  EXPECT_NE(render_document(st, 1, 200, 200, 0.7), render_document(st, 1, 200, 200, 0.0));
}

TEST(RenderPage, InkFractionInRange) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto page = render_page(gen_style(derive_seed(5, s)), s, 512, 512);
    EXPECT_GE(page.ink_fraction, 0.02) << s;
    EXPECT_LE(page.ink_fraction, 0.25) << s;
  }
}

TEST(RenderPage, OtsuAoiCoversTextBox) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto page = render_page(gen_style(derive_seed(6, s)), s, 512, 512);
    const auto crops = select_aoi(page.image, BinarizerSpec{}, AoiParams{{25, 25}, 1});
    const auto& b = crops.at(0).source_box;
    EXPECT_GE(box_coverage(page.text_box, b.x0, b.y0, b.x1, b.y1), 0.9) << s;
  }
}

TEST(RenderPage, TooSmallPageIsError) { EXPECT_THROW(render_page(gen_style(1), 1, 40, 30), DataError); }

TEST(RenderPage, NoiseOutOfRangeIsError) { EXPECT_THROW(render_page(gen_style(1), 1, 256, 256, 1.5), ConfigError); }

TEST(BoxCoverage, Cases) {
  const TextBox t{10, 10, 19, 19};
  EXPECT_EQ(box_coverage(t, 0, 0, 100, 100), 1.0);
  EXPECT_EQ(box_coverage(t, 10, 10, 14, 19), 0.5);
  EXPECT_EQ(box_coverage(t, 30, 30, 40, 40), 0.0);
}

TEST(GenDataset, CountsAndZeroShotSplit) {
  const auto dir = test::scratch_dir("synth_counts");
  DatasetOptions opts;
  opts.writers = 6;
  opts.docs_per_writer = 3;
  opts.page_width = opts.page_height = 200;
  opts.val_writers = 1;
  const Manifest m = gen_dataset(opts, dir);
  EXPECT_EQ(m.entries().size(), 18u);
  std::size_t pngs = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir)) pngs += f.path().extension() == ".png";
  EXPECT_EQ(pngs, 18u);
  const auto train = m.writers(Split::train), test_w = m.writers(Split::test), val = m.writers(Split::val);
  EXPECT_EQ(train.size(), 2u);
  EXPECT_EQ(val.size(), 1u);
  EXPECT_EQ(test_w.size(), 3u);
  for (const auto& w : test_w) EXPECT_EQ(std::count(train.begin(), train.end(), w), 0);
  const Manifest loaded = load_manifest(dir / "manifest.csv");
  EXPECT_EQ(loaded.to_csv(), m.to_csv());
  EXPECT_TRUE(std::filesystem::exists(dir / "truth_boxes.json"));
}

TEST(GenDataset, RegenerationIsIdentical) {
  DatasetOptions opts;
  opts.writers = 3;
  opts.docs_per_writer = 2;
  opts.page_width = opts.page_height = 160;
  opts.seed = 77;
  const auto a = test::scratch_dir("synth_a"), b = test::scratch_dir("synth_b");
  gen_dataset(opts, a);
  gen_dataset(opts, b);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
  for (const auto& f : std::filesystem::directory_iterator(a))
    EXPECT_EQ(slurp(f.path()), slurp(b / f.path().filename())) << f.path();
}

TEST(GenDataset, DuplicatePairsShareContent) {
  DatasetOptions opts;
  opts.writers = 2;
  opts.docs_per_writer = 2;
  opts.page_width = opts.page_height = 160;
  opts.duplicate_pairs = true;
  const auto dir = test::scratch_dir("synth_dup");
  const Manifest m = gen_dataset(opts, dir);
  EXPECT_EQ(read_image(dir / "w000_d00.png"), read_image(dir / "w000_d01.png"));
}

TEST(GenDataset, InvalidOptions) {
  DatasetOptions opts;
  opts.writers = 1;
  EXPECT_THROW(opts.validate(), ConfigError);
  opts.writers = 4;
  opts.test_writers = 4;
  EXPECT_THROW(opts.validate(), ConfigError);
  opts.test_writers = -1;
  opts.duplicate_pairs = true;
  opts.docs_per_writer = 3;
  EXPECT_THROW(opts.validate(), ConfigError);
}
