#include "wi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "wi/error.hpp"
#include "wi/image_io.hpp"
#include "wi/rng.hpp"

namespace wi {
namespace {

constexpr int kAlphabetSize = 16;
constexpr double kPaper = 0.92;
constexpr double kLinePitch = 2.1;  // in x-heights

struct Point {
  double x, y;
};

/// A glyph is a few strokes in glyph coordinates: x to the right from the
/// glyph origin, y up from the baseline, both in x-height units.
struct Glyph {
  std::vector<std::vector<Point>> strokes;
  double advance = 1.0;
};

Point catmull_rom(const Point& p0, const Point& p1, const Point& p2, const Point& p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  auto f = [&](double a, double b, double c, double d) {
    return 0.5 * (2 * b + (-a + c) * t + (2 * a - 5 * b + 4 * c - d) * t2 + (-a + 3 * b - 3 * c + d) * t3);
  };
  return {f(p0.x, p1.x, p2.x, p3.x), f(p0.y, p1.y, p2.y, p3.y)};
}

// Dense polyline through the control points, blending straight segments with
// a Catmull-Rom spline according to curvature.
std::vector<Point> trace_stroke(const std::vector<Point>& ctrl, double curvature) {
  std::vector<Point> out;
  const int n = static_cast<int>(ctrl.size());
  for (int i = 0; i + 1 < n; ++i) {
    const Point& p0 = ctrl[std::max(i - 1, 0)];
    const Point& p1 = ctrl[i];
    const Point& p2 = ctrl[i + 1];
    const Point& p3 = ctrl[std::min(i + 2, n - 1)];
    for (int s = 0; s < 16; ++s) {
      const double t = s / 16.0;
      const Point c = catmull_rom(p0, p1, p2, p3, t);
      const Point l{p1.x + (p2.x - p1.x) * t, p1.y + (p2.y - p1.y) * t};
      out.push_back({l.x + (c.x - l.x) * curvature, l.y + (c.y - l.y) * curvature});
    }
  }
  out.push_back(ctrl.back());
  return out;
}

std::vector<Glyph> make_alphabet(const WriterStyle& style) {
  Rng rng(style.glyph_seed);
  std::vector<Glyph> glyphs;
  for (int g = 0; g < kAlphabetSize; ++g) {
    Glyph glyph;
    glyph.advance = uniform_real(rng, 0.5, 1.1);
    const double kind = uniform01(rng);
    const double top = kind < 0.25 ? uniform_real(rng, 1.4, 1.8) : 1.0;
    const double bottom = kind > 0.85 ? -uniform_real(rng, 0.4, 0.7) : 0.0;
    const int strokes = uniform01(rng) < 0.7 ? 1 : 2;
    for (int s = 0; s < strokes; ++s) {
      const int points = 3 + static_cast<int>(uniform_index(rng, 3));
      std::vector<Point> ctrl;
      for (int p = 0; p < points; ++p) {
        // Loops and hooks come from extra lateral swing at high curvature.
        const double swing = 0.25 * style.curvature * (uniform01(rng) - 0.5);
        ctrl.push_back({std::clamp(uniform_real(rng, 0.0, glyph.advance) + swing, -0.1, glyph.advance + 0.1),
                        uniform_real(rng, bottom, top)});
      }
      glyph.strokes.push_back(trace_stroke(ctrl, style.curvature));
    }
    glyphs.push_back(std::move(glyph));
  }
  return glyphs;
}

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), cover_(static_cast<std::size_t>(w) * h, 0.0) {}

  void stamp(double cx, double cy, double radius) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
    const int x1 = std::min(w_ - 1, static_cast<int>(std::ceil(cx + radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
    const int y1 = std::min(h_ - 1, static_cast<int>(std::ceil(cy + radius + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        const double c = std::clamp(radius + 0.5 - d, 0.0, 1.0);
        double& v = cover_[static_cast<std::size_t>(y) * w_ + x];
        v = std::max(v, c);
      }
    }
  }

  void segment(Point a, Point b, double radius) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.35)));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      stamp(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, radius);
    }
  }

  const std::vector<double>& coverage() const { return cover_; }

 private:
  int w_, h_;
  std::vector<double> cover_;
};

}  // namespace

WriterStyle gen_style(std::uint64_t writer_seed) {
  Rng rng(derive_seed(writer_seed, "style"));
  WriterStyle s;
  s.slant = uniform_real(rng, -StyleBounds::slant_max, StyleBounds::slant_max);
  s.stroke_width = uniform_real(rng, StyleBounds::stroke_min, StyleBounds::stroke_max);
  s.letter_spacing = uniform_real(rng, StyleBounds::spacing_min, StyleBounds::spacing_max);
  s.curvature = uniform01(rng);
  s.baseline_wobble = uniform_real(rng, 0.0, StyleBounds::wobble_max);
  s.x_height = uniform_real(rng, StyleBounds::x_height_min, StyleBounds::x_height_max);
  s.ink = uniform_real(rng, StyleBounds::ink_min, StyleBounds::ink_max);
  s.glyph_seed = derive_seed(writer_seed, "glyphs");
  return s;
}

RenderedPage render_page(const WriterStyle& style, std::uint64_t content_seed, int width, int height, double noise) {
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("render: noise level must lie in [0, 1]");
  const double pitch = style.x_height * kLinePitch;
  const double margin_x = 0.08 * width;
  const double usable_w = width - 2.0 * margin_x;
  Rng rng(derive_seed(content_seed, "content"));
  const double top = std::round(uniform_real(rng, 0.06, 0.14) * height) + 1.8 * style.x_height;
  const double bottom_limit = height - 0.06 * height - 0.8 * style.x_height;
  const int max_lines = static_cast<int>(std::floor((bottom_limit - top) / pitch)) + 1;
  if (max_lines < 3 || usable_w < 8.0 * style.x_height)
    throw DataError("render: page " + std::to_string(width) + "x" + std::to_string(height) +
                    " too small for 3 text lines");
  const int lines = std::max(3, static_cast<int>(std::lround(max_lines * uniform_real(rng, 0.6, 1.0))));

  const auto alphabet = make_alphabet(style);
  Canvas canvas(width, height);
  const double radius = 0.5 * style.stroke_width;
  const double shear = std::tan(style.slant);
  const double word_gap = style.letter_spacing * 2.0 + 0.5 * style.x_height;

  for (int line = 0; line < lines; ++line) {
    const double baseline = top + line * pitch;
    const double phase = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    const double period = uniform_real(rng, 80.0, 160.0);
    const double line_end = margin_x + usable_w * (line + 1 == lines ? uniform_real(rng, 0.4, 1.0) : 1.0);
    double cursor = margin_x + (line == 0 ? uniform_real(rng, 0.0, 2.0 * style.x_height) : 0.0);
    while (true) {
      const int letters = 2 + static_cast<int>(uniform_index(rng, 6));
      std::vector<const Glyph*> word;
      double word_w = 0.0;
      for (int l = 0; l < letters; ++l) {
        word.push_back(&alphabet[uniform_index(rng, alphabet.size())]);
        word_w += word.back()->advance * style.x_height + style.letter_spacing;
      }
      if (cursor + word_w > line_end) break;
      for (const Glyph* g : word) {
        for (const auto& stroke : g->strokes) {
          std::vector<Point> page_pts;
          for (const Point& p : stroke) {
            const double gx = cursor + p.x * style.x_height;
            const double gy = p.y * style.x_height;
            const double x = gx + gy * shear;
            const double y = baseline - gy + style.baseline_wobble * std::sin(phase + 2.0 * std::numbers::pi * x / period);
            page_pts.push_back({x, y});
          }
          for (std::size_t i = 0; i + 1 < page_pts.size(); ++i) canvas.segment(page_pts[i], page_pts[i + 1], radius);
        }
        cursor += g->advance * style.x_height + style.letter_spacing;
      }
      cursor += word_gap;
    }
  }

  RenderedPage page;
  page.image = GrayImage(width, height, kPaper);
  const auto& cover = canvas.coverage();
  std::size_t ink = 0;
  page.text_box = TextBox{width, height, -1, -1};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double c = cover[static_cast<std::size_t>(y) * width + x];
      page.image.at(x, y) = kPaper - c * (kPaper - style.ink);
      if (c >= 0.5) {
        ++ink;
        page.text_box.x0 = std::min(page.text_box.x0, x);
        page.text_box.y0 = std::min(page.text_box.y0, y);
        page.text_box.x1 = std::max(page.text_box.x1, x);
        page.text_box.y1 = std::max(page.text_box.y1, y);
      }
    }
  }
  page.ink_fraction = static_cast<double>(ink) / (static_cast<double>(width) * height);

  if (noise > 0.0) {
    Rng nrng(derive_seed(content_seed, "noise"));
    const double gx = uniform_real(nrng, -1.0, 1.0), gy = uniform_real(nrng, -1.0, 1.0);
    const int blotches = static_cast<int>(std::lround(6.0 * noise));
    struct Blotch {
      double x, y, rx, ry, depth;
    };
    std::vector<Blotch> bl;
    for (int b = 0; b < blotches; ++b)
      bl.push_back({uniform_real(nrng, 0, width), uniform_real(nrng, 0, height), uniform_real(nrng, 8, 40),
                    uniform_real(nrng, 8, 40), noise * uniform_real(nrng, 0.15, 0.45)});
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = page.image.at(x, y);
        v += 0.08 * noise * (gx * (x / static_cast<double>(width) - 0.5) + gy * (y / static_cast<double>(height) - 0.5));
        for (const auto& b : bl) {
          const double r2 = ((x - b.x) * (x - b.x)) / (b.rx * b.rx) + ((y - b.y) * (y - b.y)) / (b.ry * b.ry);
          if (r2 < 4.0) v -= b.depth * std::exp(-1.5 * r2);
        }
        v += 0.04 * noise * normal01(nrng);
        page.image.at(x, y) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return page;
}

GrayImage render_document(const WriterStyle& style, std::uint64_t content_seed, int width, int height, double noise) {
  return render_page(style, content_seed, width, height, noise).image;
}

double box_coverage(const TextBox& truth, int x0, int y0, int x1, int y1) {
  if (truth.x1 < truth.x0 || truth.y1 < truth.y0) return 0.0;
  const int ix0 = std::max(truth.x0, x0), iy0 = std::max(truth.y0, y0);
  const int ix1 = std::min(truth.x1, x1), iy1 = std::min(truth.y1, y1);
  if (ix1 < ix0 || iy1 < iy0) return 0.0;
  return static_cast<double>(ix1 - ix0 + 1) * (iy1 - iy0 + 1) / static_cast<double>(truth.area());
}

void DatasetOptions::validate() const {
  if (writers < 2) throw ConfigError("synth: need at least 2 writers");
  if (docs_per_writer < 1) throw ConfigError("synth: docs_per_writer must be >= 1");
  if (zero_shot) {
    const int test = test_writers < 0 ? writers / 2 : test_writers;
    if (test < 1 || test >= writers) throw ConfigError("synth: test_writers must lie in [1, writers)");
    if (val_writers < 0 || val_writers >= writers - test) throw ConfigError("synth: val_writers leaves no train writers");
  }
  if (duplicate_pairs && docs_per_writer % 2 != 0) throw ConfigError("synth: duplicate_pairs needs an even docs_per_writer");
}

Manifest gen_dataset(const DatasetOptions& opts, const std::filesystem::path& out_dir) {
  opts.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw DataError("synth: cannot create directory " + out_dir.string());

  const int test = opts.test_writers < 0 ? opts.writers / 2 : opts.test_writers;
  const int train_end = opts.writers - test;
  std::vector<ManifestEntry> entries;
  nlohmann::json truth = nlohmann::json::object();
  for (int w = 0; w < opts.writers; ++w) {
    const std::uint64_t writer_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(w));
    const WriterStyle style = gen_style(writer_seed);
    char writer_id[32];
    std::snprintf(writer_id, sizeof writer_id, "w%03d", w);
    for (int d = 0; d < opts.docs_per_writer; ++d) {
      const int content = opts.duplicate_pairs ? d / 2 : d;
      const RenderedPage page = render_page(style, derive_seed(writer_seed, static_cast<std::uint64_t>(1000 + content)),
                                            opts.page_width, opts.page_height, opts.noise);
      char name[48];
      std::snprintf(name, sizeof name, "%s_d%02d.png", writer_id, d);
      write_png(page.image, out_dir / name);
      Split split;
      if (opts.zero_shot)
        split = w >= train_end ? Split::test : (w >= train_end - opts.val_writers ? Split::val : Split::train);
      else
        split = d < (opts.docs_per_writer + 1) / 2 ? Split::train : Split::test;
      entries.push_back({name, writer_id, split});
      truth[name] = {page.text_box.x0, page.text_box.y0, page.text_box.x1, page.text_box.y1};
    }
  }
  Manifest m(std::move(entries), out_dir);
  {
    std::ofstream out(out_dir / "manifest.csv");
    out << m.to_csv();
    if (!out) throw DataError("synth: cannot write manifest.csv");
  }
  {
    std::ofstream out(out_dir / "truth_boxes.json");
    out << truth.dump(1) << '\n';
    if (!out) throw DataError("synth: cannot write truth_boxes.json");
  }
  return m;
}

}  // namespace wi
