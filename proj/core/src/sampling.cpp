#include "wi/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wi/error.hpp"

namespace wi {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Patch cut_patch(const GrayImage& img, int x0, int y0, int side, AnchorKind kind, const std::string& source) {
  return Patch{crop(img, x0, y0, side, side), source, x0 + side / 2, y0 + side / 2, kind};
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + std::string(s) + "' (expected train|val|test)");
}

std::string to_string(AnchorKind k) { return k == AnchorKind::sift ? "sift" : "random"; }

AnchorKind anchor_kind_from_string(std::string_view s) {
  if (s == "random") return AnchorKind::random;
  if (s == "sift") return AnchorKind::sift;
  throw ConfigError("unknown anchor kind '" + std::string(s) + "' (expected random|sift)");
}

Manifest::Manifest(std::vector<ManifestEntry> entries, std::filesystem::path base_dir)
    : entries_(std::move(entries)), base_dir_(std::move(base_dir)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.image_path).second) throw DataError("manifest: duplicate image path " + e.image_path);
    if (e.writer_id.empty()) throw DataError("manifest: empty writer_id for " + e.image_path);
  }
  for (const auto& [writer, idx] : writer_index(Split::train))
    if (idx.size() < 2) flagged_.push_back(writer);
}

std::map<std::string, std::vector<std::size_t>> Manifest::writer_index(Split split) const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].split == split) out[entries_[i].writer_id].push_back(i);
  return out;
}

std::vector<std::size_t> Manifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].split == split) out.push_back(i);
  return out;
}

std::vector<std::string> Manifest::writers(Split split) const {
  std::vector<std::string> out;
  for (const auto& [w, _] : writer_index(split)) out.push_back(w);
  return out;
}

std::filesystem::path Manifest::resolve(const ManifestEntry& e) const {
  const std::filesystem::path p(e.image_path);
  return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
}

std::string Manifest::to_csv() const {
  std::ostringstream os;
  os << "image_path,writer_id,split\n";
  for (const auto& e : entries_) os << e.image_path << ',' << e.writer_id << ',' << to_string(e.split) << '\n';
  return os.str();
}

Manifest parse_manifest(std::string_view csv, const std::filesystem::path& base_dir) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest: empty file");
  const auto header = split_csv_line(line);
  int col_path = -1, col_writer = -1, col_split = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "image_path") col_path = i;
    if (header[i] == "writer_id") col_writer = i;
    if (header[i] == "split") col_split = i;
  }
  if (col_path < 0) throw DataError("manifest: missing column image_path");
  if (col_writer < 0) throw DataError("manifest: missing column writer_id");
  if (col_split < 0) throw DataError("manifest: missing column split");

  std::vector<ManifestEntry> entries;
  int line_no = 1;
  const auto needed = static_cast<std::size_t>(std::max({col_path, col_writer, col_split}) + 1);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() < needed) throw DataError("manifest: line " + std::to_string(line_no) + " has too few columns");
    entries.push_back({cols[col_path], cols[col_writer], split_from_string(cols[col_split])});
  }
  return Manifest(std::move(entries), base_dir);
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::vector<Patch> random_patches(const GrayImage& img, int side, int count, std::uint64_t seed,
                                  const std::string& source_path) {
  Rng rng(seed);
  return random_patches(img, side, count, rng, source_path);
}

std::vector<Patch> random_patches(const GrayImage& img, int side, int count, Rng& rng, const std::string& source_path) {
  if (side < 1 || count < 0) throw ConfigError("random_patches: side must be >= 1 and count >= 0");
  if (img.width < side || img.height < side)
    throw DataError("random_patches: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " smaller than patch side " + std::to_string(side));
  std::vector<Patch> out;
  out.reserve(count);
  const auto nx = static_cast<std::uint64_t>(img.width - side + 1);
  const auto ny = static_cast<std::uint64_t>(img.height - side + 1);
  for (int i = 0; i < count; ++i) {
    const int x0 = static_cast<int>(uniform_index(rng, nx));
    const int y0 = static_cast<int>(uniform_index(rng, ny));
    out.push_back(cut_patch(img, x0, y0, side, AnchorKind::random, source_path));
  }
  return out;
}

std::vector<Patch> sift_anchored_patches(const GrayImage& img, const std::vector<Keypoint>& keypoints, int side,
                                         int count, std::uint64_t seed, const std::string& source_path) {
  if (side < 1 || count < 0) throw ConfigError("sift_anchored_patches: side must be >= 1 and count >= 0");
  std::vector<std::pair<int, int>> corners;
  for (const auto& kp : keypoints) {
    const int x0 = static_cast<int>(std::lround(kp.x)) - side / 2;
    const int y0 = static_cast<int>(std::lround(kp.y)) - side / 2;
    if (x0 >= 0 && y0 >= 0 && x0 + side <= img.width && y0 + side <= img.height) corners.emplace_back(x0, y0);
  }
  if (corners.empty()) throw DataError("no valid anchors");

  Rng rng(seed);
  std::vector<std::size_t> order(corners.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Partial Fisher-Yates for the distinct draws.
  const std::size_t distinct = std::min<std::size_t>(count, order.size());
  for (std::size_t i = 0; i < distinct; ++i) std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);

  std::vector<Patch> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::size_t pick = static_cast<std::size_t>(i) < distinct ? order[i] : uniform_index(rng, corners.size());
    out.push_back(cut_patch(img, corners[pick].first, corners[pick].second, side, AnchorKind::sift, source_path));
  }
  return out;
}

std::vector<double> standardize(const GrayImage& patch) {
  std::vector<double> out(patch.pixels.size(), 0.0);
  if (out.empty()) return out;
  double mean = 0.0;
  for (double v : patch.pixels) mean += v;
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double v : patch.pixels) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.size());
  if (var <= 1e-24) return out;
  const double inv = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (patch.pixels[i] - mean) * inv;
  return out;
}

TripletBatch sample_triplets(const Manifest& m, Split split, const PatchSource& source, int batch, Rng& rng) {
  if (batch < 1) throw ConfigError("sample_triplets: batch must be >= 1");
  const auto index = m.writer_index(split);
  if (index.size() < 2) throw DataError("sample_triplets: need at least 2 writers in split " + to_string(split));

  std::vector<const std::string*> writers;
  std::vector<const std::string*> eligible;
  for (const auto& [w, idx] : index) {
    writers.push_back(&w);
    if (idx.size() >= 2) eligible.push_back(&w);
  }
  if (eligible.empty()) eligible = writers;

  TripletBatch out;
  for (int i = 0; i < batch; ++i) {
    const std::string& aw = *eligible[uniform_index(rng, eligible.size())];
    const auto& imgs = index.at(aw);
    const std::size_t ai = uniform_index(rng, imgs.size());
    std::size_t pi = ai;
    if (imgs.size() >= 2) {
      pi = uniform_index(rng, imgs.size() - 1);
      if (pi >= ai) ++pi;
    }
    std::size_t nwi = uniform_index(rng, writers.size() - 1);
    const std::size_t awi = static_cast<std::size_t>(
        std::find_if(writers.begin(), writers.end(), [&](const std::string* w) { return *w == aw; }) - writers.begin());
    if (nwi >= awi) ++nwi;
    const std::string& nw = *writers[nwi];
    const auto& nimgs = index.at(nw);
    const std::size_t ni = nimgs[uniform_index(rng, nimgs.size())];

    out.anchor_entries.push_back(imgs[ai]);
    out.positive_entries.push_back(imgs[pi]);
    out.negative_entries.push_back(ni);
    out.anchor_writers.push_back(aw);
    out.negative_writers.push_back(nw);
    out.anchors.push_back(source(imgs[ai], rng));
    out.positives.push_back(source(imgs[pi], rng));
    out.negatives.push_back(source(ni, rng));
  }
  return out;
}

TripletBatch sample_triplets(const Manifest& m, const PatchSource& source, int batch, std::uint64_t seed) {
  Rng rng(seed);
  return sample_triplets(m, Split::train, source, batch, rng);
}

}  // namespace wi
