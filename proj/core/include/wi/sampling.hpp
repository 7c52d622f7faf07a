#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wi/image.hpp"
#include "wi/rng.hpp"
#include "wi/sift.hpp"

namespace wi {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(std::string_view s);

struct ManifestEntry {
  std::string image_path;
  std::string writer_id;
  Split split = Split::train;
};

/// Dataset index. Relative image paths resolve against base_dir.
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::vector<ManifestEntry> entries, std::filesystem::path base_dir = {});

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Entry indices per writer restricted to one split, writers in sorted order.
  std::map<std::string, std::vector<std::size_t>> writer_index(Split split) const;
  std::vector<std::size_t> indices(Split split) const;
  std::vector<std::string> writers(Split split) const;

  /// Train writers with fewer than two train images (triplet-infeasible).
  const std::vector<std::string>& flagged_writers() const { return flagged_; }

  std::filesystem::path resolve(const ManifestEntry& e) const;
  std::string to_csv() const;

 private:
  std::vector<ManifestEntry> entries_;
  std::filesystem::path base_dir_;
  std::vector<std::string> flagged_;
};

/// CSV with header image_path,writer_id,split.
Manifest parse_manifest(std::string_view csv, const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::filesystem::path& path);

enum class AnchorKind { random, sift };

std::string to_string(AnchorKind k);
AnchorKind anchor_kind_from_string(std::string_view s);

struct Patch {
  GrayImage pixels;
  std::string source_path;
  /// Integer centre (top-left + side / 2).
  int cx = 0;
  int cy = 0;
  AnchorKind anchor_kind = AnchorKind::random;
};

/// Square patches with top-left corners uniform over all valid positions.
std::vector<Patch> random_patches(const GrayImage& img, int side, int count, std::uint64_t seed,
                                  const std::string& source_path = {});
std::vector<Patch> random_patches(const GrayImage& img, int side, int count, Rng& rng,
                                  const std::string& source_path = {});

/// Patches centred on keypoints at least side/2 from the border. Sampling is
/// without replacement until the valid keypoints run out, then with.
std::vector<Patch> sift_anchored_patches(const GrayImage& img, const std::vector<Keypoint>& keypoints, int side,
                                         int count, std::uint64_t seed, const std::string& source_path = {});

/// Per-patch zero mean / unit variance; a constant patch maps to zeros.
std::vector<double> standardize(const GrayImage& patch);

struct TripletBatch {
  std::vector<Patch> anchors;
  std::vector<Patch> positives;
  std::vector<Patch> negatives;
  std::vector<std::string> anchor_writers;
  std::vector<std::string> negative_writers;
  std::vector<std::size_t> anchor_entries;
  std::vector<std::size_t> positive_entries;
  std::vector<std::size_t> negative_entries;

  std::size_t size() const { return anchors.size(); }
};

/// Draws one patch from the given manifest entry.
using PatchSource = std::function<Patch(std::size_t entry_index, Rng& rng)>;

TripletBatch sample_triplets(const Manifest& m, Split split, const PatchSource& source, int batch, Rng& rng);
TripletBatch sample_triplets(const Manifest& m, const PatchSource& source, int batch, std::uint64_t seed);

}  // namespace wi
