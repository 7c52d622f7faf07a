#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wi/binarize.hpp"
#include "wi/losses.hpp"
#include "wi/optimizer.hpp"
#include "wi/retrieval.hpp"
#include "wi/sampling.hpp"
#include "wi/sift.hpp"
#include "wi/text_aoi.hpp"
#include "wi/train.hpp"

namespace wi {

struct DataConfig {
  std::string manifest;
  /// Directory of per-document WIFV1 files named <image stem>.wifv.
  std::string features_dir;
};

struct PreprocessConfig {
  double resize = 0.5;
  bool aoi_enabled = true;
  AoiParams aoi;
  BinarizerSpec binarizer;
  int patch_side = 64;
  int patches_per_doc = 64;
  AnchorKind anchor = AnchorKind::random;
  ScaleSpaceParams sift;

  void validate() const;
};

struct ExtractorConfig {
  std::vector<int> hidden{256, 256};
  int output_dim = 128;
  std::string checkpoint;

  /// [side^2, hidden..., output_dim]
  std::vector<int> layer_dims(int patch_side) const;
};

struct PostprocConfig {
  /// Only "mean" is supported.
  std::string pooling = "mean";
  /// 0 disables PCA.
  int pca_dims = 0;
  DistanceMetric metric = DistanceMetric::euclidean;
  /// PCA settings compared by `sweep`; 0 stands for the original features.
  std::vector<int> sweep_pca{0, 128, 64, 32};

  void validate() const;
};

struct TrainSettings {
  TrainStage stage = TrainStage::triplet;
  int steps = 1000;
  int batch_size = 32;
  int eval_every = 100;
  int convergence_window = 100;
  double convergence_tol = 1e-4;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  DataConfig data;
  PreprocessConfig preprocessing;
  ExtractorConfig extractor;
  TripletLossParams triplet;
  ArcFaceParams arcface;
  OptimizerParams optimizer;
  TrainSettings train;
  PostprocConfig postproc;

  void validate() const;
  TrainConfig train_config() const;
};

/// Canonical JSON text (sorted keys, 2-space indent).
std::string config_to_json(const PipelineConfig& c);

/// Strict parse: every key of the canonical layout must be present and no
/// other key may appear. Errors name the offending dotted key. A report.json
/// is accepted too; its embedded "config" member is used.
PipelineConfig config_from_json(const std::string& text);

/// Applies "dotted.key=value" overrides; the value is parsed as JSON, falling
/// back to a plain string.
void apply_override(PipelineConfig& c, const std::string& assignment);

/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const PipelineConfig& c);

}  // namespace wi
