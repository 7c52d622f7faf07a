#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wi/config.hpp"
#include "wi/embed.hpp"
#include "wi/pca.hpp"
#include "wi/retrieval.hpp"
#include "wi/sampling.hpp"
#include "wi/sift.hpp"

namespace wi {

/// A manifest image after AOI selection and resizing, ready for patching.
struct PreparedDocument {
  std::string id;
  GrayImage image;
  /// AOI box in original-image pixels; the whole image when AOI fell back.
  ComponentBox region;
  bool aoi_used = false;
  std::string aoi_note;
  /// Keypoints in processed-image pixels (sift anchors only).
  std::vector<Keypoint> keypoints;
  /// Derived from the pixel content so identical pages get identical patches.
  std::uint64_t patch_seed = 0;
};

/// AOI on the original image (falling back to the whole page when no text
/// is found or the crop is smaller than a patch), then resize.
PreparedDocument prepare_document(const GrayImage& original, const PipelineConfig& cfg,
                                  const std::filesystem::path& source_path, const std::string& id);

/// The inference-time patch set of a document.
std::vector<Patch> document_patches(const PreparedDocument& doc, const PreprocessConfig& p);

/// One training patch; sift anchors fall back to random when none are valid.
Patch draw_patch(const PreparedDocument& doc, const PreprocessConfig& p, Rng& rng);

/// Lazily prepared documents of one manifest. prepare() is the only
/// mutating call and runs per-image work on `jobs` threads.
class DocumentStore {
 public:
  DocumentStore(Manifest manifest, PipelineConfig cfg);

  const Manifest& manifest() const { return manifest_; }
  const PipelineConfig& config() const { return cfg_; }

  void prepare(const std::vector<std::size_t>& entries);
  void prepare_split(Split split) { prepare(manifest_.indices(split)); }
  const PreparedDocument& document(std::size_t entry) const;

  /// Requires the referenced entries to be prepared already.
  PatchSource patch_source() const;

 private:
  Manifest manifest_;
  PipelineConfig cfg_;
  std::vector<std::optional<PreparedDocument>> docs_;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Embeds every document of the split in manifest order.
std::vector<EmbeddingMatrix> embed_split(DocumentStore& store, const MlpExtractor& e, Split split);

/// Loads <features_dir>/<image stem>.wifv for each document of the split.
std::vector<EmbeddingMatrix> import_split_features(const Manifest& m, Split split,
                                                   const std::filesystem::path& features_dir);

struct Evaluation {
  RetrievalReport retrieval;
  std::vector<std::string> documents;
  std::size_t pca_dims = 0;
  std::optional<PcaModel> pca;
  std::vector<std::size_t> patch_counts;
};

/// Optional per-patch PCA (fitted on all patch rows) -> mean pool -> distances
/// -> leave-one-out retrieval.
Evaluation evaluate_embeddings(const std::vector<EmbeddingMatrix>& docs, const std::vector<std::string>& labels,
                               const PostprocConfig& post, std::size_t pca_dims);

/// Extractor from cfg.extractor.checkpoint, or a seeded untrained one.
MlpExtractor resolve_extractor(const PipelineConfig& cfg);

/// Test-split evaluation. Features come from data.features_dir when set,
/// otherwise from the extractor.
Evaluation evaluate_pipeline(DocumentStore& store, const MlpExtractor* extractor);

/// Deterministic report: resolved config, metrics, per-query detail, AP
/// histogram and run metadata.
std::string report_to_json(const Evaluation& ev, const PipelineConfig& cfg, const DocumentStore* store = nullptr);

/// "config_hash,top1,top5,p@2,map" header plus one row.
std::string summary_csv(const Evaluation& ev, const PipelineConfig& cfg, bool header = true);

}  // namespace wi
