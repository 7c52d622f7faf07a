#include "wi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wi/error.hpp"
#include "wi/image_io.hpp"
#include "wi/rng.hpp"
#include "wi/text_aoi.hpp"
#include "wi/train.hpp"

namespace wi {
namespace {

using nlohmann::json;

ComponentBox whole_image(const GrayImage& img) {
  return {0, 0, 0, img.width - 1, img.height - 1, static_cast<std::int64_t>(img.width) * img.height};
}

int scaled(int dim, double r) { return std::max(1, static_cast<int>(std::lround(dim * r))); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

PreparedDocument prepare_document(const GrayImage& original, const PipelineConfig& cfg,
                                  const std::filesystem::path& source_path, const std::string& id) {
  const PreprocessConfig& p = cfg.preprocessing;
  if (original.empty()) throw DataError("empty image: " + id);
  PreparedDocument doc;
  doc.id = id;
  doc.region = whole_image(original);

  if (p.aoi_enabled) {
    if (std::min(original.width, original.height) < 32) {
      doc.aoi_note = "image smaller than 32 px; whole page used";
    } else {
      try {
        const auto crops = select_aoi(original, p.binarizer, p.aoi, source_path);
        ComponentBox u = crops.front().source_box;
        for (const auto& c : crops) {
          u.x0 = std::min(u.x0, c.source_box.x0);
          u.y0 = std::min(u.y0, c.source_box.y0);
          u.x1 = std::max(u.x1, c.source_box.x1);
          u.y1 = std::max(u.y1, c.source_box.y1);
        }
        if (scaled(u.width(), p.resize) < p.patch_side || scaled(u.height(), p.resize) < p.patch_side) {
          doc.aoi_note = "AOI smaller than patch side; whole page used";
        } else {
          doc.region = u;
          doc.aoi_used = true;
        }
      } catch (const DataError& ex) {
        doc.aoi_note = std::string(ex.what()) + "; whole page used";
      }
    }
  }

  GrayImage work = doc.aoi_used
                       ? crop(original, doc.region.x0, doc.region.y0, doc.region.width(), doc.region.height())
                       : original;
  if (p.resize != 1.0) work = resize(work, ResizeFactor{p.resize});
  if (work.width < p.patch_side || work.height < p.patch_side)
    throw DataError("document " + id + " is " + std::to_string(work.width) + "x" + std::to_string(work.height) +
                    " after preprocessing, smaller than patch side " + std::to_string(p.patch_side));
  doc.image = std::move(work);

  if (p.anchor == AnchorKind::sift && std::min(doc.image.width, doc.image.height) >= 16)
    doc.keypoints = detect_keypoints(build_dog_pyramid(doc.image, p.sift), p.sift);

  const auto& px = doc.image.pixels;
  std::uint64_t h = fnv1a(&doc.image.width, sizeof doc.image.width);
  h = fnv1a(&doc.image.height, sizeof doc.image.height, h);
  h = fnv1a(px.data(), px.size() * sizeof(double), h);
  doc.patch_seed = derive_seed(cfg.seed, h);
  return doc;
}

std::vector<Patch> document_patches(const PreparedDocument& doc, const PreprocessConfig& p) {
  if (p.anchor == AnchorKind::sift) {
    try {
      return sift_anchored_patches(doc.image, doc.keypoints, p.patch_side, p.patches_per_doc, doc.patch_seed, doc.id);
    } catch (const DataError&) {
      // No border-valid keypoint: random patches instead.
    }
  }
  return random_patches(doc.image, p.patch_side, p.patches_per_doc, doc.patch_seed, doc.id);
}

Patch draw_patch(const PreparedDocument& doc, const PreprocessConfig& p, Rng& rng) {
  if (p.anchor == AnchorKind::sift) {
    const std::uint64_t seed = rng();
    try {
      return sift_anchored_patches(doc.image, doc.keypoints, p.patch_side, 1, seed, doc.id).front();
    } catch (const DataError&) {
    }
  }
  return random_patches(doc.image, p.patch_side, 1, rng, doc.id).front();
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  // Report the lowest failing index so errors do not depend on scheduling.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

DocumentStore::DocumentStore(Manifest manifest, PipelineConfig cfg)
    : manifest_(std::move(manifest)), cfg_(std::move(cfg)), docs_(manifest_.entries().size()) {
  cfg_.validate();
}

void DocumentStore::prepare(const std::vector<std::size_t>& entries) {
  std::vector<std::size_t> todo;
  for (std::size_t e : entries) {
    if (e >= docs_.size()) throw DataError("manifest entry " + std::to_string(e) + " out of range");
    if (!docs_[e]) todo.push_back(e);
  }
  std::vector<PreparedDocument> out(todo.size());
  parallel_for(todo.size(), cfg_.jobs, [&](std::size_t i) {
    const ManifestEntry& entry = manifest_.entries()[todo[i]];
    const auto path = manifest_.resolve(entry);
    out[i] = prepare_document(read_image(path), cfg_, path, entry.image_path);
  });
  for (std::size_t i = 0; i < todo.size(); ++i) docs_[todo[i]] = std::move(out[i]);
}

const PreparedDocument& DocumentStore::document(std::size_t entry) const {
  if (entry >= docs_.size() || !docs_[entry])
    throw DataError("document " + std::to_string(entry) + " has not been prepared");
  return *docs_[entry];
}

PatchSource DocumentStore::patch_source() const {
  return [this](std::size_t entry, Rng& rng) { return draw_patch(document(entry), cfg_.preprocessing, rng); };
}

std::vector<EmbeddingMatrix> embed_split(DocumentStore& store, const MlpExtractor& e, Split split) {
  const auto idx = store.manifest().indices(split);
  store.prepare(idx);
  std::vector<EmbeddingMatrix> out(idx.size());
  parallel_for(idx.size(), store.config().jobs, [&](std::size_t i) {
    const PreparedDocument& doc = store.document(idx[i]);
    out[i] = embed_document(e, document_patches(doc, store.config().preprocessing), doc.id);
  });
  return out;
}

std::vector<EmbeddingMatrix> import_split_features(const Manifest& m, Split split,
                                                   const std::filesystem::path& features_dir) {
  std::vector<EmbeddingMatrix> out;
  for (std::size_t i : m.indices(split)) {
    const ManifestEntry& entry = m.entries()[i];
    const auto path = features_dir / (std::filesystem::path(entry.image_path).stem().string() + ".wifv");
    EmbeddingMatrix mat = out.empty() ? import_features(path) : import_features(path, out.front().cols);
    mat.document_id = entry.image_path;
    out.push_back(std::move(mat));
  }
  return out;
}

Evaluation evaluate_embeddings(const std::vector<EmbeddingMatrix>& docs, const std::vector<std::string>& labels,
                               const PostprocConfig& post, std::size_t pca_dims) {
  post.validate();
  if (docs.size() != labels.size())
    throw DataError("evaluation got " + std::to_string(docs.size()) + " documents but " +
                    std::to_string(labels.size()) + " labels");
  if (docs.size() < 2) throw DataError("evaluation needs at least 2 documents");
  Evaluation ev;
  ev.pca_dims = pca_dims;
  for (const auto& d : docs) {
    ev.documents.push_back(d.document_id);
    ev.patch_counts.push_back(d.rows);
  }

  std::vector<FeatureVector> pooled;
  pooled.reserve(docs.size());
  if (pca_dims > 0) {
    EmbeddingMatrix all;
    all.cols = docs.front().cols;
    for (const auto& d : docs) {
      if (d.cols != all.cols) throw DataError("documents have differing feature dimensions");
      all.data.insert(all.data.end(), d.data.begin(), d.data.end());
      all.rows += d.rows;
    }
    ev.pca = pca_fit(all, pca_dims);
    for (const auto& d : docs) pooled.push_back(mean_pool(pca_project(*ev.pca, d)));
  } else {
    for (const auto& d : docs) pooled.push_back(mean_pool(d));
  }
  ev.retrieval = leave_one_out_retrieval(distance_matrix(pooled, post.metric), labels);
  return ev;
}

MlpExtractor resolve_extractor(const PipelineConfig& cfg) {
  if (!cfg.extractor.checkpoint.empty()) {
    MlpExtractor e = load_checkpoint(cfg.extractor.checkpoint).extractor;
    const auto want = cfg.extractor.layer_dims(cfg.preprocessing.patch_side);
    if (e.layer_dims() != want) throw ConfigError("checkpoint layer dims do not match extractor config");
    return e;
  }
  return init_extractor(cfg.extractor.layer_dims(cfg.preprocessing.patch_side), derive_seed(cfg.seed, "extractor"));
}

Evaluation evaluate_pipeline(DocumentStore& store, const MlpExtractor* extractor) {
  const PipelineConfig& cfg = store.config();
  const Manifest& m = store.manifest();
  std::vector<std::string> labels;
  for (std::size_t i : m.indices(Split::test)) labels.push_back(m.entries()[i].writer_id);
  std::vector<EmbeddingMatrix> docs;
  if (!cfg.data.features_dir.empty()) {
    docs = import_split_features(m, Split::test, cfg.data.features_dir);
  } else {
    if (extractor == nullptr) throw ConfigError("evaluation needs an extractor or data.features_dir");
    docs = embed_split(store, *extractor, Split::test);
  }
  return evaluate_embeddings(docs, labels, cfg.postproc, static_cast<std::size_t>(cfg.postproc.pca_dims));
}

std::string report_to_json(const Evaluation& ev, const PipelineConfig& cfg, const DocumentStore* store) {
  const RetrievalReport& r = ev.retrieval;
  json j;
  j["config"] = json::parse(config_to_json(cfg));
  j["config_hash"] = config_hash(cfg);

  json metrics;
  for (const auto& [k, v] : r.top_k) metrics["top" + std::to_string(k)] = v;
  for (const auto& [k, v] : r.precision_at) metrics["p@" + std::to_string(k)] = v;
  metrics["map"] = r.mean_average_precision;
  j["metrics"] = metrics;

  json queries = json::array();
  std::vector<int> histogram(10, 0);
  for (std::size_t q = 0; q < r.labels.size(); ++q) {
    json row;
    row["document"] = ev.documents[q];
    row["writer"] = r.labels[q];
    row["excluded"] = static_cast<bool>(r.excluded[q]);
    if (r.excluded[q]) {
      row["ap"] = nullptr;
    } else {
      row["ap"] = r.average_precision[q];
      histogram[std::min(9, static_cast<int>(r.average_precision[q] * 10.0))]++;
    }
    json ranking = json::array();
    for (std::size_t g : r.rankings[q]) ranking.push_back(ev.documents[g]);
    row["ranking"] = ranking;
    queries.push_back(row);
  }
  j["queries"] = queries;
  j["ap_histogram"] = {{"bin_width", 0.1}, {"counts", histogram}};

  json meta;
  meta["documents"] = ev.documents.size();
  meta["evaluated_queries"] = r.evaluated_queries;
  meta["excluded_queries"] = r.excluded_queries;
  meta["patch_counts"] = ev.patch_counts;
  meta["patches_per_doc"] = cfg.preprocessing.patches_per_doc;
  meta["feature_source"] = cfg.data.features_dir.empty() ? "extractor" : "features_dir";
  meta["pooling"] = cfg.postproc.pooling;
  meta["metric"] = to_string(cfg.postproc.metric);
  if (ev.pca) {
    double ratio = 0.0;
    for (double v : ev.pca->explained_ratio) ratio += v;
    meta["pca"] = {{"dims", ev.pca_dims},
                   {"fit_on", "all patch features of the evaluated documents"},
                   {"explained_ratio", ratio}};
  } else {
    meta["pca"] = nullptr;
  }
  if (store != nullptr && cfg.data.features_dir.empty()) {
    json aoi = json::array();
    int fallbacks = 0;
    for (std::size_t i : store->manifest().indices(Split::test)) {
      const PreparedDocument& d = store->document(i);
      if (!d.aoi_used) ++fallbacks;
      aoi.push_back({{"document", d.id},
                     {"box", {d.region.x0, d.region.y0, d.region.x1, d.region.y1}},
                     {"aoi_used", d.aoi_used},
                     {"note", d.aoi_note}});
    }
    meta["aoi_fallbacks"] = fallbacks;
    meta["aoi"] = aoi;
  }
  j["meta"] = meta;
  return j.dump(2) + "\n";
}

std::string summary_csv(const Evaluation& ev, const PipelineConfig& cfg, bool header) {
  const RetrievalReport& r = ev.retrieval;
  std::ostringstream out;
  if (header) out << "config_hash,top1,top5,p@2,map\n";
  const auto get = [](const std::map<int, double>& m, int k) { return m.count(k) ? m.at(k) : 0.0; };
  out << config_hash(cfg) << ',' << fmt(get(r.top_k, 1)) << ',' << fmt(get(r.top_k, 5)) << ','
      << fmt(get(r.precision_at, 2)) << ',' << fmt(r.mean_average_precision) << '\n';
  return out.str();
}

}  // namespace wi
