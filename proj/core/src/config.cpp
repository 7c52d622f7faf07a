#include "wi/config.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "wi/error.hpp"
#include "wi/rng.hpp"

namespace wi {
namespace {

using nlohmann::json;

json to_json_tree(const PipelineConfig& c) {
  const auto& p = c.preprocessing;
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["data"] = {{"manifest", c.data.manifest}, {"features_dir", c.data.features_dir}};
  j["preprocessing"] = {
      {"resize", p.resize},
      {"aoi", {{"enabled", p.aoi_enabled}, {"dilation", {p.aoi.dilation.height, p.aoi.dilation.width}}, {"top_k", p.aoi.top_k}}},
      {"binarizer",
       {{"kind", to_string(p.binarizer.kind)},
        {"sauvola_window", p.binarizer.sauvola_window},
        {"sauvola_k", p.binarizer.sauvola_k},
        {"external_path_template", p.binarizer.external_path_template},
        {"external_ink_white", p.binarizer.external_ink_white}}},
      {"patch", {{"side", p.patch_side}, {"per_doc", p.patches_per_doc}, {"anchor", to_string(p.anchor)}}},
      {"sift",
       {{"octaves", p.sift.octaves},
        {"scales_per_octave", p.sift.scales_per_octave},
        {"base_sigma", p.sift.base_sigma},
        {"assumed_blur", p.sift.assumed_blur},
        {"contrast_thresh", p.sift.contrast_thresh},
        {"edge_ratio_thresh", p.sift.edge_ratio_thresh}}}};
  j["extractor"] = {{"hidden", c.extractor.hidden}, {"output_dim", c.extractor.output_dim}, {"checkpoint", c.extractor.checkpoint}};
  j["loss"] = {{"triplet", {{"variant", to_string(c.triplet.variant)}, {"margin", c.triplet.margin}, {"lambda", c.triplet.lambda}}},
               {"arcface", {{"margin", c.arcface.margin}, {"scale", c.arcface.scale}}}};
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon},
                    {"weight_decay", c.optimizer.weight_decay}};
  j["train"] = {{"stage", to_string(c.train.stage)},
                {"steps", c.train.steps},
                {"batch_size", c.train.batch_size},
                {"eval_every", c.train.eval_every},
                {"convergence_window", c.train.convergence_window},
                {"convergence_tol", c.train.convergence_tol}};
  j["postproc"] = {{"pooling", c.postproc.pooling},
                   {"pca_dims", c.postproc.pca_dims},
                   {"metric", to_string(c.postproc.metric)},
                   {"sweep_pca", c.postproc.sweep_pca}};
  return j;
}

// Both directions: missing keys and unknown keys are errors.
void check_keys(const json& given, const json& layout, const std::string& prefix) {
  for (auto it = layout.begin(); it != layout.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!given.contains(it.key())) throw ConfigError("missing config key: " + key);
    if (it.value().is_object()) {
      if (!given.at(it.key()).is_object()) throw ConfigError("config key " + key + " must be an object");
      check_keys(given.at(it.key()), it.value(), key);
    }
  }
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!layout.contains(it.key()))
      throw ConfigError("unknown config key: " + (prefix.empty() ? it.key() : prefix + "." + it.key()));
  }
}

template <typename T>
T get(const json& root, const std::string& dotted) {
  const json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    node = &node->at(dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number()) throw ConfigError("config key " + dotted + " must be a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!node->is_number_integer()) throw ConfigError("config key " + dotted + " must be an integer");
    }
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + dotted + " has the wrong type");
  }
}

PipelineConfig from_tree(const json& j) {
  check_keys(j, to_json_tree(PipelineConfig{}), "");
  PipelineConfig c;
  c.seed = get<std::uint64_t>(j, "seed");
  c.jobs = get<int>(j, "jobs");
  c.data.manifest = get<std::string>(j, "data.manifest");
  c.data.features_dir = get<std::string>(j, "data.features_dir");
  auto& p = c.preprocessing;
  p.resize = get<double>(j, "preprocessing.resize");
  p.aoi_enabled = get<bool>(j, "preprocessing.aoi.enabled");
  const auto dil = get<std::vector<int>>(j, "preprocessing.aoi.dilation");
  if (dil.size() != 2) throw ConfigError("config key preprocessing.aoi.dilation must be [height, width]");
  p.aoi.dilation = {dil[0], dil[1]};
  p.aoi.top_k = get<int>(j, "preprocessing.aoi.top_k");
  p.binarizer.kind = binarizer_kind_from_string(get<std::string>(j, "preprocessing.binarizer.kind"));
  p.binarizer.sauvola_window = get<int>(j, "preprocessing.binarizer.sauvola_window");
  p.binarizer.sauvola_k = get<double>(j, "preprocessing.binarizer.sauvola_k");
  p.binarizer.external_path_template = get<std::string>(j, "preprocessing.binarizer.external_path_template");
  p.binarizer.external_ink_white = get<bool>(j, "preprocessing.binarizer.external_ink_white");
  p.patch_side = get<int>(j, "preprocessing.patch.side");
  p.patches_per_doc = get<int>(j, "preprocessing.patch.per_doc");
  p.anchor = anchor_kind_from_string(get<std::string>(j, "preprocessing.patch.anchor"));
  p.sift.octaves = get<int>(j, "preprocessing.sift.octaves");
  p.sift.scales_per_octave = get<int>(j, "preprocessing.sift.scales_per_octave");
  p.sift.base_sigma = get<double>(j, "preprocessing.sift.base_sigma");
  p.sift.assumed_blur = get<double>(j, "preprocessing.sift.assumed_blur");
  p.sift.contrast_thresh = get<double>(j, "preprocessing.sift.contrast_thresh");
  p.sift.edge_ratio_thresh = get<double>(j, "preprocessing.sift.edge_ratio_thresh");
  c.extractor.hidden = get<std::vector<int>>(j, "extractor.hidden");
  c.extractor.output_dim = get<int>(j, "extractor.output_dim");
  c.extractor.checkpoint = get<std::string>(j, "extractor.checkpoint");
  c.triplet.variant = triplet_variant_from_string(get<std::string>(j, "loss.triplet.variant"));
  c.triplet.margin = get<double>(j, "loss.triplet.margin");
  c.triplet.lambda = get<double>(j, "loss.triplet.lambda");
  c.arcface.margin = get<double>(j, "loss.arcface.margin");
  c.arcface.scale = get<double>(j, "loss.arcface.scale");
  c.optimizer.learning_rate = get<double>(j, "optimizer.learning_rate");
  c.optimizer.beta1 = get<double>(j, "optimizer.beta1");
  c.optimizer.beta2 = get<double>(j, "optimizer.beta2");
  c.optimizer.epsilon = get<double>(j, "optimizer.epsilon");
  c.optimizer.weight_decay = get<double>(j, "optimizer.weight_decay");
  c.train.stage = train_stage_from_string(get<std::string>(j, "train.stage"));
  c.train.steps = get<int>(j, "train.steps");
  c.train.batch_size = get<int>(j, "train.batch_size");
  c.train.eval_every = get<int>(j, "train.eval_every");
  c.train.convergence_window = get<int>(j, "train.convergence_window");
  c.train.convergence_tol = get<double>(j, "train.convergence_tol");
  c.postproc.pooling = get<std::string>(j, "postproc.pooling");
  c.postproc.pca_dims = get<int>(j, "postproc.pca_dims");
  c.postproc.metric = distance_metric_from_string(get<std::string>(j, "postproc.metric"));
  c.postproc.sweep_pca = get<std::vector<int>>(j, "postproc.sweep_pca");
  c.validate();
  return c;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (!std::isfinite(resize) || !(resize > 0.0 && resize <= 1.0))
    throw ConfigError("preprocessing.resize must lie in (0, 1]");
  aoi.validate();
  binarizer.validate();
  if (patch_side < 4) throw ConfigError("preprocessing.patch.side must be >= 4");
  if (patches_per_doc < 1) throw ConfigError("preprocessing.patch.per_doc must be >= 1");
  sift.validate();
}

std::vector<int> ExtractorConfig::layer_dims(int patch_side) const {
  std::vector<int> dims{patch_side * patch_side};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  return dims;
}

void PostprocConfig::validate() const {
  if (pooling != "mean") throw ConfigError("postproc.pooling must be \"mean\"");
  if (pca_dims < 0) throw ConfigError("postproc.pca_dims must be >= 0");
  for (int d : sweep_pca)
    if (d < 0) throw ConfigError("postproc.sweep_pca entries must be >= 0");
}

void PipelineConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  preprocessing.validate();
  for (int h : extractor.hidden)
    if (h < 1) throw ConfigError("extractor.hidden entries must be >= 1");
  if (extractor.output_dim < 1) throw ConfigError("extractor.output_dim must be >= 1");
  postproc.validate();
  train_config().validate();
}

TrainConfig PipelineConfig::train_config() const {
  TrainConfig t;
  t.stage = train.stage;
  t.steps = train.steps;
  t.batch_size = train.batch_size;
  t.seed = seed;
  t.triplet = triplet;
  t.arcface = arcface;
  t.optimizer = optimizer;
  t.eval_every = train.eval_every;
  t.convergence_window = train.convergence_window;
  t.convergence_tol = train.convergence_tol;
  return t;
}

std::string config_to_json(const PipelineConfig& c) { return to_json_tree(c).dump(2); }

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("config") && j.contains("metrics")) j = j.at("config");
  return from_tree(j);
}

void apply_override(PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json tree = to_json_tree(c);
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key: " + key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  if (node->is_string() && !value.is_string()) value = raw;
  *node = value;
  c = from_tree(tree);
}

std::string config_hash(const PipelineConfig& c) {
  const std::string text = config_to_json(c);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  return buf;
}

}  // namespace wi
