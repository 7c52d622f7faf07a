// wi: command-line front end of the writer-identification toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wi/binarize.hpp"
#include "wi/config.hpp"
#include "wi/error.hpp"
#include "wi/image_io.hpp"
#include "wi/pipeline.hpp"
#include "wi/sift.hpp"
#include "wi/synth.hpp"
#include "wi/text_aoi.hpp"
#include "wi/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  int jobs = 0;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a, bool required) {
  auto* opt = cmd->add_option("-c,--config", a.path, "JSON config file (a report.json is accepted too)");
  if (required) opt->required();
  cmd->add_option("--set", a.overrides, "Override a config value: dotted.key=value (repeatable)");
  cmd->add_option("-j,--jobs", a.jobs, "Worker threads for per-image stages")->check(CLI::PositiveNumber);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw wi::DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw wi::DataError("cannot write " + path.string());
}

wi::PipelineConfig resolve_config(const ConfigArgs& a) {
  wi::PipelineConfig cfg = a.path.empty() ? wi::PipelineConfig{} : wi::config_from_json(read_text(a.path));
  for (const auto& o : a.overrides) wi::apply_override(cfg, o);
  if (a.jobs > 0) cfg.jobs = a.jobs;
  cfg.validate();
  return cfg;
}

std::string quote(const std::string& s) { return json(s).dump(); }

int run_defaults() {
  std::cout << wi::config_to_json(wi::PipelineConfig{}) << "\n";
  return 0;
}

// synth ---------------------------------------------------------------------

struct SynthArgs {
  wi::DatasetOptions opts;
  std::string out;
  bool no_zero_shot = false;
};

int run_synth(SynthArgs& a) {
  a.opts.zero_shot = !a.no_zero_shot;
  const wi::Manifest m = wi::gen_dataset(a.opts, a.out);
  std::cout << "wrote " << m.entries().size() << " documents and manifest.csv to " << a.out << "\n";
  return 0;
}

// binarize ------------------------------------------------------------------

struct BinarizeArgs {
  ConfigArgs cfg;
  std::string image;
  std::string out;
  std::string truth;
  bool ink_white = false;
  bool ink_black = false;
};

int run_binarize(const BinarizeArgs& a) {
  wi::PipelineConfig cfg = resolve_config(a.cfg);
  if (a.ink_black) cfg.preprocessing.binarizer.external_ink_white = false;
  if (a.ink_white) cfg.preprocessing.binarizer.external_ink_white = true;
  const wi::GrayImage img = wi::read_image(a.image);
  const wi::BinaryMask mask = wi::binarize(img, cfg.preprocessing.binarizer, a.image);
  const fs::path out(a.out);
  if (out.extension() == ".png")
    wi::write_mask_png(mask, out);
  else
    wi::write_mask_pgm(mask, out);
  std::cout << "ink_pixels=" << mask.count() << " total=" << mask.bits.size();
  if (!a.truth.empty()) {
    const wi::BinaryMask truth =
        wi::import_mask(a.truth, {img.width, img.height}, cfg.preprocessing.binarizer.external_ink_white);
    std::cout << " f_measure=" << wi::f_measure(mask, truth);
  }
  std::cout << "\n";
  return 0;
}

// aoi -----------------------------------------------------------------------

struct AoiArgs {
  ConfigArgs cfg;
  std::vector<std::string> images;
  std::string out;
};

int run_aoi(const AoiArgs& a) {
  const wi::PipelineConfig cfg = resolve_config(a.cfg);
  const auto& p = cfg.preprocessing;
  std::vector<std::vector<wi::AoiCrop>> crops(a.images.size());
  wi::parallel_for(a.images.size(), cfg.jobs, [&](std::size_t i) {
    crops[i] = wi::select_aoi(wi::read_image(a.images[i]), p.binarizer, p.aoi, a.images[i]);
  });
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    const std::string stem = fs::path(a.images[i]).stem().string();
    json side;
    side["source"] = a.images[i];
    side["binarizer"] = json::parse(wi::config_to_json(cfg))["preprocessing"]["binarizer"];
    side["dilation"] = {p.aoi.dilation.height, p.aoi.dilation.width};
    side["top_k"] = p.aoi.top_k;
    side["crops"] = json::array();
    for (std::size_t k = 0; k < crops[i].size(); ++k) {
      const auto& c = crops[i][k];
      const std::string name = stem + "_aoi" + std::to_string(k) + ".png";
      wi::write_png(c.image, fs::path(a.out) / name);
      side["crops"].push_back({{"file", name},
                               {"box", {c.source_box.x0, c.source_box.y0, c.source_box.x1, c.source_box.y1}},
                               {"bbox_area", c.source_box.bbox_area()},
                               {"pixel_count", c.source_box.pixel_count}});
    }
    write_text(fs::path(a.out) / (stem + "_aoi.json"), side.dump(2) + "\n");
  }
  std::cout << "wrote AOI crops for " << a.images.size() << " images to " << a.out << "\n";
  return 0;
}

// sift ----------------------------------------------------------------------

struct SiftArgs {
  ConfigArgs cfg;
  std::string image;
  std::string out;
};

int run_sift(const SiftArgs& a) {
  const wi::PipelineConfig cfg = resolve_config(a.cfg);
  const auto features = wi::detect(wi::read_image(a.image), cfg.preprocessing.sift);
  const std::string csv = wi::keypoints_to_csv(features);
  if (a.out.empty())
    std::cout << csv;
  else
    write_text(a.out, csv);
  std::cerr << "keypoints=" << features.size() << "\n";
  return 0;
}

// train / embed / eval / sweep ------------------------------------------------

struct RunArgs {
  ConfigArgs cfg;
  std::string out;
  std::string resume;
  int stop_at = 0;
  std::string split = "test";
};

void write_run_config(const fs::path& dir, const wi::PipelineConfig& cfg) {
  fs::create_directories(dir);
  write_text(dir / "config.json", wi::config_to_json(cfg) + "\n");
}

void write_evaluation(const fs::path& dir, const wi::Evaluation& ev, const wi::PipelineConfig& cfg,
                      const wi::DocumentStore* store) {
  write_text(dir / "report.json", wi::report_to_json(ev, cfg, store));
  write_text(dir / "summary.csv", wi::summary_csv(ev, cfg));
  const auto& r = ev.retrieval;
  std::printf("top1=%.4f top5=%.4f p@2=%.4f map=%.4f queries=%zu excluded=%zu\n", r.top_k.at(1), r.top_k.at(5),
              r.precision_at.at(2), r.mean_average_precision, r.evaluated_queries, r.excluded_queries);
}

int run_train(const RunArgs& a) {
  const wi::PipelineConfig cfg = resolve_config(a.cfg);
  const fs::path dir(a.out);
  write_run_config(dir, cfg);
  wi::DocumentStore store(wi::load_manifest(cfg.data.manifest), cfg);
  store.prepare_split(wi::Split::train);
  store.prepare_split(wi::Split::val);
  const wi::TrainConfig tc = cfg.train_config();

  wi::TrainState state = a.resume.empty() ? wi::start_training(wi::resolve_extractor(cfg), store.manifest(), tc)
                                          : wi::load_checkpoint(a.resume);
  if (state.stage != tc.stage) throw wi::ConfigError("checkpoint stage does not match train.stage");
  const int until = a.stop_at > 0 ? a.stop_at : tc.steps;
  wi::train_steps(state, store.manifest(), store.patch_source(), tc, until);
  wi::save_checkpoint(state, wi::config_to_json(cfg), dir / "checkpoint.wickpt");
  write_text(dir / "loss_trace.csv", wi::trace_to_csv(state.trace));
  std::printf("steps=%d converged=%s final_loss=%.6f\n", state.step, state.converged ? "true" : "false",
              state.trace.empty() ? 0.0 : state.trace.back().train_loss);

  if (!store.manifest().indices(wi::Split::test).empty() && (state.converged || state.step >= tc.steps)) {
    wi::PipelineConfig eval_cfg = cfg;
    eval_cfg.data.features_dir.clear();
    wi::DocumentStore eval_store(store.manifest(), eval_cfg);
    const wi::Evaluation ev = wi::evaluate_pipeline(eval_store, &state.extractor);
    write_evaluation(dir, ev, cfg, &eval_store);
  }
  return 0;
}

int run_embed(const RunArgs& a) {
  const wi::PipelineConfig cfg = resolve_config(a.cfg);
  wi::DocumentStore store(wi::load_manifest(cfg.data.manifest), cfg);
  const wi::MlpExtractor e = wi::resolve_extractor(cfg);
  std::vector<wi::Split> splits;
  if (a.split == "all")
    splits = {wi::Split::train, wi::Split::val, wi::Split::test};
  else
    splits = {wi::split_from_string(a.split)};
  fs::create_directories(a.out);
  std::size_t n = 0;
  for (wi::Split s : splits) {
    for (const auto& mat : wi::embed_split(store, e, s)) {
      wi::export_features(mat, fs::path(a.out) / (fs::path(mat.document_id).stem().string() + ".wifv"));
      ++n;
    }
  }
  std::cout << "wrote " << n << " feature files to " << a.out << "\n";
  return 0;
}

int run_eval(const RunArgs& a) {
  const wi::PipelineConfig cfg = resolve_config(a.cfg);
  const fs::path dir(a.out);
  write_run_config(dir, cfg);
  wi::DocumentStore store(wi::load_manifest(cfg.data.manifest), cfg);
  std::optional<wi::MlpExtractor> e;
  if (cfg.data.features_dir.empty()) e = wi::resolve_extractor(cfg);
  const wi::Evaluation ev = wi::evaluate_pipeline(store, e ? &*e : nullptr);
  write_evaluation(dir, ev, cfg, &store);
  return 0;
}

int run_sweep(const RunArgs& a) {
  const wi::PipelineConfig cfg = resolve_config(a.cfg);
  const fs::path dir(a.out);
  write_run_config(dir, cfg);
  wi::DocumentStore store(wi::load_manifest(cfg.data.manifest), cfg);
  const wi::Manifest& m = store.manifest();
  std::vector<std::string> labels;
  for (std::size_t i : m.indices(wi::Split::test)) labels.push_back(m.entries()[i].writer_id);
  std::vector<wi::EmbeddingMatrix> docs;
  if (cfg.data.features_dir.empty())
    docs = wi::embed_split(store, wi::resolve_extractor(cfg), wi::Split::test);
  else
    docs = wi::import_split_features(m, wi::Split::test, cfg.data.features_dir);

  std::ostringstream summary, table_head, table_row;
  summary << "postproc,pca_dims,config_hash,top1,top5,p@2,map\n";
  table_head << "model";
  table_row << "reference-mlp";
  json report;
  report["config"] = json::parse(wi::config_to_json(cfg));
  report["sweep"] = json::array();
  for (int dims : cfg.postproc.sweep_pca) {
    const std::string label = dims == 0 ? "Original" : "PCA-" + std::to_string(dims);
    wi::PipelineConfig row_cfg = cfg;
    row_cfg.postproc.pca_dims = dims;
    table_head << ',' << label;
    json entry{{"label", label}, {"pca_dims", dims}, {"config_hash", wi::config_hash(row_cfg)}};
    try {
      const wi::Evaluation ev = wi::evaluate_embeddings(docs, labels, row_cfg.postproc, dims);
      const auto& r = ev.retrieval;
      std::string line = wi::summary_csv(ev, row_cfg, false);
      summary << label << ',' << dims << ',' << line;
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.2f", 100.0 * r.top1());
      table_row << ',' << pct;
      entry["metrics"] = {{"top1", r.top_k.at(1)},
                          {"top5", r.top_k.at(5)},
                          {"p@2", r.precision_at.at(2)},
                          {"map", r.mean_average_precision}};
    } catch (const wi::ConfigError& ex) {
      summary << label << ',' << dims << ',' << wi::config_hash(row_cfg) << ",n/a,n/a,n/a,n/a\n";
      table_row << ",n/a";
      entry["metrics"] = nullptr;
      entry["note"] = ex.what();
    }
    report["sweep"].push_back(entry);
  }
  const std::string table = table_head.str() + "\n" + table_row.str() + "\n";
  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "table.csv", table);
  write_text(dir / "report.json", report.dump(2) + "\n");
  std::cout << "Top-1 (%)\n" << table;
  return 0;
}

int exit_code(wi::ErrorKind k) {
  switch (k) {
    case wi::ErrorKind::config: return 2;
    case wi::ErrorKind::data: return 3;
    case wi::ErrorKind::numeric: return 4;
  }
  return 3;
}

const char* kind_name(wi::ErrorKind k) {
  switch (k) {
    case wi::ErrorKind::config: return "config";
    case wi::ErrorKind::data: return "data";
    case wi::ErrorKind::numeric: return "numeric";
  }
  return "data";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Writer identification toolkit"};
  app.require_subcommand(1);

  app.add_subcommand("defaults", "Print the default configuration as JSON");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-writer dataset");
  synth_cmd->add_option("-o,--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--writers", synth.opts.writers, "Number of writers");
  synth_cmd->add_option("--docs", synth.opts.docs_per_writer, "Documents per writer");
  synth_cmd->add_option("--seed", synth.opts.seed, "Master seed");
  synth_cmd->add_option("--test-writers", synth.opts.test_writers, "Held-out test writers (-1 = half)");
  synth_cmd->add_option("--val-writers", synth.opts.val_writers, "Train writers moved to the val split");
  synth_cmd->add_option("--width", synth.opts.page_width, "Page width in pixels");
  synth_cmd->add_option("--height", synth.opts.page_height, "Page height in pixels");
  synth_cmd->add_option("--noise", synth.opts.noise, "Degradation level in [0,1]");
  synth_cmd->add_flag("--no-zero-shot", synth.no_zero_shot, "Split each writer's documents instead of writers");
  synth_cmd->add_flag("--duplicate-pairs", synth.opts.duplicate_pairs, "Render documents in identical pairs");

  BinarizeArgs bin;
  auto* bin_cmd = app.add_subcommand("binarize", "Write a text mask (PGM/PNG, 255 = ink)");
  add_config_options(bin_cmd, bin.cfg, false);
  bin_cmd->add_option("image", bin.image, "Input image")->required();
  bin_cmd->add_option("-o,--out", bin.out, "Output mask path")->required();
  bin_cmd->add_option("--truth", bin.truth, "Ground-truth mask for F-measure");
  auto* iw = bin_cmd->add_flag("--ink-white", bin.ink_white, "External masks store ink as white");
  bin_cmd->add_flag("--ink-black", bin.ink_black, "External masks store ink as black")->excludes(iw);

  AoiArgs aoi;
  auto* aoi_cmd = app.add_subcommand("aoi", "Crop the text area of interest of each image");
  add_config_options(aoi_cmd, aoi.cfg, false);
  aoi_cmd->add_option("images", aoi.images, "Input images")->required();
  aoi_cmd->add_option("-o,--out", aoi.out, "Output directory")->required();

  SiftArgs sift;
  auto* sift_cmd = app.add_subcommand("sift", "Detect SIFT keypoints and dump them as CSV");
  add_config_options(sift_cmd, sift.cfg, false);
  sift_cmd->add_option("image", sift.image, "Input image")->required();
  sift_cmd->add_option("-o,--out", sift.out, "Output CSV (stdout when omitted)");

  RunArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the extractor, then evaluate on the test split");
  add_config_options(train_cmd, train.cfg, true);
  train_cmd->add_option("-o,--out", train.out, "Run directory")->required();
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--stop-at", train.stop_at, "Stop after this many total steps")->check(CLI::PositiveNumber);

  RunArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Export per-document patch features (WIFV1)");
  add_config_options(embed_cmd, embed.cfg, true);
  embed_cmd->add_option("-o,--out", embed.out, "Feature directory")->required();
  embed_cmd->add_option("--split", embed.split, "train|val|test|all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  RunArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Leave-one-out retrieval on the test split");
  add_config_options(eval_cmd, eval.cfg, true);
  eval_cmd->add_option("-o,--out", eval.out, "Run directory")->required();

  RunArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Compare PCA settings on one feature set");
  add_config_options(sweep_cmd, sweep.cfg, true);
  sweep_cmd->add_option("-o,--out", sweep.out, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=config message=" << quote(e.what()) << "\n";
    return 2;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "defaults") return run_defaults();
    if (cmd == "synth") return run_synth(synth);
    if (cmd == "binarize") return run_binarize(bin);
    if (cmd == "aoi") return run_aoi(aoi);
    if (cmd == "sift") return run_sift(sift);
    if (cmd == "train") return run_train(train);
    if (cmd == "embed") return run_embed(embed);
    if (cmd == "eval") return run_eval(eval);
    if (cmd == "sweep") return run_sweep(sweep);
  } catch (const wi::Error& e) {
    std::cerr << "error kind=" << kind_name(e.kind()) << " message=" << quote(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error kind=data message=" << quote(e.what()) << "\n";
    return 3;
  }
  return 0;
}
