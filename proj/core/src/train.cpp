#include "wi/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "wi/error.hpp"

namespace wi {
namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[] = "WICKPT1\n";
constexpr int kCheckpointVersion = 1;

std::uint64_t to_le64(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void write_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    const std::uint64_t bits = to_le64(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), 8);
  }
}

void read_doubles(std::istream& in, std::span<double> values, const std::filesystem::path& path) {
  for (double& v : values) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), 8);
    if (in.gcount() != 8) throw DataError("truncated checkpoint " + path.string());
    v = std::bit_cast<double>(to_le64(bits));
  }
}

void check_finite_loss(double loss, int step, const char* what) {
  if (!std::isfinite(loss))
    throw NumericError(std::string("non-finite ") + what + " loss at step " + std::to_string(step));
}

double mean_of(const std::vector<TraceRow>& trace, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += trace[i].train_loss;
  return s / static_cast<double>(end - begin);
}

double arcface_step(TrainState& state, const Manifest& m, const PatchSource& source, const TrainConfig& cfg,
                    std::vector<double>& grads, std::vector<double>& head_grads) {
  const auto index = m.writer_index(Split::train);
  const MlpExtractor& e = state.extractor;
  std::vector<double> inputs;
  std::vector<int> labels;
  inputs.reserve(static_cast<std::size_t>(cfg.batch_size) * e.input_dim());
  for (int b = 0; b < cfg.batch_size; ++b) {
    const std::size_t label = uniform_index(state.rng, state.classes.size());
    const auto& imgs = index.at(state.classes[label]);
    const std::size_t entry = imgs[uniform_index(state.rng, imgs.size())];
    const auto v = standardize(source(entry, state.rng).pixels);
    inputs.insert(inputs.end(), v.begin(), v.end());
    labels.push_back(static_cast<int>(label));
  }
  BatchCache cache;
  const std::vector<double> features = forward_batch(e, inputs, labels.size(), &cache);
  const ArcFaceLoss loss = arcface(features, labels, *state.head);
  check_finite_loss(loss.value, state.step + 1, "arcface");
  backward_batch(e, cache, loss.grad_features, grads);
  head_grads = loss.grad_weights;
  return loss.value;
}

}  // namespace

std::string to_string(TrainStage s) { return s == TrainStage::arcface ? "arcface" : "triplet"; }

TrainStage train_stage_from_string(const std::string& s) {
  if (s == "triplet") return TrainStage::triplet;
  if (s == "arcface") return TrainStage::arcface;
  throw ConfigError("unknown training stage '" + s + "' (expected triplet|arcface)");
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
  if (eval_every < 0) throw ConfigError("train eval_every must be >= 0");
  if (convergence_window < 0) throw ConfigError("train convergence_window must be >= 0");
  triplet.validate();
  optimizer.validate();
  if (!(arcface.scale > 0.0)) throw ConfigError("arcface scale must be > 0");
  if (!(arcface.margin >= 0.0 && arcface.margin < 1.5707963267948966))
    throw ConfigError("arcface margin must lie in [0, pi/2)");
}

TrainState start_training(MlpExtractor extractor, const Manifest& m, const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.stage = cfg.stage;
  s.optimizer = OptimizerState(extractor.params().size());
  s.extractor = std::move(extractor);
  s.rng.seed(derive_seed(cfg.seed, "train"));
  const auto writers = m.writers(Split::train);
  if (writers.size() < 2) throw DataError("training needs at least 2 train writers, found " + std::to_string(writers.size()));
  if (cfg.stage == TrainStage::arcface) {
    s.classes = writers;
    s.head = init_arcface_head(static_cast<int>(writers.size()), s.extractor.output_dim(),
                               derive_seed(cfg.seed, "arcface-head"), cfg.arcface.margin, cfg.arcface.scale);
    s.head_optimizer = OptimizerState(s.head->weights.size());
  }
  return s;
}

double triplet_batch_loss(const MlpExtractor& e, const TripletBatch& batch, const TripletLossParams& p,
                          std::span<double> param_grads) {
  const std::size_t n = batch.size();
  const std::size_t in = static_cast<std::size_t>(e.input_dim());
  const std::size_t dim = static_cast<std::size_t>(e.output_dim());
  // Rows are ordered a0, p0, n0, a1, p1, n1, ...
  std::vector<double> inputs;
  inputs.reserve(3 * n * in);
  for (std::size_t i = 0; i < n; ++i)
    for (const Patch* patch : {&batch.anchors[i], &batch.positives[i], &batch.negatives[i]}) {
      const auto v = standardize(patch->pixels);
      inputs.insert(inputs.end(), v.begin(), v.end());
    }
  const bool want_grads = !param_grads.empty();
  BatchCache cache;
  const std::vector<double> out = forward_batch(e, inputs, 3 * n, want_grads ? &cache : nullptr);
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> grads(want_grads ? out.size() : 0, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> o(out);
    TripletLoss l = triplet_loss(o.subspan(3 * i * dim, dim), o.subspan((3 * i + 1) * dim, dim),
                                 o.subspan((3 * i + 2) * dim, dim), p);
    total += l.value;
    if (!want_grads) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      grads[3 * i * dim + k] = l.grad_anchor[k] * inv;
      grads[(3 * i + 1) * dim + k] = l.grad_positive[k] * inv;
      grads[(3 * i + 2) * dim + k] = l.grad_negative[k] * inv;
    }
  }
  if (want_grads) backward_batch(e, cache, grads, param_grads);
  return total * inv;
}

std::optional<double> validation_loss(const MlpExtractor& e, const Manifest& m, const PatchSource& source,
                                      const TrainConfig& cfg) {
  if (m.writers(Split::val).size() < 2) return std::nullopt;
  Rng rng(derive_seed(cfg.seed, "validation"));
  const TripletBatch batch = sample_triplets(m, Split::val, source, cfg.batch_size, rng);
  return triplet_batch_loss(e, batch, cfg.triplet, {});
}

void train_steps(TrainState& state, const Manifest& m, const PatchSource& source, const TrainConfig& cfg,
                 int until_step) {
  cfg.validate();
  if (state.stage != cfg.stage) throw ConfigError("train state stage does not match config stage");
  const int last = std::min(until_step, cfg.steps);
  std::vector<double> grads(state.extractor.params().size());
  std::vector<double> head_grads;
  while (!state.converged && state.step < last) {
    std::fill(grads.begin(), grads.end(), 0.0);
    double loss = 0.0;
    if (state.stage == TrainStage::triplet) {
      const TripletBatch batch = sample_triplets(m, Split::train, source, cfg.batch_size, state.rng);
      loss = triplet_batch_loss(state.extractor, batch, cfg.triplet, grads);
      check_finite_loss(loss, state.step + 1, "triplet");
    } else {
      loss = arcface_step(state, m, source, cfg, grads, head_grads);
    }
    optimizer_step(state.extractor.mutable_params(), grads, state.optimizer, cfg.optimizer);
    if (state.head) optimizer_step(state.head->weights, head_grads, state.head_optimizer, cfg.optimizer);
    ++state.step;

    TraceRow row{state.step, loss, std::nullopt};
    if (cfg.eval_every > 0 && state.step % cfg.eval_every == 0)
      row.val_loss = validation_loss(state.extractor, m, source, cfg);
    state.trace.push_back(row);

    const auto w = static_cast<std::size_t>(cfg.convergence_window);
    if (w > 0 && state.step % cfg.convergence_window == 0 && state.trace.size() >= 2 * w) {
      const std::size_t n = state.trace.size();
      const double previous = mean_of(state.trace, n - 2 * w, n - w);
      const double current = mean_of(state.trace, n - w, n);
      if (previous - current < cfg.convergence_tol) state.converged = true;
    }
  }
}

TrainResult train_triplet(MlpExtractor extractor, const Manifest& m, const PatchSource& source,
                          const TrainConfig& cfg) {
  if (cfg.stage != TrainStage::triplet) throw ConfigError("train_triplet requires stage = triplet");
  TrainState s = start_training(std::move(extractor), m, cfg);
  train_steps(s, m, source, cfg, cfg.steps);
  return TrainResult{std::move(s.extractor), std::nullopt, std::move(s.trace), s.converged, s.step};
}

TrainResult finetune_arcface(MlpExtractor extractor, const Manifest& m, const PatchSource& source,
                             const TrainConfig& cfg) {
  if (cfg.stage != TrainStage::arcface) throw ConfigError("finetune_arcface requires stage = arcface");
  TrainState s = start_training(std::move(extractor), m, cfg);
  train_steps(s, m, source, cfg, cfg.steps);
  return TrainResult{std::move(s.extractor), std::move(s.head), std::move(s.trace), s.converged, s.step};
}

void save_checkpoint(const TrainState& state, const std::string& config_echo, const std::filesystem::path& path) {
  json header;
  header["version"] = kCheckpointVersion;
  header["stage"] = to_string(state.stage);
  header["layer_dims"] = state.extractor.layer_dims();
  header["step"] = state.step;
  header["converged"] = state.converged;
  header["rng"] = rng_state(state.rng);
  header["optimizer_step"] = state.optimizer.step;
  header["classes"] = state.classes;
  if (state.head) {
    header["head"] = {{"classes", state.head->classes},
                      {"dim", state.head->dim},
                      {"margin", state.head->margin},
                      {"scale", state.head->scale},
                      {"optimizer_step", state.head_optimizer.step}};
  } else {
    header["head"] = nullptr;
  }
  json trace = json::array();
  for (const auto& r : state.trace)
    trace.push_back({r.step, r.train_loss, r.val_loss ? json(*r.val_loss) : json(nullptr)});
  header["trace"] = std::move(trace);
  header["config"] = config_echo.empty() ? json(nullptr) : json::parse(config_echo);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kCheckpointMagic << header.dump() << '\n';
  write_doubles(out, state.extractor.params());
  write_doubles(out, state.optimizer.first_moment);
  write_doubles(out, state.optimizer.second_moment);
  if (state.head) {
    write_doubles(out, state.head->weights);
    write_doubles(out, state.head_optimizer.first_moment);
    write_doubles(out, state.head_optimizer.second_moment);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path, std::string* config_echo) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string magic(sizeof(kCheckpointMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) throw DataError("bad checkpoint magic in " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("truncated checkpoint header in " + path.string());

  TrainState s;
  try {
    const json h = json::parse(line);
    if (h.at("version").get<int>() != kCheckpointVersion)
      throw DataError("unsupported checkpoint version in " + path.string());
    s.stage = train_stage_from_string(h.at("stage").get<std::string>());
    s.extractor = MlpExtractor(h.at("layer_dims").get<std::vector<int>>());
    s.step = h.at("step").get<int>();
    s.converged = h.at("converged").get<bool>();
    set_rng_state(s.rng, h.at("rng").get<std::string>());
    s.optimizer = OptimizerState(s.extractor.params().size());
    s.optimizer.step = h.at("optimizer_step").get<std::uint64_t>();
    s.classes = h.at("classes").get<std::vector<std::string>>();
    for (const auto& r : h.at("trace")) {
      TraceRow row{r.at(0).get<int>(), r.at(1).get<double>(), std::nullopt};
      if (!r.at(2).is_null()) row.val_loss = r.at(2).get<double>();
      s.trace.push_back(row);
    }
    if (!h.at("head").is_null()) {
      const auto& hh = h.at("head");
      ArcFaceHead head;
      head.classes = hh.at("classes").get<int>();
      head.dim = hh.at("dim").get<int>();
      head.margin = hh.at("margin").get<double>();
      head.scale = hh.at("scale").get<double>();
      head.weights.assign(static_cast<std::size_t>(head.classes) * head.dim, 0.0);
      s.head = std::move(head);
      s.head_optimizer = OptimizerState(s.head->weights.size());
      s.head_optimizer.step = hh.at("optimizer_step").get<std::uint64_t>();
    }
    if (config_echo) *config_echo = h.at("config").is_null() ? std::string{} : h.at("config").dump();
  } catch (const json::exception& ex) {
    throw DataError("malformed checkpoint header in " + path.string() + ": " + ex.what());
  }

  read_doubles(in, s.extractor.mutable_params(), path);
  read_doubles(in, s.optimizer.first_moment, path);
  read_doubles(in, s.optimizer.second_moment, path);
  if (s.head) {
    read_doubles(in, s.head->weights, path);
    read_doubles(in, s.head_optimizer.first_moment, path);
    read_doubles(in, s.head_optimizer.second_moment, path);
    s.head->validate();
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint " + path.string());
  return s;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "step,train_loss,val_loss\n";
  for (const auto& r : trace) {
    os << r.step << ',' << r.train_loss << ',';
    if (r.val_loss) os << *r.val_loss;
    os << '\n';
  }
  return os.str();
}

}  // namespace wi
