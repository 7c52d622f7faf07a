#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wi/embed.hpp"
#include "wi/losses.hpp"
#include "wi/optimizer.hpp"
#include "wi/rng.hpp"
#include "wi/sampling.hpp"

namespace wi {

enum class TrainStage { triplet, arcface };

std::string to_string(TrainStage s);
TrainStage train_stage_from_string(const std::string& s);

struct ArcFaceParams {
  double margin = 0.5;
  double scale = 30.0;
};

struct TrainConfig {
  TrainStage stage = TrainStage::triplet;
  /// Maximum number of optimizer steps.
  int steps = 1000;
  int batch_size = 32;
  std::uint64_t seed = 0;
  TripletLossParams triplet;
  ArcFaceParams arcface;
  OptimizerParams optimizer;
  /// Validation loss cadence in steps; 0 disables validation.
  int eval_every = 100;
  /// Moving-average window of the convergence rule; 0 disables it.
  int convergence_window = 100;
  double convergence_tol = 1e-4;

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double train_loss = 0.0;
  /// Present on validation steps only.
  std::optional<double> val_loss;

  bool operator==(const TraceRow&) const = default;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  TrainStage stage = TrainStage::triplet;
  MlpExtractor extractor;
  OptimizerState optimizer;
  std::optional<ArcFaceHead> head;
  OptimizerState head_optimizer;
  /// Train writers in label order (ArcFace stage).
  std::vector<std::string> classes;
  Rng rng;
  int step = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// Fresh state for cfg.stage. The ArcFace stage attaches a head with one class
/// per train writer.
TrainState start_training(MlpExtractor extractor, const Manifest& m, const TrainConfig& cfg);

/// Advances until `until_step` (capped at cfg.steps) or convergence.
void train_steps(TrainState& state, const Manifest& m, const PatchSource& source, const TrainConfig& cfg,
                 int until_step);

/// Mean triplet loss of one batch; gradients are accumulated into param_grads
/// when non-empty.
double triplet_batch_loss(const MlpExtractor& e, const TripletBatch& batch, const TripletLossParams& p,
                          std::span<double> param_grads);

/// Validation loss on a fixed held-out sample of val-split triplets; nullopt
/// when the val split has fewer than two writers.
std::optional<double> validation_loss(const MlpExtractor& e, const Manifest& m, const PatchSource& source,
                                      const TrainConfig& cfg);

struct TrainResult {
  MlpExtractor extractor;
  std::optional<ArcFaceHead> head;
  std::vector<TraceRow> trace;
  bool converged = false;
  int steps_run = 0;
};

TrainResult train_triplet(MlpExtractor extractor, const Manifest& m, const PatchSource& source,
                          const TrainConfig& cfg);

/// The head is returned for inspection only; inference uses the extractor.
TrainResult finetune_arcface(MlpExtractor extractor, const Manifest& m, const PatchSource& source,
                             const TrainConfig& cfg);

/// Binary checkpoint: "WICKPT1\n", a JSON header line, then little-endian
/// float64 blocks (extractor params, moments, head weights and moments).
void save_checkpoint(const TrainState& state, const std::string& config_echo, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path, std::string* config_echo = nullptr);

/// Loss trace as CSV "step,train_loss,val_loss".
std::string trace_to_csv(const std::vector<TraceRow>& trace);

}  // namespace wi
