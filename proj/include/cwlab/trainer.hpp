#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cwlab/cw_layer.hpp"
#include "cwlab/dataset.hpp"
#include "cwlab/model.hpp"

namespace cwlab::trainer {

struct TrainConfig {
  model::Arch arch = model::Arch::kMlp;
  model::Slot slot = model::Slot::kCw;
  std::size_t cw_layer = 1;
  cw::ReducerKind reducer = cw::ReducerKind::kMaxPoolMean;
  std::size_t pool_size = 2;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t align_frequency = 20;
  double beta = 0.9;
  int newton_iters = 5;
  double eps = 1e-5;
  double ema_momentum = 0.9;
  std::uint64_t seed = 0;
  double aux_weight = 0.5;
  cw::ConceptStats concept_stats = cw::ConceptStats::kBatch;
  bool stop_gradient = false;
  std::size_t probe_size = 64;

  void validate() const;
  cw::Config cw_config() const;
};

/// Independent seed for a named random stream (splitmix64 of seed + stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum Stream : std::uint64_t { kModelInit = 1, kBatchOrder = 2, kConceptDraws = 3 };

/// FNV-1a fingerprint of raw bytes, for detecting which state a step changed.
std::uint64_t fingerprint(std::span<const double> values, std::uint64_t h = 1469598103934665603ull);
std::uint64_t parameters_fingerprint(const model::Model& model);
std::uint64_t rotation_fingerprint(const model::Model& model);

struct StepRecord {
  std::size_t step = 0;  // t, starting at 1
  std::size_t epoch = 0;
  double main_loss = 0.0;
  std::optional<double> aux_loss;
  std::optional<double> align_objective;  // after the align step at this t
  std::optional<double> orthogonality_error;
  bool params_changed_main = false;
  bool q_changed_main = false;
  bool params_changed_align = false;
  bool q_changed_align = false;
};

/// Per-axis slot activations [probe_size x d] on a fixed probe set.
struct ProbeRecord {
  std::size_t epoch = 0;
  Eigen::MatrixXd activations;
};

struct History {
  std::vector<StepRecord> steps;
  std::vector<ProbeRecord> probes;

  std::size_t align_steps() const;
};

/// Draws `count` indices from [0, n): without replacement when n >= count,
/// otherwise with replacement.
std::vector<std::size_t> draw_indices(std::size_t n, std::size_t count, std::mt19937_64& rng);

/// One mini-batch per concept, `batch_size` exemplars each, as slot latents
/// in eval mode.
std::vector<cw::ConceptLatent> concept_latents(model::Model& model, const ConceptBank& bank,
                                               std::size_t batch_size, std::mt19937_64& rng);

/// Concept exemplars labelled by axis, for the auxiliary concept loss.
struct AuxBatch {
  Tensor x;
  std::vector<int> axes;
  std::size_t concepts = 0;
};

/// `batch_size` exemplars drawn evenly across the bank's concepts.
AuxBatch draw_aux_batch(const ConceptBank& bank, std::size_t batch_size, std::mt19937_64& rng);

/// Concept logits [d x n] of a slot output: the coordinates for vectors,
/// per-channel spatial means for maps.
Tensor concept_logits(const Tensor& slot_output);

struct MainStepResult {
  double loss = 0.0;
  std::optional<double> aux_loss;
};

/// One SGD step on θ, ω through the slot, then the EMA of the running
/// statistics; Q stays fixed. With `aux`, adds aux_weight times the
/// auxiliary concept loss of those exemplars (slot in eval mode).
MainStepResult main_step(model::Model& model, model::Sgd& sgd, const Tensor& x,
                         std::span<const int> y, const TrainConfig& config,
                         const AuxBatch* aux = nullptr);

/// Alignment step on Q alone. Returns nothing when the bank is empty.
std::optional<cw::AlignResult> align_step(model::Model& model, const ConceptBank& bank,
                                          std::size_t batch_size, std::mt19937_64& rng);

/// Alternating optimization: for t = 1..T a main step on a shuffled
/// mini-batch, followed by an align step whenever t mod align_frequency == 0.
/// Errors are rethrown with the step index in the message.
History fit(model::Model& model, const Dataset& train, const ConceptBank& bank,
            const TrainConfig& config);

/// New model built from `config` for the given data shapes.
model::Model build_model(const TrainConfig& config, const Shape& input, std::size_t classes);

}  // namespace cwlab::trainer
