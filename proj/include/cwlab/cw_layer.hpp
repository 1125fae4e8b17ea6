#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cwlab/reducer.hpp"
#include "cwlab/stiefel.hpp"
#include "cwlab/tensor.hpp"
#include "cwlab/whitening.hpp"

namespace cwlab::cw {

/// Statistics used to whiten concept mini-batches during alignment.
enum class ConceptStats {
  kRunning,  // running estimates of the main data (eval-mode ψ)
  kBatch,    // joint batch statistics of all concept mini-batches of the step
};

struct Config {
  whitening::Config whitening;
  double beta = 0.9;
  ActivationReducer reducer;
  stiefel::SearchParams search;
  ConceptStats concept_stats = ConceptStats::kBatch;
};

/// Latents of one concept's mini-batch: [n x d] vectors or [n x d x h x w] maps.
struct ConceptLatent {
  std::size_t axis = 0;
  Tensor latent;
};

struct AlignResult {
  double objective_before = 0.0;
  double objective_after = 0.0;
  double step = 0.0;
  bool exhausted = false;
};

/// Concept whitening: Ẑ = Qᵀ W (Z - μ 1ᵀ).
class CwLayer {
 public:
  CwLayer() = default;
  CwLayer(std::size_t dim, Config config);

  std::size_t dim() const { return whitening_.dim(); }
  const Config& config() const { return config_; }
  const ActivationReducer& reducer() const { return config_.reducer; }

  whitening::WhiteningState& whitening() { return whitening_; }
  const whitening::WhiteningState& whitening() const { return whitening_; }
  stiefel::RotationState& rotation() { return rotation_; }
  const stiefel::RotationState& rotation() const { return rotation_; }

  /// Z: [d x m] -> [d x m]. Q enters as a constant.
  Tensor forward(const Tensor& z, Mode mode);
  /// [n x d x h x w] -> [n x d x h x w], whitening the channel-rows matrix.
  Tensor forward_maps(const Tensor& x, Mode mode);

  /// Whitened concept batches under the configured statistics.
  std::vector<stiefel::ConceptBatch> concept_batches(std::span<const ConceptLatent> latents) const;

  /// One alignment step: gradient, momentum, curvilinear search, Cayley update.
  /// Only Q and its momentum change.
  AlignResult align(std::span<const ConceptLatent> latents);

 private:
  Config config_;
  whitening::WhiteningState whitening_;
  stiefel::RotationState rotation_;
};

/// [n x d x h x w] -> [d x (h*w*n)].
Tensor conv_reshape(const Tensor& x);
Tensor conv_unreshape(const Tensor& z, std::size_t n, std::size_t h, std::size_t w);

/// Per-sample, per-axis activations [n x d] of a CW (or any normalization)
/// output: the coordinates for vectors, reduced channel maps for [n x d x h x w].
Eigen::MatrixXd axis_activations(const Tensor& output, const ActivationReducer& reducer);

/// Eval-mode activation of one sample's latent ([d], [1 x d], [d x h x w] or
/// [1 x d x h x w]) on `axis`.
double concept_activation(CwLayer& layer, const Tensor& sample_latent, std::size_t axis);

}  // namespace cwlab::cw
