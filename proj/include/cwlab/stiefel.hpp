#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "cwlab/reducer.hpp"

namespace cwlab::stiefel {

struct SearchParams {
  double initial_step = 1.0;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 20;

  void validate() const;
};

/// Whitened representations of one concept's mini-batch.
///
/// `whitened` holds `samples * map_size()` columns: sample-major blocks of
/// map_rows x map_cols cells in raster order. Vector latents use 1x1 maps and
/// no reducer, in which case a sample scores q_jᵀψ directly.
struct ConceptBatch {
  std::size_t axis = 0;
  Eigen::MatrixXd whitened;
  std::size_t map_rows = 1;
  std::size_t map_cols = 1;
  std::optional<cw::ActivationReducer> reducer;

  std::size_t map_size() const { return map_rows * map_cols; }
  std::size_t samples() const;
};

/// Σ_j (1/n_j) Σ_i score(q_j, ψ_i); the quantity alignment maximizes.
double alignment_objective(const Eigen::MatrixXd& q, std::span<const ConceptBatch> batches);

/// Euclidean gradient of the negated objective. Column j is minus the
/// (reducer-weighted) mean whitened representation of the concept assigned
/// to axis j, and zero for unassigned axes. `q` selects the winning cells for
/// max-based reducers and is unused for vector latents.
Eigen::MatrixXd alignment_gradient(const Eigen::MatrixXd& q, std::span<const ConceptBatch> batches);

double orthogonality_error(const Eigen::MatrixXd& q);

/// Nearest orthogonal matrix (polar factor via SVD).
Eigen::MatrixXd polar_orthonormalize(const Eigen::MatrixXd& m);

/// A = G Qᵀ - Q Gᵀ.
Eigen::MatrixXd skew_direction(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g);

/// (I + η/2 A)^{-1} (I - η/2 A) Q. Throws kStepSize when the system is singular.
Eigen::MatrixXd cayley_step(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g, double step);

struct SearchResult {
  double step = 0.0;
  Eigen::MatrixXd q;
  double objective = 0.0;          // f at the returned point
  double initial_objective = 0.0;  // f at the starting point
  int backtracks = 0;
  bool exhausted = false;          // no trial met the Armijo condition
};

/// Backtracking along the Cayley curve until
///   f(Q(η)) <= f(Q) - c1 η ||A||_F^2 / 2
/// where `objective` is the function being minimized. On exhaustion the
/// smallest finite trial is returned with `exhausted` set.
SearchResult curvilinear_search(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g,
                                const std::function<double(const Eigen::MatrixXd&)>& objective,
                                const SearchParams& params = {});

/// Orthogonal Q with its gradient-momentum buffer.
class RotationState {
 public:
  static constexpr double kOrthogonalityTolerance = 1e-5;

  RotationState() = default;
  RotationState(std::size_t dim, double beta);

  std::size_t dim() const { return static_cast<std::size_t>(q_.rows()); }
  const Eigen::MatrixXd& q() const { return q_; }
  const Eigen::MatrixXd& momentum() const { return momentum_; }
  double beta() const { return beta_; }

  void set_q(Eigen::MatrixXd q);
  void set_momentum(Eigen::MatrixXd momentum);

  /// G' <- β G' + (1 - β) G.
  const Eigen::MatrixXd& momentum_update(const Eigen::MatrixXd& g);

  double orthogonality_error() const { return stiefel::orthogonality_error(q_); }
  /// Re-orthonormalizes when drift exceeds `tolerance`; returns whether it did.
  bool restore_orthogonality(double tolerance = kOrthogonalityTolerance);

 private:
  Eigen::MatrixXd q_;
  Eigen::MatrixXd momentum_;
  double beta_ = 0.9;
};

}  // namespace cwlab::stiefel
