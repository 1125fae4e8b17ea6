#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "cwlab/tensor.hpp"

namespace cwlab {

enum class Mode { kTrain, kEval };

namespace whitening {

enum class Method { kNewton, kExact };

struct Config {
  double eps = 1e-5;          // ridge added to the covariance
  int newton_iters = 5;
  double ema_momentum = 0.9;  // weight kept by the running estimates
  Method method = Method::kNewton;
  /// Treat batch mean and whitener as constants in the backward pass.
  bool stop_gradient = false;
};

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Column mean and ridged (1/n) covariance of Z [d x n]. Requires n >= 2.
Moments batch_moments(const Eigen::MatrixXd& z, double eps);

/// Symmetric ZCA whitener D Λ^{-1/2} Dᵀ by eigendecomposition.
Eigen::MatrixXd zca_exact(const Eigen::MatrixXd& sigma);

/// Newton–Schulz approximation of Σ^{-1/2} on the trace-normalized covariance,
/// P₀ = I, P ← (3P - P³Σ_N)/2, evaluated in its numerically stable coupled form.
Eigen::MatrixXd zca_newton(const Eigen::MatrixXd& sigma, int iters);
/// Same iteration on the tape, differentiable with respect to `sigma`.
Tensor zca_newton(const Tensor& sigma, int iters);

/// Running and latest-batch statistics for ψ(Z) = W (Z - μ 1ᵀ).
class WhiteningState {
 public:
  WhiteningState() = default;
  WhiteningState(std::size_t dim, Config config);

  std::size_t dim() const { return dim_; }
  const Config& config() const { return config_; }
  Config& config() { return config_; }

  /// Train mode whitens with freshly computed batch statistics (recorded on
  /// the active tape) and remembers them; eval mode uses the running
  /// estimates and leaves the state untouched.
  Tensor apply(const Tensor& z, Mode mode);

  /// Applies fixed statistics, without touching the state.
  static Tensor whiten(const Tensor& z, const Eigen::VectorXd& mean, const Eigen::MatrixXd& w);

  /// running <- momentum * running + (1 - momentum) * batch, for μ and W.
  void ema_update(const Eigen::VectorXd& batch_mean, const Eigen::MatrixXd& batch_whitener);
  /// EMA with the statistics of the last train-mode apply().
  void ema_update_from_batch();

  /// Sets both running and batch statistics from a full pass over `z`.
  void calibrate(const Eigen::MatrixXd& z);

  const Eigen::VectorXd& batch_mean() const { return batch_mean_; }
  const Eigen::MatrixXd& batch_whitener() const { return batch_whitener_; }
  const Eigen::VectorXd& running_mean() const { return running_mean_; }
  const Eigen::MatrixXd& running_whitener() const { return running_whitener_; }
  void set_running(Eigen::VectorXd mean, Eigen::MatrixXd whitener);

 private:
  std::size_t dim_ = 0;
  Config config_;
  Eigen::VectorXd batch_mean_;
  Eigen::MatrixXd batch_whitener_;
  Eigen::VectorXd running_mean_;
  Eigen::MatrixXd running_whitener_;
};

/// Empirical (1/n) covariance of the columns of `y`, no ridge.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& y);

}  // namespace whitening
}  // namespace cwlab
