#include "cwlab/whitening.hpp"

#include <cmath>
#include <string>

#include "cwlab/error.hpp"
#include "cwlab/ops.hpp"

namespace cwlab::whitening {

Moments batch_moments(const Eigen::MatrixXd& z, double eps) {
  require(z.cols() >= 2, ErrorCode::kDegenerateBatch,
          "batch of " + std::to_string(z.cols()) + " samples; whitening needs at least 2");
  Moments m;
  m.mean = z.rowwise().mean();
  const Eigen::MatrixXd centered = z.colwise() - m.mean;
  m.cov = centered * centered.transpose() / static_cast<double>(z.cols());
  m.cov.diagonal().array() += eps;
  return m;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& y) {
  const Eigen::VectorXd mu = y.rowwise().mean();
  const Eigen::MatrixXd centered = y.colwise() - mu;
  return centered * centered.transpose() / static_cast<double>(y.cols());
}

Eigen::MatrixXd zca_exact(const Eigen::MatrixXd& sigma) {
  require(sigma.rows() == sigma.cols(), ErrorCode::kDimension, "zca_exact: covariance not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  require(eig.info() == Eigen::Success, ErrorCode::kConditioning,
          "zca_exact: eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  require(lambda.minCoeff() > 0.0, ErrorCode::kConditioning,
          "zca_exact: covariance is not positive definite (smallest eigenvalue " +
              std::to_string(lambda.minCoeff()) + ")");
  const Eigen::MatrixXd& d = eig.eigenvectors();
  Eigen::MatrixXd w = d * lambda.array().rsqrt().matrix().asDiagonal() * d.transpose();
  return 0.5 * (w + w.transpose());
}

Eigen::MatrixXd zca_newton(const Eigen::MatrixXd& sigma, int iters) {
  require(sigma.rows() == sigma.cols(), ErrorCode::kDimension,
          "zca_newton: covariance not square");
  require(iters >= 1, ErrorCode::kConfiguration, "zca_newton: iteration count must be positive");
  const double tr = sigma.trace();
  require(tr > 0.0 && std::isfinite(tr), ErrorCode::kConditioning,
          "zca_newton: covariance trace is not positive");
  // Coupled form of P <- (3P - P³Σ_N)/2: Y tracks Σ_N P. The iterates are the
  // same in exact arithmetic, but rounding no longer grows with the step count.
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols());
  Eigen::MatrixXd y = sigma / tr;
  Eigen::MatrixXd p = id;
  for (int k = 0; k < iters; ++k) {
    const Eigen::MatrixXd t = 0.5 * (3.0 * id - p * y);
    y = y * t;
    p = t * p;
  }
  return p / std::sqrt(tr);
}

Tensor zca_newton(const Tensor& sigma, int iters) {
  require(sigma.rank() == 2 && sigma.shape()[0] == sigma.shape()[1], ErrorCode::kDimension,
          "zca_newton: covariance not square");
  require(iters >= 1, ErrorCode::kConfiguration, "zca_newton: iteration count must be positive");
  const Tensor tr = ops::trace(sigma);
  require(tr.item() > 0.0 && std::isfinite(tr.item()), ErrorCode::kConditioning,
          "zca_newton: covariance trace is not positive");
  const Tensor three = ops::scale(Tensor::identity(sigma.shape()[0]), 3.0);
  Tensor y = ops::div(sigma, tr);
  Tensor p = Tensor::identity(sigma.shape()[0]);
  for (int k = 0; k < iters; ++k) {
    const Tensor t = ops::scale(ops::sub(three, ops::matmul(p, y)), 0.5);
    y = ops::matmul(y, t);
    p = ops::matmul(t, p);
  }
  return ops::div(p, ops::sqrt(tr));
}

WhiteningState::WhiteningState(std::size_t dim, Config config)
    : dim_(dim),
      config_(config),
      batch_mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      batch_whitener_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(dim))),
      running_mean_(batch_mean_),
      running_whitener_(batch_whitener_) {
  require(config.eps >= 0.0, ErrorCode::kConfiguration, "whitening eps must be non-negative");
  require(config.ema_momentum >= 0.0 && config.ema_momentum <= 1.0, ErrorCode::kConfiguration,
          "whitening EMA momentum must lie in [0, 1]");
}

Tensor WhiteningState::whiten(const Tensor& z, const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& w) {
  const Tensor centered = ops::sub(z, Tensor::column(mean));
  return ops::matmul(Tensor::from_matrix(w), centered);
}

Tensor WhiteningState::apply(const Tensor& z, Mode mode) {
  require(z.rank() == 2 && z.shape()[0] == dim_, ErrorCode::kDimension,
          "whitening of dimension " + std::to_string(dim_) + " given " + shape_string(z.shape()));
  if (mode == Mode::kEval) return whiten(z, running_mean_, running_whitener_);

  const std::size_t n = z.shape()[1];
  require(n >= 2, ErrorCode::kDegenerateBatch,
          "batch of " + std::to_string(n) + " samples; whitening needs at least 2");
  Tensor mu = ops::mean_axis(z, 1);
  if (config_.stop_gradient) mu = mu.detach();
  const Tensor centered = ops::sub(z, mu);

  Tensor w;
  if (config_.method == Method::kExact) {
    const Moments m = batch_moments(z.matrix(), config_.eps);
    w = Tensor::from_matrix(zca_exact(m.cov));
  } else {
    const Tensor gram = ops::matmul(centered, ops::transpose(centered));
    Tensor sigma = ops::add(ops::scale(gram, 1.0 / static_cast<double>(n)),
                            ops::scale(Tensor::identity(dim_), config_.eps));
    if (config_.stop_gradient) sigma = sigma.detach();
    w = zca_newton(sigma, config_.newton_iters);
  }
  if (config_.stop_gradient) w = w.detach();

  batch_mean_ = mu.matrix().col(0);
  batch_whitener_ = w.matrix();
  return ops::matmul(w, centered);
}

void WhiteningState::ema_update(const Eigen::VectorXd& batch_mean,
                                const Eigen::MatrixXd& batch_whitener) {
  const double m = config_.ema_momentum;
  running_mean_ = m * running_mean_ + (1.0 - m) * batch_mean;
  running_whitener_ = m * running_whitener_ + (1.0 - m) * batch_whitener;
}

void WhiteningState::ema_update_from_batch() { ema_update(batch_mean_, batch_whitener_); }

void WhiteningState::calibrate(const Eigen::MatrixXd& z) {
  require(static_cast<std::size_t>(z.rows()) == dim_, ErrorCode::kDimension,
          "calibration data has " + std::to_string(z.rows()) + " rows, expected " +
              std::to_string(dim_));
  const Moments m = batch_moments(z, config_.eps);
  batch_mean_ = m.mean;
  batch_whitener_ = config_.method == Method::kExact ? zca_exact(m.cov)
                                                     : zca_newton(m.cov, config_.newton_iters);
  running_mean_ = batch_mean_;
  running_whitener_ = batch_whitener_;
}

void WhiteningState::set_running(Eigen::VectorXd mean, Eigen::MatrixXd whitener) {
  require(static_cast<std::size_t>(mean.size()) == dim_ &&
              static_cast<std::size_t>(whitener.rows()) == dim_ &&
              static_cast<std::size_t>(whitener.cols()) == dim_,
          ErrorCode::kDimension, "running statistics do not match whitening dimension");
  running_mean_ = std::move(mean);
  running_whitener_ = std::move(whitener);
}

}  // namespace cwlab::whitening
