#include "cwlab/stiefel.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cwlab/error.hpp"

namespace cwlab::stiefel {
namespace {

void check_batches(std::span<const ConceptBatch> batches, Eigen::Index dim) {
  std::vector<bool> used(static_cast<std::size_t>(dim), false);
  for (const ConceptBatch& b : batches) {
    require(b.axis < static_cast<std::size_t>(dim), ErrorCode::kConfiguration,
            "concept axis " + std::to_string(b.axis) + " outside dimension " + std::to_string(dim));
    require(!used[b.axis], ErrorCode::kConfiguration,
            "axis " + std::to_string(b.axis) + " assigned to more than one concept");
    used[b.axis] = true;
    require(b.whitened.rows() == dim, ErrorCode::kDimension,
            "concept batch has " + std::to_string(b.whitened.rows()) + " rows, expected " +
                std::to_string(dim));
    require(b.map_size() > 0 && b.whitened.cols() % static_cast<Eigen::Index>(b.map_size()) == 0,
            ErrorCode::kDimension, "concept batch columns do not divide into maps");
    require(b.samples() > 0, ErrorCode::kData,
            "empty mini-batch for concept on axis " + std::to_string(b.axis));
  }
}

// Per-sample activation map q_jᵀψ_i as map_rows x map_cols.
Eigen::MatrixXd projected_map(const ConceptBatch& b, const Eigen::VectorXd& qj, std::size_t i) {
  const auto cells = static_cast<Eigen::Index>(b.map_size());
  const Eigen::RowVectorXd flat =
      qj.transpose() * b.whitened.middleCols(static_cast<Eigen::Index>(i) * cells, cells);
  Eigen::MatrixXd map(static_cast<Eigen::Index>(b.map_rows), static_cast<Eigen::Index>(b.map_cols));
  for (Eigen::Index r = 0; r < map.rows(); ++r)
    for (Eigen::Index c = 0; c < map.cols(); ++c) map(r, c) = flat(r * map.cols() + c);
  return map;
}

}  // namespace

void SearchParams::validate() const {
  require(initial_step > 0.0, ErrorCode::kConfiguration, "initial step must be positive");
  require(armijo_c1 > 0.0 && armijo_c1 < 1.0, ErrorCode::kConfiguration,
          "armijo_c1 must lie in (0, 1)");
  require(backtrack_factor > 0.0 && backtrack_factor < 1.0, ErrorCode::kConfiguration,
          "backtrack_factor must lie in (0, 1)");
  require(max_backtracks >= 0, ErrorCode::kConfiguration, "max_backtracks must be >= 0");
}

std::size_t ConceptBatch::samples() const {
  return map_size() == 0 ? 0 : static_cast<std::size_t>(whitened.cols()) / map_size();
}

double alignment_objective(const Eigen::MatrixXd& q, std::span<const ConceptBatch> batches) {
  check_batches(batches, q.rows());
  double total = 0.0;
  for (const ConceptBatch& b : batches) {
    const Eigen::VectorXd qj = q.col(static_cast<Eigen::Index>(b.axis));
    const std::size_t n = b.samples();
    double sum = 0.0;
    if (!b.reducer) {
      sum = (qj.transpose() * b.whitened).sum();
    } else {
      for (std::size_t i = 0; i < n; ++i)
        sum += cw::reduce_activation(projected_map(b, qj, i), *b.reducer);
    }
    total += sum / static_cast<double>(n);
  }
  return total;
}

Eigen::MatrixXd alignment_gradient(const Eigen::MatrixXd& q, std::span<const ConceptBatch> batches) {
  check_batches(batches, q.rows());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (const ConceptBatch& b : batches) {
    const auto axis = static_cast<Eigen::Index>(b.axis);
    const std::size_t n = b.samples();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(q.rows());
    if (!b.reducer) {
      acc = b.whitened.rowwise().sum();
    } else {
      const Eigen::VectorXd qj = q.col(axis);
      const auto cells = static_cast<Eigen::Index>(b.map_size());
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd w = cw::reducer_weights(projected_map(b, qj, i), *b.reducer);
        const auto block = b.whitened.middleCols(static_cast<Eigen::Index>(i) * cells, cells);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
          for (Eigen::Index c = 0; c < w.cols(); ++c)
            if (w(r, c) != 0.0) acc += w(r, c) * block.col(r * w.cols() + c);
      }
    }
    g.col(axis) = -acc / static_cast<double>(n);
  }
  return g;
}

double orthogonality_error(const Eigen::MatrixXd& q) {
  const Eigen::MatrixXd e =
      q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols());
  return e.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd polar_orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Eigen::MatrixXd skew_direction(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g) {
  require(q.rows() == g.rows() && q.cols() == g.cols(), ErrorCode::kDimension,
          "gradient shape does not match Q");
  return g * q.transpose() - q * g.transpose();
}

Eigen::MatrixXd cayley_step(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g, double step) {
  const Eigen::MatrixXd a = skew_direction(q, g);
  require((a + a.transpose()).cwiseAbs().maxCoeff() <= 1e-10, ErrorCode::kNumerical,
          "Cayley direction lost skew-symmetry");
  const Eigen::Index d = q.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd lhs = identity + 0.5 * step * a;
  const Eigen::MatrixXd rhs = (identity - 0.5 * step * a) * q;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  const double rcond = lu.rcond();
  require(std::isfinite(rcond) && rcond > 1e-14, ErrorCode::kStepSize,
          "Cayley system is singular at step " + std::to_string(step));
  Eigen::MatrixXd next = lu.solve(rhs);
  require(next.allFinite(), ErrorCode::kStepSize,
          "Cayley update is not finite at step " + std::to_string(step));
  return next;
}

SearchResult curvilinear_search(const Eigen::MatrixXd& q, const Eigen::MatrixXd& g,
                                const std::function<double(const Eigen::MatrixXd&)>& objective,
                                const SearchParams& params) {
  params.validate();
  SearchResult result;
  result.initial_objective = objective(q);
  const double a_norm_sq = skew_direction(q, g).squaredNorm();
  if (a_norm_sq == 0.0) {
    result.step = params.initial_step;
    result.q = q;
    result.objective = result.initial_objective;
    return result;
  }

  double step = params.initial_step;
  bool have_finite = false;
  for (int trial = 0; trial <= params.max_backtracks; ++trial) {
    if (trial > 0) step *= params.backtrack_factor;
    Eigen::MatrixXd candidate;
    double f = std::numeric_limits<double>::quiet_NaN();
    try {
      candidate = cayley_step(q, g, step);
      f = objective(candidate);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kStepSize) throw;
    }
    result.backtracks = trial;
    if (!std::isfinite(f)) continue;
    have_finite = true;
    result.step = step;
    result.q = std::move(candidate);
    result.objective = f;
    if (f <= result.initial_objective - params.armijo_c1 * step * 0.5 * a_norm_sq) return result;
  }
  require(have_finite, ErrorCode::kNumerical, "curvilinear search: objective never finite");
  result.exhausted = true;
  return result;
}

RotationState::RotationState(std::size_t dim, double beta)
    : q_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      momentum_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      beta_(beta) {
  require(beta >= 0.0 && beta < 1.0, ErrorCode::kConfiguration, "beta must lie in [0, 1)");
}

void RotationState::set_q(Eigen::MatrixXd q) {
  require(q.rows() == q_.rows() && q.cols() == q_.cols(), ErrorCode::kDimension,
          "Q shape does not match rotation dimension");
  q_ = std::move(q);
}

void RotationState::set_momentum(Eigen::MatrixXd momentum) {
  require(momentum.rows() == q_.rows() && momentum.cols() == q_.cols(), ErrorCode::kDimension,
          "momentum shape does not match rotation dimension");
  momentum_ = std::move(momentum);
}

const Eigen::MatrixXd& RotationState::momentum_update(const Eigen::MatrixXd& g) {
  require(g.rows() == momentum_.rows() && g.cols() == momentum_.cols(), ErrorCode::kDimension,
          "gradient shape does not match momentum buffer");
  momentum_ = beta_ * momentum_ + (1.0 - beta_) * g;
  return momentum_;
}

bool RotationState::restore_orthogonality(double tolerance) {
  if (orthogonality_error() <= tolerance) return false;
  q_ = polar_orthonormalize(q_);
  return true;
}

}  // namespace cwlab::stiefel
