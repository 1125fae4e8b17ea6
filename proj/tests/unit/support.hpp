#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cwlab/error.hpp"
#include "cwlab/tape.hpp"
#include "cwlab/tensor.hpp"

namespace cwtest {

using cwlab::Shape;
using cwlab::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true,
                            double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(cwlab::element_count(shape));
  for (double& x : v) x = normal(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(d, d, rng));
  return qr.householderQ();
}

/// Random SPD matrix with eigenvalues log-uniform in [lo, hi].
inline Eigen::MatrixXd random_spd(Eigen::Index d, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Eigen::VectorXd lambda(d);
  for (Eigen::Index i = 0; i < d; ++i) lambda(i) = std::exp(u(rng));
  lambda(0) = lo;
  lambda(d - 1) = hi;
  const Eigen::MatrixXd q = random_orthogonal(d, rng);
  return q * lambda.asDiagonal() * q.transpose();
}

inline Tensor with_values(const Tensor& like, std::vector<double> values) {
  return Tensor(like.shape(), std::move(values), like.requires_grad());
}

/// Error code thrown by `f`, or nullopt when it returns normally.
template <class F>
std::optional<cwlab::ErrorCode> thrown_code(F&& f) {
  try {
    f();
  } catch (const cwlab::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

/// Central differences of a scalar function of one tensor.
inline std::vector<double> numeric_gradient(const std::function<double(const Tensor&)>& f,
                                            const Tensor& x, double h = 1e-6) {
  std::vector<double> base(x.values().begin(), x.values().end());
  std::vector<double> g(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (f(with_values(x, plus)) - f(with_values(x, minus))) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, tiny).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

/// Relative error between the tape gradient of `f` at `x` and central differences.
inline double gradient_error(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                             double h = 1e-6) {
  std::vector<double> analytic;
  {
    cwlab::GradientTape tape;
    const Tensor loss = f(x);
    const cwlab::Gradients g = tape.backward(loss);
    const Tensor gx = g[x];
    analytic.assign(gx.values().begin(), gx.values().end());
  }
  const auto numeric = numeric_gradient(
      [&](const Tensor& v) {
        cwlab::NoGradScope no_grad;
        return f(v).item();
      },
      x, h);
  return relative_error(analytic, numeric);
}

}  // namespace cwtest
