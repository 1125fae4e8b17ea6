#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cwlab {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
};
}  // namespace detail

/**
 * Immutable dense row-major array of doubles.
 *
 * Copies share storage. A tensor flagged `requires_grad` is tracked by the
 * active GradientTape; ops on tracked inputs produce tracked outputs.
 */
class Tensor {
 public:
  /// Rank-0 zero.
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);
  /// Rank-2 tensor with the same entries as `m`.
  static Tensor from_matrix(const Eigen::MatrixXd& m, bool requires_grad = false);
  /// Rank-2 column (n x 1).
  static Tensor column(const Eigen::VectorXd& v);

  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const { return data_->values.size(); }
  std::span<const double> values() const { return data_->values; }
  bool requires_grad() const { return data_->requires_grad; }

  /// Value of a single-element tensor.
  double item() const;
  double at(std::size_t flat) const { return data_->values[flat]; }
  double at(std::size_t row, std::size_t col) const;

  /// Same values, not tracked.
  Tensor detach() const;
  /// Fresh leaf holding a copy of the values.
  Tensor as_leaf(bool requires_grad) const;

  /// Rank-2 view as an Eigen matrix (rank-1 becomes a column).
  Eigen::MatrixXd matrix() const;

  /// Storage identity; adjoints are keyed on this.
  const detail::TensorData* id() const { return data_.get(); }

 private:
  std::shared_ptr<const detail::TensorData> data_;
};

bool all_finite(const Tensor& t);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace cwlab
