#include "cwlab/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "cwlab/error.hpp"

namespace cwlab {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  require(element_count(shape) == values.size(), ErrorCode::kDimension,
          "tensor of shape " + shape_string(shape) + " given " +
              std::to_string(values.size()) + " values");
  auto data = std::make_shared<detail::TensorData>();
  data->shape = std::move(shape);
  data->values = std::move(values);
  data->requires_grad = requires_grad;
  data_ = std::move(data);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m, bool requires_grad) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  std::vector<double> v(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      v[i * cols + j] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return Tensor({rows, cols}, std::move(v), requires_grad);
}

Tensor Tensor::column(const Eigen::VectorXd& v) {
  return Tensor({static_cast<std::size_t>(v.size()), 1},
                std::vector<double>(v.data(), v.data() + v.size()));
}

std::size_t Tensor::extent(std::size_t axis) const {
  require(axis < rank(), ErrorCode::kDimension,
          "axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  return data_->shape[axis];
}

double Tensor::item() const {
  require(numel() == 1, ErrorCode::kContract,
          "item() on tensor of shape " + shape_string(shape()));
  return data_->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data_->values[row * data_->shape[1] + col];
}

Tensor Tensor::detach() const {
  if (!requires_grad()) return *this;
  return Tensor(shape(), data_->values, false);
}

Tensor Tensor::as_leaf(bool requires_grad) const {
  return Tensor(shape(), data_->values, requires_grad);
}

Eigen::MatrixXd Tensor::matrix() const {
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  if (rank() == 1) {
    rows = static_cast<Eigen::Index>(shape()[0]);
  } else if (rank() == 2) {
    rows = static_cast<Eigen::Index>(shape()[0]);
    cols = static_cast<Eigen::Index>(shape()[1]);
  } else {
    require(rank() == 0, ErrorCode::kDimension,
            "matrix() needs rank <= 2, got " + shape_string(shape()));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(data_->values.data(), rows, cols);
}

bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.values().data(), b.values().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace cwlab
