#pragma once

#include <cstddef>
#include <span>

#include "cwlab/tensor.hpp"

// Differentiable tensor operations. All functions throw Error(kDimension)
// on incompatible shapes.
namespace cwlab::ops {

// Linear algebra (rank 2).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor trace(const Tensor& a);

// Elementwise binary ops. `b` must either match `a`'s shape or broadcast
// into it: a single element, a row [1 x n], or a column [m x 1].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor relu(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);

// Reductions. Sums run left to right over row-major storage.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Rank-2 reduction; axis 0 gives [1 x n], axis 1 gives [m x 1].
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor mean_axis(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
/// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

/// [n x c x h x w] -> [c x (n*h*w)]; column index is sample-major, then raster.
Tensor channels_to_rows(const Tensor& x);
/// Inverse of channels_to_rows.
Tensor rows_to_channels(const Tensor& z, std::size_t n, std::size_t h, std::size_t w);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation. x: [n x c x h x w], weight: [o x c x kh x kw], bias: [o] or empty.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dOptions options = {});

/// Max pooling over [n x c x h x w]. With `ceil_mode`, partial windows at the
/// border pool over their in-range cells only. Adjoints route to the first
/// maximal cell of each window.
Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride, bool ceil_mode = false);

/// Mean cross entropy of softmax(logits) for logits [n x c] and labels in [0, c).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace cwlab::ops
