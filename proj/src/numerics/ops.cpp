#include "cwlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cwlab/error.hpp"
#include "cwlab/tape.hpp"

namespace cwlab::ops {
namespace {

using detail::make_result;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require(t.rank() == rank, ErrorCode::kDimension,
          std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
              shape_string(t.shape()));
}

enum class Broadcast { kSame, kScalar, kRow, kColumn };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalar;
  if (a.rank() == 2 && b.rank() == 2) {
    if (b.shape()[0] == 1 && b.shape()[1] == a.shape()[1]) return Broadcast::kRow;
    if (b.shape()[1] == 1 && b.shape()[0] == a.shape()[0]) return Broadcast::kColumn;
  }
  fail(ErrorCode::kDimension, std::string(op) + ": cannot broadcast " +
                                  shape_string(b.shape()) + " into " + shape_string(a.shape()));
}

inline std::size_t b_index(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return i;
    case Broadcast::kScalar: return 0;
    case Broadcast::kRow: return i % cols;
    case Broadcast::kColumn: return i / cols;
  }
  return 0;
}

// f(x, y) with partials dfdx(x, y), dfdy(x, y).
template <class F, class Dx, class Dy>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, Dx dfdx, Dy dfdy) {
  const Broadcast kind = broadcast_kind(a, b, op);
  const std::size_t cols = a.rank() == 2 ? a.shape()[1] : 1;
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[b_index(kind, i, cols)]);
  return make_result(a.shape(), std::move(out), {a, b},
                     [a, b, kind, cols, dfdx, dfdy](std::span<const double> g,
                                                    std::span<Adjoint* const> in) {
                       const auto av = a.values();
                       const auto bv = b.values();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t j = b_index(kind, i, cols);
                         if (in[0]) (*in[0])[i] += g[i] * dfdx(av[i], bv[j]);
                         if (in[1]) (*in[1])[j] += g[i] * dfdy(av[i], bv[j]);
                       }
                     });
}

template <class F, class D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  const auto av = a.values();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return make_result(a.shape(), std::move(out), {a},
                     [a, dfdx](std::span<const double> g, std::span<Adjoint* const> in) {
                       const auto av = a.values();
                       for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * dfdx(av[i]);
                     });
}

// c[m x n] += a[m x k] * b[k x n], with optional transposes of the operands
// expressed through strides.
void gemm_accumulate(const double* a, std::size_t a_rs, std::size_t a_cs, const double* b,
                     std::size_t b_rs, std::size_t b_cs, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * a_rs + p * a_cs];
      if (aip == 0.0) continue;
      const double* brow = b + p * b_rs;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j * b_cs];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  require(b.shape()[0] == k, ErrorCode::kDimension,
          "matmul: inner extents differ, " + shape_string(a.shape()) + " * " +
              shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  gemm_accumulate(a.values().data(), k, 1, b.values().data(), n, 1, out.data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g, std::span<Adjoint* const> in) {
                       // dA = G B^T, dB = A^T G
                       if (in[0])
                         gemm_accumulate(g.data(), n, 1, b.values().data(), 1, n,
                                         in[0]->data(), m, n, k);
                       if (in[1])
                         gemm_accumulate(a.values().data(), 1, k, g.data(), n, 1,
                                         in[1]->data(), k, m, n);
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result({n, m}, std::move(out), {a},
                     [m, n](std::span<const double> g, std::span<Adjoint* const> in) {
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*in[0])[i * n + j] += g[j * m + i];
                     });
}

Tensor trace(const Tensor& a) {
  require_rank(a, 2, "trace");
  const std::size_t n = a.shape()[0];
  require(a.shape()[1] == n, ErrorCode::kDimension,
          "trace: matrix is not square, " + shape_string(a.shape()));
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) t += a.at(i, i);
  return make_result({}, {t}, {a}, [n](std::span<const double> g, std::span<Adjoint* const> in) {
    for (std::size_t i = 0; i < n; ++i) (*in[0])[i * n + i] += g[0];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double x) { return 0.5 / std::sqrt(x); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({}, {s}, {a}, [](std::span<const double> g, std::span<Adjoint* const> in) {
    for (double& v : *in[0]) v += g[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, ErrorCode::kDimension, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  require_rank(a, 2, "sum_axis");
  require(axis < 2, ErrorCode::kDimension, "sum_axis: axis must be 0 or 1");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto av = a.values();
  if (axis == 0) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
    return make_result({1, n}, std::move(out), {a},
                       [m, n](std::span<const double> g, std::span<Adjoint* const> in) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) (*in[0])[i * n + j] += g[j];
                       });
  }
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += av[i * n + j];
  return make_result({m, 1}, std::move(out), {a},
                     [m, n](std::span<const double> g, std::span<Adjoint* const> in) {
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*in[0])[i * n + j] += g[i];
                     });
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  require_rank(a, 2, "mean_axis");
  const std::size_t count = a.shape()[axis == 0 ? 0 : 1];
  require(count > 0, ErrorCode::kDimension, "mean_axis over an empty axis");
  return scale(sum_axis(a, axis), 1.0 / static_cast<double>(count));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(element_count(shape) == a.numel(), ErrorCode::kDimension,
          "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a},
                     [](std::span<const double> g, std::span<Adjoint* const> in) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_cols");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  require(begin <= end && end <= n, ErrorCode::kDimension,
          "slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") outside " + shape_string(a.shape()));
  const std::size_t w = end - begin;
  const auto av = a.values();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * n + begin + j];
  return make_result({m, w}, std::move(out), {a},
                     [m, n, w, begin](std::span<const double> g, std::span<Adjoint* const> in) {
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           (*in[0])[i * n + begin + j] += g[i * w + j];
                     });
}

Tensor channels_to_rows(const Tensor& x) {
  require_rank(x, 4, "channels_to_rows");
  const std::size_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  const std::size_t cols = n * hw;
  const auto xv = x.values();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) out[ch * cols + i * hw + p] = xv[(i * c + ch) * hw + p];
  return make_result({c, cols}, std::move(out), {x},
                     [n, c, hw, cols](std::span<const double> g, std::span<Adjoint* const> in) {
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t ch = 0; ch < c; ++ch)
                           for (std::size_t p = 0; p < hw; ++p)
                             (*in[0])[(i * c + ch) * hw + p] += g[ch * cols + i * hw + p];
                     });
}

Tensor rows_to_channels(const Tensor& z, std::size_t n, std::size_t h, std::size_t w) {
  require_rank(z, 2, "rows_to_channels");
  const std::size_t c = z.shape()[0], hw = h * w, cols = n * hw;
  require(z.shape()[1] == cols, ErrorCode::kDimension,
          "rows_to_channels: " + shape_string(z.shape()) + " does not hold " +
              std::to_string(n) + " maps of " + std::to_string(h) + "x" + std::to_string(w));
  const auto zv = z.values();
  std::vector<double> out(z.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) out[(i * c + ch) * hw + p] = zv[ch * cols + i * hw + p];
  return make_result({n, c, h, w}, std::move(out), {z},
                     [n, c, hw, cols](std::span<const double> g, std::span<Adjoint* const> in) {
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t ch = 0; ch < c; ++ch)
                           for (std::size_t p = 0; p < hw; ++p)
                             (*in[0])[ch * cols + i * hw + p] += g[(i * c + ch) * hw + p];
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions options) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const std::size_t o = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
  const std::size_t s = options.stride, pad = options.padding;
  require(weight.shape()[1] == c, ErrorCode::kDimension,
          "conv2d: weight " + shape_string(weight.shape()) + " does not match input " +
              shape_string(x.shape()));
  require(s >= 1, ErrorCode::kDimension, "conv2d: stride must be positive");
  require(h + 2 * pad >= kh && w + 2 * pad >= kw, ErrorCode::kDimension,
          "conv2d: kernel larger than padded input");
  const bool has_bias = bias.numel() > 0 && bias.rank() >= 1;
  require(!has_bias || bias.numel() == o, ErrorCode::kDimension,
          "conv2d: bias " + shape_string(bias.shape()) + " for " + std::to_string(o) +
              " output channels");
  const std::size_t oh = (h + 2 * pad - kh) / s + 1, ow = (w + 2 * pad - kw) / s + 1;

  const auto xv = x.values();
  const auto wv = weight.values();
  std::vector<double> out(n * o * oh * ow, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = has_bias ? bias.at(oc) : 0.0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * s + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xo * s + kx) -
                                          static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += xv[((i * c + ic) * h + iy) * w + ix] * wv[((oc * c + ic) * kh + ky) * kw + kx];
              }
            }
          out[((i * o + oc) * oh + y) * ow + xo] = acc;
        }

  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      {n, o, oh, ow}, std::move(out), std::move(inputs),
      [x, weight, has_bias, n, c, h, w, o, kh, kw, s, pad, oh, ow](
          std::span<const double> g, std::span<Adjoint* const> in) {
        const auto xv = x.values();
        const auto wv = weight.values();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t oc = 0; oc < o; ++oc)
            for (std::size_t y = 0; y < oh; ++y)
              for (std::size_t xo = 0; xo < ow; ++xo) {
                const double go = g[((i * o + oc) * oh + y) * ow + xo];
                if (has_bias && in[2]) (*in[2])[oc] += go;
                if (go == 0.0) continue;
                for (std::size_t ic = 0; ic < c; ++ic)
                  for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * s + ky) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                      const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xo * s + kx) -
                                                static_cast<std::ptrdiff_t>(pad);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                      const std::size_t xi = ((i * c + ic) * h + iy) * w + ix;
                      const std::size_t wi = ((oc * c + ic) * kh + ky) * kw + kx;
                      if (in[0]) (*in[0])[xi] += go * wv[wi];
                      if (in[1]) (*in[1])[wi] += go * xv[xi];
                    }
                  }
              }
      });
}

Tensor maxpool2d(const Tensor& x, std::size_t kernel, std::size_t stride, bool ceil_mode) {
  require_rank(x, 4, "maxpool2d");
  require(kernel >= 1 && stride >= 1, ErrorCode::kDimension,
          "maxpool2d: kernel and stride must be positive");
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  auto out_extent = [&](std::size_t e) -> std::size_t {
    if (ceil_mode) return e <= kernel ? 1 : (e - kernel + stride - 1) / stride + 1;
    require(e >= kernel, ErrorCode::kDimension,
            "maxpool2d: kernel " + std::to_string(kernel) + " exceeds extent " +
                std::to_string(e));
    return (e - kernel) / stride + 1;
  };
  const std::size_t oh = out_extent(h), ow = out_extent(w);
  const auto xv = x.values();
  std::vector<double> out(n * c * oh * ow);
  std::vector<std::size_t> winners(out.size());
  for (std::size_t plane = 0; plane < n * c; ++plane)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = (plane * h + y * stride) * w + xo * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const std::size_t iy = y * stride + ky;
          if (iy >= h) break;
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t ix = xo * stride + kx;
            if (ix >= w) break;
            const std::size_t idx = (plane * h + iy) * w + ix;
            if (xv[idx] > best) {
              best = xv[idx];
              arg = idx;
            }
          }
        }
        const std::size_t o = (plane * oh + y) * ow + xo;
        out[o] = best;
        winners[o] = arg;
      }
  return make_result({n, c, oh, ow}, std::move(out), {x},
                     [winners = std::move(winners)](std::span<const double> g,
                                                    std::span<Adjoint* const> in) {
                       for (std::size_t o = 0; o < g.size(); ++o) (*in[0])[winners[o]] += g[o];
                     });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  require(labels.size() == n, ErrorCode::kDimension,
          "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
              std::to_string(n) + " rows");
  require(n > 0 && c > 0, ErrorCode::kDimension, "softmax_cross_entropy on empty logits");
  const auto lv = logits.values();
  std::vector<double> probs(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c, ErrorCode::kLabel,
            "label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
    const double* row = lv.data() + i * c;
    const double top = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - top);
    const double log_z = top + std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - log_z);
    total += log_z - row[labels[i]];
  }
  std::vector<int> y(labels.begin(), labels.end());
  return make_result(
      {}, {total / static_cast<double>(n)}, {logits},
      [probs = std::move(probs), y = std::move(y), n, c](std::span<const double> g,
                                                         std::span<Adjoint* const> in) {
        const double k = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            const double onehot = static_cast<std::size_t>(y[i]) == j ? 1.0 : 0.0;
            (*in[0])[i * c + j] += k * (probs[i * c + j] - onehot);
          }
      });
}

}  // namespace cwlab::ops
