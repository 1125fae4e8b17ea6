#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cwlab/error.hpp"
#include "cwlab/ops.hpp"
#include "support.hpp"

namespace {

using namespace cwlab;
using cwtest::gradient_error;
using cwtest::random_tensor;

// Naive cross-correlation used as an oracle for conv2d.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                                std::size_t pad) {
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  const std::size_t o = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = b.numel() ? b.at(oc) : 0.0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(xo * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += x.at(((s * c + ic) * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)) *
                       w.at(((oc * c + ic) * kh + ky) * kw + kx);
              }
          out.push_back(acc);
        }
  return out;
}

TEST(Ops, MatmulMatchesEigen) {
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor({4, 3}, rng), b = random_tensor({3, 5}, rng);
  const Eigen::MatrixXd expected = a.matrix() * b.matrix();
  EXPECT_LT((ops::matmul(a, b).matrix() - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Ops, MatmulRejectsMismatchedShapes) {
  std::mt19937_64 rng(1);
  try {
    ops::matmul(random_tensor({2, 3}, rng), random_tensor({2, 3}, rng));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimension);
  }
}

TEST(Ops, BroadcastRowAndColumn) {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor row({1, 3}, {10, 20, 30});
  const Tensor col({2, 1}, {100, 200});
  const Tensor r = ops::add(a, row), c = ops::sub(a, col);
  EXPECT_EQ(r.at(1, 2), 36.0);
  EXPECT_EQ(c.at(1, 0), -196.0);
  EXPECT_EQ(ops::div(a, Tensor::scalar(2.0)).at(0, 1), 1.0);
}

TEST(Ops, SoftmaxCrossEntropyMatchesFormula) {
  const Tensor logits({2, 3}, {1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
  const std::vector<int> y{1, 2};
  double expected = 0.0;
  const double rows[2][3] = {{1.0, 2.0, 0.5}, {-1.0, 0.0, 3.0}};
  for (int i = 0; i < 2; ++i) {
    double z = 0.0;
    for (double v : rows[i]) z += std::exp(v);
    expected += -(rows[i][y[static_cast<std::size_t>(i)]] - std::log(z));
  }
  EXPECT_NEAR(ops::softmax_cross_entropy(logits, y).item(), expected / 2.0, 1e-14);
}

TEST(Ops, SoftmaxCrossEntropyStableForLargeLogits) {
  const Tensor logits({1, 2}, {1000.0, 0.0});
  const std::vector<int> y{0};
  EXPECT_NEAR(ops::softmax_cross_entropy(logits, y).item(), 0.0, 1e-12);
}

TEST(Ops, Conv2dMatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({2, 3, 5, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng);
  const Tensor b = random_tensor({4}, rng);
  for (std::size_t stride : {1, 2})
    for (std::size_t pad : {0, 1}) {
      const Tensor y = ops::conv2d(x, w, b, {.stride = stride, .padding = pad});
      const auto expected = conv_oracle(x, w, b, stride, pad);
      ASSERT_EQ(y.numel(), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.at(i), expected[i], 1e-12);
    }
}

TEST(Ops, MaxPoolPicksWindowMaxima) {
  const Tensor x({1, 1, 3, 3}, {1, 5, 2, 7, 3, 4, 0, 9, 8});
  const Tensor floor_mode = ops::maxpool2d(x, 2, 2);
  ASSERT_EQ(floor_mode.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(floor_mode.at(0), 7.0);
  const Tensor ceil_mode = ops::maxpool2d(x, 2, 2, true);
  ASSERT_EQ(ceil_mode.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(ceil_mode.at(1), 4.0);
  EXPECT_EQ(ceil_mode.at(2), 9.0);
  EXPECT_EQ(ceil_mode.at(3), 8.0);
}

TEST(Ops, ChannelRowsRoundTrip) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({2, 3, 2, 4}, rng, false);
  const Tensor z = ops::channels_to_rows(x);
  ASSERT_EQ(z.shape(), (Shape{3, 16}));
  // Column index is sample-major then raster.
  EXPECT_EQ(z.at(1, 8 + 5), x.at(((1 * 3 + 1) * 2 + 1) * 4 + 1));
  const Tensor back = ops::rows_to_channels(z, 2, 2, 4);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(back.at(i), x.at(i));
}

TEST(Gradients, ElementwiseAndReductions) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({3, 4}, rng);
  const Tensor other = random_tensor({3, 4}, rng, false);
  const Tensor row = random_tensor({1, 4}, rng, false);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::mul(v, other)); }, x), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::mean(ops::square(ops::add(v, row))); }, x), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::div(other, ops::add_scalar(ops::square(v), 1.0))); }, x), 1e-7);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::sqrt(ops::add_scalar(ops::square(v), 0.5))); }, x), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::mul(ops::sum_axis(v, 0), row)); }, x), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::square(ops::mean_axis(v, 1))); }, x), 1e-8);
}

TEST(Gradients, BroadcastOperandReceivesSummedAdjoint) {
  std::mt19937_64 rng(5);
  const Tensor a = random_tensor({3, 4}, rng, false);
  const Tensor col = random_tensor({3, 1}, rng);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::square(ops::sub(a, v))); }, col), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::div(a, ops::add_scalar(ops::square(v), 1.0))); }, col), 1e-7);
}

TEST(Gradients, LinearAlgebra) {
  std::mt19937_64 rng(6);
  const Tensor a = random_tensor({3, 3}, rng);
  const Tensor b = random_tensor({3, 2}, rng, false);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::square(ops::matmul(v, b))); }, a), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::trace(ops::matmul(v, ops::transpose(v))); }, a), 1e-8);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return ops::sum(ops::square(ops::slice_cols(ops::reshape(v, {1, 9}), 2, 7))); }, a), 1e-8);
}

TEST(Gradients, ConvPoolAndCrossEntropy) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const std::vector<int> y{1, 0};
  auto net = [&](const Tensor& xi, const Tensor& wi, const Tensor& bi) {
    const Tensor h = ops::maxpool2d(ops::relu(ops::conv2d(xi, wi, bi, {.stride = 1, .padding = 1})), 2, 2, true);
    const Tensor flat = ops::reshape(h, {2, h.numel() / 2});
    return ops::softmax_cross_entropy(ops::slice_cols(flat, 0, 3), y);
  };
  EXPECT_LT(gradient_error([&](const Tensor& v) { return net(v, w, b); }, x), 1e-6);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return net(x, v, b); }, w), 1e-6);
  EXPECT_LT(gradient_error([&](const Tensor& v) { return net(x, w, v); }, b), 1e-6);
}

TEST(Tape, NoGradScopeSuspendsRecording) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({2, 2}, rng);
  GradientTape tape;
  {
    NoGradScope no_grad;
    ops::matmul(x, x);
  }
  EXPECT_EQ(tape.size(), 0u);
  ops::matmul(x, x);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Tape, UnusedLeafHasZeroGradient) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({2, 2}, rng), unused = random_tensor({2, 2}, rng);
  GradientTape tape;
  const Gradients g = tape.backward(ops::sum(x));
  const Tensor gu = g[unused];
  for (double v : gu.values()) EXPECT_EQ(v, 0.0);
  const Tensor gx = g[x];
  for (double v : gx.values()) EXPECT_EQ(v, 1.0);
}

TEST(Tape, GradientsAccumulateOverReuse) {
  const Tensor x({1, 1}, {3.0}, true);
  GradientTape tape;
  const Gradients g = tape.backward(ops::sum(ops::add(ops::mul(x, x), x)));
  EXPECT_DOUBLE_EQ(g[x].item(), 7.0);
}

}  // namespace
