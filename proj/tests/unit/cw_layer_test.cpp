#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cwlab/cw_layer.hpp"
#include "cwlab/ops.hpp"
#include "support.hpp"

namespace {

using namespace cwlab;
using namespace cwlab::cw;
using cwtest::max_abs;
using cwtest::random_matrix;
using cwtest::random_orthogonal;
using cwtest::thrown_code;

Config exact_config() {
  Config c;
  c.whitening.method = whitening::Method::kExact;
  return c;
}

ActivationReducer reducer(ReducerKind kind, std::size_t pool = 2) { return {kind, pool}; }

TEST(Reducer, HandExamples) {
  const Eigen::MatrixXd map{{1.0, -2.0}, {3.0, 0.0}};
  EXPECT_DOUBLE_EQ(reduce_activation(map, reducer(ReducerKind::kMean)), 0.5);
  EXPECT_DOUBLE_EQ(reduce_activation(map, reducer(ReducerKind::kMax)), 3.0);
  EXPECT_DOUBLE_EQ(reduce_activation(map, reducer(ReducerKind::kPositiveMean)), 2.0);
  EXPECT_DOUBLE_EQ(reduce_activation(map, reducer(ReducerKind::kMaxPoolMean)), 3.0);
  EXPECT_EQ(reduce_activation(-Eigen::MatrixXd::Ones(3, 3), reducer(ReducerKind::kPositiveMean)), 0.0);
}

TEST(Reducer, MaxPoolMeanMatchesBlockEnumeration) {
  Eigen::MatrixXd ramp(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) ramp(r, c) = 4 * r + c;
  double total = 0.0;
  for (int br = 0; br < 4; br += 2)
    for (int bc = 0; bc < 4; bc += 2) total += ramp.block(br, bc, 2, 2).maxCoeff();
  EXPECT_DOUBLE_EQ(reduce_activation(ramp, reducer(ReducerKind::kMaxPoolMean)), total / 4.0);
}

TEST(Reducer, PartialBorderWindowsAreKept) {
  // 3x3 with pool 2: windows {0..1}x{0..1}, {0..1}x{2}, {2}x{0..1}, {2}x{2}.
  const Eigen::MatrixXd map{{1, 2, 9}, {3, 4, 0}, {5, 0, -1}};
  EXPECT_DOUBLE_EQ(reduce_activation(map, reducer(ReducerKind::kMaxPoolMean)), (4.0 + 9.0 + 5.0 - 1.0) / 4.0);
}

TEST(Reducer, WeightsReproduceActivation) {
  std::mt19937_64 rng(50);
  for (auto kind : {ReducerKind::kMean, ReducerKind::kMax, ReducerKind::kPositiveMean, ReducerKind::kMaxPoolMean})
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd map = random_matrix(5, 4, rng);
      const ActivationReducer r = reducer(kind, 2 + static_cast<std::size_t>(trial % 2));
      EXPECT_NEAR(reducer_weights(map, r).cwiseProduct(map).sum(), reduce_activation(map, r), 1e-14);
    }
}

TEST(Reducer, Dominance) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd map = random_matrix(4, 6, rng);
    const double mean = reduce_activation(map, reducer(ReducerKind::kMean));
    const double max = reduce_activation(map, reducer(ReducerKind::kMax));
    const double pooled = reduce_activation(map, reducer(ReducerKind::kMaxPoolMean));
    const double positive = reduce_activation(map, reducer(ReducerKind::kPositiveMean));
    EXPECT_GE(max, pooled);
    EXPECT_GE(pooled, mean);
    EXPECT_GE(positive, mean);
  }
}

TEST(Reducer, ValidationAndNames) {
  EXPECT_EQ(thrown_code([] { reducer(ReducerKind::kMaxPoolMean, 1).validate(); }), ErrorCode::kConfiguration);
  EXPECT_EQ(thrown_code([] { reducer(ReducerKind::kMean, 1).validate(); }), std::nullopt);
  for (auto kind : {ReducerKind::kMean, ReducerKind::kMax, ReducerKind::kPositiveMean, ReducerKind::kMaxPoolMean})
    EXPECT_EQ(parse_reducer_kind(to_string(kind)), kind);
  EXPECT_EQ(parse_reducer_kind("maxpool-mean"), ReducerKind::kMaxPoolMean);
  EXPECT_EQ(thrown_code([] { parse_reducer_kind("median"); }), ErrorCode::kConfiguration);
}

TEST(ConvReshape, RasterOrderAndRoundTrip) {
  const Tensor tiny({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor row = conv_reshape(tiny);
  ASSERT_EQ(row.shape(), (Shape{1, 4}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(row.at(i), static_cast<double>(i + 1));

  std::mt19937_64 rng(52);
  const Tensor x = cwtest::random_tensor({2, 3, 4, 4}, rng, false);
  const Tensor z = conv_reshape(x);
  EXPECT_EQ(z.shape(), (Shape{3, 32}));
  EXPECT_TRUE(bitwise_equal(conv_unreshape(z, 2, 4, 4), x));
  EXPECT_EQ(thrown_code([] { conv_reshape(Tensor::zeros({2, 3})); }), ErrorCode::kDimension);
}

TEST(CwLayer, IdentityRotationMatchesWhitening) {
  std::mt19937_64 rng(53);
  const Tensor z = Tensor::from_matrix(random_matrix(4, 30, rng));
  CwLayer layer(4, Config{});
  whitening::WhiteningState reference(4, Config{}.whitening);
  EXPECT_LT(max_abs(layer.forward(z, Mode::kTrain).matrix() - reference.apply(z, Mode::kTrain).matrix()), 1e-15);
}

TEST(CwLayer, OutputCovarianceIsIdentityForAnyRotation) {
  std::mt19937_64 rng(54);
  const Tensor z = Tensor::from_matrix(random_matrix(5, 80, rng));
  const Tensor mixed = Tensor::from_matrix(random_matrix(5, 5, rng) * random_matrix(5, 80, rng));
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd q = random_orthogonal(5, rng);
    CwLayer layer(5, Config{});
    layer.rotation().set_q(q);
    const Eigen::MatrixXd out = layer.forward(z, Mode::kTrain).matrix();
    EXPECT_LT(max_abs(whitening::covariance(out) - Eigen::MatrixXd::Identity(5, 5)), 5e-2);
    // Five Newton steps fall short on strongly mixed data; the unridged exact whitener does not.
    Config unridged = exact_config();
    unridged.whitening.eps = 0.0;
    CwLayer exact(5, unridged);
    exact.rotation().set_q(q);
    const Eigen::MatrixXd exact_out = exact.forward(mixed, Mode::kTrain).matrix();
    EXPECT_LT(max_abs(whitening::covariance(exact_out) - Eigen::MatrixXd::Identity(5, 5)), 1e-4);
  }
}

TEST(CwLayer, PermutationRotationPermutesRows) {
  std::mt19937_64 rng(55);
  const Tensor z = Tensor::from_matrix(random_matrix(3, 10, rng));
  CwLayer plain(3, exact_config()), permuted(3, exact_config());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 2) = p(1, 0) = p(2, 1) = 1.0;  // output row j is whitened row perm[j]
  permuted.rotation().set_q(p);
  const Eigen::MatrixXd a = plain.forward(z, Mode::kTrain).matrix();
  const Eigen::MatrixXd b = permuted.forward(z, Mode::kTrain).matrix();
  EXPECT_EQ(b.row(0), a.row(1));
  EXPECT_EQ(b.row(1), a.row(2));
  EXPECT_EQ(b.row(2), a.row(0));
}

TEST(CwLayer, GradientThroughNewtonIterations) {
  std::mt19937_64 rng(56);
  for (int seed = 0; seed < 5; ++seed) {
    const Tensor z = cwtest::random_tensor({4, 9}, rng);
    const Tensor probe = cwtest::random_tensor({4, 9}, rng, false);
    const Eigen::MatrixXd q = random_orthogonal(4, rng);
    auto f = [&](const Tensor& v) {
      CwLayer layer(4, Config{});
      layer.rotation().set_q(q);
      return ops::sum(ops::mul(ops::square(layer.forward(v, Mode::kTrain)), probe));
    };
    EXPECT_LT(cwtest::gradient_error(f, z), 1e-4);
  }
}

TEST(CwLayer, ForwardMapsWhitensChannelRows) {
  std::mt19937_64 rng(57);
  const Tensor x = cwtest::random_tensor({3, 4, 3, 3}, rng, false);
  CwLayer layer(4, Config{});
  layer.rotation().set_q(random_orthogonal(4, rng));
  const Tensor maps = layer.forward_maps(x, Mode::kTrain);
  CwLayer twin(4, Config{});
  twin.rotation().set_q(layer.rotation().q());
  const Tensor rows = twin.forward(conv_reshape(x), Mode::kTrain);
  EXPECT_TRUE(bitwise_equal(conv_reshape(maps), rows));
}

TEST(CwLayer, DimensionMismatch) {
  CwLayer layer(3, Config{});
  EXPECT_EQ(thrown_code([&] { layer.forward(Tensor::zeros({4, 6}), Mode::kTrain); }), ErrorCode::kDimension);
}

TEST(ConceptActivation, VectorLatentUnitAxes) {
  CwLayer layer(4, Config{});
  layer.whitening().set_running(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4));
  for (std::size_t j = 0; j < 4; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(4, static_cast<Eigen::Index>(j));
    const Tensor sample = Tensor({4}, std::vector<double>(e.data(), e.data() + 4));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(concept_activation(layer, sample, k), j == k ? 1.0 : 0.0);
  }
  EXPECT_EQ(thrown_code([&] { concept_activation(layer, Tensor::zeros({4}), 4); }), ErrorCode::kIndex);
}

TEST(ConceptActivation, ConstantChannelWithMeanReducer) {
  Config config;
  config.reducer = reducer(ReducerKind::kMean);
  CwLayer layer(2, config);
  layer.whitening().set_running(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  std::vector<double> v(2 * 3 * 3, 0.0);
  std::fill(v.begin() + 9, v.end(), 2.5);
  EXPECT_DOUBLE_EQ(concept_activation(layer, Tensor({2, 3, 3}, v), 1), 2.5);
  EXPECT_DOUBLE_EQ(concept_activation(layer, Tensor({2, 3, 3}, v), 0), 0.0);
}

std::vector<ConceptLatent> planted_latents(std::mt19937_64& rng, std::size_t d, std::size_t k) {
  std::vector<ConceptLatent> latents;
  for (std::size_t j = 0; j < k; ++j) {
    Eigen::MatrixXd samples = random_matrix(12, static_cast<Eigen::Index>(d), rng);
    samples.col(static_cast<Eigen::Index>(d - 1 - j)).array() += 3.0;
    latents.push_back({j, Tensor::from_matrix(samples)});
  }
  return latents;
}

TEST(CwLayer, AlignChangesOnlyRotation) {
  std::mt19937_64 rng(58);
  CwLayer layer(5, Config{});
  layer.whitening().calibrate(random_matrix(5, 50, rng));
  const Eigen::VectorXd mean = layer.whitening().running_mean();
  const Eigen::MatrixXd w = layer.whitening().running_whitener();
  const Eigen::MatrixXd batch_w = layer.whitening().batch_whitener();
  const auto latents = planted_latents(rng, 5, 2);
  const AlignResult r = layer.align(latents);
  EXPECT_GE(r.objective_after, r.objective_before);
  EXPECT_NE(layer.rotation().q(), Eigen::MatrixXd(Eigen::MatrixXd::Identity(5, 5)));
  EXPECT_LT(layer.rotation().orthogonality_error(), 1e-10);
  EXPECT_EQ(layer.whitening().running_mean(), mean);
  EXPECT_EQ(layer.whitening().running_whitener(), w);
  EXPECT_EQ(layer.whitening().batch_whitener(), batch_w);
}

TEST(CwLayer, AlignWithoutConceptsIsNoOp) {
  CwLayer layer(3, Config{});
  const AlignResult r = layer.align({});
  EXPECT_EQ(r.step, 0.0);
  EXPECT_EQ(layer.rotation().q(), Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(CwLayer, RepeatedAlignmentFindsPlantedDirections) {
  std::mt19937_64 rng(59);
  // Frozen features: concepts are whitened with fixed statistics.
  Config config = exact_config();
  config.concept_stats = ConceptStats::kRunning;
  CwLayer layer(6, config);
  layer.whitening().set_running(Eigen::VectorXd::Zero(6), Eigen::MatrixXd::Identity(6, 6));
  const auto latents = planted_latents(rng, 6, 2);
  for (int s = 0; s < 100; ++s) layer.align(latents);
  const Eigen::MatrixXd& q = layer.rotation().q();
  // Concept j was planted on coordinate d-1-j.
  EXPECT_GT(q(5, 0), 0.9);
  EXPECT_GT(q(4, 1), 0.9);
}

TEST(CwLayer, BatchConceptStatisticsUseJointMoments) {
  std::mt19937_64 rng(60);
  Config config = exact_config();
  config.concept_stats = ConceptStats::kBatch;
  CwLayer layer(3, config);
  const auto latents = planted_latents(rng, 3, 2);
  const auto batches = layer.concept_batches(latents);
  ASSERT_EQ(batches.size(), 2u);
  Eigen::MatrixXd joint(3, 24);
  joint << batches[0].whitened, batches[1].whitened;
  EXPECT_LT(max_abs(joint.rowwise().mean()), 1e-12);
  EXPECT_LT(max_abs(whitening::covariance(joint) - Eigen::MatrixXd::Identity(3, 3)), 1e-4);
}

}  // namespace
