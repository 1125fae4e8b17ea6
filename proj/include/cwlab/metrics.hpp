#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cwlab/model.hpp"
#include "cwlab/reducer.hpp"
#include "cwlab/tensor.hpp"

namespace cwlab::metrics {

/// P(score of a random positive > score of a random negative), ties 1/2,
/// via the rank-sum statistic. Metric error if either side is empty.
double purity_auc(std::span<const double> positives, std::span<const double> negatives);

/// Highest per-axis AUC over the columns of [n x d] activation matrices.
double best_axis_auc(const Eigen::MatrixXd& positives, const Eigen::MatrixXd& negatives);

struct Similarity {
  Eigen::MatrixXd d;  // mean pairwise cosine similarity, self-pairs included on the diagonal
  Eigen::MatrixXd q;  // d_ij / sqrt(d_ii d_jj)
};

/// `groups[i]` holds one latent per row for concept i.
Similarity similarity_matrices(std::span<const Eigen::MatrixXd> groups);

/// Mean of the off-diagonal entries, skipping NaN.
double mean_off_diagonal(const Eigen::MatrixXd& m);

struct Correlation {
  Eigen::MatrixXd abs_corr;  // NaN where an axis has zero variance
  std::vector<bool> defined;  // per axis
};

/// Absolute Pearson correlation between the rows of `latents` [d x n].
Correlation axis_correlation(const Eigen::MatrixXd& latents);

enum class LossKind { kMulticlass, kBalancedBinary };

struct ImportanceOptions {
  LossKind kind = LossKind::kMulticlass;
  int target = 0;  // positive class for kBalancedBinary
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;
};

struct Importance {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over repetitions
  std::vector<double> ratios;
  double original_loss = 0.0;
};

/// Loss of eval-mode logits under `kind`.
double classification_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                           LossKind kind, int target);

/// CI_j = mean over repetitions of e_switch / e_orig, where e_switch permutes
/// axis j of the slot output across samples before the downstream layers.
Importance concept_importance(model::Model& model, const Tensor& x, std::span<const int> labels,
                              std::size_t axis, const ImportanceOptions& options);

/// Eval-mode slot activations [n x d], maps reduced by `reducer`.
Eigen::MatrixXd slot_activations(model::Model& model, const Tensor& x,
                                 const cw::ActivationReducer& reducer,
                                 std::size_t batch_size = 256);

struct Ranked {
  std::size_t sample_id = 0;
  double activation = 0.0;
};

/// Descending by activation, ties by ascending sample id.
std::vector<Ranked> topk_activated(std::span<const double> activations, std::size_t k);

struct Histogram2d {
  std::size_t grid = 0;
  Eigen::MatrixXi counts;  // counts(cell_x, cell_y)
  std::vector<std::optional<std::size_t>> representative;  // index cell_x * grid + cell_y
  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
};

/// g x g grid over the bounding box of (x, y). A single sample occupies one
/// cell; otherwise a zero range on either axis is a degenerate-range error.
Histogram2d joint_histogram(std::span<const double> x, std::span<const double> y, std::size_t grid,
                            std::uint64_t seed);

/// Fraction of `population` strictly below `value`.
double percentile_rank(std::span<const double> population, double value);

struct TrajectoryPoint {
  std::size_t layer = 0;
  double rank_i = 0.0;
  double rank_j = 0.0;
};

/// `layers[l]` holds the [n x d] activations recorded at layer l.
std::vector<TrajectoryPoint> percentile_trajectory(std::span<const Eigen::MatrixXd> layers,
                                                   std::size_t sample, std::size_t axis_i,
                                                   std::size_t axis_j);

struct OcclusionOptions {
  std::size_t patch = 0;   // 0 selects a quarter of the image side
  std::size_t stride = 0;  // 0 selects ceil(side / 12)
  double quantile = 0.9;   // drops above this quantile form the receptive field
  /// Patch content; zeros when absent. Must match the image shape.
  std::optional<Tensor> fill;
};

struct OcclusionCell {
  std::size_t row = 0, col = 0;  // top-left pixel of the patch
  double drop = 0.0;
  bool in_receptive_field = false;
};

struct OcclusionMap {
  std::size_t patch = 0, stride = 0;
  std::size_t grid_rows = 0, grid_cols = 0;
  double baseline = 0.0;
  double threshold = 0.0;
  std::vector<OcclusionCell> cells;  // raster order over patch positions
};

/// Activation drop on `axis` when a patch of `image` [C x H x W] is replaced.
OcclusionMap occlusion_map(model::Model& model, const Tensor& image, std::size_t axis,
                           const cw::ActivationReducer& reducer, const OcclusionOptions& options);

/// Linear-interpolation quantile of `values`, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace cwlab::metrics
