#include "cwlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "cwlab/cw_layer.hpp"
#include "cwlab/dataset.hpp"
#include "cwlab/error.hpp"
#include "cwlab/tape.hpp"

namespace cwlab::metrics {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd log_softmax_row(const Eigen::RowVectorXd& z) {
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  return (z.array() - lse).transpose();
}

// Eval-mode slot outputs for all samples, concatenated along the first axis.
Tensor slot_outputs(model::Model& model, const Tensor& x, std::size_t batch_size) {
  NoGradScope no_grad;
  const std::size_t n = x.shape()[0];
  std::vector<double> values;
  Shape shape;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    const Tensor out = model.latent(gather(x, idx), Mode::kEval);
    shape = out.shape();
    values.insert(values.end(), out.values().begin(), out.values().end());
  }
  shape[0] = n;
  return Tensor(std::move(shape), std::move(values));
}

Eigen::MatrixXd head_logits(model::Model& model, const Tensor& slot, std::size_t batch_size) {
  NoGradScope no_grad;
  const std::size_t n = slot.shape()[0];
  Eigen::MatrixXd logits;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    const Eigen::MatrixXd part = model.head(gather(slot, idx), Mode::kEval).matrix();
    if (logits.size() == 0) logits.resize(static_cast<Eigen::Index>(n), part.cols());
    logits.middleRows(static_cast<Eigen::Index>(start), part.rows()) = part;
  }
  return logits;
}

// Moves axis `axis` of sample perm[i] into sample i.
Tensor permute_axis(const Tensor& slot, std::size_t axis, std::span<const std::size_t> perm) {
  const std::size_t n = slot.shape()[0], d = slot.shape()[1];
  const std::size_t cells = slot.numel() / (n * d);
  std::vector<double> v(slot.values().begin(), slot.values().end());
  const auto src = slot.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < cells; ++c)
      v[(i * d + axis) * cells + c] = src[(perm[i] * d + axis) * cells + c];
  return Tensor(slot.shape(), std::move(v));
}

}  // namespace

double purity_auc(std::span<const double> positives, std::span<const double> negatives) {
  require(!positives.empty() && !negatives.empty(), ErrorCode::kMetric,
          "AUC needs both positive and negative samples");
  struct Item {
    double value;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double v : positives) items.push_back({v, true});
  for (double v : negatives) items.push_back({v, false});
  for (const Item& it : items)
    require(!std::isnan(it.value), ErrorCode::kMetric, "AUC input contains NaN");
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

  // Average ranks (1-based) over tie groups; all sums are multiples of 1/2.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (items[k].positive) rank_sum += avg_rank;
    i = j;
  }
  const auto np = static_cast<double>(positives.size());
  const auto nn = static_cast<double>(negatives.size());
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

double best_axis_auc(const Eigen::MatrixXd& positives, const Eigen::MatrixXd& negatives) {
  require(positives.cols() == negatives.cols(), ErrorCode::kDimension,
          "positive and negative activations differ in width");
  double best = 0.0;
  for (Eigen::Index a = 0; a < positives.cols(); ++a) {
    const Eigen::VectorXd p = positives.col(a), n = negatives.col(a);
    best = std::max(best, purity_auc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                                     std::span<const double>(n.data(), static_cast<std::size_t>(n.size()))));
  }
  return best;
}

Similarity similarity_matrices(std::span<const Eigen::MatrixXd> groups) {
  require(groups.size() >= 2, ErrorCode::kMetric, "similarity needs at least 2 concepts");
  const Eigen::Index dim = groups[0].cols();
  std::vector<Eigen::VectorXd> sums;
  std::vector<double> counts;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Eigen::MatrixXd& m = groups[g];
    require(m.rows() >= 2, ErrorCode::kMetric,
            "concept " + std::to_string(g) + " needs at least 2 samples for similarity");
    require(m.cols() == dim, ErrorCode::kDimension, "concept latents differ in width");
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double norm = m.row(r).norm();
      require(norm > 0.0, ErrorCode::kData,
              "zero latent vector in concept " + std::to_string(g) + ", sample " + std::to_string(r));
      s += m.row(r).transpose() / norm;
    }
    sums.push_back(std::move(s));
    counts.push_back(static_cast<double>(m.rows()));
  }
  const auto k = static_cast<Eigen::Index>(groups.size());
  Similarity out;
  out.d.resize(k, k);
  // Mean of u_p·v_q over all pairs equals (Σ u_p)·(Σ v_q) / (n_i n_j).
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out.d(i, j) = sums[static_cast<std::size_t>(i)].dot(sums[static_cast<std::size_t>(j)]) /
                    (counts[static_cast<std::size_t>(i)] * counts[static_cast<std::size_t>(j)]);
  out.q.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    require(out.d(i, i) > 0.0, ErrorCode::kMetric,
            "intra-concept similarity of concept " + std::to_string(i) + " is zero");
    for (Eigen::Index j = 0; j < k; ++j)
      out.q(i, j) = i == j ? 1.0 : out.d(i, j) / std::sqrt(out.d(i, i) * out.d(j, j));
  }
  return out;
}

double mean_off_diagonal(const Eigen::MatrixXd& m) {
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && !std::isnan(m(i, j))) {
        total += m(i, j);
        ++count;
      }
  return count == 0 ? kNaN : total / static_cast<double>(count);
}

Correlation axis_correlation(const Eigen::MatrixXd& latents) {
  require(latents.cols() >= 2, ErrorCode::kMetric, "correlation needs at least 2 samples");
  const Eigen::Index d = latents.rows();
  const Eigen::MatrixXd centered = latents.colwise() - latents.rowwise().mean();
  const Eigen::MatrixXd cov = centered * centered.transpose();
  Correlation out;
  out.abs_corr.resize(d, d);
  out.defined.resize(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) out.defined[static_cast<std::size_t>(i)] = cov(i, i) > 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!out.defined[static_cast<std::size_t>(i)] || !out.defined[static_cast<std::size_t>(j)]) {
        out.abs_corr(i, j) = kNaN;
      } else if (i == j) {
        out.abs_corr(i, j) = 1.0;
      } else {
        out.abs_corr(i, j) = std::min(1.0, std::abs(cov(i, j)) / std::sqrt(cov(i, i) * cov(j, j)));
      }
    }
  return out;
}

double classification_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, LossKind kind,
                           int target) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size() && !labels.empty(),
          ErrorCode::kDimension, "one label per logit row");
  if (kind == LossKind::kMulticlass) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      require(y >= 0 && y < logits.cols(), ErrorCode::kLabel, "label out of range");
      total -= log_softmax_row(logits.row(i))(y);
    }
    return total / static_cast<double>(logits.rows());
  }
  require(target >= 0 && target < logits.cols(), ErrorCode::kLabel,
          "balanced binary target " + std::to_string(target) + " out of range");
  double pos = 0.0, neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double log_p = log_softmax_row(logits.row(i))(target);
    if (labels[static_cast<std::size_t>(i)] == target) {
      pos -= log_p;
      ++n_pos;
    } else {
      // log(1 - p) computed as log1p(-p) with p = exp(log_p).
      neg -= std::log1p(-std::exp(log_p));
      ++n_neg;
    }
  }
  require(n_pos > 0 && n_neg > 0, ErrorCode::kMetric,
          "balanced binary loss needs samples on both sides of class " + std::to_string(target));
  return 0.5 * pos / static_cast<double>(n_pos) + 0.5 * neg / static_cast<double>(n_neg);
}

Importance concept_importance(model::Model& model, const Tensor& x, std::span<const int> labels,
                              std::size_t axis, const ImportanceOptions& options) {
  const std::size_t n = x.shape()[0];
  require(n >= 2, ErrorCode::kMetric, "concept importance needs at least 2 samples");
  require(labels.size() == n, ErrorCode::kDimension, "one label per sample");
  require(options.repetitions >= 1, ErrorCode::kConfiguration, "repetitions must be at least 1");
  const Tensor slot = slot_outputs(model, x, 256);
  require(axis < slot.shape()[1], ErrorCode::kIndex,
          "axis " + std::to_string(axis) + " outside latent width " + std::to_string(slot.shape()[1]));
  Importance out;
  out.original_loss =
      classification_loss(head_logits(model, slot, 256), labels, options.kind, options.target);
  require(out.original_loss > 0.0, ErrorCode::kMetric,
          "original loss is zero; importance ratio undefined");
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t r = 0; r < options.repetitions; ++r) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::MatrixXd logits = head_logits(model, permute_axis(slot, axis, perm), 256);
    out.ratios.push_back(classification_loss(logits, labels, options.kind, options.target) /
                         out.original_loss);
  }
  const double r = static_cast<double>(out.ratios.size());
  out.mean = std::accumulate(out.ratios.begin(), out.ratios.end(), 0.0) / r;
  if (out.ratios.size() > 1) {
    double ss = 0.0;
    for (double v : out.ratios) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (r - 1.0));
  }
  return out;
}

Eigen::MatrixXd slot_activations(model::Model& model, const Tensor& x,
                                 const cw::ActivationReducer& reducer, std::size_t batch_size) {
  return cw::axis_activations(slot_outputs(model, x, batch_size), reducer);
}

std::vector<Ranked> topk_activated(std::span<const double> activations, std::size_t k) {
  require(k <= activations.size(), ErrorCode::kConfiguration,
          "k = " + std::to_string(k) + " exceeds " + std::to_string(activations.size()) + " samples");
  std::vector<Ranked> all;
  all.reserve(activations.size());
  for (std::size_t i = 0; i < activations.size(); ++i) all.push_back({i, activations[i]});
  std::stable_sort(all.begin(), all.end(),
                   [](const Ranked& a, const Ranked& b) { return a.activation > b.activation; });
  all.resize(k);
  return all;
}

Histogram2d joint_histogram(std::span<const double> x, std::span<const double> y, std::size_t grid,
                            std::uint64_t seed) {
  require(grid >= 2, ErrorCode::kConfiguration, "histogram grid must be at least 2");
  require(x.size() == y.size() && !x.empty(), ErrorCode::kDimension,
          "histogram needs matching, nonempty activation lists");
  Histogram2d h;
  h.grid = grid;
  const auto [min_x, max_x] = std::minmax_element(x.begin(), x.end());
  const auto [min_y, max_y] = std::minmax_element(y.begin(), y.end());
  h.min_x = *min_x;
  h.max_x = *max_x;
  h.min_y = *min_y;
  h.max_y = *max_y;
  if (x.size() > 1) {
    require(h.max_x > h.min_x, ErrorCode::kDegenerateRange, "zero activation range on the first axis");
    require(h.max_y > h.min_y, ErrorCode::kDegenerateRange, "zero activation range on the second axis");
  }
  const auto g = static_cast<Eigen::Index>(grid);
  const auto cell = [grid](double v, double lo, double hi) -> std::size_t {
    if (hi <= lo) return 0;
    const double f = (v - lo) / (hi - lo) * static_cast<double>(grid);
    return std::min(grid - 1, static_cast<std::size_t>(f));
  };
  h.counts = Eigen::MatrixXi::Zero(g, g);
  std::vector<std::vector<std::size_t>> members(grid * grid);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t cx = cell(x[i], h.min_x, h.max_x), cy = cell(y[i], h.min_y, h.max_y);
    ++h.counts(static_cast<Eigen::Index>(cx), static_cast<Eigen::Index>(cy));
    members[cx * grid + cy].push_back(i);
  }
  std::mt19937_64 rng(seed);
  h.representative.resize(grid * grid);
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    const std::size_t pick =
        std::uniform_int_distribution<std::size_t>(0, members[c].size() - 1)(rng);
    h.representative[c] = members[c][pick];
  }
  return h;
}

double percentile_rank(std::span<const double> population, double value) {
  require(!population.empty(), ErrorCode::kData, "empty reference population");
  const auto below = std::count_if(population.begin(), population.end(),
                                   [value](double v) { return v < value; });
  return static_cast<double>(below) / static_cast<double>(population.size());
}

std::vector<TrajectoryPoint> percentile_trajectory(std::span<const Eigen::MatrixXd> layers,
                                                   std::size_t sample, std::size_t axis_i,
                                                   std::size_t axis_j) {
  std::vector<TrajectoryPoint> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Eigen::MatrixXd& acts = layers[l];
    require(sample < static_cast<std::size_t>(acts.rows()), ErrorCode::kData,
            "sample " + std::to_string(sample) + " absent from layer " + std::to_string(l));
    require(axis_i < static_cast<std::size_t>(acts.cols()) &&
                axis_j < static_cast<std::size_t>(acts.cols()),
            ErrorCode::kIndex, "trajectory axis outside layer " + std::to_string(l));
    const Eigen::VectorXd ci = acts.col(static_cast<Eigen::Index>(axis_i));
    const Eigen::VectorXd cj = acts.col(static_cast<Eigen::Index>(axis_j));
    const auto s = static_cast<Eigen::Index>(sample);
    out.push_back({l,
                   percentile_rank(std::span<const double>(ci.data(), static_cast<std::size_t>(ci.size())), ci(s)),
                   percentile_rank(std::span<const double>(cj.data(), static_cast<std::size_t>(cj.size())), cj(s))});
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::kMetric, "quantile of an empty set");
  require(q >= 0.0 && q <= 1.0, ErrorCode::kConfiguration, "quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

OcclusionMap occlusion_map(model::Model& model, const Tensor& image, std::size_t axis,
                           const cw::ActivationReducer& reducer, const OcclusionOptions& options) {
  require(image.rank() == 3, ErrorCode::kDimension,
          "occlusion expects a [C x H x W] image, got " + shape_string(image.shape()));
  const std::size_t channels = image.shape()[0], rows = image.shape()[1], cols = image.shape()[2];
  OcclusionMap out;
  const std::size_t side = std::min(rows, cols);
  out.patch = options.patch != 0 ? options.patch : std::max<std::size_t>(1, side / 4);
  out.stride = options.stride != 0 ? options.stride : (side + 11) / 12;
  require(out.patch <= rows && out.patch <= cols, ErrorCode::kConfiguration,
          "patch " + std::to_string(out.patch) + " larger than image " + shape_string(image.shape()));
  if (options.fill)
    require(options.fill->shape() == image.shape(), ErrorCode::kDimension,
            "occlusion fill must match the image shape");
  out.grid_rows = (rows - out.patch) / out.stride + 1;
  out.grid_cols = (cols - out.patch) / out.stride + 1;

  const auto src = image.values();
  std::vector<double> batch(src.begin(), src.end());
  for (std::size_t gr = 0; gr < out.grid_rows; ++gr)
    for (std::size_t gc = 0; gc < out.grid_cols; ++gc) {
      std::vector<double> img(src.begin(), src.end());
      const std::size_t r0 = gr * out.stride, c0 = gc * out.stride;
      for (std::size_t ch = 0; ch < channels; ++ch)
        for (std::size_t r = r0; r < r0 + out.patch; ++r)
          for (std::size_t c = c0; c < c0 + out.patch; ++c) {
            const std::size_t at = (ch * rows + r) * cols + c;
            img[at] = options.fill ? options.fill->at(at) : 0.0;
          }
      batch.insert(batch.end(), img.begin(), img.end());
      out.cells.push_back({r0, c0, 0.0, false});
    }
  const Tensor x({out.cells.size() + 1, channels, rows, cols}, std::move(batch));
  const Eigen::MatrixXd acts = slot_activations(model, x, reducer);
  require(axis < static_cast<std::size_t>(acts.cols()), ErrorCode::kIndex,
          "axis " + std::to_string(axis) + " outside latent width");
  const auto a = static_cast<Eigen::Index>(axis);
  out.baseline = acts(0, a);
  std::vector<double> drops;
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    out.cells[i].drop = out.baseline - acts(static_cast<Eigen::Index>(i + 1), a);
    drops.push_back(out.cells[i].drop);
  }
  out.threshold = quantile(drops, options.quantile);
  for (OcclusionCell& c : out.cells) c.in_receptive_field = c.drop > out.threshold;
  return out;
}

}  // namespace cwlab::metrics
