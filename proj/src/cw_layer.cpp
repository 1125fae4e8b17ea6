#include "cwlab/cw_layer.hpp"

#include <string>

#include "cwlab/error.hpp"
#include "cwlab/ops.hpp"
#include "cwlab/tape.hpp"

namespace cwlab::cw {
namespace {

// [n x d] or [n x d x h x w] latent -> [d x columns] matrix plus map extents.
struct RowsView {
  Eigen::MatrixXd rows;
  std::size_t map_rows = 1;
  std::size_t map_cols = 1;
  bool spatial = false;
};

RowsView to_rows(const Tensor& latent, std::size_t dim) {
  RowsView v;
  if (latent.rank() == 2) {
    require(latent.shape()[1] == dim, ErrorCode::kDimension,
            "latent " + shape_string(latent.shape()) + " for CW dimension " + std::to_string(dim));
    v.rows = latent.matrix().transpose();
  } else {
    require(latent.rank() == 4 && latent.shape()[1] == dim, ErrorCode::kDimension,
            "latent " + shape_string(latent.shape()) + " for CW dimension " + std::to_string(dim));
    NoGradScope no_grad;
    v.rows = ops::channels_to_rows(latent).matrix();
    v.map_rows = latent.shape()[2];
    v.map_cols = latent.shape()[3];
    v.spatial = true;
  }
  return v;
}

}  // namespace

CwLayer::CwLayer(std::size_t dim, Config config)
    : config_(config), whitening_(dim, config.whitening), rotation_(dim, config.beta) {
  config_.reducer.validate();
  config_.search.validate();
}

Tensor CwLayer::forward(const Tensor& z, Mode mode) {
  require(z.rank() == 2 && z.shape()[0] == dim(), ErrorCode::kDimension,
          "CW layer of dimension " + std::to_string(dim()) + " given " + shape_string(z.shape()));
  const Tensor psi = whitening_.apply(z, mode);
  return ops::matmul(Tensor::from_matrix(rotation_.q().transpose()), psi);
}

Tensor CwLayer::forward_maps(const Tensor& x, Mode mode) {
  require(x.rank() == 4, ErrorCode::kDimension,
          "forward_maps expects [n x d x h x w], got " + shape_string(x.shape()));
  const Tensor out = forward(conv_reshape(x), mode);
  return conv_unreshape(out, x.shape()[0], x.shape()[2], x.shape()[3]);
}

std::vector<stiefel::ConceptBatch> CwLayer::concept_batches(
    std::span<const ConceptLatent> latents) const {
  std::vector<RowsView> views;
  views.reserve(latents.size());
  for (const ConceptLatent& c : latents) views.push_back(to_rows(c.latent, dim()));

  Eigen::VectorXd mean = whitening_.running_mean();
  Eigen::MatrixXd w = whitening_.running_whitener();
  if (config_.concept_stats == ConceptStats::kBatch && !views.empty()) {
    Eigen::Index total = 0;
    for (const RowsView& v : views) total += v.rows.cols();
    Eigen::MatrixXd joint(static_cast<Eigen::Index>(dim()), total);
    Eigen::Index at = 0;
    for (const RowsView& v : views) {
      joint.middleCols(at, v.rows.cols()) = v.rows;
      at += v.rows.cols();
    }
    const auto m = whitening::batch_moments(joint, whitening_.config().eps);
    mean = m.mean;
    w = whitening_.config().method == whitening::Method::kExact
            ? whitening::zca_exact(m.cov)
            : whitening::zca_newton(m.cov, whitening_.config().newton_iters);
  }

  std::vector<stiefel::ConceptBatch> batches;
  batches.reserve(latents.size());
  for (std::size_t i = 0; i < latents.size(); ++i) {
    stiefel::ConceptBatch b;
    b.axis = latents[i].axis;
    b.whitened = w * (views[i].rows.colwise() - mean);
    b.map_rows = views[i].map_rows;
    b.map_cols = views[i].map_cols;
    if (views[i].spatial) b.reducer = config_.reducer;
    batches.push_back(std::move(b));
  }
  return batches;
}

AlignResult CwLayer::align(std::span<const ConceptLatent> latents) {
  AlignResult result;
  if (latents.empty()) return result;
  const auto batches = concept_batches(latents);
  const Eigen::MatrixXd g = stiefel::alignment_gradient(rotation_.q(), batches);
  const Eigen::MatrixXd& momentum = rotation_.momentum_update(g);
  const auto negated = [&batches](const Eigen::MatrixXd& q) {
    return -stiefel::alignment_objective(q, batches);
  };
  const stiefel::SearchResult search =
      stiefel::curvilinear_search(rotation_.q(), momentum, negated, config_.search);
  rotation_.set_q(search.q);
  rotation_.restore_orthogonality();
  result.objective_before = -search.initial_objective;
  result.objective_after = -search.objective;
  result.step = search.step;
  result.exhausted = search.exhausted;
  return result;
}

Tensor conv_reshape(const Tensor& x) {
  require(x.rank() == 4, ErrorCode::kDimension,
          "conv_reshape expects rank 4, got " + shape_string(x.shape()));
  return ops::channels_to_rows(x);
}

Tensor conv_unreshape(const Tensor& z, std::size_t n, std::size_t h, std::size_t w) {
  return ops::rows_to_channels(z, n, h, w);
}

Eigen::MatrixXd axis_activations(const Tensor& output, const ActivationReducer& reducer) {
  if (output.rank() == 2) return output.matrix();
  require(output.rank() == 4, ErrorCode::kDimension,
          "axis_activations expects [n x d] or [n x d x h x w], got " +
              shape_string(output.shape()));
  const std::size_t n = output.shape()[0], d = output.shape()[1];
  const std::size_t h = output.shape()[2], w = output.shape()[3];
  const auto v = output.values();
  Eigen::MatrixXd acts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::MatrixXd map(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < d; ++ch) {
      const double* base = v.data() + (i * d + ch) * h * w;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          map(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = base[r * w + c];
      acts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ch)) =
          reduce_activation(map, reducer);
    }
  return acts;
}

double concept_activation(CwLayer& layer, const Tensor& sample_latent, std::size_t axis) {
  require(axis < layer.dim(), ErrorCode::kIndex,
          "axis " + std::to_string(axis) + " outside CW dimension " + std::to_string(layer.dim()));
  NoGradScope no_grad;
  Tensor latent = sample_latent;
  if (latent.rank() == 1) latent = ops::reshape(latent, {1, latent.shape()[0]});
  if (latent.rank() == 3)
    latent = ops::reshape(latent, {1, latent.shape()[0], latent.shape()[1], latent.shape()[2]});
  require(latent.shape()[0] == 1, ErrorCode::kDimension,
          "concept_activation takes a single sample, got " + shape_string(sample_latent.shape()));
  if (latent.rank() == 2) {
    const Tensor out = layer.forward(ops::transpose(latent), Mode::kEval);
    return out.at(axis, 0);
  }
  const Tensor out = layer.forward_maps(latent, Mode::kEval);
  return axis_activations(out, layer.reducer())(0, static_cast<Eigen::Index>(axis));
}

}  // namespace cwlab::cw
