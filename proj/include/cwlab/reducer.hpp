#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace cwlab::cw {

enum class ReducerKind { kMean, kMax, kPositiveMean, kMaxPoolMean };

/// Rule collapsing one post-whitening feature map to a concept activation.
struct ActivationReducer {
  ReducerKind kind = ReducerKind::kMaxPoolMean;
  std::size_t pool_size = 2;  // maxpool-mean only

  void validate() const;
};

std::string_view to_string(ReducerKind kind);
/// Accepts mean, max, positive_mean, maxpool_mean (dashes also accepted).
ReducerKind parse_reducer_kind(std::string_view name);

/// mean | max | mean of strictly positive cells (0 if none) | mean of the
/// max-pooled map (window = stride = pool_size, partial border windows kept).
double reduce_activation(const Eigen::MatrixXd& map, const ActivationReducer& reducer);

/// Cell weights w with reduce_activation(map) == sum(w .* map). For the max
/// based reducers this is the subgradient routed to the winning cells.
Eigen::MatrixXd reducer_weights(const Eigen::MatrixXd& map, const ActivationReducer& reducer);

}  // namespace cwlab::cw
