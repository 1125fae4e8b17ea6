#include "cwlab/reducer.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "cwlab/error.hpp"

namespace cwlab::cw {
namespace {

struct PoolWindow {
  Eigen::Index row, col;  // arg max
  double value;
};

// Visits every pooling window in raster order. Ties keep the first cell.
template <class F>
void for_each_window(const Eigen::MatrixXd& map, std::size_t pool, F&& visit) {
  const auto p = static_cast<Eigen::Index>(pool);
  for (Eigen::Index r0 = 0; r0 < map.rows(); r0 += p)
    for (Eigen::Index c0 = 0; c0 < map.cols(); c0 += p) {
      PoolWindow best{r0, c0, map(r0, c0)};
      for (Eigen::Index r = r0; r < std::min(r0 + p, map.rows()); ++r)
        for (Eigen::Index c = c0; c < std::min(c0 + p, map.cols()); ++c)
          if (map(r, c) > best.value) best = {r, c, map(r, c)};
      visit(best);
    }
}

}  // namespace

void ActivationReducer::validate() const {
  if (kind == ReducerKind::kMaxPoolMean)
    require(pool_size >= 2, ErrorCode::kConfiguration,
            "maxpool_mean reducer needs pool_size >= 2, got " + std::to_string(pool_size));
}

std::string_view to_string(ReducerKind kind) {
  switch (kind) {
    case ReducerKind::kMean: return "mean";
    case ReducerKind::kMax: return "max";
    case ReducerKind::kPositiveMean: return "positive_mean";
    case ReducerKind::kMaxPoolMean: return "maxpool_mean";
  }
  return "unknown";
}

ReducerKind parse_reducer_kind(std::string_view name) {
  std::string n(name);
  for (char& ch : n)
    if (ch == '-') ch = '_';
  if (n == "mean") return ReducerKind::kMean;
  if (n == "max") return ReducerKind::kMax;
  if (n == "positive_mean") return ReducerKind::kPositiveMean;
  if (n == "maxpool_mean") return ReducerKind::kMaxPoolMean;
  fail(ErrorCode::kConfiguration, "unknown reducer '" + std::string(name) + "'");
}

double reduce_activation(const Eigen::MatrixXd& map, const ActivationReducer& reducer) {
  require(map.size() > 0, ErrorCode::kDimension, "reduce_activation on an empty map");
  switch (reducer.kind) {
    case ReducerKind::kMean:
      return map.mean();
    case ReducerKind::kMax:
      return map.maxCoeff();
    case ReducerKind::kPositiveMean: {
      double total = 0.0;
      std::size_t count = 0;
      for (Eigen::Index i = 0; i < map.size(); ++i)
        if (map(i) > 0.0) {
          total += map(i);
          ++count;
        }
      return count == 0 ? 0.0 : total / static_cast<double>(count);
    }
    case ReducerKind::kMaxPoolMean: {
      reducer.validate();
      double total = 0.0;
      std::size_t count = 0;
      for_each_window(map, reducer.pool_size, [&](const PoolWindow& w) {
        total += w.value;
        ++count;
      });
      return total / static_cast<double>(count);
    }
  }
  return 0.0;
}

Eigen::MatrixXd reducer_weights(const Eigen::MatrixXd& map, const ActivationReducer& reducer) {
  require(map.size() > 0, ErrorCode::kDimension, "reducer_weights on an empty map");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(map.rows(), map.cols());
  switch (reducer.kind) {
    case ReducerKind::kMean:
      w.setConstant(1.0 / static_cast<double>(map.size()));
      break;
    case ReducerKind::kMax: {
      Eigen::Index r = 0, c = 0;
      map.maxCoeff(&r, &c);
      w(r, c) = 1.0;
      break;
    }
    case ReducerKind::kPositiveMean: {
      const auto count = (map.array() > 0.0).count();
      if (count > 0) w = (map.array() > 0.0).cast<double>() / static_cast<double>(count);
      break;
    }
    case ReducerKind::kMaxPoolMean: {
      reducer.validate();
      std::vector<PoolWindow> winners;
      for_each_window(map, reducer.pool_size, [&](const PoolWindow& pw) { winners.push_back(pw); });
      for (const PoolWindow& pw : winners)
        w(pw.row, pw.col) += 1.0 / static_cast<double>(winners.size());
      break;
    }
  }
  return w;
}

}  // namespace cwlab::cw
