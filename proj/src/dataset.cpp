#include "cwlab/dataset.hpp"

#include <algorithm>

#include "cwlab/error.hpp"

namespace cwlab {

void Dataset::validate() const {
  require(x.rank() >= 2, ErrorCode::kData, "dataset tensor must have a sample axis, got " +
                                               shape_string(x.shape()));
  require(labels.size() == size(), ErrorCode::kData,
          std::to_string(labels.size()) + " labels for " + std::to_string(size()) + " samples");
  require(size() > 0, ErrorCode::kData, "dataset is empty");
  require(all_finite(x), ErrorCode::kData, "dataset contains non-finite values");
}

void validate_concept_bank(const ConceptBank& bank) {
  std::vector<bool> seen(bank.size(), false);
  for (const Concept& c : bank) {
    require(c.axis < bank.size(), ErrorCode::kConfiguration,
            "concept '" + c.name + "' has axis " + std::to_string(c.axis) +
                "; axes must be dense from 0");
    require(!seen[c.axis], ErrorCode::kConfiguration,
            "axis " + std::to_string(c.axis) + " assigned to more than one concept");
    seen[c.axis] = true;
    require(c.size() > 0, ErrorCode::kData, "concept '" + c.name + "' has no samples");
  }
}

Shape sample_shape(const Tensor& x) {
  require(x.rank() >= 1, ErrorCode::kDimension, "tensor has no sample axis");
  return Shape(x.shape().begin() + 1, x.shape().end());
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices) {
  const Shape inner = sample_shape(x);
  const std::size_t stride = element_count(inner);
  const auto src = x.values();
  std::vector<double> out;
  out.reserve(indices.size() * stride);
  for (std::size_t i : indices) {
    require(i < x.shape()[0], ErrorCode::kIndex,
            "sample index " + std::to_string(i) + " out of range " + std::to_string(x.shape()[0]));
    out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(i * stride),
               src.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  }
  Shape shape{indices.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Tensor(std::move(shape), std::move(out));
}

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < labels.size(), ErrorCode::kIndex, "label index out of range");
    out.push_back(labels[i]);
  }
  return out;
}

}  // namespace cwlab
