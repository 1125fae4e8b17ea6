#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cwlab/tensor.hpp"

namespace cwlab {

/// Samples stacked along the first axis: [n x D] vectors or [n x C x H x W] images.
struct Dataset {
  Tensor x;
  std::vector<int> labels;

  std::size_t size() const { return x.rank() == 0 ? 0 : x.shape()[0]; }
  void validate() const;
};

/// Exemplars X_c of one concept, assigned to latent axis `axis`.
struct Concept {
  std::string name;
  std::size_t axis = 0;
  Tensor x;

  std::size_t size() const { return x.rank() == 0 ? 0 : x.shape()[0]; }
};

using ConceptBank = std::vector<Concept>;

/// Axes distinct and dense from 0, every concept nonempty.
void validate_concept_bank(const ConceptBank& bank);

/// Rows `indices` of `x` along the first axis.
Tensor gather(const Tensor& x, std::span<const std::size_t> indices);
std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> indices);

/// Shape of one sample of `x`.
Shape sample_shape(const Tensor& x);

}  // namespace cwlab
