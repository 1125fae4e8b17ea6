#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "cwlab/dataset.hpp"

namespace cwlab::synthetic {

enum class Kind { kVector, kImage };

/// What accompanies the concept in an alignment exemplar.
enum class Context {
  kIsolated,  // the concept alone (plus noise)
  kNatural,   // a main-data sample with the concept forced present
};

/**
 * Planted-concept toy task.
 *
 * Classes split into two halves. Concept 0 is present exactly in the first
 * half (decisive); every other concept appears with probability 1/2
 * independently of the class (null). Within a half, the class is marked by a
 * separate "class factor".
 *
 * Alignment exemplars follow `exemplar_context`. With kNatural the other
 * concepts keep their main-data rates, so an exemplar differs from the data
 * mean only along its own concept. Held-out exemplars always show exactly one
 * concept on top of a random class factor, so purity labels are unambiguous.
 *
 * Vector data: x = Σ_j a_j u_j + class_scale * h_r + noise, with orthonormal
 * u_j, h_r in R^dims and a_j ~ U[0.5, 1.5] * concept_scale when present.
 * Image data (3 x size x size): concept 0 is a red square, concept 1 a patch
 * of horizontal stripes in the green channel; the class factor is a blue
 * gradient running left-to-right or right-to-left.
 */
struct Spec {
  Kind kind = Kind::kVector;
  std::size_t classes = 4;
  std::size_t concepts = 2;
  std::size_t dims = 16;
  std::size_t image_size = 12;
  std::size_t train = 8000;
  std::size_t test = 1000;
  std::size_t concept_train = 256;
  std::size_t concept_test = 256;
  double noise = 0.5;
  double concept_scale = 2.0;
  double class_scale = 2.0;
  Context exemplar_context = Context::kNatural;

  /// Number of distinct class factors, ceil(classes / 2).
  std::size_t class_factors() const { return (classes + 1) / 2; }
  void validate() const;
};

struct Data {
  Dataset train;
  Dataset test;
  ConceptBank concepts;       // exemplars for alignment
  ConceptBank concepts_test;  // held-out exemplars for purity metrics
  /// Vector data only: columns u_j and h_r.
  Eigen::MatrixXd concept_directions;
  Eigen::MatrixXd class_directions;
};

/// Whether class `label` carries concept 0.
bool decisive_present(std::size_t label, const Spec& spec);

Data make_synthetic(const Spec& spec, std::uint64_t seed);

}  // namespace cwlab::synthetic
