#include "cwlab/synthetic.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "cwlab/error.hpp"

namespace cwlab::synthetic {
namespace {

struct Factors {
  std::size_t label = 0;
  std::vector<double> intensity;  // per concept, 0 when absent
};

class Sampler {
 public:
  Sampler(const Spec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  double intensity() {
    return std::uniform_real_distribution<double>(0.5, 1.5)(rng_) * spec_.concept_scale;
  }

  Factors main_sample() {
    Factors f;
    f.label = std::uniform_int_distribution<std::size_t>(0, spec_.classes - 1)(rng_);
    f.intensity.assign(spec_.concepts, 0.0);
    if (decisive_present(f.label, spec_)) f.intensity[0] = intensity();
    for (std::size_t j = 1; j < spec_.concepts; ++j)
      if (std::bernoulli_distribution(0.5)(rng_)) f.intensity[j] = intensity();
    return f;
  }

  Factors exemplar(std::size_t concept_index) {
    Factors f;
    if (spec_.exemplar_context == Context::kNatural) {
      f = main_sample();
    } else {
      f.label = spec_.classes;  // no class content
      f.intensity.assign(spec_.concepts, 0.0);
    }
    f.intensity[concept_index] = intensity();
    return f;
  }

  Factors held_out_exemplar(std::size_t concept_index) {
    Factors f;
    f.label = std::uniform_int_distribution<std::size_t>(0, spec_.classes - 1)(rng_);
    f.intensity.assign(spec_.concepts, 0.0);
    f.intensity[concept_index] = intensity();
    return f;
  }

  double noise() { return spec_.noise * normal_(rng_); }

 private:
  const Spec& spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::size_t class_factor(std::size_t label, const Spec& spec) {
  return decisive_present(label, spec) ? label : label - spec.class_factors();
}

// Random orthonormal columns via QR of a Gaussian matrix.
Eigen::MatrixXd orthonormal_basis(std::size_t dims, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(dims));
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix column signs so the basis does not depend on QR sign conventions.
  const Eigen::VectorXd diag = qr.matrixQR().diagonal();
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    if (diag(c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

class VectorRenderer {
 public:
  VectorRenderer(const Spec& spec, Eigen::MatrixXd concepts, Eigen::MatrixXd classes)
      : spec_(spec), concepts_(std::move(concepts)), classes_(std::move(classes)) {}

  void render(const Factors& f, Sampler& s, std::vector<double>& out) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.dims));
    for (std::size_t j = 0; j < spec_.concepts; ++j)
      x += f.intensity[j] * concepts_.col(static_cast<Eigen::Index>(j));
    // Class factor r is shared by one class in each half.
    if (f.label < spec_.classes)
      x += spec_.class_scale * classes_.col(static_cast<Eigen::Index>(class_factor(f.label, spec_)));
    for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x(i) + s.noise());
  }

 private:
  const Spec& spec_;
  Eigen::MatrixXd concepts_;
  Eigen::MatrixXd classes_;
};

// Image layout: [3 x size x size] with channels red, green, blue.
class ImageRenderer {
 public:
  explicit ImageRenderer(const Spec& spec) : spec_(spec) {}

  void render(const Factors& f, Sampler& s, std::vector<double>& out) const {
    const std::size_t n = spec_.image_size;
    std::vector<double> img(3 * n * n, 0.0);
    auto px = [&](std::size_t ch, std::size_t r, std::size_t c) -> double& {
      return img[(ch * n + r) * n + c];
    };
    if (f.label < spec_.classes) {
      const bool rising = class_factor(f.label, spec_) % 2 == 0;
      const double level = spec_.class_scale * (1.0 + static_cast<double>(class_factor(f.label, spec_) / 2));
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          const double t = static_cast<double>(c) / static_cast<double>(n - 1);
          px(2, r, c) = level * (rising ? t : 1.0 - t);
        }
    }
    const std::size_t side = std::max<std::size_t>(2, n / 3);
    for (std::size_t j = 0; j < spec_.concepts; ++j) {
      if (f.intensity[j] == 0.0) continue;
      const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, n - side)(s.rng());
      const std::size_t c0 = std::uniform_int_distribution<std::size_t>(0, n - side)(s.rng());
      for (std::size_t r = r0; r < r0 + side; ++r)
        for (std::size_t c = c0; c < c0 + side; ++c) {
          if (j == 0) {
            px(0, r, c) += f.intensity[j];
          } else if ((r - r0) % 2 == 0) {
            // Further concepts share the stripe pattern on distinct channels.
            px(1 + (j - 1) % 2, r, c) += f.intensity[j];
          }
        }
    }
    for (double v : img) out.push_back(v + s.noise());
  }

 private:
  const Spec& spec_;
};

template <class Renderer>
Dataset main_split(std::size_t count, const Shape& inner, const Renderer& render, Sampler& s) {
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 0; i < count; ++i) {
    const Factors f = s.main_sample();
    render.render(f, s, values);
    labels.push_back(static_cast<int>(f.label));
  }
  Shape shape{count};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Dataset{Tensor(std::move(shape), std::move(values)), std::move(labels)};
}

template <class Renderer>
ConceptBank concept_split(std::size_t count, const Spec& spec, const Shape& inner,
                          const Renderer& render, Sampler& s, bool held_out) {
  ConceptBank bank;
  for (std::size_t j = 0; j < spec.concepts; ++j) {
    std::vector<double> values;
    for (std::size_t i = 0; i < count; ++i)
      render.render(held_out ? s.held_out_exemplar(j) : s.exemplar(j), s, values);
    Shape shape{count};
    shape.insert(shape.end(), inner.begin(), inner.end());
    bank.push_back(Concept{"concept" + std::to_string(j), j, Tensor(std::move(shape), std::move(values))});
  }
  return bank;
}

}  // namespace

void Spec::validate() const {
  require(classes >= 2, ErrorCode::kConfiguration, "synthetic spec needs at least 2 classes");
  require(concepts >= 1, ErrorCode::kConfiguration, "synthetic spec needs at least 1 concept");
  require(train > 0 && test > 0 && concept_train > 0 && concept_test > 0,
          ErrorCode::kConfiguration, "synthetic split sizes must be positive");
  require(noise >= 0.0 && concept_scale > 0.0 && class_scale > 0.0, ErrorCode::kConfiguration,
          "synthetic scales must be positive and noise non-negative");
  if (kind == Kind::kVector) {
    require(concepts + class_factors() <= dims, ErrorCode::kConfiguration,
            std::to_string(concepts) + " concepts and " + std::to_string(class_factors()) +
                " class factors do not fit in " + std::to_string(dims) + " dimensions");
  } else {
    require(image_size >= 4, ErrorCode::kConfiguration, "image_size must be at least 4");
    require(concepts <= 3, ErrorCode::kConfiguration, "image data supports at most 3 concepts");
  }
}

bool decisive_present(std::size_t label, const Spec& spec) { return label < spec.class_factors(); }

Data make_synthetic(const Spec& spec, std::uint64_t seed) {
  spec.validate();
  Sampler s(spec, seed);
  Data data;
  if (spec.kind == Kind::kVector) {
    const Eigen::MatrixXd basis = orthonormal_basis(spec.dims, s.rng());
    const auto k = static_cast<Eigen::Index>(spec.concepts);
    data.concept_directions = basis.leftCols(k);
    data.class_directions = basis.middleCols(k, static_cast<Eigen::Index>(spec.class_factors()));
    const VectorRenderer render(spec, data.concept_directions, data.class_directions);
    const Shape inner{spec.dims};
    data.train = main_split(spec.train, inner, render, s);
    data.test = main_split(spec.test, inner, render, s);
    data.concepts = concept_split(spec.concept_train, spec, inner, render, s, false);
    data.concepts_test = concept_split(spec.concept_test, spec, inner, render, s, true);
  } else {
    const ImageRenderer render(spec);
    const Shape inner{3, spec.image_size, spec.image_size};
    data.train = main_split(spec.train, inner, render, s);
    data.test = main_split(spec.test, inner, render, s);
    data.concepts = concept_split(spec.concept_train, spec, inner, render, s, false);
    data.concepts_test = concept_split(spec.concept_test, spec, inner, render, s, true);
  }
  return data;
}

}  // namespace cwlab::synthetic
