#include "cwlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cwlab/dataset.hpp"
#include "cwlab/error.hpp"
#include "cwlab/ops.hpp"
#include "cwlab/tape.hpp"

namespace cwlab::model {
namespace {

std::string block_name(std::size_t i, const char* what) {
  return "block" + std::to_string(i) + "." + what;
}
std::string norm_name(std::size_t i, const char* what) {
  return "norm" + std::to_string(i) + "." + what;
}

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

// Native latent <-> [d x columns] rows.
Tensor to_rows(const Tensor& latent) {
  return latent.rank() == 2 ? ops::transpose(latent) : ops::channels_to_rows(latent);
}
Tensor from_rows(const Tensor& rows, const Tensor& like) {
  if (like.rank() == 2) return ops::transpose(rows);
  return ops::rows_to_channels(rows, like.shape()[0], like.shape()[2], like.shape()[3]);
}

}  // namespace

std::string_view to_string(Arch arch) { return arch == Arch::kMlp ? "mlp" : "cnn"; }

std::string_view to_string(Slot slot) {
  switch (slot) {
    case Slot::kBn: return "bn";
    case Slot::kCw: return "cw";
    case Slot::kBnAux: return "bn_aux";
  }
  return "unknown";
}

Arch parse_arch(std::string_view name) {
  if (name == "mlp") return Arch::kMlp;
  if (name == "cnn") return Arch::kCnn;
  fail(ErrorCode::kConfiguration, "unknown architecture '" + std::string(name) + "'");
}

Slot parse_slot(std::string_view name) {
  if (name == "bn") return Slot::kBn;
  if (name == "cw") return Slot::kCw;
  if (name == "bn_aux" || name == "bn-aux") return Slot::kBnAux;
  fail(ErrorCode::kConfiguration, "unknown slot variant '" + std::string(name) + "'");
}

void Architecture::validate() const {
  require(classes >= 2, ErrorCode::kConfiguration, "need at least 2 classes");
  require(!widths.empty(), ErrorCode::kConfiguration, "architecture has no blocks");
  for (std::size_t w : widths) require(w > 0, ErrorCode::kConfiguration, "zero block width");
  require(cw_layer < widths.size(), ErrorCode::kConfiguration,
          "cw_layer " + std::to_string(cw_layer) + " outside " + std::to_string(widths.size()) +
              " normalization layers");
  if (arch == Arch::kMlp) {
    require(input.size() == 1 && input[0] > 0, ErrorCode::kConfiguration,
            "mlp input must be {D}, got " + shape_string(input));
  } else {
    require(input.size() == 3 && input[0] > 0, ErrorCode::kConfiguration,
            "cnn input must be {C, H, W}, got " + shape_string(input));
    std::size_t h = input[1], w = input[2];
    for (std::size_t i = 0; i < widths.size(); ++i) {
      h /= 2;
      w /= 2;
    }
    require(h > 0 && w > 0, ErrorCode::kConfiguration,
            "cnn input " + shape_string(input) + " too small for " +
                std::to_string(widths.size()) + " pooling stages");
  }
}

Architecture default_architecture(Arch arch, Shape input, std::size_t classes) {
  Architecture a;
  a.arch = arch;
  a.input = std::move(input);
  a.classes = classes;
  a.widths = arch == Arch::kMlp ? std::vector<std::size_t>{32, 32} : std::vector<std::size_t>{8, 16};
  return a;
}

Model::Model(Architecture arch, cw::Config cw_config, std::uint64_t seed)
    : arch_(std::move(arch)), cw_config_(cw_config) {
  arch_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = arch_.input[0];
  for (std::size_t i = 0; i < arch_.layers(); ++i) {
    const std::size_t out = arch_.widths[i];
    if (arch_.arch == Arch::kMlp) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      params_.push_back({block_name(i, "weight"), uniform({in, out}, bound, rng)});
      params_.push_back({block_name(i, "bias"), uniform({1, out}, bound, rng)});
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
      params_.push_back({block_name(i, "weight"), uniform({out, in, 3, 3}, bound, rng)});
      params_.push_back({block_name(i, "bias"), uniform({out}, bound, rng)});
    }
    NormLayer norm;
    if (arch_.slot == Slot::kCw && i == arch_.cw_layer) {
      norm.cw.emplace(out, cw_config_);
    } else {
      params_.push_back({norm_name(i, "gamma"), Tensor(Shape{out, 1}, std::vector<double>(out, 1.0), true)});
      params_.push_back({norm_name(i, "beta"), Tensor::zeros({out, 1}, true)});
      norm.bn.running_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
      norm.bn.running_var = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(out));
    }
    norms_.push_back(std::move(norm));
    in = out;
  }
  std::size_t flat = in;
  if (arch_.arch == Arch::kCnn) {
    std::size_t h = arch_.input[1], w = arch_.input[2];
    for (std::size_t i = 0; i < arch_.layers(); ++i) {
      h /= 2;
      w /= 2;
    }
    flat = in * h * w;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(flat));
  params_.push_back({"head.weight", uniform({flat, arch_.classes}, bound, rng)});
  params_.push_back({"head.bias", uniform({1, arch_.classes}, bound, rng)});
}

std::size_t Model::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  fail(ErrorCode::kIndex, "model has no parameter '" + std::string(name) + "'");
}

const Tensor& Model::parameter(std::string_view name) const { return params_[index_of(name)].value; }

bool Model::has_cw() const {
  for (const NormLayer& n : norms_)
    if (n.is_cw()) return true;
  return false;
}

cw::CwLayer& Model::cw() {
  NormLayer& n = norms_.at(arch_.cw_layer);
  require(n.is_cw(), ErrorCode::kStructure,
          "normalization layer " + std::to_string(arch_.cw_layer) + " is not a CW module");
  return *n.cw;
}

const cw::CwLayer& Model::cw() const { return const_cast<Model*>(this)->cw(); }

Tensor Model::block_input(std::size_t layer, const Tensor& h) const {
  const Tensor& w = parameter(block_name(layer, "weight"));
  const Tensor& b = parameter(block_name(layer, "bias"));
  if (arch_.arch == Arch::kMlp) return ops::add(ops::matmul(h, w), b);
  return ops::conv2d(h, w, b, {.stride = 1, .padding = 1});
}

Tensor Model::block_output(std::size_t, const Tensor& normalized) const {
  const Tensor a = ops::relu(normalized);
  return arch_.arch == Arch::kMlp ? a : ops::maxpool2d(a, 2, 2);
}

Tensor Model::batch_norm(std::size_t layer, const Tensor& rows, Mode mode) {
  NormLayer& norm = norms_[layer];
  BatchNormState& bn = norm.bn;
  const Tensor& gamma = parameter(norm_name(layer, "gamma"));
  const Tensor& beta = parameter(norm_name(layer, "beta"));
  Tensor standardized;
  if (mode == Mode::kTrain) {
    require(rows.shape()[1] >= 2, ErrorCode::kDegenerateBatch,
            "batch norm needs at least 2 values per channel");
    const Tensor mu = ops::mean_axis(rows, 1);
    const Tensor centered = ops::sub(rows, mu);
    const Tensor var = ops::mean_axis(ops::square(centered), 1);
    standardized = ops::div(centered, ops::sqrt(ops::add_scalar(var, bn.eps)));
    bn.batch_mean = mu.matrix().col(0);
    bn.batch_var = var.matrix().col(0);
    norm.pending = true;
  } else {
    const Eigen::VectorXd inv = (bn.running_var.array() + bn.eps).rsqrt();
    standardized = ops::mul(ops::sub(rows, Tensor::column(bn.running_mean)), Tensor::column(inv));
  }
  return ops::add(ops::mul(standardized, gamma), beta);
}

Tensor Model::features(const Tensor& x, Mode mode, std::size_t layer) {
  require(layer < arch_.layers(), ErrorCode::kIndex,
          "layer " + std::to_string(layer) + " outside " + std::to_string(arch_.layers()));
  require(x.rank() == arch_.input.size() + 1 &&
              Shape(x.shape().begin() + 1, x.shape().end()) == arch_.input,
          ErrorCode::kDimension,
          "input " + shape_string(x.shape()) + " does not match per-sample shape " +
              shape_string(arch_.input));
  Tensor h = x;
  for (std::size_t i = 0; i < layer; ++i)
    h = block_output(i, normalize(block_input(i, h), mode, i));
  return block_input(layer, h);
}

Tensor Model::normalize(const Tensor& latent, Mode mode, std::size_t layer) {
  NormLayer& norm = norms_.at(layer);
  const Tensor rows = to_rows(latent);
  Tensor out;
  if (norm.is_cw()) {
    out = norm.cw->forward(rows, mode);
    if (mode == Mode::kTrain) norm.pending = true;
  } else {
    out = batch_norm(layer, rows, mode);
  }
  return from_rows(out, latent);
}

Tensor Model::head(const Tensor& normalized, Mode mode, std::size_t layer) {
  Tensor h = block_output(layer, normalized);
  for (std::size_t i = layer + 1; i < arch_.layers(); ++i)
    h = block_output(i, normalize(block_input(i, h), mode, i));
  const std::size_t n = h.shape()[0];
  h = ops::reshape(h, {n, h.numel() / n});
  return ops::add(ops::matmul(h, parameter("head.weight")), parameter("head.bias"));
}

Tensor Model::latent(const Tensor& x, Mode mode) {
  return normalize(features(x, mode), mode, arch_.cw_layer);
}

Tensor Model::forward(const Tensor& x, Mode mode) { return head(latent(x, mode), mode); }

void Model::commit_running_statistics() {
  for (NormLayer& norm : norms_) {
    if (!norm.pending) continue;
    if (norm.is_cw()) {
      norm.cw->whitening().ema_update_from_batch();
    } else {
      BatchNormState& bn = norm.bn;
      bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * bn.batch_mean;
      bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * bn.batch_var;
    }
    norm.pending = false;
  }
}

void Model::discard_batch_statistics() {
  for (NormLayer& norm : norms_) norm.pending = false;
}

Tensor predict_logits(Model& model, const Tensor& x, std::size_t batch_size) {
  NoGradScope no_grad;
  const std::size_t n = x.shape()[0];
  std::vector<double> out;
  std::size_t classes = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    const Tensor logits = model.forward(gather(x, idx), Mode::kEval);
    classes = logits.shape()[1];
    out.insert(out.end(), logits.values().begin(), logits.values().end());
  }
  return Tensor({n, classes}, std::move(out));
}

double accuracy(Model& model, const Tensor& x, std::span<const int> labels, std::size_t batch_size) {
  const Eigen::MatrixXd logits = predict_logits(model, x, batch_size).matrix();
  require(static_cast<std::size_t>(logits.rows()) == labels.size(), ErrorCode::kDimension,
          "label count does not match samples");
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

Sgd::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  require(lr > 0.0, ErrorCode::kConfiguration, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kConfiguration,
          "SGD momentum must lie in [0, 1)");
}

void Sgd::step(std::vector<Parameter>& params, std::span<const Tensor> grads) {
  require(params.size() == grads.size(), ErrorCode::kDimension, "one gradient per parameter");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(grads[i].numel() == params[i].value.numel(), ErrorCode::kDimension,
            "gradient shape mismatch for " + params[i].name);
    require(all_finite(grads[i]), ErrorCode::kDivergence,
            "non-finite gradient for " + params[i].name);
  }
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i)
      velocity_[i].assign(params[i].value.numel(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = grads[i].values();
    const auto p = params[i].value.values();
    std::vector<double>& v = velocity_[i];
    std::vector<double> next(p.size());
    for (std::size_t e = 0; e < p.size(); ++e) {
      v[e] = momentum_ * v[e] + g[e];
      next[e] = p[e] - lr_ * v[e];
    }
    params[i].value = Tensor(params[i].value.shape(), std::move(next), true);
  }
}

Tensor auxiliary_concept_loss(const Tensor& latent, std::span<const int> concept_labels,
                              std::size_t k) {
  require(latent.rank() == 2, ErrorCode::kDimension,
          "auxiliary loss expects a [d x m] latent, got " + shape_string(latent.shape()));
  require(k >= 1 && k <= latent.shape()[0], ErrorCode::kConfiguration,
          "auxiliary loss needs 1 <= k <= d");
  require(concept_labels.size() == latent.shape()[1], ErrorCode::kDimension,
          "one concept label per latent column");
  const Tensor logits = ops::slice_cols(ops::transpose(latent), 0, k);
  return ops::softmax_cross_entropy(logits, concept_labels);
}

Model swap_bn_for_cw(const Model& model, std::size_t layer, const Tensor& calibration_x) {
  require(layer < model.arch_.layers(), ErrorCode::kStructure,
          "no normalization layer at index " + std::to_string(layer));
  require(!model.norms_[layer].is_cw(), ErrorCode::kStructure,
          "layer " + std::to_string(layer) + " already holds a CW module");
  require(!model.has_cw(), ErrorCode::kStructure, "model already contains a CW module");

  Model out = model;
  out.arch_.slot = Slot::kCw;
  out.arch_.cw_layer = layer;
  std::erase_if(out.params_, [&](const Parameter& p) {
    return p.name == norm_name(layer, "gamma") || p.name == norm_name(layer, "beta");
  });
  out.discard_batch_statistics();
  NormLayer& norm = out.norms_[layer];
  norm.bn = BatchNormState{};
  norm.cw.emplace(model.arch_.widths[layer], out.cw_config_);

  NoGradScope no_grad;
  const Tensor latent = out.features(calibration_x, Mode::kEval, layer);
  norm.cw->whitening().calibrate(to_rows(latent).matrix());
  return out;
}

}  // namespace cwlab::model
