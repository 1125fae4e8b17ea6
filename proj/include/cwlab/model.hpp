#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cwlab/cw_layer.hpp"
#include "cwlab/tensor.hpp"

namespace cwlab::model {

enum class Arch { kMlp, kCnn };

/// Variant of the normalization slot at `Architecture::cw_layer`.
enum class Slot { kBn, kCw, kBnAux };

std::string_view to_string(Arch arch);
std::string_view to_string(Slot slot);
Arch parse_arch(std::string_view name);
Slot parse_slot(std::string_view name);

/**
 * Host network description.
 *
 * MLP: blocks Linear -> Norm -> ReLU with `widths` units, then a linear head.
 * CNN: blocks Conv3x3(pad 1) -> Norm -> ReLU -> MaxPool2 with `widths`
 * channels, then flatten and a linear head. Block i owns norm layer i.
 */
struct Architecture {
  Arch arch = Arch::kMlp;
  Shape input;  // per sample: {D} or {C, H, W}
  std::size_t classes = 4;
  std::vector<std::size_t> widths;
  Slot slot = Slot::kCw;
  std::size_t cw_layer = 1;

  std::size_t layers() const { return widths.size(); }
  void validate() const;
};

/// Widths {32, 32} for the MLP, channels {8, 16} for the CNN.
Architecture default_architecture(Arch arch, Shape input, std::size_t classes);

struct BatchNormState {
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  Eigen::VectorXd batch_mean;
  Eigen::VectorXd batch_var;
  double eps = 1e-5;
  double momentum = 0.9;
};

struct Parameter {
  std::string name;
  Tensor value;
};

/// Normalization layer: BatchNorm with affine, or a CW module.
struct NormLayer {
  std::optional<cw::CwLayer> cw;
  BatchNormState bn;
  bool pending = false;  // train-mode statistics not yet folded into running ones

  bool is_cw() const { return cw.has_value(); }
};

class Model {
 public:
  Model() = default;
  Model(Architecture arch, cw::Config cw_config, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const cw::Config& cw_config() const { return cw_config_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Tensor& parameter(std::string_view name) const;

  std::vector<NormLayer>& norm_layers() { return norms_; }
  const std::vector<NormLayer>& norm_layers() const { return norms_; }

  bool has_cw() const;
  /// The CW module in the slot; structure error if the slot holds BatchNorm.
  cw::CwLayer& cw();
  const cw::CwLayer& cw() const;

  Tensor forward(const Tensor& x, Mode mode);
  /// Latent entering norm layer `layer` ([n x d] or [n x d x h x w]).
  Tensor features(const Tensor& x, Mode mode, std::size_t layer);
  /// Slot input; shorthand for features(x, mode, cw_layer).
  Tensor features(const Tensor& x, Mode mode) { return features(x, mode, arch_.cw_layer); }
  /// Output of norm layer `layer` for a latent produced by features().
  Tensor normalize(const Tensor& latent, Mode mode, std::size_t layer);
  /// Everything after norm layer `layer` up to the logits.
  Tensor head(const Tensor& normalized, Mode mode, std::size_t layer);
  Tensor head(const Tensor& normalized, Mode mode) { return head(normalized, mode, arch_.cw_layer); }
  /// Slot output: normalize(features(x)).
  Tensor latent(const Tensor& x, Mode mode);

  /// Folds the statistics of train-mode forwards into the running estimates.
  void commit_running_statistics();
  /// Drops statistics of train-mode forwards without committing them.
  void discard_batch_statistics();

 private:
  friend Model swap_bn_for_cw(const Model&, std::size_t, const Tensor&);

  Tensor block_input(std::size_t layer, const Tensor& h) const;
  Tensor block_output(std::size_t layer, const Tensor& normalized) const;
  Tensor batch_norm(std::size_t layer, const Tensor& rows, Mode mode);
  std::size_t index_of(std::string_view name) const;

  Architecture arch_;
  cw::Config cw_config_;
  std::vector<Parameter> params_;
  std::vector<NormLayer> norms_;
};

/// Top-1 accuracy in eval mode.
double accuracy(Model& model, const Tensor& x, std::span<const int> labels,
                std::size_t batch_size = 256);
/// Eval-mode logits for all samples, computed in batches.
Tensor predict_logits(Model& model, const Tensor& x, std::size_t batch_size = 256);

/// Classical momentum SGD: v <- μ v + g; p <- p - lr v.
class Sgd {
 public:
  Sgd(double lr, double momentum);

  /// `grads[i]` is the gradient of `params[i]`.
  void step(std::vector<Parameter>& params, std::span<const Tensor> grads);
  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

/// Cross entropy of the first k latent rows used as concept logits.
/// `latent` is [d x m]; labels lie in [0, k).
Tensor auxiliary_concept_loss(const Tensor& latent, std::span<const int> concept_labels,
                              std::size_t k);

/// Replaces the BatchNorm at `layer` by a CW module with Q = I and whitening
/// statistics calibrated on one eval pass over `calibration_x`. The slot's
/// affine parameters are dropped; every other tensor is copied unchanged.
Model swap_bn_for_cw(const Model& model, std::size_t layer, const Tensor& calibration_x);

}  // namespace cwlab::model
