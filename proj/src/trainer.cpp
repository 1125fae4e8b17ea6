#include "cwlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "cwlab/error.hpp"
#include "cwlab/log.hpp"
#include "cwlab/ops.hpp"
#include "cwlab/tape.hpp"

namespace cwlab::trainer {
namespace {

Tensor concat_samples(const std::vector<Tensor>& parts) {
  std::vector<double> values;
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    values.insert(values.end(), p.values().begin(), p.values().end());
    n += p.shape()[0];
  }
  Shape shape = parts.front().shape();
  shape[0] = n;
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

void TrainConfig::validate() const {
  require(lr > 0.0, ErrorCode::kConfiguration, "lr must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kConfiguration,
          "momentum must lie in [0, 1)");
  require(batch_size >= 2, ErrorCode::kConfiguration, "batch_size must be at least 2");
  require(epochs >= 1, ErrorCode::kConfiguration, "epochs must be at least 1");
  require(align_frequency >= 1, ErrorCode::kConfiguration, "align_frequency must be at least 1");
  require(beta >= 0.0 && beta < 1.0, ErrorCode::kConfiguration, "beta must lie in [0, 1)");
  require(newton_iters >= 1, ErrorCode::kConfiguration, "newton_iters must be at least 1");
  require(eps > 0.0, ErrorCode::kConfiguration, "eps must be positive");
  require(ema_momentum >= 0.0 && ema_momentum <= 1.0, ErrorCode::kConfiguration,
          "ema_momentum must lie in [0, 1]");
  require(aux_weight >= 0.0, ErrorCode::kConfiguration, "aux_weight must be non-negative");
  cw::ActivationReducer{reducer, pool_size}.validate();
}

cw::Config TrainConfig::cw_config() const {
  cw::Config c;
  c.whitening.eps = eps;
  c.whitening.newton_iters = newton_iters;
  c.whitening.ema_momentum = ema_momentum;
  c.whitening.stop_gradient = stop_gradient;
  c.beta = beta;
  c.reducer = cw::ActivationReducer{reducer, pool_size};
  c.concept_stats = concept_stats;
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t fingerprint(std::span<const double> values, std::uint64_t h) {
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::uint64_t parameters_fingerprint(const model::Model& model) {
  std::uint64_t h = 1469598103934665603ull;
  for (const model::Parameter& p : model.parameters()) h = fingerprint(p.value.values(), h);
  return h;
}

std::uint64_t rotation_fingerprint(const model::Model& model) {
  if (!model.has_cw()) return 0;
  const Eigen::MatrixXd& q = model.cw().rotation().q();
  return fingerprint(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

std::size_t History::align_steps() const {
  return static_cast<std::size_t>(std::count_if(
      steps.begin(), steps.end(), [](const StepRecord& r) { return r.align_objective.has_value(); }));
}

std::vector<std::size_t> draw_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  require(n > 0, ErrorCode::kData, "cannot draw from an empty set");
  std::vector<std::size_t> out;
  out.reserve(count);
  if (n >= count) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(pick(rng));
  }
  return out;
}

std::vector<cw::ConceptLatent> concept_latents(model::Model& model, const ConceptBank& bank,
                                               std::size_t batch_size, std::mt19937_64& rng) {
  NoGradScope no_grad;
  std::vector<cw::ConceptLatent> out;
  for (const Concept& c : bank) {
    const auto idx = draw_indices(c.size(), batch_size, rng);
    out.push_back({c.axis, model.features(gather(c.x, idx), Mode::kEval)});
  }
  return out;
}

AuxBatch draw_aux_batch(const ConceptBank& bank, std::size_t batch_size, std::mt19937_64& rng) {
  require(!bank.empty(), ErrorCode::kConfiguration, "auxiliary loss needs at least one concept");
  const std::size_t per = std::max<std::size_t>(1, (batch_size + bank.size() - 1) / bank.size());
  AuxBatch batch;
  batch.concepts = bank.size();
  std::vector<Tensor> parts;
  for (const Concept& c : bank) {
    parts.push_back(gather(c.x, draw_indices(c.size(), per, rng)));
    batch.axes.insert(batch.axes.end(), per, static_cast<int>(c.axis));
  }
  batch.x = concat_samples(parts);
  return batch;
}

Tensor concept_logits(const Tensor& slot_output) {
  if (slot_output.rank() == 2) return ops::transpose(slot_output);
  require(slot_output.rank() == 4, ErrorCode::kDimension,
          "slot output must be [n x d] or [n x d x h x w], got " + shape_string(slot_output.shape()));
  const std::size_t n = slot_output.shape()[0], d = slot_output.shape()[1];
  const std::size_t cells = slot_output.shape()[2] * slot_output.shape()[3];
  const Tensor means = ops::mean_axis(ops::reshape(slot_output, {n * d, cells}), 1);
  return ops::transpose(ops::reshape(means, {n, d}));
}

MainStepResult main_step(model::Model& model, model::Sgd& sgd, const Tensor& x,
                         std::span<const int> y, const TrainConfig& config, const AuxBatch* aux) {
  MainStepResult result;
  GradientTape tape;
  const Tensor logits = model.forward(x, Mode::kTrain);
  const Tensor loss = ops::softmax_cross_entropy(logits, y);
  Tensor total = loss;
  if (aux != nullptr) {
    const Tensor concept_out = model.latent(aux->x, Mode::kEval);
    const Tensor aux_loss =
        model::auxiliary_concept_loss(concept_logits(concept_out), aux->axes, aux->concepts);
    result.aux_loss = aux_loss.item();
    total = ops::add(loss, ops::scale(aux_loss, config.aux_weight));
  }
  result.loss = loss.item();
  require(std::isfinite(total.item()), ErrorCode::kDivergence, "training loss is not finite");
  const Gradients grads = tape.backward(total);
  std::vector<Tensor> g;
  g.reserve(model.parameters().size());
  for (const model::Parameter& p : model.parameters()) g.push_back(grads[p.value]);
  sgd.step(model.parameters(), g);
  model.commit_running_statistics();
  return result;
}

std::optional<cw::AlignResult> align_step(model::Model& model, const ConceptBank& bank,
                                          std::size_t batch_size, std::mt19937_64& rng) {
  if (bank.empty()) return std::nullopt;
  const auto latents = concept_latents(model, bank, batch_size, rng);
  return model.cw().align(latents);
}

model::Model build_model(const TrainConfig& config, const Shape& input, std::size_t classes) {
  model::Architecture arch = model::default_architecture(config.arch, input, classes);
  arch.slot = config.slot;
  arch.cw_layer = config.cw_layer;
  return model::Model(std::move(arch), config.cw_config(), derive_seed(config.seed, kModelInit));
}

History fit(model::Model& model, const Dataset& train, const ConceptBank& bank,
            const TrainConfig& config) {
  config.validate();
  train.validate();
  validate_concept_bank(bank);
  const bool aux_variant = model.architecture().slot == model::Slot::kBnAux;
  require(!aux_variant || !bank.empty(), ErrorCode::kConfiguration,
          "bn_aux variant needs a nonempty concept bank");

  model::Sgd sgd(config.lr, config.momentum);
  std::mt19937_64 order_rng(derive_seed(config.seed, kBatchOrder));
  std::mt19937_64 concept_rng(derive_seed(config.seed, kConceptDraws));
  const std::size_t n = train.size();
  const std::size_t m = std::min(config.batch_size, n);
  const std::size_t batches = n / m;
  const cw::ActivationReducer reducer{config.reducer, config.pool_size};

  std::vector<std::size_t> probe_ids(std::min(config.probe_size, n));
  std::iota(probe_ids.begin(), probe_ids.end(), std::size_t{0});
  const Tensor probe_x = gather(train.x, probe_ids);

  History history;
  std::vector<std::size_t> order(n);
  std::size_t t = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      ++t;
      StepRecord rec;
      rec.step = t;
      rec.epoch = epoch;
      try {
        const std::span<const std::size_t> idx(order.data() + b * m, m);
        const Tensor xb = gather(train.x, idx);
        const std::vector<int> yb = gather(train.labels, idx);
        std::optional<AuxBatch> aux;
        if (aux_variant) aux = draw_aux_batch(bank, m, concept_rng);

        const std::uint64_t p0 = parameters_fingerprint(model), q0 = rotation_fingerprint(model);
        const MainStepResult main = main_step(model, sgd, xb, yb, config, aux ? &*aux : nullptr);
        rec.main_loss = main.loss;
        rec.aux_loss = main.aux_loss;
        const std::uint64_t p1 = parameters_fingerprint(model), q1 = rotation_fingerprint(model);
        rec.params_changed_main = p1 != p0;
        rec.q_changed_main = q1 != q0;

        if (model.has_cw() && t % config.align_frequency == 0) {
          if (const auto res = align_step(model, bank, m, concept_rng)) {
            rec.align_objective = res->objective_after;
            if (res->exhausted)
              logger()->debug("step {}: curvilinear search exhausted at eta {}", t, res->step);
          }
          rec.params_changed_align = parameters_fingerprint(model) != p1;
          rec.q_changed_align = rotation_fingerprint(model) != q1;
        }
        if (model.has_cw()) rec.orthogonality_error = model.cw().rotation().orthogonality_error();
      } catch (const Error& e) {
        throw Error(e.code(), "step " + std::to_string(t) + ": " + e.what());
      }
      epoch_loss += rec.main_loss;
      logger()->debug("step {} loss {}", t, rec.main_loss);
      history.steps.push_back(rec);
    }
    {
      NoGradScope no_grad;
      history.probes.push_back(
          {epoch, cw::axis_activations(model.latent(probe_x, Mode::kEval), reducer)});
    }
    logger()->info("epoch {} mean loss {}", epoch, epoch_loss / static_cast<double>(batches));
  }
  return history;
}

}  // namespace cwlab::trainer
