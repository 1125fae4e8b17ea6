// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../unit/support.hpp"
#include "cwlab/cli.hpp"
#include "cwlab/cw_layer.hpp"
#include "cwlab/metrics.hpp"
#include "cwlab/ops.hpp"
#include "cwlab/stiefel.hpp"
#include "cwlab/synthetic.hpp"
#include "cwlab/trainer.hpp"
#include "cwlab/whitening.hpp"

namespace {

using namespace cwlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double identity_gap(const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd cov = whitening::covariance(y);
  return cwtest::max_abs(cov - Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

struct WhiteningGaps {
  double exact = 0.0, ridged = 0.0, newton = 0.0;
};

// Worst covariance gaps over 50 batches of 8 x 256 drawn by `batch`.
WhiteningGaps whitening_gaps(const std::function<Eigen::MatrixXd()>& batch) {
  WhiteningGaps w;
  for (int b = 0; b < 50; ++b) {
    const Eigen::MatrixXd z = batch();
    const whitening::Moments raw = whitening::batch_moments(z, 0.0);
    const whitening::Moments ridge = whitening::batch_moments(z, 1e-5);
    const Eigen::MatrixXd centered = z.colwise() - raw.mean;
    w.exact = std::max(w.exact, identity_gap(whitening::zca_exact(raw.cov) * centered));
    w.ridged = std::max(w.ridged, identity_gap(whitening::zca_exact(ridge.cov) * centered));
    w.newton = std::max(w.newton, identity_gap(whitening::zca_newton(ridge.cov, 5) * centered));
  }
  return w;
}

Verdict whitening_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  // Independent standard normal entries around a random offset.
  const WhiteningGaps iid = whitening_gaps([&] {
    Eigen::MatrixXd z = cwtest::random_matrix(8, 256, rng);
    z.colwise() += 3.0 * cwtest::random_matrix(8, 1, rng).col(0);
    return z;
  });
  const double secs = seconds_since(t0);
  // Mixed axes for reference; five Newton steps are not enough there.
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  const WhiteningGaps mixed = whitening_gaps([&] {
    Eigen::VectorXd s(8);
    for (Eigen::Index i = 0; i < 8; ++i) s(i) = scale(rng);
    const Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(8, 8) + 0.3 * cwtest::random_matrix(8, 8, rng);
    return Eigen::MatrixXd(s.asDiagonal() * mix * cwtest::random_matrix(8, 256, rng));
  });
  return {iid.exact < 1e-8 && iid.newton < 5e-2 && secs < 5.0,
          fmt::format("exact {:.2e} (with eps=1e-5 ridge {:.2e}), newton T=5 {:.2e}, {:.2f}s; "
                      "mixed-axis batches: exact {:.2e}, newton {:.2e}",
                      iid.exact, iid.ridged, iid.newton, secs, mixed.exact, mixed.newton)};
}

Verdict newton_vs_exact() {
  std::mt19937_64 rng(202);
  double worst = 0.0, worst_relative = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd sigma = cwtest::random_spd(8, 1.0, 100.0, rng);
    const Eigen::MatrixXd exact = whitening::zca_exact(sigma);
    const double gap = cwtest::max_abs(whitening::zca_newton(sigma, 5) - exact);
    worst = std::max(worst, gap);
    worst_relative = std::max(worst_relative, gap / cwtest::max_abs(exact));
  }
  return {worst < 1e-2, fmt::format("max |newton - exact| {:.3e} (relative {:.3f}) over eigenvalues in [1, 100]",
                                    worst, worst_relative)};
}

Verdict orthogonality_preservation() {
  std::mt19937_64 rng(303);
  stiefel::RotationState state(16, 0.9);
  state.set_q(cwtest::random_orthogonal(16, rng));
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const Eigen::MatrixXd& g = state.momentum_update(cwtest::random_matrix(16, 16, rng));
    state.set_q(stiefel::cayley_step(state.q(), g, 0.1));
    worst = std::max(worst, state.orthogonality_error());
  }
  return {worst < 1e-5, fmt::format("max ||QᵀQ - I|| {:.2e} over 1000 steps", worst)};
}

Verdict alignment_optimality() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> noise(0.0, 0.4);
  const double planted = 2.0;
  Eigen::MatrixXd latent(60, 2);
  for (Eigen::Index i = 0; i < latent.rows(); ++i)
    latent.row(i) = Eigen::RowVector2d(std::cos(planted) + noise(rng), std::sin(planted) + noise(rng));
  // Frozen features: fixed identity statistics, only Q moves.
  cw::Config config;
  config.concept_stats = cw::ConceptStats::kRunning;
  cw::CwLayer layer(2, config);
  layer.whitening().set_running(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const std::vector<cw::ConceptLatent> latents{{0, Tensor::from_matrix(latent)}};
  for (int s = 0; s < 300; ++s) layer.align(latents);
  const Eigen::MatrixXd& q = layer.rotation().q();
  const double found = std::atan2(q(1, 0), q(0, 0));

  const auto batches = layer.concept_batches(latents);
  double best = -INFINITY, best_angle = 0.0;
  for (double a = -std::numbers::pi; a < std::numbers::pi; a += 1e-4) {
    Eigen::Matrix2d r{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
    const double v = stiefel::alignment_objective(r, batches);
    if (v > best) best = v, best_angle = a;
  }
  const double gap = std::abs(std::remainder(found - best_angle, 2.0 * std::numbers::pi));
  return {gap < 0.01, fmt::format("aligned {:.4f} rad, sweep optimum {:.4f} rad, gap {:.2e}", found, best_angle, gap)};
}

Verdict gradient_integrity() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(500 + seed);
    const Tensor z = cwtest::random_tensor({5, 12}, rng);
    const Tensor probe = cwtest::random_tensor({5, 12}, rng, false);
    const Eigen::MatrixXd q = cwtest::random_orthogonal(5, rng);
    auto f = [&](const Tensor& v) {
      cw::CwLayer layer(5, cw::Config{});
      layer.rotation().set_q(q);
      return ops::sum(ops::mul(ops::square(layer.forward(v, Mode::kTrain)), probe));
    };
    worst = std::max(worst, cwtest::gradient_error(f, z));
  }
  return {worst < 1e-4, fmt::format("max relative error {:.2e} over 20 seeds (Newton T=5)", worst)};
}

Verdict alternation_contract() {
  synthetic::Spec spec;
  spec.train = 2560;
  const synthetic::Data data = synthetic::make_synthetic(spec, 11);
  trainer::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 5;
  model::Model m = trainer::build_model(cfg, sample_shape(data.train.x), spec.classes);
  const trainer::History h = trainer::fit(m, data.train, data.concepts, cfg);
  std::size_t violations = 0, q_updates = 0;
  for (const trainer::StepRecord& r : h.steps) {
    const bool align_step = r.step % cfg.align_frequency == 0;
    violations += r.q_changed_main || r.params_changed_align || !r.params_changed_main;
    violations += r.q_changed_align != align_step;
    q_updates += r.q_changed_align;
  }
  return {violations == 0 && q_updates == h.steps.size() / 20,
          fmt::format("{} steps, Q moved at {} (t mod 20 = 0 only), {} violations", h.steps.size(), q_updates,
                      violations)};
}

// The desk-scale benchmark shared by criteria 7 to 11 and 14.
struct SlotRun {
  model::Model model;
  double accuracy = 0.0;
  double seconds = 0.0;
  std::vector<Eigen::MatrixXd> groups;  // held-out exemplar activations per concept
};

struct Benchmark {
  synthetic::Spec spec;
  synthetic::Data data;
  std::optional<SlotRun> bn, cw, bn_aux;
};

trainer::TrainConfig benchmark_config(model::Slot slot) {
  trainer::TrainConfig c;
  c.slot = slot;
  c.epochs = 15;
  c.seed = 3;
  return c;
}

SlotRun run_slot(const Benchmark& b, model::Slot slot) {
  const trainer::TrainConfig cfg = benchmark_config(slot);
  const auto t0 = Clock::now();
  SlotRun r{trainer::build_model(cfg, sample_shape(b.data.train.x), b.spec.classes), 0.0, 0.0, {}};
  trainer::fit(r.model, b.data.train, b.data.concepts, cfg);
  r.seconds = seconds_since(t0);
  r.accuracy = model::accuracy(r.model, b.data.test.x, b.data.test.labels);
  for (const Concept& c : b.data.concepts_test)
    r.groups.push_back(metrics::slot_activations(r.model, c.x, r.model.cw_config().reducer));
  return r;
}

// Rows of every other concept's held-out exemplars.
Eigen::MatrixXd negatives(const std::vector<Eigen::MatrixXd>& groups, std::size_t j) {
  Eigen::Index rows = 0;
  for (std::size_t o = 0; o < groups.size(); ++o)
    if (o != j) rows += groups[o].rows();
  Eigen::MatrixXd out(rows, groups[j].cols());
  Eigen::Index at = 0;
  for (std::size_t o = 0; o < groups.size(); ++o)
    if (o != j) {
      out.middleRows(at, groups[o].rows()) = groups[o];
      at += groups[o].rows();
    }
  return out;
}

double axis_auc(const std::vector<Eigen::MatrixXd>& groups, std::size_t j) {
  const Eigen::VectorXd pos = groups[j].col(static_cast<Eigen::Index>(j));
  const Eigen::VectorXd neg = negatives(groups, j).col(static_cast<Eigen::Index>(j));
  return metrics::purity_auc(std::span<const double>(pos.data(), static_cast<std::size_t>(pos.size())),
                             std::span<const double>(neg.data(), static_cast<std::size_t>(neg.size())));
}

Verdict accuracy_parity(Benchmark& b) {
  b.bn = run_slot(b, model::Slot::kBn);
  b.cw = run_slot(b, model::Slot::kCw);
  b.bn_aux = run_slot(b, model::Slot::kBnAux);
  const double cw = 100.0 * b.cw->accuracy, bn = 100.0 * b.bn->accuracy;
  return {cw >= bn - 2.0 && cw >= 90.0 && bn >= 90.0 && b.cw->seconds < 120.0,
          fmt::format("cw {:.1f}% ({:.1f}s), bn {:.1f}% ({:.1f}s), bn_aux {:.1f}%", cw, b.cw->seconds, bn,
                      b.bn->seconds, 100.0 * b.bn_aux->accuracy)};
}

Verdict concept_purity(const Benchmark& b) {
  bool pass = true;
  std::string detail;
  for (std::size_t j = 0; j < b.cw->groups.size(); ++j) {
    const double cw = axis_auc(b.cw->groups, j);
    const double bn_best = metrics::best_axis_auc(b.bn->groups[j], negatives(b.bn->groups, j));
    pass = pass && cw >= 0.95 && cw > bn_best;
    detail += fmt::format("{}concept {}: cw {:.4f} vs bn best axis {:.4f}", j ? "; " : "", j, cw, bn_best);
  }
  return {pass, detail};
}

Verdict separability(const Benchmark& b) {
  auto q = [](const SlotRun& r) { return metrics::mean_off_diagonal(metrics::similarity_matrices(r.groups).q); };
  const double cw = q(*b.cw), bn = q(*b.bn), aux = q(*b.bn_aux);
  return {cw < aux && cw < bn, fmt::format("mean off-diagonal Q̂: cw {:.3f}, bn_aux {:.3f}, bn {:.3f}", cw, aux, bn)};
}

Verdict decorrelation(const Benchmark& b) {
  auto corr = [&](const SlotRun& r) {
    model::Model m = r.model;
    const Eigen::MatrixXd acts = metrics::slot_activations(m, b.data.test.x, m.cw_config().reducer);
    return metrics::mean_off_diagonal(metrics::axis_correlation(acts.transpose()).abs_corr);
  };
  const double cw = corr(*b.cw), bn = corr(*b.bn);
  return {cw < 0.05 && cw < 0.5 * bn, fmt::format("mean |corr|: cw {:.4f}, bn {:.4f}", cw, bn)};
}

Verdict importance_sanity(const Benchmark& b) {
  model::Model m = b.cw->model;
  metrics::ImportanceOptions o;
  o.repetitions = 5;
  o.seed = 17;
  // Concept 0 is planted as decisive for the label, concept 1 as a nuisance.
  const double decisive = metrics::concept_importance(m, b.data.test.x, b.data.test.labels, 0, o).mean;
  const double null = metrics::concept_importance(m, b.data.test.x, b.data.test.labels, 1, o).mean;
  return {decisive > 1.1 && null >= 0.9 && null <= 1.1,
          fmt::format("decisive axis CI {:.3f}, null axis CI {:.3f}", decisive, null)};
}

Verdict metric_oracles() {
  std::mt19937_64 rng(1212);
  std::uniform_int_distribution<int> score(0, 9), split(1, 29);
  std::size_t auc_mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n_pos = static_cast<std::size_t>(split(rng));
    std::vector<double> pos(n_pos), neg(30 - n_pos);
    for (double& v : pos) v = score(rng);
    for (double& v : neg) v = score(rng);
    double wins = 0.0;
    for (double p : pos)
      for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    auc_mismatches += metrics::purity_auc(pos, neg) != wins / static_cast<double>(pos.size() * neg.size());
  }
  std::vector<Eigen::MatrixXd> groups;
  for (int g = 0; g < 3; ++g) groups.push_back(cwtest::random_matrix(10 + 3 * g, 6, rng));
  const metrics::Similarity s = metrics::similarity_matrices(groups);
  double sim_gap = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double total = 0.0;
      for (Eigen::Index a = 0; a < groups[i].rows(); ++a)
        for (Eigen::Index c = 0; c < groups[j].rows(); ++c)
          total += groups[i].row(a).dot(groups[j].row(c)) / (groups[i].row(a).norm() * groups[j].row(c).norm());
      const double d = total / static_cast<double>(groups[i].rows() * groups[j].rows());
      sim_gap = std::max(sim_gap, std::abs(s.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - d));
    }
  return {auc_mismatches == 0 && sim_gap < 1e-12,
          fmt::format("AUC mismatches {}/200, similarity max deviation {:.1e}", auc_mismatches, sim_gap)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "cwlab_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "cwlab");
    return cli::run(args, out, err);
  };
  int status = run({"gen", "--out", (dir / "data").string(), "--seed", "7", "--train", "2000"});
  std::ofstream(dir / "train.cfg") << "slot=cw\nepochs=2\nseed=3\n";
  for (const char* name : {"a", "b"})
    status |= run({"train", "--config", (dir / "train.cfg").string(), "--manifest",
                   (dir / "data" / "manifest.json").string(), "--out", (dir / (std::string(name) + ".ckpt")).string()});
  const bool history = slurp(dir / "a.history.csv") == slurp(dir / "b.history.csv");
  const bool checkpoint = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt");
  const bool nonempty = !slurp(dir / "a.ckpt").empty();
  fs::remove_all(dir);
  return {status == 0 && history && checkpoint && nonempty,
          fmt::format("exit {}, history identical: {}, checkpoint identical: {}{}", status, history, checkpoint,
                      err.str().empty() ? "" : " (" + err.str() + ")")};
}

Verdict warm_start(const Benchmark& b) {
  model::Model swapped = model::swap_bn_for_cw(b.bn->model, 1, b.data.train.x);
  trainer::TrainConfig cfg = benchmark_config(model::Slot::kCw);
  cfg.epochs = 1;
  trainer::fit(swapped, b.data.train, b.data.concepts, cfg);
  const double warm = 100.0 * model::accuracy(swapped, b.data.test.x, b.data.test.labels);
  const double cw = 100.0 * b.cw->accuracy;
  return {std::abs(warm - cw) <= 2.0, fmt::format("swapped + 1 epoch {:.1f}% vs never-swapped cw {:.1f}%", warm, cw)};
}

}  // namespace

int main() {
  Benchmark bench;
  bench.data = synthetic::make_synthetic(bench.spec, 7);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"whitening identity", whitening_identity},
      {"newton vs exact oracle", newton_vs_exact},
      {"orthogonality preservation", orthogonality_preservation},
      {"2-D alignment optimality", alignment_optimality},
      {"gradient integrity", gradient_integrity},
      {"alternation contract", alternation_contract},
      {"accuracy parity", [&] { return accuracy_parity(bench); }},
      {"concept purity", [&] { return concept_purity(bench); }},
      {"separability ordering", [&] { return separability(bench); }},
      {"axis decorrelation", [&] { return decorrelation(bench); }},
      {"concept importance sanity", [&] { return importance_sanity(bench); }},
      {"metric oracles", metric_oracles},
      {"determinism", determinism},
      {"warm start", [&] { return warm_start(bench); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    fmt::print("{} {:>2} {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
