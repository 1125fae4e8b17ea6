#include "cwlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cwlab/io.hpp"
#include "cwlab/log.hpp"
#include "cwlab/metrics.hpp"
#include "cwlab/model.hpp"
#include "cwlab/tape.hpp"

namespace cwlab::cli {
namespace {

using nlohmann::json;

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::string num(double v) { return io::format_number(v); }

// JSON has no NaN; undefined values become null.
json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::size_t class_count(const io::LoadedData& data) {
  int top = 0;
  for (int y : data.main.labels) top = std::max(top, y);
  if (data.eval)
    for (int y : data.eval->labels) top = std::max(top, y);
  return static_cast<std::size_t>(top) + 1;
}

std::string concept_name(const ConceptBank& bank, std::size_t axis) {
  for (const Concept& c : bank)
    if (c.axis == axis) return c.name;
  return "";
}

const Dataset& pick_split(const io::LoadedData& data, const std::string& split) {
  if (split == "main") return data.main;
  require(split == "eval", ErrorCode::kConfiguration, "split must be 'eval' or 'main', got '" + split + "'");
  return data.evaluation();
}

Tensor sample_image(const Tensor& x, std::size_t index) {
  require(index < x.shape()[0], ErrorCode::kIndex,
          "sample " + std::to_string(index) + " outside a split of " + std::to_string(x.shape()[0]));
  const std::size_t per = x.numel() / x.shape()[0];
  const auto begin = x.values().begin() + static_cast<std::ptrdiff_t>(index * per);
  return Tensor(sample_shape(x), std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(per)));
}

std::vector<Eigen::MatrixXd> concept_activations(model::Model& m, const ConceptBank& bank,
                                                 const cw::ActivationReducer& reducer) {
  std::vector<Eigen::MatrixXd> groups;
  for (const Concept& c : bank) groups.push_back(metrics::slot_activations(m, c.x, reducer));
  return groups;
}

Report report_similarity(model::Model& m, const ConceptBank& bank, const cw::ActivationReducer& red) {
  const auto groups = concept_activations(m, bank, red);
  const metrics::Similarity s = metrics::similarity_matrices(groups);
  std::ostringstream csv;
  csv << "concept_i,concept_j,d,q_normalized\n";
  for (std::size_t i = 0; i < bank.size(); ++i)
    for (std::size_t j = 0; j < bank.size(); ++j) {
      const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
      csv << csv_field(bank[i].name) << ',' << csv_field(bank[j].name) << ',' << num(s.d(a, b)) << ','
          << num(s.q(a, b)) << '\n';
    }
  json summary{{"metric", "similarity"},
               {"concepts", bank.size()},
               {"mean_off_diagonal_d", num_json(metrics::mean_off_diagonal(s.d))},
               {"mean_off_diagonal_q", num_json(metrics::mean_off_diagonal(s.q))}};
  return {csv.str(), summary.dump(2)};
}

Report report_auc(model::Model& m, const ConceptBank& bank, const cw::ActivationReducer& red) {
  require(bank.size() >= 2, ErrorCode::kData, "purity AUC needs at least two concepts");
  const auto groups = concept_activations(m, bank, red);
  std::ostringstream csv;
  csv << "axis,concept,auc\n";
  json rows = json::array();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto axis = static_cast<Eigen::Index>(bank[i].axis);
    Eigen::Index neg_rows = 0;
    for (std::size_t o = 0; o < bank.size(); ++o)
      if (o != i) neg_rows += groups[o].rows();
    Eigen::MatrixXd neg(neg_rows, groups[i].cols());
    Eigen::Index r = 0;
    for (std::size_t o = 0; o < bank.size(); ++o) {
      if (o == i) continue;
      neg.middleRows(r, groups[o].rows()) = groups[o];
      r += groups[o].rows();
    }
    const Eigen::VectorXd p = groups[i].col(axis), n = neg.col(axis);
    const double auc = metrics::purity_auc({p.data(), static_cast<std::size_t>(p.size())},
                                           {n.data(), static_cast<std::size_t>(n.size())});
    csv << bank[i].axis << ',' << csv_field(bank[i].name) << ',' << num(auc) << '\n';
    rows.push_back({{"concept", bank[i].name},
                    {"axis", bank[i].axis},
                    {"auc", auc},
                    {"best_axis_auc", metrics::best_axis_auc(groups[i], neg)}});
  }
  return {csv.str(), json{{"metric", "auc"}, {"concepts", rows}}.dump(2)};
}

Report report_importance(model::Model& m, const Dataset& split, const ConceptBank& bank,
                         const ReportOptions& o) {
  metrics::ImportanceOptions opts;
  if (o.loss == "multiclass") {
    opts.kind = metrics::LossKind::kMulticlass;
  } else {
    require(o.loss == "balanced_binary", ErrorCode::kConfiguration,
            "loss must be 'multiclass' or 'balanced_binary', got '" + o.loss + "'");
    opts.kind = metrics::LossKind::kBalancedBinary;
  }
  opts.target = o.target;
  opts.repetitions = o.repetitions;
  opts.seed = o.seed;
  std::vector<std::size_t> axes;
  if (o.axis) {
    axes.push_back(*o.axis);
  } else {
    for (const Concept& c : bank) axes.push_back(c.axis);
  }
  std::ostringstream csv;
  csv << "axis,concept,loss_kind,ci_mean,ci_std,repetitions\n";
  json rows = json::array();
  for (std::size_t axis : axes) {
    const metrics::Importance imp = metrics::concept_importance(m, split.x, split.labels, axis, opts);
    csv << axis << ',' << csv_field(concept_name(bank, axis)) << ',' << o.loss << ',' << num(imp.mean)
        << ',' << num(imp.std) << ',' << o.repetitions << '\n';
    rows.push_back({{"axis", axis},
                    {"concept", concept_name(bank, axis)},
                    {"ci_mean", imp.mean},
                    {"ci_std", num_json(imp.std)},
                    {"ratios", imp.ratios},
                    {"original_loss", imp.original_loss}});
  }
  return {csv.str(), json{{"metric", "importance"}, {"loss_kind", o.loss}, {"axes", rows}}.dump(2)};
}

Report report_topk(model::Model& m, const Dataset& split, const ConceptBank& bank,
                   const cw::ActivationReducer& red, const ReportOptions& o) {
  const Eigen::MatrixXd acts = metrics::slot_activations(m, split.x, red);
  std::vector<std::size_t> axes;
  if (o.axis) {
    axes.push_back(*o.axis);
  } else {
    for (const Concept& c : bank) axes.push_back(c.axis);
  }
  std::ostringstream csv;
  csv << "axis,concept,rank,sample_id,activation\n";
  json rows = json::array();
  for (std::size_t axis : axes) {
    require(axis < static_cast<std::size_t>(acts.cols()), ErrorCode::kIndex,
            "axis " + std::to_string(axis) + " outside a latent of " + std::to_string(acts.cols()));
    const Eigen::VectorXd col = acts.col(static_cast<Eigen::Index>(axis));
    const auto top = metrics::topk_activated({col.data(), static_cast<std::size_t>(col.size())}, o.k);
    std::vector<std::size_t> ids;
    for (std::size_t r = 0; r < top.size(); ++r) {
      csv << axis << ',' << csv_field(concept_name(bank, axis)) << ',' << r + 1 << ','
          << top[r].sample_id << ',' << num(top[r].activation) << '\n';
      ids.push_back(top[r].sample_id);
    }
    rows.push_back({{"axis", axis}, {"concept", concept_name(bank, axis)}, {"sample_ids", ids}});
  }
  return {csv.str(), json{{"metric", "topk"}, {"k", o.k}, {"axes", rows}}.dump(2)};
}

Report report_correlation(model::Model& m, const Dataset& split, const cw::ActivationReducer& red) {
  const Eigen::MatrixXd acts = metrics::slot_activations(m, split.x, red);
  const metrics::Correlation c = metrics::axis_correlation(acts.transpose());
  std::ostringstream csv;
  csv << "axis_i,axis_j,abs_corr,defined\n";
  const auto d = static_cast<std::size_t>(c.abs_corr.rows());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const bool defined = c.defined[i] && c.defined[j];
      csv << i << ',' << j << ','
          << (defined ? num(c.abs_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) : "")
          << ',' << (defined ? "true" : "false") << '\n';
    }
  const auto undefined = std::count(c.defined.begin(), c.defined.end(), false);
  json summary{{"metric", "correlation"},
               {"axes", d},
               {"undefined_axes", undefined},
               {"mean_abs_off_diagonal", num_json(metrics::mean_off_diagonal(c.abs_corr))}};
  return {csv.str(), summary.dump(2)};
}

std::pair<std::size_t, std::size_t> axis_pair(const ReportOptions& o, const ConceptBank& bank) {
  std::vector<std::size_t> axes;
  for (const Concept& c : bank) axes.push_back(c.axis);
  std::sort(axes.begin(), axes.end());
  const std::size_t i = o.axis ? *o.axis : (axes.size() > 0 ? axes[0] : 0);
  const std::size_t j = o.axis_j ? *o.axis_j : (axes.size() > 1 ? axes[1] : 1);
  return {i, j};
}

Report report_hist2d(model::Model& m, const Dataset& split, const ConceptBank& bank,
                     const cw::ActivationReducer& red, const ReportOptions& o) {
  const Eigen::MatrixXd acts = metrics::slot_activations(m, split.x, red);
  const auto [i, j] = axis_pair(o, bank);
  require(i < static_cast<std::size_t>(acts.cols()) && j < static_cast<std::size_t>(acts.cols()),
          ErrorCode::kIndex, "hist2d axes outside a latent of " + std::to_string(acts.cols()));
  const Eigen::VectorXd x = acts.col(static_cast<Eigen::Index>(i)), y = acts.col(static_cast<Eigen::Index>(j));
  const metrics::Histogram2d h = metrics::joint_histogram(
      {x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())},
      o.grid, o.seed);
  std::ostringstream csv;
  csv << "cell_x,cell_y,count,representative\n";
  for (std::size_t cx = 0; cx < h.grid; ++cx)
    for (std::size_t cy = 0; cy < h.grid; ++cy) {
      const auto& rep = h.representative[cx * h.grid + cy];
      csv << cx << ',' << cy << ',' << h.counts(static_cast<Eigen::Index>(cx), static_cast<Eigen::Index>(cy))
          << ',' << (rep ? std::to_string(*rep) : "") << '\n';
    }
  json summary{{"metric", "hist2d"}, {"axis_i", i},     {"axis_j", j},       {"grid", h.grid},
               {"min_x", h.min_x},   {"max_x", h.max_x}, {"min_y", h.min_y}, {"max_y", h.max_y}};
  return {csv.str(), summary.dump(2)};
}

Report report_trajectory(std::vector<io::Checkpoint>& cks, const Dataset& split, const ConceptBank& bank,
                         const ReportOptions& o) {
  std::vector<Eigen::MatrixXd> layers;
  std::vector<std::size_t> layer_ids;
  for (io::Checkpoint& ck : cks) {
    layers.push_back(metrics::slot_activations(ck.model, split.x, ck.model.cw_config().reducer));
    layer_ids.push_back(ck.model.architecture().cw_layer);
  }
  const auto [i, j] = axis_pair(o, bank);
  std::ostringstream csv;
  csv << "layer,sample_id,rank_i,rank_j\n";
  json rows = json::array();
  for (std::size_t sample : o.samples) {
    const auto points = metrics::percentile_trajectory(layers, sample, i, j);
    for (const metrics::TrajectoryPoint& p : points) {
      csv << layer_ids[p.layer] << ',' << sample << ',' << num(p.rank_i) << ',' << num(p.rank_j) << '\n';
      rows.push_back({{"layer", layer_ids[p.layer]}, {"sample_id", sample}, {"rank_i", p.rank_i}, {"rank_j", p.rank_j}});
    }
  }
  return {csv.str(), json{{"metric", "trajectory"}, {"axis_i", i}, {"axis_j", j}, {"points", rows}}.dump(2)};
}

Report report_occlusion(model::Model& m, const Dataset& split, const ConceptBank& bank,
                        const cw::ActivationReducer& red, const ReportOptions& o) {
  require(split.x.rank() == 4, ErrorCode::kData, "occlusion needs image data [n x C x H x W]");
  std::vector<std::size_t> axes;
  if (o.axis) {
    axes.push_back(*o.axis);
  } else {
    for (const Concept& c : bank) axes.push_back(c.axis);
  }
  metrics::OcclusionOptions opts;
  opts.patch = o.patch;
  opts.stride = o.stride;
  opts.quantile = o.quantile;
  std::ostringstream csv;
  csv << "sample_id,axis,row,col,drop,in_receptive_field\n";
  json rows = json::array();
  for (std::size_t sample : o.samples) {
    const Tensor image = sample_image(split.x, sample);
    for (std::size_t axis : axes) {
      const metrics::OcclusionMap map = metrics::occlusion_map(m, image, axis, red, opts);
      for (const metrics::OcclusionCell& c : map.cells)
        csv << sample << ',' << axis << ',' << c.row << ',' << c.col << ',' << num(c.drop) << ','
            << (c.in_receptive_field ? "true" : "false") << '\n';
      rows.push_back({{"sample_id", sample}, {"axis", axis},          {"patch", map.patch},
                      {"stride", map.stride},  {"baseline", map.baseline}, {"threshold", map.threshold}});
    }
  }
  return {csv.str(), json{{"metric", "occlusion"}, {"maps", rows}}.dump(2)};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfiguration:
      return 2;
    case ErrorCode::kDivergence:
    case ErrorCode::kNumerical:
    case ErrorCode::kConditioning:
      return 4;
    case ErrorCode::kStructure:
      return 5;
    default:
      return 3;
  }
}

void gen(const GenOptions& o) {
  require(!o.out.empty(), ErrorCode::kConfiguration, "gen needs an output directory");
  const synthetic::Data data = synthetic::make_synthetic(o.spec, o.seed);
  fs::create_directories(o.out);
  io::write_tensor_file(o.out / "train.cwt", data.train.x);
  io::write_labels(o.out / "train_labels.csv", data.train.labels);
  io::write_tensor_file(o.out / "test.cwt", data.test.x);
  io::write_labels(o.out / "test_labels.csv", data.test.labels);
  io::Manifest m;
  m.main = {"train.cwt", "train_labels.csv"};
  m.eval = io::SplitEntry{"test.cwt", "test_labels.csv"};
  for (const Concept& c : data.concepts) {
    const fs::path rel = fs::path("concepts") / (c.name + ".cwt");
    io::write_tensor_file(o.out / rel, c.x);
    m.concepts.push_back({c.name, c.axis, rel});
  }
  for (const Concept& c : data.concepts_test) {
    const fs::path rel = fs::path("concepts_eval") / (c.name + ".cwt");
    io::write_tensor_file(o.out / rel, c.x);
    m.eval_concepts.push_back({c.name, c.axis, rel});
  }
  io::write_manifest(o.out / "manifest.json", m);
  logger()->info("wrote synthetic data to {}", o.out.string());
}

trainer::History train(const TrainOptions& o) {
  trainer::TrainConfig config = io::read_config(o.config);
  if (o.seed) config.seed = *o.seed;
  const io::LoadedData data = io::load_manifest(o.manifest);
  model::Model model;
  if (o.init) {
    model = io::load_checkpoint(*o.init).model;
    config.slot = model.architecture().slot;
    config.cw_layer = model.architecture().cw_layer;
  } else {
    model = trainer::build_model(config, sample_shape(data.main.x), class_count(data));
  }
  const trainer::History history = trainer::fit(model, data.main, data.concepts, config);
  if (data.eval) logger()->info("eval accuracy {}", model::accuracy(model, data.eval->x, data.eval->labels));
  io::save_checkpoint(o.out, {model, history.steps.size(), io::config_entries(config)});
  fs::path hist = o.history;
  if (hist.empty()) hist = fs::path(o.out).replace_extension(".history.csv");
  io::write_history(hist, history);
  return history;
}

void swap_bn(const SwapOptions& o) {
  io::Checkpoint ck = io::load_checkpoint(o.in);
  const io::LoadedData data = io::load_manifest(o.manifest);
  ck.model = model::swap_bn_for_cw(ck.model, o.layer, data.main.x);
  ck.config["slot"] = "cw";
  ck.config["cw_layer"] = std::to_string(o.layer);
  io::save_checkpoint(o.out, ck);
}

Report report(const ReportOptions& o) {
  const auto& names = report_selectors();
  require(std::find(names.begin(), names.end(), o.selector) != names.end(), ErrorCode::kIndex,
          "unknown report selector '" + o.selector + "'");
  require(!o.checkpoints.empty(), ErrorCode::kConfiguration, "report needs a checkpoint");
  require(o.selector == "trajectory" || o.checkpoints.size() == 1, ErrorCode::kConfiguration,
          "only trajectory accepts several checkpoints");
  const io::LoadedData data = io::load_manifest(o.manifest);
  const Dataset& split = pick_split(data, o.split);
  const ConceptBank& bank = data.evaluation_concepts();
  std::vector<io::Checkpoint> cks;
  for (const fs::path& p : o.checkpoints) cks.push_back(io::load_checkpoint(p));
  model::Model& m = cks.front().model;
  require(sample_shape(split.x) == m.architecture().input, ErrorCode::kData,
          "data samples " + shape_string(sample_shape(split.x)) + " do not match the model input " +
              shape_string(m.architecture().input));
  const cw::ActivationReducer red = m.cw_config().reducer;

  if (o.selector == "similarity") return report_similarity(m, bank, red);
  if (o.selector == "auc") return report_auc(m, bank, red);
  if (o.selector == "importance") return report_importance(m, split, bank, o);
  if (o.selector == "topk") return report_topk(m, split, bank, red, o);
  if (o.selector == "correlation") return report_correlation(m, split, red);
  if (o.selector == "hist2d") return report_hist2d(m, split, bank, red, o);
  if (o.selector == "trajectory") return report_trajectory(cks, split, bank, o);
  return report_occlusion(m, split, bank, red, o);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concept whitening toolkit"};
  app.require_subcommand(1);

  GenOptions gen_opts;
  std::string kind = "vector", context = "natural";
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate the synthetic benchmark");
  gen_cmd->add_option("--out", gen_opts.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen_opts.seed, "Random seed");
  gen_cmd->add_option("--kind", kind, "vector or image");
  gen_cmd->add_option("--classes", gen_opts.spec.classes);
  gen_cmd->add_option("--concepts", gen_opts.spec.concepts);
  gen_cmd->add_option("--dims", gen_opts.spec.dims);
  gen_cmd->add_option("--image-size", gen_opts.spec.image_size);
  gen_cmd->add_option("--train", gen_opts.spec.train);
  gen_cmd->add_option("--test", gen_opts.spec.test);
  gen_cmd->add_option("--concept-train", gen_opts.spec.concept_train);
  gen_cmd->add_option("--concept-test", gen_opts.spec.concept_test);
  gen_cmd->add_option("--noise", gen_opts.spec.noise);
  gen_cmd->add_option("--concept-scale", gen_opts.spec.concept_scale);
  gen_cmd->add_option("--class-scale", gen_opts.spec.class_scale);
  gen_cmd->add_option("--context", context, "Alignment exemplar context: natural or isolated");

  TrainOptions train_opts;
  std::uint64_t train_seed = 0;
  std::string init;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model with alternating optimization");
  train_cmd->add_option("--config", train_opts.config, "key=value config file")->required();
  train_cmd->add_option("--manifest", train_opts.manifest, "Data manifest")->required();
  train_cmd->add_option("--out", train_opts.out, "Output checkpoint")->required();
  train_cmd->add_option("--history", train_opts.history, "History CSV path");
  CLI::Option* seed_opt = train_cmd->add_option("--seed", train_seed, "Overrides the config seed");
  train_cmd->add_option("--init", init, "Continue from this checkpoint");

  SwapOptions swap_opts;
  CLI::App* swap_cmd = app.add_subcommand("swap-bn", "Replace a BatchNorm layer by a CW module");
  swap_cmd->add_option("--in", swap_opts.in, "Input checkpoint")->required();
  swap_cmd->add_option("--layer", swap_opts.layer, "Normalization layer index")->required();
  swap_cmd->add_option("--manifest", swap_opts.manifest, "Calibration data manifest")->required();
  swap_cmd->add_option("--out", swap_opts.out, "Output checkpoint")->required();

  ReportOptions rep;
  std::string rep_out;
  bool rep_json = false;
  std::size_t axis = 0, axis_j = 0;
  CLI::App* rep_cmd = app.add_subcommand("report", "Interpretability metrics as CSV and JSON");
  rep_cmd->add_option("selector", rep.selector, "topk|similarity|correlation|auc|importance|hist2d|trajectory|occlusion")
      ->required();
  rep_cmd->add_option("--checkpoint", rep.checkpoints, "Checkpoint (repeat for trajectory)")->required();
  rep_cmd->add_option("--manifest", rep.manifest, "Data manifest")->required();
  rep_cmd->add_option("--out", rep_out, "CSV path; the JSON summary goes next to it");
  rep_cmd->add_flag("--json", rep_json, "Print the JSON summary instead of the CSV");
  rep_cmd->add_option("--split", rep.split, "eval or main");
  rep_cmd->add_option("--seed", rep.seed);
  CLI::Option* axis_opt = rep_cmd->add_option("--axis", axis);
  CLI::Option* axis_j_opt = rep_cmd->add_option("--axis-j", axis_j);
  rep_cmd->add_option("--sample", rep.samples, "Sample ids (repeatable)");
  rep_cmd->add_option("--k", rep.k);
  rep_cmd->add_option("--grid", rep.grid);
  rep_cmd->add_option("--loss", rep.loss, "multiclass or balanced_binary");
  rep_cmd->add_option("--target", rep.target);
  rep_cmd->add_option("--repetitions", rep.repetitions);
  rep_cmd->add_option("--quantile", rep.quantile);
  rep_cmd->add_option("--patch", rep.patch);
  rep_cmd->add_option("--stride", rep.stride);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen_cmd) {
      if (kind == "image") {
        gen_opts.spec.kind = synthetic::Kind::kImage;
      } else {
        require(kind == "vector", ErrorCode::kConfiguration, "unknown data kind '" + kind + "'");
      }
      if (context == "isolated") {
        gen_opts.spec.exemplar_context = synthetic::Context::kIsolated;
      } else {
        require(context == "natural", ErrorCode::kConfiguration, "unknown exemplar context '" + context + "'");
      }
      gen(gen_opts);
    } else if (*train_cmd) {
      if (*seed_opt) train_opts.seed = train_seed;
      if (!init.empty()) train_opts.init = init;
      train(train_opts);
    } else if (*swap_cmd) {
      swap_bn(swap_opts);
    } else {
      const auto& names = report_selectors();
      if (std::find(names.begin(), names.end(), rep.selector) == names.end()) {
        err << "error: unknown report selector '" << rep.selector << "'\n";
        return kExitUnknownSelector;
      }
      if (*axis_opt) rep.axis = axis;
      if (*axis_j_opt) rep.axis_j = axis_j;
      const Report r = report(rep);
      if (!rep_out.empty()) {
        const fs::path csv_path(rep_out);
        write_text(csv_path, r.csv);
        write_text(fs::path(csv_path).replace_extension(".json"), r.summary + "\n");
      } else {
        out << (rep_json ? r.summary + "\n" : r.csv);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cwlab::cli
