#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cwlab/error.hpp"
#include "cwlab/synthetic.hpp"
#include "cwlab/trainer.hpp"

namespace cwlab::cli {

namespace fs = std::filesystem;

/// Process exit status for a failure category.
int exit_code(ErrorCode code);
constexpr int kExitUnknownSelector = 6;

struct GenOptions {
  synthetic::Spec spec;
  std::uint64_t seed = 0;
  fs::path out;
};

/// Writes the main/test splits, both concept banks and manifest.json into `out`.
void gen(const GenOptions& options);

struct TrainOptions {
  fs::path config;
  fs::path manifest;
  fs::path out;
  fs::path history;  // defaults to <out stem>.history.csv
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> init;  // continue from this checkpoint
};

trainer::History train(const TrainOptions& options);

struct SwapOptions {
  fs::path in;
  std::size_t layer = 0;
  fs::path manifest;  // its main split calibrates the whitening statistics
  fs::path out;
};

void swap_bn(const SwapOptions& options);

inline const std::vector<std::string>& report_selectors() {
  static const std::vector<std::string> names{"topk",       "similarity", "correlation", "auc",
                                              "importance", "hist2d",     "trajectory",  "occlusion"};
  return names;
}

struct ReportOptions {
  std::string selector;
  std::vector<fs::path> checkpoints;  // several only for trajectory
  fs::path manifest;
  std::string split = "eval";  // eval | main
  std::uint64_t seed = 0;
  std::optional<std::size_t> axis;
  std::optional<std::size_t> axis_j;
  std::vector<std::size_t> samples{0};
  std::size_t k = 10;
  std::size_t grid = 50;
  std::string loss = "multiclass";  // multiclass | balanced_binary
  int target = 0;
  std::size_t repetitions = 5;
  double quantile = 0.9;
  std::size_t patch = 0;
  std::size_t stride = 0;
};

struct Report {
  std::string csv;
  std::string summary;  // JSON
};

Report report(const ReportOptions& options);

/// Full command line, argv[0] included. Failures are reported on `err` and
/// mapped to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cwlab::cli
