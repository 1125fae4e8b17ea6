#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cwlab/dataset.hpp"
#include "cwlab/model.hpp"
#include "cwlab/tensor.hpp"
#include "cwlab/trainer.hpp"

namespace cwlab::io {

namespace fs = std::filesystem;

enum class Dtype : std::uint8_t { kF64 = 0, kF32 = 1 };

/// CWT1: magic, u32 version, u8 dtype, u8 ndim, u64 extents, row-major
/// little-endian payload.
void write_tensor(std::ostream& out, const Tensor& t, Dtype dtype = Dtype::kF64);
Tensor read_tensor(std::istream& in, const std::string& origin = "stream");
void write_tensor_file(const fs::path& path, const Tensor& t, Dtype dtype = Dtype::kF64);
Tensor read_tensor_file(const fs::path& path);

/// `index,label` with one row per sample in order.
void write_labels(const fs::path& path, const std::vector<int>& labels);
std::vector<int> read_labels(const fs::path& path);

struct ConceptEntry {
  std::string name;
  std::size_t axis = 0;
  fs::path path;
};

struct SplitEntry {
  fs::path data;
  fs::path labels;
};

/// Relative paths resolve against the manifest's directory.
struct Manifest {
  SplitEntry main;
  std::vector<ConceptEntry> concepts;
  std::optional<SplitEntry> eval;
  std::vector<ConceptEntry> eval_concepts;  // held-out exemplars, optional
};

Manifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const Manifest& manifest);

struct LoadedData {
  Dataset main;
  ConceptBank concepts;
  std::optional<Dataset> eval;
  ConceptBank eval_concepts;

  /// Eval split when present, otherwise the main one.
  const Dataset& evaluation() const { return eval ? *eval : main; }
  /// Held-out exemplars when present, otherwise the alignment ones.
  const ConceptBank& evaluation_concepts() const {
    return eval_concepts.empty() ? concepts : eval_concepts;
  }
};

/// Loads and validates every file of a manifest; data error on anything missing.
LoadedData load_manifest(const fs::path& path);

/// key=value lines; '#' starts a comment. Unknown keys and malformed values
/// are configuration errors.
trainer::TrainConfig parse_config(const std::string& text, trainer::TrainConfig base = {});
trainer::TrainConfig read_config(const fs::path& path);
/// Canonical key=value rendering, readable by parse_config.
std::map<std::string, std::string> config_entries(const trainer::TrainConfig& config);

struct Checkpoint {
  model::Model model;
  std::size_t step = 0;
  std::map<std::string, std::string> config;  // echo of the training config
};

/// "CWCK", u32 version, u64 header length, JSON header, then for every named
/// tensor a u32 name length, the name, and a CWT1 record.
void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const fs::path& path);

/// `step,main_loss,align_objective,orthogonality_error`; absent values are
/// empty fields.
void write_history(const fs::path& path, const trainer::History& history);

/// Shortest decimal string that reads back to the same double.
std::string format_number(double v);

}  // namespace cwlab::io
