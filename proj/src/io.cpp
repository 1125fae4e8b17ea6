#include "cwlab/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "cwlab/error.hpp"

namespace cwlab::io {
namespace {

using nlohmann::json;

constexpr std::array<char, 4> kTensorMagic{'C', 'W', 'T', '1'};
constexpr std::array<char, 4> kCheckpointMagic{'C', 'W', 'C', 'K'};
constexpr std::uint32_t kTensorVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& origin) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorCode::kIo,
          origin + ": truncated file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

std::ofstream open_out(const fs::path& path, bool binary) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  require(fs::exists(path), ErrorCode::kData, "file not found: " + path.string());
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  return in;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  require(ec == std::errc() && ptr == text.data() + text.size(), ErrorCode::kConfiguration,
          "config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  fail(ErrorCode::kConfiguration, "config key '" + key + "': expected true or false, got '" + text + "'");
}

cw::ConceptStats parse_concept_stats(const std::string& text) {
  if (text == "running") return cw::ConceptStats::kRunning;
  if (text == "batch") return cw::ConceptStats::kBatch;
  fail(ErrorCode::kConfiguration, "unknown concept_stats '" + text + "'");
}

std::string_view to_string(cw::ConceptStats s) {
  return s == cw::ConceptStats::kRunning ? "running" : "batch";
}

// Enum parsers throw their own error codes; config problems must surface as
// configuration errors.
template <class F>
auto as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfiguration, "config key '" + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

std::vector<ConceptEntry> parse_concepts(const json& j, const std::string& origin) {
  std::vector<ConceptEntry> out;
  if (j.is_null()) return out;
  require(j.is_array(), ErrorCode::kData, origin + ": concepts must be an array");
  for (const json& c : j) {
    require(c.contains("name") && c.contains("axis") && c.contains("path"), ErrorCode::kData,
            origin + ": concept entries need name, axis and path");
    out.push_back({c.at("name").get<std::string>(), c.at("axis").get<std::size_t>(),
                   c.at("path").get<std::string>()});
  }
  return out;
}

json concepts_json(const std::vector<ConceptEntry>& concepts) {
  json arr = json::array();
  for (const ConceptEntry& c : concepts)
    arr.push_back({{"name", c.name}, {"axis", c.axis}, {"path", c.path.generic_string()}});
  return arr;
}

Dataset load_split(const SplitEntry& s) {
  Dataset d{read_tensor_file(s.data), read_labels(s.labels)};
  require(d.x.rank() >= 2 && d.x.shape()[0] == d.labels.size(), ErrorCode::kData,
          s.data.string() + " holds " + shape_string(d.x.shape()) + " but " + s.labels.string() +
              " has " + std::to_string(d.labels.size()) + " labels");
  d.validate();
  return d;
}

ConceptBank load_concepts(const std::vector<ConceptEntry>& entries, const Shape& sample) {
  ConceptBank bank;
  for (const ConceptEntry& e : entries) {
    Tensor x = read_tensor_file(e.path);
    require(x.rank() >= 2 && sample_shape(x) == sample, ErrorCode::kData,
            "concept '" + e.name + "' in " + e.path.string() + " has samples of shape " +
                shape_string(x.rank() >= 2 ? sample_shape(x) : x.shape()) + ", expected " +
                shape_string(sample));
    bank.push_back({e.name, e.axis, std::move(x)});
  }
  validate_concept_bank(bank);
  return bank;
}

Eigen::MatrixXd to_matrix(const Tensor& t, std::size_t rows, std::size_t cols, const std::string& name) {
  require(t.numel() == rows * cols, ErrorCode::kIo,
          "checkpoint tensor " + name + " has " + std::to_string(t.numel()) + " values, expected " +
              std::to_string(rows * cols));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.at(r * cols + c);
  return m;
}

Eigen::VectorXd to_vector(const Tensor& t, std::size_t n, const std::string& name) {
  return to_matrix(t, n, 1, name).col(0);
}

Tensor vector_tensor(const Eigen::VectorXd& v) {
  return Tensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

json architecture_json(const model::Architecture& a) {
  return {{"arch", model::to_string(a.arch)}, {"input", a.input},       {"classes", a.classes},
          {"widths", a.widths},               {"slot", model::to_string(a.slot)}, {"cw_layer", a.cw_layer}};
}

json cw_json(const cw::Config& c) {
  return {{"eps", c.whitening.eps},
          {"newton_iters", c.whitening.newton_iters},
          {"ema_momentum", c.whitening.ema_momentum},
          {"method", c.whitening.method == whitening::Method::kExact ? "exact" : "newton"},
          {"stop_gradient", c.whitening.stop_gradient},
          {"beta", c.beta},
          {"reducer", cw::to_string(c.reducer.kind)},
          {"pool_size", c.reducer.pool_size},
          {"concept_stats", to_string(c.concept_stats)},
          {"initial_step", c.search.initial_step},
          {"armijo_c1", c.search.armijo_c1},
          {"backtrack_factor", c.search.backtrack_factor},
          {"max_backtracks", c.search.max_backtracks}};
}

cw::Config cw_from_json(const json& j) {
  cw::Config c;
  c.whitening.eps = j.at("eps").get<double>();
  c.whitening.newton_iters = j.at("newton_iters").get<int>();
  c.whitening.ema_momentum = j.at("ema_momentum").get<double>();
  c.whitening.method = j.at("method").get<std::string>() == "exact" ? whitening::Method::kExact
                                                                     : whitening::Method::kNewton;
  c.whitening.stop_gradient = j.at("stop_gradient").get<bool>();
  c.beta = j.at("beta").get<double>();
  c.reducer.kind = cw::parse_reducer_kind(j.at("reducer").get<std::string>());
  c.reducer.pool_size = j.at("pool_size").get<std::size_t>();
  c.concept_stats = parse_concept_stats(j.at("concept_stats").get<std::string>());
  c.search.initial_step = j.at("initial_step").get<double>();
  c.search.armijo_c1 = j.at("armijo_c1").get<double>();
  c.search.backtrack_factor = j.at("backtrack_factor").get<double>();
  c.search.max_backtracks = j.at("max_backtracks").get<int>();
  return c;
}

std::string layer_name(std::size_t i, const char* what) {
  return "norm" + std::to_string(i) + "." + what;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t, Dtype dtype) {
  out.write(kTensorMagic.data(), kTensorMagic.size());
  put<std::uint32_t>(out, kTensorVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  require(t.rank() <= 255, ErrorCode::kIo, "tensor rank exceeds 255");
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
  for (double v : t.values()) {
    if (dtype == Dtype::kF64) {
      put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
}

Tensor read_tensor(std::istream& in, const std::string& origin) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  require(in.gcount() == 4 && magic == kTensorMagic, ErrorCode::kIo, origin + ": not a CWT1 tensor");
  const auto version = get<std::uint32_t>(in, origin);
  require(version == kTensorVersion, ErrorCode::kIo,
          origin + ": unsupported tensor version " + std::to_string(version));
  const auto dtype = get<std::uint8_t>(in, origin);
  require(dtype <= 1, ErrorCode::kIo, origin + ": unknown dtype " + std::to_string(dtype));
  const auto ndim = get<std::uint8_t>(in, origin);
  Shape shape;
  for (std::uint8_t i = 0; i < ndim; ++i) shape.push_back(get<std::uint64_t>(in, origin));
  const std::size_t n = element_count(shape);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = dtype == 0 ? std::bit_cast<double>(get<std::uint64_t>(in, origin))
                           : static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(in, origin)));
  }
  return Tensor(std::move(shape), std::move(values));
}

void write_tensor_file(const fs::path& path, const Tensor& t, Dtype dtype) {
  std::ofstream out = open_out(path, true);
  write_tensor(out, t, dtype);
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

Tensor read_tensor_file(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  Tensor t = read_tensor(in, path.string());
  in.peek();
  require(in.eof(), ErrorCode::kIo, path.string() + ": trailing bytes after tensor payload");
  return t;
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream out = open_out(path, false);
  out << "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

std::vector<int> read_labels(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && trim(line) == "index,label", ErrorCode::kData,
          path.string() + ": expected header 'index,label'");
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::kData, where + ": expected 'index,label'");
    std::size_t index = 0;
    int label = 0;
    const std::string a = trim(line.substr(0, comma)), b = trim(line.substr(comma + 1));
    const auto ra = std::from_chars(a.data(), a.data() + a.size(), index);
    const auto rb = std::from_chars(b.data(), b.data() + b.size(), label);
    require(ra.ec == std::errc() && ra.ptr == a.data() + a.size() && rb.ec == std::errc() &&
                rb.ptr == b.data() + b.size(),
            ErrorCode::kData, where + ": malformed row '" + line + "'");
    require(index == labels.size(), ErrorCode::kData,
            where + ": index " + std::to_string(index) + " out of order");
    require(label >= 0, ErrorCode::kData, where + ": negative label");
    labels.push_back(label);
  }
  return labels;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in = open_in(path, false);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kData, path.string() + ": invalid manifest JSON: " + e.what());
  }
  const fs::path base = path.parent_path();
  const std::string origin = path.string();
  Manifest m;
  try {
    m.main = {resolve(base, j.at("data").get<std::string>()),
              resolve(base, j.at("labels").get<std::string>())};
    m.concepts = parse_concepts(j.value("concepts", json()), origin);
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      m.eval = SplitEntry{resolve(base, e.at("data").get<std::string>()),
                          resolve(base, e.at("labels").get<std::string>())};
    }
    m.eval_concepts = parse_concepts(j.value("eval_concepts", json()), origin);
  } catch (const json::exception& e) {
    fail(ErrorCode::kData, origin + ": malformed manifest: " + e.what());
  }
  for (auto* list : {&m.concepts, &m.eval_concepts})
    for (ConceptEntry& c : *list) c.path = resolve(base, c.path);
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  json j;
  j["version"] = 1;
  j["data"] = m.main.data.generic_string();
  j["labels"] = m.main.labels.generic_string();
  j["concepts"] = concepts_json(m.concepts);
  if (m.eval) j["eval"] = {{"data", m.eval->data.generic_string()}, {"labels", m.eval->labels.generic_string()}};
  if (!m.eval_concepts.empty()) j["eval_concepts"] = concepts_json(m.eval_concepts);
  std::ofstream out = open_out(path, false);
  out << j.dump(2) << '\n';
}

LoadedData load_manifest(const fs::path& path) {
  const Manifest m = read_manifest(path);
  LoadedData d;
  d.main = load_split(m.main);
  const Shape sample = sample_shape(d.main.x);
  d.concepts = load_concepts(m.concepts, sample);
  if (m.eval) {
    d.eval = load_split(*m.eval);
    require(sample_shape(d.eval->x) == sample, ErrorCode::kData,
            "eval split samples do not match the main split's shape " + shape_string(sample));
  }
  d.eval_concepts = load_concepts(m.eval_concepts, sample);
  return d;
}

trainer::TrainConfig parse_config(const std::string& text, trainer::TrainConfig c) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kConfiguration,
            "config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "arch") c.arch = as_config(key, [&] { return model::parse_arch(value); });
    else if (key == "slot") c.slot = as_config(key, [&] { return model::parse_slot(value); });
    else if (key == "cw_layer") c.cw_layer = parse_value<std::size_t>(key, value);
    else if (key == "reducer") c.reducer = as_config(key, [&] { return cw::parse_reducer_kind(value); });
    else if (key == "pool_size") c.pool_size = parse_value<std::size_t>(key, value);
    else if (key == "lr") c.lr = parse_value<double>(key, value);
    else if (key == "momentum") c.momentum = parse_value<double>(key, value);
    else if (key == "batch_size") c.batch_size = parse_value<std::size_t>(key, value);
    else if (key == "epochs") c.epochs = parse_value<std::size_t>(key, value);
    else if (key == "align_frequency") c.align_frequency = parse_value<std::size_t>(key, value);
    else if (key == "beta") c.beta = parse_value<double>(key, value);
    else if (key == "newton_iters") c.newton_iters = parse_value<int>(key, value);
    else if (key == "eps") c.eps = parse_value<double>(key, value);
    else if (key == "ema_momentum") c.ema_momentum = parse_value<double>(key, value);
    else if (key == "seed") c.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "aux_weight") c.aux_weight = parse_value<double>(key, value);
    else if (key == "concept_stats") c.concept_stats = parse_concept_stats(value);
    else if (key == "stop_gradient") c.stop_gradient = parse_bool(key, value);
    else if (key == "probe_size") c.probe_size = parse_value<std::size_t>(key, value);
    else fail(ErrorCode::kConfiguration, "unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

trainer::TrainConfig read_config(const fs::path& path) {
  require(fs::exists(path), ErrorCode::kConfiguration, "config file not found: " + path.string());
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::map<std::string, std::string> config_entries(const trainer::TrainConfig& c) {
  return {{"arch", std::string(model::to_string(c.arch))},
          {"slot", std::string(model::to_string(c.slot))},
          {"cw_layer", std::to_string(c.cw_layer)},
          {"reducer", std::string(cw::to_string(c.reducer))},
          {"pool_size", std::to_string(c.pool_size)},
          {"lr", format_number(c.lr)},
          {"momentum", format_number(c.momentum)},
          {"batch_size", std::to_string(c.batch_size)},
          {"epochs", std::to_string(c.epochs)},
          {"align_frequency", std::to_string(c.align_frequency)},
          {"beta", format_number(c.beta)},
          {"newton_iters", std::to_string(c.newton_iters)},
          {"eps", format_number(c.eps)},
          {"ema_momentum", format_number(c.ema_momentum)},
          {"seed", std::to_string(c.seed)},
          {"aux_weight", format_number(c.aux_weight)},
          {"concept_stats", std::string(to_string(c.concept_stats))},
          {"stop_gradient", c.stop_gradient ? "true" : "false"},
          {"probe_size", std::to_string(c.probe_size)}};
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  const model::Model& m = ck.model;
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (const model::Parameter& p : m.parameters()) tensors.emplace_back(p.name, p.value);
  json bn = json::array();
  for (std::size_t i = 0; i < m.norm_layers().size(); ++i) {
    const model::NormLayer& n = m.norm_layers()[i];
    if (n.is_cw()) {
      const cw::CwLayer& c = *n.cw;
      tensors.emplace_back("cw.running_mean", vector_tensor(c.whitening().running_mean()));
      tensors.emplace_back("cw.running_whitener", Tensor::from_matrix(c.whitening().running_whitener()));
      tensors.emplace_back("cw.q", Tensor::from_matrix(c.rotation().q()));
      tensors.emplace_back("cw.momentum", Tensor::from_matrix(c.rotation().momentum()));
    } else {
      tensors.emplace_back(layer_name(i, "running_mean"), vector_tensor(n.bn.running_mean));
      tensors.emplace_back(layer_name(i, "running_var"), vector_tensor(n.bn.running_var));
      bn.push_back({{"layer", i}, {"eps", n.bn.eps}, {"momentum", n.bn.momentum}});
    }
  }
  json header;
  header["architecture"] = architecture_json(m.architecture());
  header["cw"] = cw_json(m.cw_config());
  header["batch_norm"] = bn;
  header["step"] = ck.step;
  header["config"] = ck.config;
  json names = json::array();
  for (const auto& [name, t] : tensors) names.push_back(name);
  header["tensors"] = names;
  const std::string text = header.dump();

  std::ofstream out = open_out(path, true);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, t);
  }
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  const std::string origin = path.string();
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  require(in.gcount() == 4 && magic == kCheckpointMagic, ErrorCode::kIo, origin + ": not a checkpoint");
  const auto version = get<std::uint32_t>(in, origin);
  require(version == kCheckpointVersion, ErrorCode::kIo,
          origin + ": unsupported checkpoint version " + std::to_string(version));
  const auto length = get<std::uint64_t>(in, origin);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  require(static_cast<std::uint64_t>(in.gcount()) == length, ErrorCode::kIo, origin + ": truncated header");

  Checkpoint ck;
  std::map<std::string, Tensor> tensors;
  try {
    const json header = json::parse(text);
    const json& a = header.at("architecture");
    model::Architecture arch;
    arch.arch = model::parse_arch(a.at("arch").get<std::string>());
    arch.input = a.at("input").get<Shape>();
    arch.classes = a.at("classes").get<std::size_t>();
    arch.widths = a.at("widths").get<std::vector<std::size_t>>();
    arch.slot = model::parse_slot(a.at("slot").get<std::string>());
    arch.cw_layer = a.at("cw_layer").get<std::size_t>();
    ck.model = model::Model(arch, cw_from_json(header.at("cw")), 0);
    ck.step = header.at("step").get<std::size_t>();
    ck.config = header.at("config").get<std::map<std::string, std::string>>();
    for (const json& b : header.at("batch_norm")) {
      model::BatchNormState& s = ck.model.norm_layers().at(b.at("layer").get<std::size_t>()).bn;
      s.eps = b.at("eps").get<double>();
      s.momentum = b.at("momentum").get<double>();
    }
    for (const json& n : header.at("tensors")) {
      const auto name_length = get<std::uint32_t>(in, origin);
      std::string name(name_length, '\0');
      in.read(name.data(), name_length);
      require(name == n.get<std::string>(), ErrorCode::kIo,
              origin + ": tensor '" + name + "' out of order");
      tensors.emplace(name, read_tensor(in, origin));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, origin + ": malformed checkpoint header: " + e.what());
  }

  auto take = [&](const std::string& name) {
    const auto it = tensors.find(name);
    require(it != tensors.end(), ErrorCode::kIo, origin + ": missing tensor '" + name + "'");
    return it->second;
  };
  for (model::Parameter& p : ck.model.parameters()) {
    const Tensor t = take(p.name);
    require(t.shape() == p.value.shape(), ErrorCode::kIo,
            origin + ": tensor '" + p.name + "' has shape " + shape_string(t.shape()) + ", expected " +
                shape_string(p.value.shape()));
    p.value = t.as_leaf(true);
  }
  auto& norms = ck.model.norm_layers();
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const std::size_t d = ck.model.architecture().widths[i];
    if (norms[i].is_cw()) {
      cw::CwLayer& c = *norms[i].cw;
      c.whitening().set_running(to_vector(take("cw.running_mean"), d, "cw.running_mean"),
                                to_matrix(take("cw.running_whitener"), d, d, "cw.running_whitener"));
      c.rotation().set_q(to_matrix(take("cw.q"), d, d, "cw.q"));
      c.rotation().set_momentum(to_matrix(take("cw.momentum"), d, d, "cw.momentum"));
    } else {
      norms[i].bn.running_mean = to_vector(take(layer_name(i, "running_mean")), d, "running_mean");
      norms[i].bn.running_var = to_vector(take(layer_name(i, "running_var")), d, "running_var");
    }
  }
  return ck;
}

void write_history(const fs::path& path, const trainer::History& history) {
  std::ofstream out = open_out(path, false);
  out << "step,main_loss,align_objective,orthogonality_error\n";
  for (const trainer::StepRecord& r : history.steps) {
    out << r.step << ',' << format_number(r.main_loss) << ','
        << (r.align_objective ? format_number(*r.align_objective) : "") << ','
        << (r.orthogonality_error ? format_number(*r.orthogonality_error) : "") << '\n';
  }
}

std::string format_number(double v) { return fmt::format("{}", v); }

}  // namespace cwlab::io
