#include "cwlab/tape.hpp"

#include <unordered_set>

#include "cwlab/error.hpp"

namespace cwlab {
namespace {
thread_local GradientTape* g_active_tape = nullptr;
}  // namespace

Tensor Gradients::operator[](const Tensor& leaf) const {
  auto it = adjoints_.find(leaf.id());
  if (it == adjoints_.end()) return Tensor::zeros(leaf.shape());
  return Tensor(leaf.shape(), it->second);
}

bool Gradients::contains(const Tensor& leaf) const { return adjoints_.count(leaf.id()) > 0; }

GradientTape::GradientTape() : previous_(g_active_tape) { g_active_tape = this; }

GradientTape::~GradientTape() { g_active_tape = previous_; }

GradientTape* GradientTape::active() { return g_active_tape; }

void GradientTape::record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn backward) {
  entries_.push_back(Entry{std::move(inputs), output, std::move(backward)});
}

Gradients GradientTape::backward(const Tensor& loss) {
  require(loss.numel() == 1, ErrorCode::kContract,
          "backward() needs a scalar loss, got " + shape_string(loss.shape()));
  require(loss.requires_grad(), ErrorCode::kContract,
          "backward() on a loss that was not recorded");

  std::unordered_map<const detail::TensorData*, Adjoint> adjoints;
  std::unordered_set<const detail::TensorData*> produced;
  for (const Entry& e : entries_) produced.insert(e.output.id());

  adjoints[loss.id()] = Adjoint{1.0};

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    auto out = adjoints.find(it->output.id());
    if (out == adjoints.end()) continue;
    // Node-based map: element addresses survive the insertions below.
    const Adjoint& output_adjoint = out->second;

    std::vector<Adjoint*> input_adjoints(it->inputs.size(), nullptr);
    for (std::size_t i = 0; i < it->inputs.size(); ++i) {
      const Tensor& in = it->inputs[i];
      if (!in.requires_grad()) continue;
      auto [slot, inserted] = adjoints.try_emplace(in.id());
      if (inserted) slot->second.assign(in.numel(), 0.0);
      input_adjoints[i] = &slot->second;
    }
    it->backward(output_adjoint, input_adjoints);
  }

  Gradients result;
  for (auto& [id, adj] : adjoints)
    if (!produced.count(id)) result.adjoints_.emplace(id, std::move(adj));
  entries_.clear();
  return result;
}

NoGradScope::NoGradScope() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = saved_; }

namespace detail {

void set_active_tape(GradientTape* tape) { g_active_tape = tape; }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   BackwardFn backward) {
  GradientTape* tape = g_active_tape;
  bool tracked = false;
  if (tape != nullptr)
    for (const Tensor& in : inputs) tracked = tracked || in.requires_grad();
  Tensor out(std::move(shape), std::move(values), tracked);
  if (tracked) tape->record(std::move(inputs), out, std::move(backward));
  return out;
}

}  // namespace detail
}  // namespace cwlab
