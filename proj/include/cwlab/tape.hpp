#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cwlab/tensor.hpp"

namespace cwlab {

using Adjoint = std::vector<double>;

/// Accumulates input adjoints from the output adjoint. Null entries in
/// `inputs` belong to inputs that do not need gradients.
using BackwardFn =
    std::function<void(std::span<const double> output, std::span<Adjoint* const> inputs)>;

/// Adjoints of the leaves reached by a backward pass.
class Gradients {
 public:
  /// Adjoint of `leaf`; exactly zero when the leaf did not influence the loss.
  Tensor operator[](const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;
  std::size_t size() const { return adjoints_.size(); }

 private:
  friend class GradientTape;
  std::unordered_map<const detail::TensorData*, Adjoint> adjoints_;
};

/**
 * Ordered record of tracked operations for reverse-mode differentiation.
 *
 * Constructing a tape makes it the active tape of the calling thread until
 * it is destroyed; tapes nest. Ops record themselves only while a tape is
 * active and at least one input requires gradients.
 */
class GradientTape {
 public:
  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* active();

  void record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn backward);

  /// Replays the record in reverse from a scalar loss, then clears it.
  Gradients backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  GradientTape* previous_ = nullptr;
};

/// Suspends recording on this thread for its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  GradientTape* saved_;
};

namespace detail {
void set_active_tape(GradientTape* tape);

/// Builds an op result, recording it when any input is tracked.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   BackwardFn backward);
}  // namespace detail

}  // namespace cwlab
