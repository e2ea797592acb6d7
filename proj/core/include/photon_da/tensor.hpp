#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "photon_da/errors.hpp"

namespace photon_da {

/// Dense row-major extents, outermost first. Rank 0 (empty shape) is a
/// scalar with one element.
using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // same length as value when requires_grad, else empty
  bool requires_grad = false;
};

}  // namespace detail

/// Shared-buffer handle to a dense tensor of S (float or double).
///
/// Copying a Tensor aliases the same storage; operations that participate in
/// autodiff hold these handles inside tape closures so gradients accumulate
/// into the buffers the caller sees. Gradient buffers exist only on tensors
/// with requires_grad, and accumulate across backward calls until
/// zero_grad().
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return make(std::move(shape), {}, requires_grad);
  }

  static Tensor full(Shape shape, S fill, bool requires_grad = false) {
    Tensor t = make(std::move(shape), {}, requires_grad);
    for (S& v : t.impl_->value) v = fill;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<S> data,
                          bool requires_grad = false) {
    if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
      throw ValidationError("tensor data size " + std::to_string(data.size()) +
                            " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl<S>>();
    t.impl_->shape = std::move(shape);
    t.impl_->value = std::move(data);
    if (requires_grad) t.enable_grad();
    return t;
  }

  /// Rank-0 tensor holding a single value.
  static Tensor scalar(S value, bool requires_grad = false) {
    return from_data({}, {value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return check().shape; }
  std::size_t rank() const { return check().shape.size(); }
  std::int64_t size() const {
    return static_cast<std::int64_t>(check().value.size());
  }
  std::int64_t dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size())
      throw ValidationError("axis " + std::to_string(axis) +
                            " out of range for shape " + shape_str(s));
    return s[axis];
  }

  bool requires_grad() const { return check().requires_grad; }

  /// Marks this tensor as a differentiation leaf and allocates its gradient
  /// buffer (zero-filled).
  void enable_grad() {
    auto& impl = check();
    impl.requires_grad = true;
    impl.grad.assign(impl.value.size(), S{0});
  }

  std::span<S> values() { return {check().value.data(), check().value.size()}; }
  std::span<const S> values() const {
    return {check().value.data(), check().value.size()};
  }

  std::span<S> grad() {
    auto& impl = check();
    if (!impl.requires_grad)
      throw ValidationError("gradient requested from a tensor without grad");
    return {impl.grad.data(), impl.grad.size()};
  }
  std::span<const S> grad() const {
    return const_cast<Tensor*>(this)->grad();
  }

  void zero_grad() {
    auto& impl = check();
    std::fill(impl.grad.begin(), impl.grad.end(), S{0});
  }

  /// Value of a one-element tensor.
  S item() const {
    if (size() != 1)
      throw ValidationError("item() on tensor of shape " + shape_str(shape()));
    return check().value[0];
  }

  /// Element access by multi-index (row-major); bounds-checked.
  S& at(std::initializer_list<std::int64_t> index) {
    return check().value[flat_index(index)];
  }
  S at(std::initializer_list<std::int64_t> index) const {
    return check().value[flat_index(index)];
  }

  /// Deep copy with no gradient tracking: the result is a constant leaf.
  Tensor detached() const {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl<S>>();
    t.impl_->shape = check().shape;
    t.impl_->value = check().value;
    return t;
  }

  std::shared_ptr<detail::TensorImpl<S>> impl() const { return impl_; }

 private:
  static Tensor make(Shape shape, std::vector<S>, bool requires_grad) {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl<S>>();
    t.impl_->value.assign(static_cast<std::size_t>(numel(shape)), S{0});
    t.impl_->shape = std::move(shape);
    if (requires_grad) t.enable_grad();
    return t;
  }

  detail::TensorImpl<S>& check() const {
    if (!impl_) throw ValidationError("use of default-constructed tensor");
    return *impl_;
  }

  std::size_t flat_index(std::initializer_list<std::int64_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size())
      throw ValidationError("index rank mismatch for shape " + shape_str(s));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::int64_t i : index) {
      if (i < 0 || i >= s[axis])
        throw ValidationError("index out of range for shape " + shape_str(s));
      flat = flat * static_cast<std::size_t>(s[axis]) + static_cast<std::size_t>(i);
      ++axis;
    }
    return flat;
  }

  std::shared_ptr<detail::TensorImpl<S>> impl_;
};

/// Ordered record of executed differentiable operations.
///
/// Each op that participates in differentiation appends one closure; calling
/// backward(loss) seeds d(loss)/d(loss) = 1 and replays the closures in
/// reverse, accumulating into the grad buffers of every tensor that requires
/// one. Each tape supports a single backward pass (intermediate gradients
/// would double-count on a second replay); gradients on leaf tensors
/// accumulate across tapes until zero_grad(). clear() drops the recorded
/// graph (and the activation storage it keeps alive). One tape serves one
/// logical thread; independent tapes may run concurrently.
template <typename S>
class GradientTape {
 public:
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  void record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
  }

  std::size_t size() const { return steps_.size(); }
  void clear() {
    steps_.clear();
    replayed_ = false;
  }

  void backward(const Tensor<S>& loss) {
    if (loss.size() != 1)
      throw ValidationError("backward requires a scalar loss, got shape " +
                            shape_str(loss.shape()));
    if (replayed_)
      throw ValidationError("backward already ran on this tape");
    replayed_ = true;
    if (!loss.requires_grad()) return;  // constant: all gradients stay zero
    loss.impl()->grad[0] += S{1};
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
  bool replayed_ = false;
};

namespace detail {

/// True when the tape is recording and at least one input carries gradient.
template <typename S, typename... Ts>
bool track(const GradientTape<S>& tape, const Ts&... inputs) {
  return tape.recording() && (... || inputs.requires_grad());
}

}  // namespace detail

}  // namespace photon_da
