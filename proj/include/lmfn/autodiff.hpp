#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmfn/tensor.hpp"

namespace lmfn {

/// A named trainable tensor. The gradient buffer is accumulated by Tape::backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Set when backward deposits a gradient; cleared when an optimizer consumes it.
  bool grad_fresh = false;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0f); }
  std::size_t numel() const { return value.numel(); }
};

/// Owns parameters under unique slash-separated paths. Addresses stay stable
/// for the lifetime of the store, so blocks may hold raw Parameter pointers.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& add(const std::string& name, Tensor value) {
    if (index_.contains(name)) {
      throw std::invalid_argument("ParamStore: duplicate parameter path '" + name + "'");
    }
    params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
    index_.emplace(name, params_.size() - 1);
    return *params_.back();
  }

  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t total_numel() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
};

/// Reverse-mode recorder. Confined to one thread; not copyable.
class Tape {
 public:
  /// Receives the tape and the gradient flowing into the op's output.
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  /// With grad disabled, parameters bind as constants and no backward rules are kept.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a constant or an input; optionally differentiable.
  Var leaf(Tensor value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr, {}, kNoScalar});
    return Var{this, nodes_.size() - 1};
  }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Leaf bound to a Parameter; backward accumulates into param.grad.
  Var param(Parameter& p) {
    nodes_.push_back(Node{p.value, {}, grad_enabled_, grad_enabled_ ? &p : nullptr, {}, kNoScalar});
    return Var{this, nodes_.size() - 1};
  }

  /// Result of an op. The backward rule is kept only when some input needs grad.
  Var record(Tensor value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr,
                          requires_grad ? std::move(backward) : BackwardFn{}, kNoScalar});
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(std::size_t id) const { return node(id).value; }
  bool requires_grad(std::size_t id) const { return node(id).requires_grad; }

  /// Full-precision value of a scalar reduction when the op provided one.
  double scalar(Var v) const {
    const Node& n = node(v.id);
    if (n.value.numel() != 1) {
      throw std::invalid_argument("Tape::scalar: value of shape " + n.value.shape().str() +
                                  " is not a scalar");
    }
    return n.precise == n.precise ? n.precise : static_cast<double>(n.value[0]);
  }
  void set_precise_scalar(Var v, double s) { node(v.id).precise = s; }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return !node(id).grad.empty(); }
  const Tensor& grad_of(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.empty()) throw std::logic_error("Tape: no gradient reached this value");
    return n.grad;
  }

  /// Seeds d(loss)/d(loss) = 1 and replays backward rules in reverse order.
  /// Parameter leaves add their gradient into Parameter::grad.
  void backward(Var loss) {
    if (loss.tape != this || loss.id >= nodes_.size()) {
      throw std::logic_error("backward: loss was not produced by this tape");
    }
    if (node(loss.id).value.numel() != 1) {
      throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                  node(loss.id).value.shape().str());
    }
    for (auto& n : nodes_) n.grad = Tensor{};
    if (!node(loss.id).requires_grad) return;
    grad(loss.id).fill(1.0f);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr) {
        auto& pg = n.param->grad.storage();
        const auto& g = n.grad.storage();
        for (std::size_t k = 0; k < g.size(); ++k) pg[k] += g[k];
        n.param->grad_fresh = true;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() {
    nodes_.clear();
    kink_signature_ = 0;
  }

  /// Folds the branch taken at each element of a piecewise-linear op into a
  /// running hash. Two runs with equal signatures took identical branches.
  void note_branches(std::span<const float> pre) {
    std::uint64_t h = 0xcbf29ce484222325ull ^ (kink_signature_ * 0x9e3779b97f4a7c15ull);
    for (float v : pre) h = (h ^ static_cast<std::uint64_t>(v > 0.0f)) * 0x100000001b3ull;
    kink_signature_ = h;
  }
  std::uint64_t kink_signature() const { return kink_signature_; }

 private:
  static constexpr double kNoScalar = std::numeric_limits<double>::quiet_NaN();

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
    double precise = kNoScalar;
  };

  Node& node(std::size_t id) {
    if (id >= nodes_.size()) throw std::out_of_range("Tape: invalid node id");
    return nodes_[id];
  }
  const Node& node(std::size_t id) const {
    if (id >= nodes_.size()) throw std::out_of_range("Tape: invalid node id");
    return nodes_[id];
  }

  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
  std::uint64_t kink_signature_ = 0;
};

inline const Tensor& Var::value() const {
  if (tape == nullptr) throw std::logic_error("Var: unbound handle");
  return tape->value(id);
}
inline bool Var::requires_grad() const { return tape != nullptr && tape->requires_grad(id); }

}  // namespace lmfn
