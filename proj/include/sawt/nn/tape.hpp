#pragma once

#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sawt/nn/parameter.hpp"

namespace sawt::nn {

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *checked(); }
  int id() const { return id_; }
  const Mat<Scalar>& value() const { return checked()->value(id_); }
  const Mat<Scalar>& grad() const { return checked()->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return checked()->requires_grad(id_); }
  Scalar item() const { return value()(0, 0); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* checked() const {
    if (!tape_) throw std::logic_error("use of an empty Var");
    return tape_;
  }

  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

/// Dynamic reverse-mode tape. Every op appends a node holding its value and,
/// when any input requires grad, a closure that pushes the node's gradient
/// back to its inputs. With grad disabled the tape only evaluates.
///
/// A tape is used by one thread at a time; parameters are only read during
/// forward and written by flush_gradients().
template <typename Scalar>
class Tape {
 public:
  using Matrix = Mat<Scalar>;
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }

  Var<Scalar> leaf(Matrix value, bool requires_grad = true) {
    return push(std::move(value), requires_grad && grad_enabled_, {});
  }

  /// Leaf bound to a parameter; one node per parameter per tape. The node
  /// reads the parameter's storage directly, so the parameter must outlive
  /// the tape and stay unchanged while it is in use.
  Var<Scalar> param(Parameter<Scalar>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    nodes_.push_back(Node{Matrix(), Matrix(), grad_enabled_, {}, &p.value});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(&p, id);
    if (grad_enabled_) param_list_.emplace_back(&p, id);
    return {this, id};
  }

  /// Appends an op result. `inputs` decide whether a closure is kept.
  Var<Scalar> op(Matrix value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[static_cast<std::size_t>(in.id())].requires_grad;
    return push(std::move(value), needs && grad_enabled_, needs && grad_enabled_ ? std::move(backward) : Backward{});
  }

  Var<Scalar> op(Matrix value, const std::vector<Var<Scalar>>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[static_cast<std::size_t>(in.id())].requires_grad;
    return push(std::move(value), needs && grad_enabled_, needs && grad_enabled_ ? std::move(backward) : Backward{});
  }

  const Matrix& value(int id) const {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  const Matrix& grad(int id) const {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
      const Matrix& v = value(id);
      zero_scratch_ = Matrix::Zero(v.rows(), v.cols());
      return zero_scratch_;
    }
    return n.grad;
  }

  /// Adds `g` into the gradient of `id` (no-op for nodes without grad).
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 loss. Node gradients are recomputed from
  /// scratch; with `flush` the parameter gradients are then accumulated into
  /// Parameter::grad (repeated calls accumulate).
  void backward(const Var<Scalar>& loss, bool flush = true) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      std::ostringstream os;
      os << "backward: loss must be 1x1, got " << loss.rows() << "x" << loss.cols();
      throw std::invalid_argument(os.str());
    }
    if (!grad_enabled_) throw std::logic_error("backward on a tape with grad disabled");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[static_cast<std::size_t>(loss.id())].grad = Matrix::Ones(1, 1);
    for (int i = loss.id(); i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      // The closure may grow other nodes' grads but never reallocates nodes_.
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
    if (flush) flush_gradients();
  }

  /// Adds parameter-leaf gradients of the last backward into Parameter::grad.
  void flush_gradients() {
    for (auto& [p, id] : param_list_) {
      const auto& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.size() != 0) p->grad += n.grad;
      p->has_grad = true;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
    const Matrix* external = nullptr;  // parameter storage, for param() nodes
  };

  Var<Scalar> push(Matrix value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backward), nullptr});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, int> param_nodes_;
  std::vector<std::pair<Parameter<Scalar>*, int>> param_list_;
  mutable Matrix zero_scratch_;
};

}  // namespace sawt::nn
