#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "timedrl/error.hpp"

namespace timedrl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Normalization guards, shared by every op that divides by a spread.
struct Epsilons {
  static constexpr double layer_norm = 1e-5;
  static constexpr double batch_norm = 1e-5;
  static constexpr double cosine = 1e-8;
  static constexpr double instance_norm = 1e-5;
};

template <typename Real>
struct TensorNode {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t tape_stamp = 0;  // tape id/generation that produced this node, 0 if none

  Real* grad_buffer();
  void accumulate_grad(std::span<const Real> g);
};

template <typename Real>
class Tensor {
 public:
  using Node = TensorNode<Real>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);
  static Tensor from_node(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const Real> data() const { return node_->data; }
  // Direct mutation is reserved for leaves (parameters, inputs).
  std::span<Real> mutable_data() { return node_->data; }
  const std::vector<Real>& values() const { return node_->data; }
  Real item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Gradient after backward; zeros when nothing flowed into this tensor.
  std::vector<Real> grad() const;
  void zero_grad();
  bool is_leaf() const { return node_->is_leaf; }

  const Node* id() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Append-only record of differentiable operations. Define-by-run: a new
// generation begins after every clear().
template <typename Real>
class Tape {
 public:
  using NodePtr = std::shared_ptr<TensorNode<Real>>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<NodePtr> inputs, const NodePtr& output, std::function<void()> backward_fn);

  // Propagates d(loss)/d(node) to every recorded input, visiting each record
  // once in reverse append order. A tape can be consumed only once per
  // generation; a second call, or a call on a cleared tape, is StaleTape.
  void backward(const Tensor<Real>& loss);

  void clear();
  std::size_t size() const noexcept { return records_.size(); }
  bool consumed() const noexcept { return consumed_; }
  std::uint64_t stamp() const noexcept { return stamp_; }

  // Leaf tensors that took part in any recorded op and received a gradient.
  std::vector<const TensorNode<Real>*> gradient_leaves() const;

 private:
  struct Record {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> backward_fn;
  };

  std::vector<Record> records_;
  std::uint64_t id_ = 0;
  std::uint64_t generation_ = 0;
  std::uint64_t stamp_ = 0;
  bool consumed_ = false;
};

// Makes a tape the recording target for ops on the current thread.
// Without an active tape ops run in inference mode and record nothing.
template <typename Real>
class TapeScope {
 public:
  explicit TapeScope(Tape<Real>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<Real>* previous_;
};

// Suspends recording for the current thread (inference sections).
template <typename Real>
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<Real>* previous_;
};

template <typename Real>
Tape<Real>* active_tape();

}  // namespace timedrl
