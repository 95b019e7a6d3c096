#include "timedrl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace timedrl {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Real>
Real* TensorNode<Real>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), Real(0));
  return grad.data();
}

template <typename Real>
void TensorNode<Real>::accumulate_grad(std::span<const Real> g) {
  Real* dst = grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    fail(ErrorCode::ShapeMismatch,
         "shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) + " values, got " +
             std::to_string(data.size()));
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(0), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<Real>{value}, requires_grad);
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (numel() != 1) fail(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename Real>
void Tensor<Real>::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

template <typename Real>
std::vector<Real> Tensor<Real>::grad() const {
  if (node_->grad.empty()) return std::vector<Real>(numel(), Real(0));
  return node_->grad;
}

template <typename Real>
void Tensor<Real>::zero_grad() {
  node_->grad.clear();
}

namespace {
std::atomic<std::uint64_t> g_next_tape_id{1};

template <typename Real>
Tape<Real>*& active_slot() {
  thread_local Tape<Real>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename Real>
Tape<Real>* active_tape() {
  return active_slot<Real>();
}

template <typename Real>
Tape<Real>::Tape() : id_(g_next_tape_id.fetch_add(1)) {
  stamp_ = (id_ << 20) | generation_;
}

template <typename Real>
void Tape<Real>::record(std::vector<NodePtr> inputs, const NodePtr& output, std::function<void()> backward_fn) {
  output->is_leaf = false;
  output->requires_grad = true;
  output->tape_stamp = stamp_;
  records_.push_back(Record{std::move(inputs), output, std::move(backward_fn)});
}

template <typename Real>
void Tape<Real>::backward(const Tensor<Real>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    fail(ErrorCode::NonScalarLoss,
         "backward needs a single-element loss, got shape " + (loss.defined() ? shape_str(loss.shape()) : "<none>"));
  if (consumed_) fail(ErrorCode::StaleTape, "tape already consumed by an earlier backward; clear() before reuse");
  if (!loss.requires_grad() || loss.is_leaf()) {
    // A constant loss has nothing to propagate; a leaf loss is its own gradient.
    consumed_ = true;
    if (loss.requires_grad()) loss.node()->grad_buffer()[0] += Real(1);
    return;
  }
  if (loss.node()->tape_stamp != stamp_)
    fail(ErrorCode::StaleTape, "loss was not recorded on the current generation of this tape");
  consumed_ = true;
  loss.node()->grad_buffer()[0] += Real(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // nothing flowed here
    it->backward_fn();
  }
}

template <typename Real>
void Tape<Real>::clear() {
  records_.clear();
  consumed_ = false;
  ++generation_;
  stamp_ = (id_ << 20) | (generation_ & 0xFFFFF);
}

template <typename Real>
std::vector<const TensorNode<Real>*> Tape<Real>::gradient_leaves() const {
  std::vector<const TensorNode<Real>*> out;
  std::unordered_set<const TensorNode<Real>*> seen;
  for (const auto& rec : records_)
    for (const auto& in : rec.inputs)
      if (in->is_leaf && in->requires_grad && !in->grad.empty() && seen.insert(in.get()).second)
        out.push_back(in.get());
  return out;
}

template <typename Real>
TapeScope<Real>::TapeScope(Tape<Real>& tape) : previous_(active_slot<Real>()) {
  active_slot<Real>() = &tape;
}

template <typename Real>
TapeScope<Real>::~TapeScope() {
  active_slot<Real>() = previous_;
}

template <typename Real>
NoGradScope<Real>::NoGradScope() : previous_(active_slot<Real>()) {
  active_slot<Real>() = nullptr;
}

template <typename Real>
NoGradScope<Real>::~NoGradScope() {
  active_slot<Real>() = previous_;
}

template struct TensorNode<float>;
template struct TensorNode<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;
template Tape<float>* active_tape<float>();
template Tape<double>* active_tape<double>();

}  // namespace timedrl
