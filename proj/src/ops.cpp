#include "timedrl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "timedrl/kernels.hpp"

namespace timedrl {

namespace {

template <typename Real>
using NodePtr = std::shared_ptr<TensorNode<Real>>;

template <typename Real>
Tape<Real>* recording_tape(std::initializer_list<const Tensor<Real>*> inputs) {
  Tape<Real>* tape = active_tape<Real>();
  if (tape == nullptr) return nullptr;
  for (const Tensor<Real>* t : inputs)
    if (t->defined() && t->requires_grad()) return tape;
  return nullptr;
}

template <typename Real>
bool wants_grad(const NodePtr<Real>& n) {
  return n && n->requires_grad;
}

bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), full.rbegin());
}

void check_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

void check_broadcast(const Shape& a, const Shape& b, const char* op) {
  if (!is_suffix(a, b))
    fail(ErrorCode::ShapeMismatch,
         std::string(op) + ": " + shape_str(b) + " does not broadcast against " + shape_str(a));
}

std::size_t check_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size())
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return axis;
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape r = s;
  r.erase(r.begin() + static_cast<std::ptrdiff_t>(axis));
  return r;
}

// Copies src (shape `shape`) into dst with axes a0 and a1 swapped.
template <typename Real>
void swap_axes_copy(const Real* src, const Shape& shape, std::size_t a0, std::size_t a1, Real* dst) {
  const std::size_t rank = shape.size();
  Shape out_shape = shape;
  std::swap(out_shape[a0], out_shape[a1]);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * shape[i];
  std::vector<std::size_t> perm_strides = in_strides;
  std::swap(perm_strides[a0], perm_strides[a1]);
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src_off = 0;
  for (std::size_t o = 0; o < n; ++o) {
    dst[o] = src[src_off];
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src_off += perm_strides[d];
        break;
      }
      src_off -= perm_strides[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
}

// Binary elementwise op with suffix broadcasting of b.
template <typename Real, typename Fwd, typename GradA, typename GradB>
Tensor<Real> binary(const Tensor<Real>& a, const Tensor<Real>& b, const char* name, Fwd fwd, GradA grad_a,
                    GradB grad_b) {
  check_broadcast(a.shape(), b.shape(), name);
  const std::size_t n = a.numel();
  const std::size_t m = b.numel();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % m]);
  Tensor<Real> result(a.shape(), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&a, &b})) {
    auto an = a.node(), bn = b.node(), on = result.node();
    tape->record({an, bn}, on, [an, bn, on, n, m, grad_a, grad_b] {
      const auto& g = on->grad;
      if (wants_grad(an)) {
        Real* ga = an->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) ga[i] += grad_a(g[i], an->data[i], bn->data[i % m]);
      }
      if (wants_grad(bn)) {
        Real* gb = bn->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) gb[i % m] += grad_b(g[i], an->data[i], bn->data[i % m]);
      }
    });
  }
  return result;
}

template <typename Real, typename Fwd, typename Deriv>
Tensor<Real> unary(const Tensor<Real>& a, Fwd fwd, Deriv deriv) {
  const std::size_t n = a.numel();
  const auto& av = a.values();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  Tensor<Real> result(a.shape(), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&a})) {
    auto an = a.node(), on = result.node();
    tape->record({an}, on, [an, on, n, deriv] {
      const auto& g = on->grad;
      Real* ga = an->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * deriv(an->data[i], on->data[i]);
    });
  }
  return result;
}

}  // namespace

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  return binary<Real>(
      a, b, "add", [](Real x, Real y) { return x + y; }, [](Real g, Real, Real) { return g; },
      [](Real g, Real, Real) { return g; });
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  return binary<Real>(
      a, b, "sub", [](Real x, Real y) { return x - y; }, [](Real g, Real, Real) { return g; },
      [](Real g, Real, Real) { return -g; });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  return binary<Real>(
      a, b, "mul", [](Real x, Real y) { return x * y; }, [](Real g, Real, Real y) { return g * y; },
      [](Real g, Real x, Real) { return g * x; });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor) {
  return unary<Real>(a, [factor](Real x) { return x * factor; }, [factor](Real, Real) { return factor; });
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& a) {
  return unary<Real>(
      a, [](Real x) { return x > Real(0) ? x : Real(0); },
      [](Real x, Real) { return x > Real(0) ? Real(1) : Real(0); });
}

template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& a) {
  constexpr Real inv_sqrt2 = static_cast<Real>(0.70710678118654752440);
  constexpr Real inv_sqrt_2pi = static_cast<Real>(0.39894228040143267794);
  return unary<Real>(
      a, [](Real x) { return Real(0.5) * x * (Real(1) + std::erf(x * inv_sqrt2)); },
      [](Real x, Real) {
        return Real(0.5) * (Real(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(Real(-0.5) * x * x);
      });
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.rank() < 2 || b.rank() < 2)
    fail(ErrorCode::ShapeMismatch, "matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                                       shape_str(b.shape()));
  const std::size_t m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2), n = b.dim(b.rank() - 1);
  if (k != kb)
    fail(ErrorCode::ShapeMismatch,
         "matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  const bool shared_b = lead_b.empty();
  if (!shared_b && lead_a != lead_b)
    fail(ErrorCode::ShapeMismatch,
         "matmul batch extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t batch = shape_numel(lead_a);
  const std::size_t b_stride = shared_b ? 0 : k * n;
  Shape out_shape = lead_a;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<Real> out(batch * m * n);
  kernels::parallel::gemm_nn(batch, m, k, n, a.values().data(), m * k, b.values().data(), b_stride, out.data(),
                             m * n, false);
  Tensor<Real> result(std::move(out_shape), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&a, &b})) {
    auto an = a.node(), bn = b.node(), on = result.node();
    tape->record({an, bn}, on, [an, bn, on, batch, m, k, n, shared_b, b_stride] {
      const Real* g = on->grad.data();
      if (wants_grad(an))
        kernels::parallel::gemm_nt(batch, m, n, k, g, m * n, bn->data.data(), b_stride, an->grad_buffer(), m * k,
                                   true);
      if (wants_grad(bn)) {
        if (shared_b)
          kernels::parallel::gemm_tn(std::size_t{1}, k, batch * m, n, an->data.data(), 0, g, 0, bn->grad_buffer(),
                                     0, true);
        else
          kernels::parallel::gemm_tn(batch, k, m, n, an->data.data(), m * k, g, m * n, bn->grad_buffer(), k * n,
                                     true);
      }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.dim(x.rank() - 1) != weight.dim(1))
    fail(ErrorCode::ShapeMismatch,
         "linear: input " + shape_str(x.shape()) + " against weight " + shape_str(weight.shape()));
  const std::size_t in = weight.dim(1), out_features = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_features})
    fail(ErrorCode::ShapeMismatch, "linear: bias " + shape_str(bias.shape()) + " for " +
                                       std::to_string(out_features) + " outputs");
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_features;
  std::vector<Real> out(rows * out_features);
  kernels::parallel::gemm_nt(std::size_t{1}, rows, in, out_features, x.values().data(), 0,
                             weight.values().data(), 0, out.data(), 0, false);
  if (bias.defined()) {
    const auto& bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out_features; ++o) out[r * out_features + o] += bv[o];
  }
  Tensor<Real> result(std::move(out_shape), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x, &weight, &bias})) {
    auto xn = x.node(), wn = weight.node(), bn = bias.node(), on = result.node();
    std::vector<NodePtr<Real>> inputs{xn, wn};
    if (bn) inputs.push_back(bn);
    tape->record(std::move(inputs), on, [xn, wn, bn, on, rows, in, out_features] {
      const Real* g = on->grad.data();
      if (wants_grad(xn))
        kernels::parallel::gemm_nn(std::size_t{1}, rows, out_features, in, g, 0, wn->data.data(), 0,
                                   xn->grad_buffer(), 0, true);
      if (wants_grad(wn))
        kernels::parallel::gemm_tn(std::size_t{1}, out_features, rows, in, g, 0, xn->data.data(), 0,
                                   wn->grad_buffer(), 0, true);
      if (wants_grad(bn)) {
        Real* gb = bn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < out_features; ++o) gb[o] += g[r * out_features + o];
      }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& x, std::size_t axis0, std::size_t axis1) {
  check_axis(x.shape(), axis0, "transpose");
  check_axis(x.shape(), axis1, "transpose");
  Shape out_shape = x.shape();
  std::swap(out_shape[axis0], out_shape[axis1]);
  std::vector<Real> out(x.numel());
  swap_axes_copy(x.values().data(), x.shape(), axis0, axis1, out.data());
  Tensor<Real> result(out_shape, std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, out_shape, axis0, axis1] {
      std::vector<Real> back(on->grad.size());
      swap_axes_copy(on->grad.data(), out_shape, axis0, axis1, back.data());
      xn->accumulate_grad(back);
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    fail(ErrorCode::ShapeMismatch, "reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  Tensor<Real> result(std::move(shape), x.values());
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on] { xn->accumulate_grad(on->grad); });
  }
  return result;
}

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat of zero tensors");
  const Shape& ref = parts.front().shape();
  check_axis(ref, axis, "concat");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != ref.size()) fail(ErrorCode::ShapeMismatch, "concat rank mismatch");
    s[axis] = ref[axis];
    if (s != ref)
      fail(ErrorCode::ShapeMismatch, "concat: " + shape_str(p.shape()) + " vs " + shape_str(ref) + " off axis " +
                                         std::to_string(axis));
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit split = split_at(out_shape, axis);
  std::vector<Real> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.dim(axis) * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o)
      std::copy_n(p.values().data() + o * block, block,
                  out.data() + o * split.extent * split.inner + offset * split.inner);
    offset += p.dim(axis);
  }
  Tensor<Real> result(out_shape, std::move(out));
  Tape<Real>* tape = active_tape<Real>();
  const bool any_grad = std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.requires_grad(); });
  if (tape != nullptr && any_grad) {
    std::vector<NodePtr<Real>> inputs;
    for (const auto& p : parts) inputs.push_back(p.node());
    auto on = result.node();
    tape->record(inputs, on, [inputs, on, offsets, split, axis] {
      for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
        const auto& in = inputs[pi];
        if (!wants_grad(in)) continue;
        const std::size_t block = in->shape[axis] * split.inner;
        Real* gi = in->grad_buffer();
        for (std::size_t o = 0; o < split.outer; ++o) {
          const Real* src = on->grad.data() + o * split.extent * split.inner + offsets[pi] * split.inner;
          for (std::size_t j = 0; j < block; ++j) gi[o * block + j] += src[j];
        }
      }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> slice(const Tensor<Real>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  check_axis(x.shape(), axis, "slice");
  if (begin > end || end > x.dim(axis))
    fail(ErrorCode::ShapeMismatch, "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                                       std::to_string(axis) + " of " + shape_str(x.shape()));
  const AxisSplit split = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * split.inner;
  std::vector<Real> out(split.outer * block);
  for (std::size_t o = 0; o < split.outer; ++o)
    std::copy_n(x.values().data() + o * split.extent * split.inner + begin * split.inner, block,
                out.data() + o * block);
  Tensor<Real> result(std::move(out_shape), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, split, begin, block] {
      Real* gx = xn->grad_buffer();
      for (std::size_t o = 0; o < split.outer; ++o)
        for (std::size_t j = 0; j < block; ++j)
          gx[o * split.extent * split.inner + begin * split.inner + j] += on->grad[o * block + j];
    });
  }
  return result;
}

namespace {

template <typename Real>
Tensor<Real> reduce_all(const Tensor<Real>& x, Real weight) {
  Real acc = 0;
  for (Real v : x.values()) acc += v;
  Tensor<Real> result = Tensor<Real>::scalar(acc * weight);
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, weight] {
      const Real g = on->grad[0] * weight;
      Real* gx = xn->grad_buffer();
      for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += g;
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> reduce_axis(const Tensor<Real>& x, std::size_t axis, bool average) {
  check_axis(x.shape(), axis, average ? "mean" : "sum");
  const AxisSplit s = split_at(x.shape(), axis);
  const Real weight = average ? Real(1) / static_cast<Real>(s.extent) : Real(1);
  std::vector<Real> out(s.outer * s.inner, Real(0));
  const auto& xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += xv[(o * s.extent + e) * s.inner + i];
  if (average)
    for (Real& v : out) v *= weight;
  Tensor<Real> result(drop_axis(x.shape(), axis), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, s, weight] {
      Real* gx = xn->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
          for (std::size_t i = 0; i < s.inner; ++i)
            gx[(o * s.extent + e) * s.inner + i] += on->grad[o * s.inner + i] * weight;
    });
  }
  return result;
}

}  // namespace

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
  return reduce_all(x, Real(1));
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x, std::size_t axis) {
  return reduce_axis(x, axis, false);
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
  if (x.numel() == 0) fail(ErrorCode::ShapeMismatch, "mean of empty tensor");
  return reduce_all(x, Real(1) / static_cast<Real>(x.numel()));
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x, std::size_t axis) {
  return reduce_axis(x, axis, true);
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x, std::size_t axis) {
  check_axis(x.shape(), axis, "softmax");
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<Real> out(x.numel());
  const Real* xv = x.values().data();
  if (s.inner == 1) {
    kernels::parallel::softmax_rows(s.outer, s.extent, xv, out.data());
  } else {
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        Real mx = xv[base];
        for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
        Real total = 0;
        for (std::size_t e = 0; e < s.extent; ++e) {
          out[base + e * s.inner] = std::exp(xv[base + e * s.inner] - mx);
          total += out[base + e * s.inner];
        }
        for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
      }
  }
  Tensor<Real> result(x.shape(), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, s] {
      const Real* y = on->data.data();
      const Real* g = on->grad.data();
      Real* gx = xn->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          Real dot = 0;
          for (std::size_t e = 0; e < s.extent; ++e) dot += g[base + e * s.inner] * y[base + e * s.inner];
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t idx = base + e * s.inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta, Real eps) {
  if (x.rank() < 1) fail(ErrorCode::ShapeMismatch, "layer_norm of a scalar");
  const std::size_t n = x.dim(x.rank() - 1);
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n})
    fail(ErrorCode::ShapeMismatch, "layer_norm affine " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                                       " for last extent " + std::to_string(n));
  const std::size_t rows = x.numel() / n;
  std::vector<Real> out(x.numel()), row_mean(rows), row_rstd(rows);
  kernels::parallel::layer_norm_rows(rows, n, x.values().data(), gamma.values().data(), beta.values().data(), eps,
                                     out.data(), row_mean.data(), row_rstd.data());
  Tensor<Real> result(x.shape(), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x, &gamma, &beta})) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = result.node();
    tape->record({xn, gn, bn}, on, [xn, gn, bn, on, rows, n, row_mean = std::move(row_mean), row_rstd = std::move(row_rstd)] {
      const Real* g = on->grad.data();
      const Real* xv = xn->data.data();
      const Real* gam = gn->data.data();
      Real* gx = wants_grad(xn) ? xn->grad_buffer() : nullptr;
      Real* ggam = wants_grad(gn) ? gn->grad_buffer() : nullptr;
      Real* gbet = wants_grad(bn) ? bn->grad_buffer() : nullptr;
      std::vector<Real> xhat(n), dxhat(n);
      for (std::size_t r = 0; r < rows; ++r) {
        const Real* xr = xv + r * n;
        const Real* gr = g + r * n;
        Real mean_d = 0, mean_dx = 0;
        for (std::size_t j = 0; j < n; ++j) {
          xhat[j] = (xr[j] - row_mean[r]) * row_rstd[r];
          dxhat[j] = gr[j] * gam[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat[j];
          if (ggam) ggam[j] += gr[j] * xhat[j];
          if (gbet) gbet[j] += gr[j];
        }
        mean_d /= static_cast<Real>(n);
        mean_dx /= static_cast<Real>(n);
        if (gx)
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += row_rstd[r] * (dxhat[j] - mean_d - xhat[j] * mean_dx);
      }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> batch_norm_1d(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                           BatchNormStats& stats, bool training, Real eps) {
  if (x.rank() != 2) fail(ErrorCode::ShapeMismatch, "batch_norm_1d expects [B, F], got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), features = x.dim(1);
  if (gamma.shape() != Shape{features} || beta.shape() != Shape{features} ||
      stats.running_mean.size() != features || stats.running_var.size() != features)
    fail(ErrorCode::ShapeMismatch, "batch_norm_1d parameters do not match " + std::to_string(features) + " features");
  if (training && batch < 2)
    fail(ErrorCode::DegenerateBatch, "batch norm in training mode needs at least 2 samples, got " + std::to_string(batch));

  std::vector<Real> mu(features), rstd(features);
  const auto& xv = x.values();
  if (training) {
    for (std::size_t f = 0; f < features; ++f) {
      Real m = 0;
      for (std::size_t b = 0; b < batch; ++b) m += xv[b * features + f];
      m /= static_cast<Real>(batch);
      Real v = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real d = xv[b * features + f] - m;
        v += d * d;
      }
      v /= static_cast<Real>(batch);
      mu[f] = m;
      rstd[f] = Real(1) / std::sqrt(v + eps);
      const double unbiased = static_cast<double>(v) * static_cast<double>(batch) / static_cast<double>(batch - 1);
      stats.running_mean[f] = (1.0 - stats.momentum) * stats.running_mean[f] + stats.momentum * static_cast<double>(m);
      stats.running_var[f] = (1.0 - stats.momentum) * stats.running_var[f] + stats.momentum * unbiased;
    }
  } else {
    for (std::size_t f = 0; f < features; ++f) {
      mu[f] = static_cast<Real>(stats.running_mean[f]);
      rstd[f] = Real(1) / std::sqrt(static_cast<Real>(stats.running_var[f]) + eps);
    }
  }
  std::vector<Real> out(x.numel());
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < features; ++f)
      out[b * features + f] = (xv[b * features + f] - mu[f]) * rstd[f] * gv[f] + bv[f];
  Tensor<Real> result(x.shape(), std::move(out));

  if (Tape<Real>* tape = recording_tape<Real>({&x, &gamma, &beta})) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = result.node();
    tape->record({xn, gn, bn}, on, [xn, gn, bn, on, batch, features, training, mu = std::move(mu), rstd = std::move(rstd)] {
      const Real* g = on->grad.data();
      const Real* xd = xn->data.data();
      const Real* gam = gn->data.data();
      Real* gx = wants_grad(xn) ? xn->grad_buffer() : nullptr;
      Real* ggam = wants_grad(gn) ? gn->grad_buffer() : nullptr;
      Real* gbet = wants_grad(bn) ? bn->grad_buffer() : nullptr;
      const Real inv_b = Real(1) / static_cast<Real>(batch);
      for (std::size_t f = 0; f < features; ++f) {
        Real sum_d = 0, sum_dx = 0;
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t i = b * features + f;
          const Real xhat = (xd[i] - mu[f]) * rstd[f];
          const Real d = g[i] * gam[f];
          sum_d += d;
          sum_dx += d * xhat;
          if (ggam) ggam[f] += g[i] * xhat;
          if (gbet) gbet[f] += g[i];
        }
        if (!gx) continue;
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t i = b * features + f;
          const Real d = g[i] * gam[f];
          if (training) {
            const Real xhat = (xd[i] - mu[f]) * rstd[f];
            gx[i] += rstd[f] * (d - sum_d * inv_b - xhat * sum_dx * inv_b);
          } else {
            gx[i] += rstd[f] * d;
          }
        }
      }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, double p, bool training, RngStream& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::InvalidProbability, "dropout p=" + std::to_string(p) + " not in [0, 1)");
  if (!training || p == 0.0) return x;
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - p));
  const std::size_t n = x.numel();
  std::vector<Real> mask(n);
  for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() >= p ? keep_scale : Real(0);
  std::vector<Real> out(n);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] * mask[i];
  Tensor<Real> result(x.shape(), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, mask = std::move(mask)] {
      Real* gx = xn->grad_buffer();
      for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += on->grad[i] * mask[i];
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> cosine_similarity(const Tensor<Real>& a, const Tensor<Real>& b, Real eps) {
  check_same(a.shape(), b.shape(), "cosine_similarity");
  if (a.rank() < 1 || a.dim(a.rank() - 1) == 0)
    fail(ErrorCode::ShapeMismatch, "cosine_similarity needs a non-empty last axis");
  const std::size_t d = a.dim(a.rank() - 1);
  const std::size_t rows = a.numel() / d;
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  std::vector<Real> out(rows), na(rows), nb(rows), dots(rows);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    Real dot = 0, sa = 0, sb = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += av[r * d + j] * bv[r * d + j];
      sa += av[r * d + j] * av[r * d + j];
      sb += bv[r * d + j] * bv[r * d + j];
    }
    na[r] = std::sqrt(sa);
    nb[r] = std::sqrt(sb);
    dots[r] = dot;
    out[r] = dot / (std::max(na[r], eps) * std::max(nb[r], eps));
  }
  Tensor<Real> result(std::move(out_shape), std::move(out));
  if (Tape<Real>* tape = recording_tape<Real>({&a, &b})) {
    auto an = a.node(), bn = b.node(), on = result.node();
    tape->record({an, bn}, on, [an, bn, on, rows, d, eps, na = std::move(na), nb = std::move(nb)] {
      const Real* g = on->grad.data();
      const Real* ad = an->data.data();
      const Real* bd = bn->data.data();
      Real* ga = wants_grad(an) ? an->grad_buffer() : nullptr;
      Real* gb = wants_grad(bn) ? bn->grad_buffer() : nullptr;
      for (std::size_t r = 0; r < rows; ++r) {
        const Real da = std::max(na[r], eps), db = std::max(nb[r], eps);
        const Real c = on->data[r];
        // Where a norm is clamped its denominator is constant.
        const Real ka = na[r] > eps ? c / (na[r] * na[r]) : Real(0);
        const Real kb = nb[r] > eps ? c / (nb[r] * nb[r]) : Real(0);
        for (std::size_t j = 0; j < d; ++j) {
          const std::size_t i = r * d + j;
          if (ga) ga[i] += g[r] * (bd[i] / (da * db) - ka * ad[i]);
          if (gb) gb[i] += g[r] * (ad[i] / (da * db) - kb * bd[i]);
        }
      }
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> detach(const Tensor<Real>& x) {
  return Tensor<Real>(x.shape(), x.values(), false);
}

template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    fail(ErrorCode::ShapeMismatch, "cross_entropy: logits " + shape_str(logits.shape()) + " for " +
                                       std::to_string(labels.size()) + " labels");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  for (std::size_t lbl : labels)
    if (lbl >= classes) fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(lbl) + " >= " + std::to_string(classes));
  std::vector<Real> probs(logits.numel());
  kernels::parallel::softmax_rows(batch, classes, logits.values().data(), probs.data());
  Real loss = 0;
  const auto& lv = logits.values();
  for (std::size_t b = 0; b < batch; ++b) {
    Real mx = lv[b * classes];
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, lv[b * classes + k]);
    Real s = 0;
    for (std::size_t k = 0; k < classes; ++k) s += std::exp(lv[b * classes + k] - mx);
    loss += mx + std::log(s) - lv[b * classes + labels[b]];
  }
  loss /= static_cast<Real>(batch);
  Tensor<Real> result = Tensor<Real>::scalar(loss);
  if (Tape<Real>* tape = recording_tape<Real>({&logits})) {
    auto ln = logits.node(), on = result.node();
    tape->record({ln}, on, [ln, on, labels, batch, classes, probs = std::move(probs)] {
      const Real g = on->grad[0] / static_cast<Real>(batch);
      Real* gl = ln->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < classes; ++k)
          gl[b * classes + k] += g * (probs[b * classes + k] - (k == labels[b] ? Real(1) : Real(0)));
    });
  }
  return result;
}

template <typename Real>
Tensor<Real> mse_loss(const Tensor<Real>& prediction, const Tensor<Real>& target) {
  check_same(prediction.shape(), target.shape(), "mse_loss");
  const std::size_t n = prediction.numel();
  if (n == 0) fail(ErrorCode::ShapeMismatch, "mse_loss of empty tensors");
  const auto& pv = prediction.values();
  const auto& tv = target.values();
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real r = pv[i] - tv[i];
    acc += r * r;
  }
  Tensor<Real> result = Tensor<Real>::scalar(acc / static_cast<Real>(n));
  if (Tape<Real>* tape = recording_tape<Real>({&prediction, &target})) {
    auto pn = prediction.node(), tn = target.node(), on = result.node();
    tape->record({pn, tn}, on, [pn, tn, on, n] {
      const Real g = on->grad[0] * Real(2) / static_cast<Real>(n);
      Real* gp = wants_grad(pn) ? pn->grad_buffer() : nullptr;
      Real* gt = wants_grad(tn) ? tn->grad_buffer() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        const Real r = pn->data[i] - tn->data[i];
        if (gp) gp[i] += g * r;
        if (gt) gt[i] -= g * r;
      }
    });
  }
  return result;
}

#define TIMEDRL_INSTANTIATE_OPS(Real)                                                                       \
  template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);                                     \
  template Tensor<Real> sub(const Tensor<Real>&, const Tensor<Real>&);                                     \
  template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);                                     \
  template Tensor<Real> scale(const Tensor<Real>&, Real);                                                  \
  template Tensor<Real> relu(const Tensor<Real>&);                                                         \
  template Tensor<Real> gelu(const Tensor<Real>&);                                                         \
  template Tensor<Real> matmul(const Tensor<Real>&, const Tensor<Real>&);                                  \
  template Tensor<Real> linear(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&);             \
  template Tensor<Real> transpose(const Tensor<Real>&, std::size_t, std::size_t);                          \
  template Tensor<Real> reshape(const Tensor<Real>&, Shape);                                               \
  template Tensor<Real> concat(const std::vector<Tensor<Real>>&, std::size_t);                             \
  template Tensor<Real> slice(const Tensor<Real>&, std::size_t, std::size_t, std::size_t);                 \
  template Tensor<Real> sum(const Tensor<Real>&);                                                          \
  template Tensor<Real> sum(const Tensor<Real>&, std::size_t);                                             \
  template Tensor<Real> mean(const Tensor<Real>&);                                                         \
  template Tensor<Real> mean(const Tensor<Real>&, std::size_t);                                            \
  template Tensor<Real> softmax(const Tensor<Real>&, std::size_t);                                         \
  template Tensor<Real> layer_norm(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, Real);   \
  template Tensor<Real> batch_norm_1d(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&,       \
                                      BatchNormStats&, bool, Real);                                        \
  template Tensor<Real> dropout(const Tensor<Real>&, double, bool, RngStream&);                            \
  template Tensor<Real> cosine_similarity(const Tensor<Real>&, const Tensor<Real>&, Real);                 \
  template Tensor<Real> detach(const Tensor<Real>&);                                                       \
  template Tensor<Real> cross_entropy(const Tensor<Real>&, const std::vector<std::size_t>&);               \
  template Tensor<Real> mse_loss(const Tensor<Real>&, const Tensor<Real>&);

TIMEDRL_INSTANTIATE_OPS(float)
TIMEDRL_INSTANTIATE_OPS(double)

#undef TIMEDRL_INSTANTIATE_OPS

}  // namespace timedrl
