#include "timedrl/encoder.hpp"

#include <cmath>

namespace timedrl {

void EncoderConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    fail(ErrorCode::ConfigInvalid, "d_model=" + std::to_string(d_model) + " is not divisible by heads=" +
                                       std::to_string(heads));
  if (blocks < 1) fail(ErrorCode::ConfigInvalid, "encoder needs at least one block");
  if (d_ff == 0 || channels == 0) fail(ErrorCode::ConfigInvalid, "d_ff and channels must be positive");
  for (double p : {dropout_embed, dropout_attn, dropout_ff})
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::ConfigInvalid, "dropout probability " + std::to_string(p) + " not in [0, 1)");
  patch().validate(window);
}

std::size_t EncoderConfig::patches() const {
  return patch_count(window, patch());
}

template <typename Real>
Tensor<Real> glorot_uniform(std::size_t fan_out, std::size_t fan_in, RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<Real> v(fan_out * fan_in);
  for (Real& x : v) x = static_cast<Real>(rng.uniform(-a, a));
  return Tensor<Real>({fan_out, fan_in}, std::move(v), true);
}

template Tensor<float> glorot_uniform<float>(std::size_t, std::size_t, RngStream&);
template Tensor<double> glorot_uniform<double>(std::size_t, std::size_t, RngStream&);

namespace {

template <typename Real>
Tensor<Real> small_normal(Shape shape, RngStream& rng) {
  std::vector<Real> v(shape_numel(shape));
  for (Real& x : v) x = static_cast<Real>(rng.normal(0.0, 0.02));
  return Tensor<Real>(std::move(shape), std::move(v), true);
}

// Additive [N, N] attention mask: patch rows (i >= 1) never read the [CLS]
// column, so timestamp embeddings are a function of the patches alone. The
// [CLS] row reads every token. Masked weights are exactly zero after softmax.
template <typename Real>
Tensor<Real> readout_mask(std::size_t n) {
  std::vector<Real> m(n * n, Real(0));
  for (std::size_t i = 1; i < n; ++i) m[i * n] = static_cast<Real>(-1e9);
  return Tensor<Real>({n, n}, std::move(m));
}

}  // namespace

template <typename Real>
Encoder<Real>::Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  RngStream rng = RngStream(seed).derive("init-encoder");
  const std::size_t d = config_.d_model, w = config_.token_width(), n = config_.tokens();
  w_token_ = glorot_uniform<Real>(d, w, rng);
  pe_ = small_normal<Real>({n, d}, rng);
  cls_token_ = small_normal<Real>({w}, rng);
  auto ones = [](std::size_t k) { return Tensor<Real>::full({k}, Real(1), true); };
  auto zeros = [](std::size_t k) { return Tensor<Real>::zeros({k}, true); };
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    Block blk;
    blk.ln1_gamma = ones(d);
    blk.ln1_beta = zeros(d);
    blk.wq = glorot_uniform<Real>(d, d, rng);
    blk.bq = zeros(d);
    blk.wk = glorot_uniform<Real>(d, d, rng);
    blk.bk = zeros(d);
    blk.wv = glorot_uniform<Real>(d, d, rng);
    blk.bv = zeros(d);
    blk.wo = glorot_uniform<Real>(d, d, rng);
    blk.bo = zeros(d);
    blk.ln2_gamma = ones(d);
    blk.ln2_beta = zeros(d);
    blk.w1 = glorot_uniform<Real>(config_.d_ff, d, rng);
    blk.b1 = zeros(config_.d_ff);
    blk.w2 = glorot_uniform<Real>(d, config_.d_ff, rng);
    blk.b2 = zeros(d);
    blocks_.push_back(std::move(blk));
  }
  final_gamma_ = ones(d);
  final_beta_ = zeros(d);
}

template <typename Real>
Tensor<Real> Encoder<Real>::build_input(const Tensor<Real>& x_patched) const {
  const bool single = x_patched.rank() == 2;
  const Tensor<Real> x = single ? reshape(x_patched, {1, x_patched.dim(0), x_patched.dim(1)}) : x_patched;
  if (x.rank() != 3 || x.dim(2) != config_.token_width())
    fail(ErrorCode::ShapeMismatch, "encoder input " + shape_str(x_patched.shape()) + " needs token width " +
                                       std::to_string(config_.token_width()));
  // Broadcasting the token against zeros keeps its gradient on the tape.
  const Tensor<Real> cls = add(Tensor<Real>::zeros({x.dim(0), 1, config_.token_width()}), cls_token_);
  Tensor<Real> out = concat<Real>({cls, x}, 1);
  return single ? reshape(out, {out.dim(1), out.dim(2)}) : out;
}

template <typename Real>
Tensor<Real> Encoder<Real>::attention(const Block& blk, const Tensor<Real>& x, bool training, RngStream& rng) const {
  const std::size_t batch = x.dim(0), n = x.dim(1), d = config_.d_model, h = config_.heads, dh = d / h;
  auto heads_first = [&](const Tensor<Real>& t) { return transpose(reshape(t, {batch, n, h, dh}), 1, 2); };
  const Tensor<Real> q = heads_first(linear(x, blk.wq, blk.bq));                   // [B, H, N, dh]
  const Tensor<Real> k = transpose(heads_first(linear(x, blk.wk, blk.bk)), 2, 3);  // [B, H, dh, N]
  const Tensor<Real> v = heads_first(linear(x, blk.wv, blk.bv));                   // [B, H, N, dh]
  Tensor<Real> scores = scale(matmul(q, k), static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh))));
  scores = add(scores, readout_mask<Real>(n));
  Tensor<Real> weights = dropout(softmax(scores, 3), config_.dropout_attn, training, rng);
  Tensor<Real> ctx = reshape(transpose(matmul(weights, v), 1, 2), {batch, n, d});
  return linear(ctx, blk.wo, blk.bo);
}

template <typename Real>
Tensor<Real> Encoder<Real>::encode(const Tensor<Real>& x_enc_in, bool training, RngStream& rng) const {
  const bool single = x_enc_in.rank() == 2;
  const Tensor<Real> x = single ? reshape(x_enc_in, {1, x_enc_in.dim(0), x_enc_in.dim(1)}) : x_enc_in;
  if (x.rank() != 3 || x.dim(1) != config_.tokens() || x.dim(2) != config_.token_width())
    fail(ErrorCode::ShapeMismatch, "encoder expects [B, " + std::to_string(config_.tokens()) + ", " +
                                       std::to_string(config_.token_width()) + "], got " + shape_str(x_enc_in.shape()));
  Tensor<Real> hidden = add(linear(x, w_token_, Tensor<Real>()), pe_);
  hidden = dropout(hidden, config_.dropout_embed, training, rng);
  for (const Block& blk : blocks_) {
    hidden = add(hidden, attention(blk, layer_norm(hidden, blk.ln1_gamma, blk.ln1_beta), training, rng));
    Tensor<Real> ff = gelu(linear(layer_norm(hidden, blk.ln2_gamma, blk.ln2_beta), blk.w1, blk.b1));
    ff = dropout(ff, config_.dropout_ff, training, rng);
    hidden = add(hidden, linear(ff, blk.w2, blk.b2));
  }
  Tensor<Real> z = layer_norm(hidden, final_gamma_, final_beta_);
  return single ? reshape(z, {z.dim(1), z.dim(2)}) : z;
}

template <typename Real>
ParameterList<Real> Encoder<Real>::parameters() const {
  ParameterList<Real> out{
      {"encoder.w_token", w_token_, true},
      {"encoder.pe", pe_, false},
      {"encoder.cls_token", cls_token_, false},
  };
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    const std::string p = "encoder.block" + std::to_string(b) + ".";
    out.push_back({p + "ln1.gamma", blk.ln1_gamma, false});
    out.push_back({p + "ln1.beta", blk.ln1_beta, false});
    out.push_back({p + "attn.wq", blk.wq, true});
    out.push_back({p + "attn.bq", blk.bq, false});
    out.push_back({p + "attn.wk", blk.wk, true});
    out.push_back({p + "attn.bk", blk.bk, false});
    out.push_back({p + "attn.wv", blk.wv, true});
    out.push_back({p + "attn.bv", blk.bv, false});
    out.push_back({p + "attn.wo", blk.wo, true});
    out.push_back({p + "attn.bo", blk.bo, false});
    out.push_back({p + "ln2.gamma", blk.ln2_gamma, false});
    out.push_back({p + "ln2.beta", blk.ln2_beta, false});
    out.push_back({p + "ff.w1", blk.w1, true});
    out.push_back({p + "ff.b1", blk.b1, false});
    out.push_back({p + "ff.w2", blk.w2, true});
    out.push_back({p + "ff.b2", blk.b2, false});
  }
  out.push_back({"encoder.final_ln.gamma", final_gamma_, false});
  out.push_back({"encoder.final_ln.beta", final_beta_, false});
  return out;
}

template <typename Real>
Encoder<Real> Encoder<Real>::clone() const {
  Encoder copy(config_, 0);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto out = dst[i].tensor.mutable_data();
    auto in = src[i].tensor.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
  return copy;
}

template <typename Real>
DualEmbedding<Real> split_embeddings(const Tensor<Real>& z) {
  const bool single = z.rank() == 2;
  if (z.rank() != 2 && z.rank() != 3) fail(ErrorCode::ShapeMismatch, "split_embeddings of " + shape_str(z.shape()));
  const std::size_t axis = single ? 0 : 1;
  const std::size_t rows = z.dim(axis);
  if (rows < 2) fail(ErrorCode::TooFewRows, "need [CLS] plus at least one patch row, got " + std::to_string(rows));
  const std::size_t d = z.dim(z.rank() - 1);
  DualEmbedding<Real> out;
  Tensor<Real> first = slice(z, axis, 0, 1);
  out.z_i = single ? reshape(first, {d}) : reshape(first, {z.dim(0), d});
  out.z_t = slice(z, axis, 1, rows);
  return out;
}

PoolMethod parse_pool_method(const std::string& name) {
  if (name == "cls") return PoolMethod::Cls;
  if (name == "last") return PoolMethod::Last;
  if (name == "gap") return PoolMethod::Gap;
  if (name == "all") return PoolMethod::All;
  fail(ErrorCode::UnknownMethod, "unknown pooling method '" + name + "'");
}

std::string to_string(PoolMethod method) {
  switch (method) {
    case PoolMethod::Cls: return "cls";
    case PoolMethod::Last: return "last";
    case PoolMethod::Gap: return "gap";
    case PoolMethod::All: return "all";
  }
  return "cls";
}

template <typename Real>
Tensor<Real> pool(const Tensor<Real>& z_t, PoolMethod method) {
  const bool single = z_t.rank() == 2;
  if (z_t.rank() != 2 && z_t.rank() != 3) fail(ErrorCode::ShapeMismatch, "pool of " + shape_str(z_t.shape()));
  const std::size_t axis = single ? 0 : 1;
  const std::size_t tp = z_t.dim(axis), d = z_t.dim(z_t.rank() - 1);
  if (tp < 1) fail(ErrorCode::TooFewRows, "pooling needs at least one timestamp embedding");
  switch (method) {
    case PoolMethod::Last: {
      Tensor<Real> row = slice(z_t, axis, tp - 1, tp);
      return single ? reshape(row, {d}) : reshape(row, {z_t.dim(0), d});
    }
    case PoolMethod::Gap:
      return mean(z_t, axis);
    case PoolMethod::All:
      return single ? reshape(z_t, {tp * d}) : reshape(z_t, {z_t.dim(0), tp * d});
    case PoolMethod::Cls:
      break;
  }
  fail(ErrorCode::UnknownMethod, "cls is read from z_i, not pooled from z_t");
}

double anisotropy_score(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows, d = embeddings.cols;
  if (n < 2) fail(ErrorCode::TooFewEmbeddings, "anisotropy needs at least 2 embeddings, got " + std::to_string(n));
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += embeddings(i, j) * embeddings(i, j);
    norms[i] = std::max(std::sqrt(s), Epsilons::cosine);
  }
  double total = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += embeddings(a, j) * embeddings(b, j);
      total += dot / (norms[a] * norms[b]);
    }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

template class Encoder<float>;
template class Encoder<double>;
template DualEmbedding<float> split_embeddings(const Tensor<float>&);
template DualEmbedding<double> split_embeddings(const Tensor<double>&);
template Tensor<float> pool(const Tensor<float>&, PoolMethod);
template Tensor<double> pool(const Tensor<double>&, PoolMethod);

}  // namespace timedrl
