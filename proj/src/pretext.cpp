#include "timedrl/pretext.hpp"

#include <algorithm>
#include <cmath>

namespace timedrl {

template <typename Real>
PredictiveHead<Real>::PredictiveHead(std::size_t d_model, std::size_t token_width, std::uint64_t seed) {
  RngStream rng = RngStream(seed).derive("init-predictive");
  weight = glorot_uniform<Real>(token_width, d_model, rng);
  bias = Tensor<Real>::zeros({token_width}, true);
}

template <typename Real>
ParameterList<Real> PredictiveHead<Real>::parameters() const {
  return {{"predictive.weight", weight, true}, {"predictive.bias", bias, false}};
}

template <typename Real>
ContrastiveHead<Real>::ContrastiveHead(std::size_t d_model, std::uint64_t seed, std::size_t bottleneck) {
  const std::size_t db = bottleneck == 0 ? std::max<std::size_t>(8, d_model / 4) : bottleneck;
  if (db >= d_model)
    fail(ErrorCode::ConfigInvalid, "contrastive bottleneck " + std::to_string(db) + " must be below d_model " +
                                       std::to_string(d_model));
  RngStream rng = RngStream(seed).derive("init-contrastive");
  w1 = glorot_uniform<Real>(db, d_model, rng);
  bn_gamma = Tensor<Real>::full({db}, Real(1), true);
  bn_beta = Tensor<Real>::zeros({db}, true);
  bn_stats = BatchNormStats::identity(db);
  w2 = glorot_uniform<Real>(d_model, db, rng);
}

template <typename Real>
Tensor<Real> ContrastiveHead<Real>::forward(const Tensor<Real>& z_i, bool training) {
  const Tensor<Real> none;
  Tensor<Real> h = linear(z_i, w1, none);
  h = relu(batch_norm_1d(h, bn_gamma, bn_beta, bn_stats, training));
  return linear(h, w2, none);
}

template <typename Real>
ParameterList<Real> ContrastiveHead<Real>::parameters() const {
  return {{"contrastive.w1", w1, true},
          {"contrastive.bn.gamma", bn_gamma, false},
          {"contrastive.bn.beta", bn_beta, false},
          {"contrastive.w2", w2, true}};
}

template <typename Real>
PretextModel<Real>::PretextModel(const EncoderConfig& config, std::uint64_t seed, PoolMethod pool_method)
    : encoder(config, seed),
      predictive(config.d_model, config.token_width(), seed),
      contrastive(instance_dim(config, pool_method), seed),
      pooling(pool_method) {}

template <typename Real>
ParameterList<Real> PretextModel<Real>::parameters() const {
  ParameterList<Real> out = encoder.parameters();
  for (auto& p : predictive.parameters()) out.push_back(p);
  for (auto& p : contrastive.parameters()) out.push_back(p);
  return out;
}

template <typename Real>
Tensor<Real> predictive_loss(const Tensor<Real>& z_t, const Tensor<Real>& x_patched, const PredictiveHead<Real>& head) {
  const Tensor<Real> prediction = head.forward(z_t);
  if (prediction.shape() != x_patched.shape())
    fail(ErrorCode::ShapeMismatch, "reconstruction " + shape_str(prediction.shape()) + " vs patched input " +
                                       shape_str(x_patched.shape()));
  return mse_loss(prediction, x_patched);
}

std::pair<RngStream, RngStream> fork_view_streams(RngStream& rng) {
  const std::uint64_t a = rng.next_u64();
  const std::uint64_t b = rng.next_u64();
  return {RngStream(a), RngStream(b)};
}

template <typename Real>
std::pair<DualEmbedding<Real>, DualEmbedding<Real>> two_view_forward(const Tensor<Real>& x_patched,
                                                                     const Encoder<Real>& encoder,
                                                                     RngStream& view1_rng, RngStream& view2_rng) {
  DualEmbedding<Real> first = split_embeddings(encoder.forward(x_patched, true, view1_rng));
  DualEmbedding<Real> second = split_embeddings(encoder.forward(x_patched, true, view2_rng));
  return {std::move(first), std::move(second)};
}

template <typename Real>
std::pair<DualEmbedding<Real>, DualEmbedding<Real>> two_view_forward(const Tensor<Real>& x_patched,
                                                                     const Encoder<Real>& encoder, RngStream& rng) {
  auto [r1, r2] = fork_view_streams(rng);
  return two_view_forward(x_patched, encoder, r1, r2);
}

template <typename Real>
ContrastiveTerms<Real> contrastive_loss(const Tensor<Real>& z1_i, const Tensor<Real>& z2_i,
                                        ContrastiveHead<Real>& head, bool training, bool stop_gradient) {
  if (z1_i.shape() != z2_i.shape() || z1_i.rank() != 2)
    fail(ErrorCode::ShapeMismatch, "contrastive inputs must both be [B, D], got " + shape_str(z1_i.shape()) + " and " +
                                       shape_str(z2_i.shape()));
  if (training && z1_i.dim(0) < 2)
    fail(ErrorCode::DegenerateBatch, "contrastive head needs a batch of at least 2 in training mode");
  const Tensor<Real> p1 = head.forward(z1_i, training);
  const Tensor<Real> p2 = head.forward(z2_i, training);
  const Tensor<Real> t2 = stop_gradient ? detach(z2_i) : z2_i;
  const Tensor<Real> t1 = stop_gradient ? detach(z1_i) : z1_i;
  ContrastiveTerms<Real> out;
  out.l_c1 = scale(mean(cosine_similarity(p1, t2)), Real(-1));
  out.l_c2 = scale(mean(cosine_similarity(p2, t1)), Real(-1));
  out.l_c = scale(add(out.l_c1, out.l_c2), Real(0.5));
  return out;
}

LossValues combine_losses(double l_p1, double l_p2, double l_c1, double l_c2, double lambda) {
  if (!(lambda >= 0)) fail(ErrorCode::InvalidParam, "lambda must be >= 0");
  LossValues v;
  v.l_p1 = l_p1;
  v.l_p2 = l_p2;
  v.l_c1 = l_c1;
  v.l_c2 = l_c2;
  v.l_p = 0.5 * (l_p1 + l_p2);
  v.l_c = 0.5 * (l_c1 + l_c2);
  v.total = v.l_p + lambda * v.l_c;
  return v;
}

template <typename Real>
LossBreakdown<Real> total_loss(const Tensor<Real>& l_p1, const Tensor<Real>& l_p2, const ContrastiveTerms<Real>& c,
                               double lambda) {
  LossBreakdown<Real> out;
  out.lambda = lambda;
  out.values = combine_losses(l_p1.item(), l_p2.item(), c.l_c1.item(), c.l_c2.item(), lambda);
  const Tensor<Real> l_p = scale(add(l_p1, l_p2), Real(0.5));
  out.objective = lambda == 0.0 ? l_p : add(l_p, scale(c.l_c, static_cast<Real>(lambda)));
  return out;
}

template <typename Real>
LossBreakdown<Real> pretext_objective(PretextModel<Real>& model, const Tensor<Real>& view1, const Tensor<Real>& view2,
                                      const PretextOptions& options, RngStream& rng) {
  auto [r1, r2] = fork_view_streams(rng);
  const DualEmbedding<Real> e1 = split_embeddings(model.encoder.forward(view1, options.dropout, r1));
  const DualEmbedding<Real> e2 = split_embeddings(model.encoder.forward(view2, options.dropout, r2));
  const Tensor<Real> l_p1 = predictive_loss(e1.z_t, view1, model.predictive);
  const Tensor<Real> l_p2 = predictive_loss(e2.z_t, view2, model.predictive);
  const ContrastiveTerms<Real> c =
      contrastive_loss(model.instance_embedding(e1), model.instance_embedding(e2), model.contrastive, options.batch_stats, options.stop_gradient);
  return total_loss(l_p1, l_p2, c, options.lambda);
}

std::size_t instance_dim(const EncoderConfig& config, PoolMethod pooling) {
  return pooling == PoolMethod::All ? config.patches() * config.d_model : config.d_model;
}

#define TIMEDRL_INSTANTIATE_PRETEXT(Real)                                                                      \
  template class PredictiveHead<Real>;                                                                         \
  template class ContrastiveHead<Real>;                                                                        \
  template struct PretextModel<Real>;                                                                          \
  template Tensor<Real> predictive_loss(const Tensor<Real>&, const Tensor<Real>&, const PredictiveHead<Real>&); \
  template std::pair<DualEmbedding<Real>, DualEmbedding<Real>> two_view_forward(const Tensor<Real>&,           \
                                                                                const Encoder<Real>&, RngStream&); \
  template std::pair<DualEmbedding<Real>, DualEmbedding<Real>> two_view_forward(                               \
      const Tensor<Real>&, const Encoder<Real>&, RngStream&, RngStream&);                                      \
  template ContrastiveTerms<Real> contrastive_loss(const Tensor<Real>&, const Tensor<Real>&,                   \
                                                   ContrastiveHead<Real>&, bool, bool);                        \
  template LossBreakdown<Real> total_loss(const Tensor<Real>&, const Tensor<Real>&,                            \
                                          const ContrastiveTerms<Real>&, double);                              \
  template LossBreakdown<Real> pretext_objective(PretextModel<Real>&, const Tensor<Real>&, const Tensor<Real>&, \
                                                 const PretextOptions&, RngStream&);

TIMEDRL_INSTANTIATE_PRETEXT(float)
TIMEDRL_INSTANTIATE_PRETEXT(double)

#undef TIMEDRL_INSTANTIATE_PRETEXT

}  // namespace timedrl
