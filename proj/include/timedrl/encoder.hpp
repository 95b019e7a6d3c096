#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "timedrl/data.hpp"
#include "timedrl/ops.hpp"
#include "timedrl/tensor.hpp"

namespace timedrl {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t blocks = 2;
  std::size_t heads = 4;
  std::size_t d_ff = 128;
  double dropout_embed = 0.1;
  double dropout_attn = 0.1;
  double dropout_ff = 0.1;
  std::size_t patch_len = 8;
  std::size_t patch_stride = 8;
  std::size_t channels = 1;  // channels seen by the encoder (1 under channel independence)
  std::size_t window = 64;

  void validate() const;
  PatchConfig patch() const { return {patch_len, patch_stride}; }
  std::size_t token_width() const { return channels * patch_len; }
  std::size_t patches() const;
  std::size_t tokens() const { return patches() + 1; }
};

// A trainable tensor plus its optimizer policy. Norm affines, biases, the
// [CLS] token and the positional table are exempt from weight decay.
template <typename Real>
struct NamedParameter {
  std::string name;
  Tensor<Real> tensor;
  bool decay = true;
};

template <typename Real>
using ParameterList = std::vector<NamedParameter<Real>>;

// [fan_out, fan_in] weight drawn from U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename Real>
Tensor<Real> glorot_uniform(std::size_t fan_out, std::size_t fan_in, RngStream& rng);

template <typename Real>
struct DualEmbedding {
  Tensor<Real> z_i;  // [B, D] (or [D] for a single sample)
  Tensor<Real> z_t;  // [B, T_p, D] (or [T_p, D])
};

// Patch-token Transformer encoder with a learnable [CLS] token and learnable
// positional table:
//   z = Blocks(concat(cls, x_patched) W_token^T + PE)
// Blocks are pre-norm (LN -> MHSA -> residual, LN -> FFN(GELU) -> residual)
// followed by a final layer norm. Attention among patch tokens is
// bidirectional; the [CLS] row reads all tokens, while patch rows do not read
// the [CLS] token, which keeps z_t (and the predictive loss) independent of it.
template <typename Real>
class Encoder {
 public:
  // Glorot-uniform weights, zero biases, identity norms, N(0, 0.02) for the
  // [CLS] token and positional table. Deterministic per seed.
  Encoder(const EncoderConfig& config, std::uint64_t seed);
  // Parameters are shared handles; copies would alias them. Use clone().
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;
  Encoder(Encoder&&) noexcept = default;
  Encoder& operator=(Encoder&&) noexcept = default;

  const EncoderConfig& config() const { return config_; }

  // [B, T_p, C*P] -> [B, 1 + T_p, C*P] with the [CLS] token in row 0.
  // Rank-2 input is treated as a single sample.
  Tensor<Real> build_input(const Tensor<Real>& x_patched) const;
  // [B, 1 + T_p, C*P] -> [B, 1 + T_p, D]. `training` gates every dropout site.
  Tensor<Real> encode(const Tensor<Real>& x_enc_in, bool training, RngStream& rng) const;
  Tensor<Real> forward(const Tensor<Real>& x_patched, bool training, RngStream& rng) const {
    return encode(build_input(x_patched), training, rng);
  }

  ParameterList<Real> parameters() const;
  Encoder clone() const;

  Tensor<Real>& cls_token() { return cls_token_; }
  Tensor<Real>& token_weight() { return w_token_; }
  Tensor<Real>& positional() { return pe_; }

 private:
  struct Block {
    Tensor<Real> ln1_gamma, ln1_beta;
    Tensor<Real> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<Real> ln2_gamma, ln2_beta;
    Tensor<Real> w1, b1, w2, b2;
  };

  Tensor<Real> attention(const Block& blk, const Tensor<Real>& x, bool training, RngStream& rng) const;

  EncoderConfig config_;
  Tensor<Real> w_token_;  // [D, C*P]
  Tensor<Real> pe_;       // [1 + T_p, D]
  Tensor<Real> cls_token_;  // [C*P]
  std::vector<Block> blocks_;
  Tensor<Real> final_gamma_, final_beta_;
};

template <typename Real>
Encoder<Real> init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  return Encoder<Real>(config, seed);
}

// z_i = z[:, 0], z_t = z[:, 1:]. Needs at least two token rows.
template <typename Real>
DualEmbedding<Real> split_embeddings(const Tensor<Real>& z);

enum class PoolMethod { Cls, Last, Gap, All };

PoolMethod parse_pool_method(const std::string& name);
std::string to_string(PoolMethod method);

// Instance embedding from timestamp embeddings: Last -> row T_p - 1,
// Gap -> mean over time, All -> row-major flatten. Cls is not a pooling of
// z_t and is rejected here.
template <typename Real>
Tensor<Real> pool(const Tensor<Real>& z_t, PoolMethod method);

// Mean pairwise cosine similarity over all N(N-1)/2 row pairs.
double anisotropy_score(const Matrix& embeddings);

}  // namespace timedrl
