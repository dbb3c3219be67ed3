#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saekit/common.hpp"

namespace saekit {

enum class ActivationKind { kRelu, kTopK, kBatchTopK };

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& s);

// Sparse per-token latent activations. Entries are (latent_id, value) with
// strictly increasing ids and strictly positive values; zeros are never stored.
struct TokenActivationRecord {
  uint32_t token_index = 0;
  std::vector<std::pair<LatentId, float>> entries;
};

struct DocActivations {
  std::string doc_id;
  std::vector<TokenActivationRecord> tokens;
};

// Encoder/decoder weights of a sparse autoencoder. Immutable after load and
// safe to share across threads.
class SaeWeights {
 public:
  using RowMajorMatrix =
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SaeWeights(RowMajorMatrix w_enc, Eigen::VectorXf b_enc, RowMajorMatrix w_dec,
             Eigen::VectorXf b_dec, ActivationKind kind, uint32_t top_k = 0);

  uint32_t d_model() const { return static_cast<uint32_t>(w_enc_.cols()); }
  uint32_t d_sae() const { return static_cast<uint32_t>(w_enc_.rows()); }
  ActivationKind activation_kind() const { return kind_; }
  uint32_t top_k() const { return top_k_; }

  const RowMajorMatrix& w_enc() const { return w_enc_; }
  const Eigen::VectorXf& b_enc() const { return b_enc_; }
  const RowMajorMatrix& w_dec() const { return w_dec_; }
  const Eigen::VectorXf& b_dec() const { return b_dec_; }

 private:
  RowMajorMatrix w_enc_;  // d_sae x d_model
  Eigen::VectorXf b_enc_;
  RowMajorMatrix w_dec_;  // d_model x d_sae
  Eigen::VectorXf b_dec_;
  ActivationKind kind_;
  uint32_t top_k_;
};

// Weight container I/O ("SAEW" format, little-endian float32 blobs).
SaeWeights load_weights(const std::string& path);
void save_weights(const SaeWeights& w, const std::string& path);

// a = sigma(W_enc x + b_enc), stored sparse. relu keeps positives; topk keeps
// the k largest positive pre-activations with ties broken by lower latent id.
// batchtopk at inference reduces to per-token topk.
TokenActivationRecord encode(const Eigen::VectorXf& x, const SaeWeights& w,
                             uint32_t token_index = 0);

// x_hat = W_dec a + b_dec via sparse accumulation.
Eigen::VectorXf decode(const TokenActivationRecord& a, const SaeWeights& w);

// L2 norm of x - decode(encode(x)).
float reconstruction_error(const Eigen::VectorXf& x, const SaeWeights& w);

}  // namespace saekit
