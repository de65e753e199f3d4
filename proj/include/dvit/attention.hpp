#pragma once

#include <vector>

#include "dvit/layers.hpp"

namespace dvit {

// softmax(Q K^T / sqrt(d)) V over a single sequence.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Returns the row-stochastic attention matrix alone (for property checks).
Tensor attention_weights(const Tensor& q, const Tensor& k);

struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;  // (d_model, d_model)
  int64_t n_heads = 1;
  static AttentionParams create(int64_t d_model, int64_t n_heads, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p);

struct EncoderBlockParams {
  LayerNormParams ln1, ln2;
  AttentionParams attn;
  Linear fc1, fc2;  // MLP with GELU between
  static EncoderBlockParams create(int64_t d_model, int64_t n_heads,
                                   int64_t mlp_ratio, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Pre-norm residual layout: x + MHA(LN(x)), then + MLP(LN(.)).
Tensor encoder_block(const Tensor& x, const EncoderBlockParams& p);

// Learnable positional table, zero-initialized.
Tensor positional_embedding(int64_t tokens, int64_t d_model);

}  // namespace dvit
