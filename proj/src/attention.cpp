#include "dvit/attention.hpp"

#include <cmath>

namespace dvit {

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.dim() != 2 || k.dim() != 2 || q.size(1) != k.size(1))
    throw DimensionError("attention: Q " + shape_str(q.shape()) + " and K " +
                         shape_str(k.shape()) + " disagree");
  int64_t d = q.size(1);
  if (d == 0) throw ContractError("attention: zero feature dimension");
  Tensor scores = scale(matmul(q, transpose2d(k)), 1.0 / std::sqrt(double(d)));
  return softmax(scores, 1);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k,
                            const Tensor& v) {
  if (v.size(0) != k.size(0))
    throw DimensionError("attention: K and V token counts disagree");
  return matmul(attention_weights(q, k), v);
}

AttentionParams AttentionParams::create(int64_t d_model, int64_t n_heads,
                                        Rng& rng) {
  if (n_heads < 1 || d_model % n_heads != 0)
    throw ConfigError("attention: d_model " + std::to_string(d_model) +
                      " not divisible by " + std::to_string(n_heads) +
                      " heads");
  AttentionParams p;
  double sd = 1.0 / std::sqrt(static_cast<double>(d_model));
  p.w_q = init_normal({d_model, d_model}, sd, rng);
  p.w_k = init_normal({d_model, d_model}, sd, rng);
  p.w_v = init_normal({d_model, d_model}, sd, rng);
  p.w_o = init_normal({d_model, d_model}, sd, rng);
  p.n_heads = n_heads;
  return p;
}

void AttentionParams::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".w_q", w_q);
  v(prefix + ".w_k", w_k);
  v(prefix + ".w_v", w_v);
  v(prefix + ".w_o", w_o);
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p) {
  int64_t d = x.size(1);
  if (d != p.w_q.size(0))
    throw ContractError("multi_head_attention: input width " +
                        std::to_string(d) + " vs params " +
                        std::to_string(p.w_q.size(0)));
  int64_t dh = d / p.n_heads;
  Tensor q = matmul(x, p.w_q);
  Tensor k = matmul(x, p.w_k);
  Tensor v = matmul(x, p.w_v);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(p.n_heads));
  for (int64_t h = 0; h < p.n_heads; ++h) {
    Tensor qh = narrow(q, 1, h * dh, dh);
    Tensor kh = narrow(k, 1, h * dh, dh);
    Tensor vh = narrow(v, 1, h * dh, dh);
    heads.push_back(scaled_dot_attention(qh, kh, vh));
  }
  return matmul(concat(heads, 1), p.w_o);
}

EncoderBlockParams EncoderBlockParams::create(int64_t d_model, int64_t n_heads,
                                              int64_t mlp_ratio, Rng& rng) {
  EncoderBlockParams p;
  p.ln1 = LayerNormParams::create(d_model);
  p.ln2 = LayerNormParams::create(d_model);
  p.attn = AttentionParams::create(d_model, n_heads, rng);
  p.fc1 = Linear::create(d_model, d_model * mlp_ratio, rng);
  p.fc2 = Linear::create(d_model * mlp_ratio, d_model, rng);
  return p;
}

void EncoderBlockParams::visit(const std::string& prefix,
                               const ParamVisitor& v) {
  ln1.visit(prefix + ".ln1", v);
  ln2.visit(prefix + ".ln2", v);
  attn.visit(prefix + ".attn", v);
  fc1.visit(prefix + ".fc1", v);
  fc2.visit(prefix + ".fc2", v);
}

Tensor encoder_block(const Tensor& x, const EncoderBlockParams& p) {
  Tensor y = add(x, multi_head_attention(p.ln1.forward(x), p.attn));
  Tensor m = p.fc2.forward(gelu(p.fc1.forward(p.ln2.forward(y))));
  return add(y, m);
}

Tensor positional_embedding(int64_t tokens, int64_t d_model) {
  if (tokens < 1 || d_model < 1)
    throw ConfigError("positional_embedding: need positive sizes");
  return Tensor::zeros({tokens, d_model}, true);
}

}  // namespace dvit
