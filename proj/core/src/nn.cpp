#include "stoa/nn.hpp"

#include <cmath>

namespace stoa {

Tensor ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          double init_std, Rng& rng) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Mat init(rows, cols);
  if (init_std == 0.0) {
    init.setZero();
  } else {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) init(i, j) = rng.normal(0.0, init_std);
  }
  Tensor t = parameter(std::move(init));
  index_[name] = entries_.size();
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::create_const(const std::string& name, Mat init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor t = parameter(std::move(init));
  index_[name] = entries_.size();
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (auto& [_, t] : entries_) out.push_back(t);
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [_, t] : entries_) t.node()->grad.setZero();
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (auto& [_, t] : entries_) n += static_cast<std::size_t>(t.rows() * t.cols());
  return n;
}

Linear::Linear(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
               double init_std) {
  w = ps.create(name + ".w", in, out, init_std, rng);
  b = ps.create(name + ".b", 1, out, 0.0, rng);
}

void TransformerConfig::validate() const {
  if (layers < 0) throw ConfigError("transformer layers must be >= 0");
  if (heads < 1) throw ConfigError("transformer heads must be >= 1");
  if (width < 1) throw ConfigError("transformer width must be >= 1");
  if (width % heads != 0) throw ConfigError("transformer width must be divisible by heads");
  if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
}

AttentionWeights::AttentionWeights(ParamStore& ps, const std::string& name, int width, int nheads,
                                   Rng& rng)
    : wq(ps, name + ".wq", width, width, rng),
      wk(ps, name + ".wk", width, width, rng),
      wv(ps, name + ".wv", width, width, rng),
      wo(ps, name + ".wo", width, width, rng),
      heads(nheads) {}

Tensor attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                 const BMask* mask) {
  if (queries.cols() != keys.cols()) throw ShapeError("attention: query/key width mismatch");
  if (keys.rows() != values.rows()) throw ShapeError("attention: key/value length mismatch");
  if (mask != nullptr && (mask->rows() != queries.rows() || mask->cols() != keys.rows()))
    throw ShapeError("attention: mask shape mismatch");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  Tensor scores = scale(matmul(queries, transpose(keys)), inv_sqrt);
  Tensor weights = softmax_rows(scores, mask);
  return matmul(weights, values);
}

Tensor multihead_attention(const Tensor& q_in, const Tensor& kv_in, const BMask* mask,
                           const AttentionWeights& w) {
  const int width = static_cast<int>(q_in.cols());
  if (width % w.heads != 0) throw ShapeError("multihead_attention: width not divisible by heads");
  const int dh = width / w.heads;
  Tensor q = w.wq(q_in);
  Tensor k = w.wk(kv_in);
  Tensor v = w.wv(kv_in);
  std::vector<Tensor> heads_out;
  heads_out.reserve(static_cast<size_t>(w.heads));
  for (int h = 0; h < w.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    heads_out.push_back(attention(qh, kh, vh, mask));
  }
  return w.wo(w.heads == 1 ? heads_out[0] : concat_cols(heads_out));
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& name,
                                   const TransformerConfig& cfg, Rng& rng)
    : attn(ps, name + ".attn", cfg.width, cfg.heads, rng) {
  const int hidden = static_cast<int>(cfg.width * cfg.mlp_ratio);
  mlp_in = Linear(ps, name + ".mlp_in", cfg.width, hidden, rng);
  mlp_out = Linear(ps, name + ".mlp_out", hidden, cfg.width, rng);
  ln1_g = ps.create_const(name + ".ln1.g", Mat::Ones(1, cfg.width));
  ln1_b = ps.create_const(name + ".ln1.b", Mat::Zero(1, cfg.width));
  ln2_g = ps.create_const(name + ".ln2.g", Mat::Ones(1, cfg.width));
  ln2_b = ps.create_const(name + ".ln2.b", Mat::Zero(1, cfg.width));
}

Tensor TransformerBlock::operator()(const Tensor& x, const BMask* mask, double drop,
                                    Rng* drop_rng) const {
  Tensor h = layer_norm(x, ln1_g, ln1_b);
  Tensor a = multihead_attention(h, h, mask, attn);
  if (drop > 0.0 && drop_rng != nullptr) a = dropout(a, drop, *drop_rng);
  Tensor y = add(x, a);
  Tensor m = mlp_out(gelu(mlp_in(layer_norm(y, ln2_g, ln2_b))));
  if (drop > 0.0 && drop_rng != nullptr) m = dropout(m, drop, *drop_rng);
  return add(y, m);
}

TransformerEncoder::TransformerEncoder(ParamStore& ps, const std::string& name,
                                       const TransformerConfig& config, Rng& rng)
    : cfg(config) {
  cfg.validate();
  blocks.reserve(static_cast<size_t>(cfg.layers));
  for (int i = 0; i < cfg.layers; ++i)
    blocks.emplace_back(ps, name + ".block" + std::to_string(i), cfg, rng);
}

Tensor TransformerEncoder::operator()(const Tensor& seq, const BMask* mask,
                                      std::vector<Tensor>* taps, Rng* drop_rng) const {
  if (seq.cols() != cfg.width) throw ShapeError("transformer_encode: width mismatch with config");
  Tensor x = seq;
  for (auto& block : blocks) {
    x = block(x, mask, cfg.dropout, drop_rng);
    if (taps != nullptr) taps->push_back(x);
  }
  return x;
}

}  // namespace stoa
