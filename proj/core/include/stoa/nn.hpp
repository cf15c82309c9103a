#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stoa/rng.hpp"
#include "stoa/tensor.hpp"

namespace stoa {

// Named, ordered parameter table. Creation order is deterministic so weight
// initialization replays bit-identically for a given seed.
class ParamStore {
 public:
  Tensor create(const std::string& name, Eigen::Index rows, Eigen::Index cols, double init_std,
                Rng& rng);
  Tensor create_const(const std::string& name, Mat init);
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  void zero_grads();
  std::size_t total_size() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
         double init_std = 0.02);
  Tensor operator()(const Tensor& x) const { return add_rowvec(matmul(x, w), b); }
};

struct TransformerConfig {
  int layers{2};
  int heads{4};
  int width{32};
  double mlp_ratio{4.0};
  double dropout{0.0};
  void validate() const;
};

struct AttentionWeights {
  Linear wq, wk, wv, wo;
  int heads{1};
  AttentionWeights() = default;
  AttentionWeights(ParamStore& ps, const std::string& name, int width, int heads, Rng& rng);
};

// Scaled dot-product attention. mask is (Lq x Lk), true = visible; fully
// masked query rows yield zero outputs.
Tensor attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                 const BMask* mask);

// Multi-head projected attention over a sequence.
Tensor multihead_attention(const Tensor& q_in, const Tensor& kv_in, const BMask* mask,
                           const AttentionWeights& w);

struct TransformerBlock {
  AttentionWeights attn;
  Linear mlp_in, mlp_out;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, const std::string& name, const TransformerConfig& cfg, Rng& rng);
  // Pre-norm residual block: x + attn(ln(x)), then + mlp(ln(.)).
  Tensor operator()(const Tensor& x, const BMask* mask, double drop, Rng* drop_rng) const;
};

struct TransformerEncoder {
  TransformerConfig cfg;
  std::vector<TransformerBlock> blocks;
  TransformerEncoder() = default;
  TransformerEncoder(ParamStore& ps, const std::string& name, const TransformerConfig& cfg,
                     Rng& rng);
  // Returns the final sequence; per-layer outputs are appended to taps when
  // non-null (index i = output of block i).
  Tensor operator()(const Tensor& seq, const BMask* mask, std::vector<Tensor>* taps = nullptr,
                    Rng* drop_rng = nullptr) const;
};

}  // namespace stoa
