#pragma once

#include "stoa/config.hpp"
#include "stoa/nn.hpp"
#include "stoa/synthetic.hpp"

namespace stoa {

// Per-frame patch features tapped from the video encoder. z_* hold one
// (HW x h) tensor per frame; frame_cls is (T x h).
struct PatchGrid {
  std::vector<Tensor> z_traj;
  std::vector<Tensor> z_act;
  Tensor frame_cls;
  int H{0}, W{0};
};

struct VideoEncoding {
  Tensor v;  // T x d, projected frame [CLS] features
  PatchGrid grid;
};

// Frame-wise patch transformer with spatial attention only; a shared encoder
// runs over each frame's [CLS] + patch tokens. Spatial positions get a
// learned embedding, frames a learned frame-index embedding.
class VideoEncoder {
 public:
  VideoEncoder(ParamStore& ps, const ModelConfig& cfg, Rng& rng);
  VideoEncoding operator()(const float* frames, int T, int S) const;
  VideoEncoding operator()(const SampleRecord& rec) const {
    return (*this)(rec.frames.data(), rec.T, rec.S);
  }

 private:
  ModelConfig cfg_;
  Linear patch_embed_;   // 3*patch^2 -> h
  Tensor cls_token_;     // 1 x h
  Tensor pos_spatial_;   // (1 + HW) x h
  Tensor pos_temporal_;  // T x h
  TransformerEncoder enc_;
  Linear proj_;  // h -> d
};

struct TextFeatures {
  Tensor t;  // L x d
  std::vector<int> tokens;
  std::vector<PosTag> tags;
  int index_cls{-1};
  int index_sep{-1};
};

class TextEncoder {
 public:
  TextEncoder(ParamStore& ps, const ModelConfig& cfg, int cls_id, int sep_id, Rng& rng);
  // causal = lower-triangular self-attention, so a position's feature only
  // depends on the prefix up to it.
  TextFeatures operator()(const std::vector<int>& tokens, const std::vector<PosTag>& tags,
                          bool causal = false) const;

 private:
  ModelConfig cfg_;
  int cls_id_, sep_id_;
  Tensor tok_emb_;  // V x d
  Tensor pos_emb_;  // L_max x d
  TransformerEncoder enc_;
  Linear proj_;  // d -> d
};

}  // namespace stoa
