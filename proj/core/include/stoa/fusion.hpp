#pragma once

#include "stoa/action.hpp"

namespace stoa {

enum class TextAttention { kBidirectional, kCausal };

struct FusionOutput {
  Tensor seq;        // (T+1 + present + M + L) x d
  int video_offset{0};
  int v_pool_pos{0};   // index of the pooled video row
  int obj_offset{0};
  int act_offset{0};
  int text_offset{0};
  int length{0};
  Tensor v_o;  // 1 x d, fused pooled-video row
  Tensor t_o;  // 1 x d, fused text summary row ([SEP] position)
};

// Modality-agnostic fusion over [video ; objects ; actions ; text] with
// learned segment embeddings. In causal mode text rows see earlier text plus
// every non-text row, while non-text rows never see text.
class FusionModule {
 public:
  FusionModule(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // v: T x d frame features (a mean-pooled summary row is appended).
  // trajs/acts may be null when the respective module is disabled.
  FusionOutput operator()(const Tensor& v, const TrajectorySet* trajs,
                          const ActionFeatureSet* acts, const TextFeatures& txt,
                          TextAttention text_mode) const;

 private:
  ModelConfig cfg_;
  Tensor seg_emb_;  // 4 x d: video, object, action, text
  TransformerEncoder enc_;
};

}  // namespace stoa
