#pragma once

#include <optional>

#include "stoa/checkpoint.hpp"
#include "stoa/fusion.hpp"
#include "stoa/objectives.hpp"

namespace stoa {

// Everything derived from one sample's video stream (text is kept separate so
// mismatched pairs can be fused for the matching loss).
struct VideoSideEncoding {
  VideoEncoding video;  // v: T x d plus patch taps
  Tensor v_pool;        // 1 x d mean-pooled frame features
  std::optional<ObjectFeatures> obj;
  std::optional<TrajectorySet> trajs;
  std::optional<ActionFeatureSet> acts;
};

class StoaModel {
 public:
  StoaModel(const ModelConfig& cfg, const Vocab& vocab, std::uint64_t seed);

  VideoSideEncoding encode_video_side(const SampleRecord& rec) const;
  TextFeatures encode_text(const std::vector<int>& tokens, const std::vector<PosTag>& tags,
                           TextAttention mode = TextAttention::kBidirectional) const;
  FusionOutput fuse(const VideoSideEncoding& vs, const TextFeatures& txt,
                    TextAttention mode) const;

  Tensor logit_scale() const { return exp_elem(log_scale_); }
  Tensor vocab_logits(const Tensor& rows) const { return vocab_head_(rows); }
  Tensor vtm_logits(const FusionOutput& fused) const { return vtm_head_(fused.t_o); }

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }

  void save(const std::filesystem::path& path, const std::string& config_text) const;
  // Builds a model from a checkpoint's embedded config (vocab loaded from the
  // config's vocab_path, or the builtin one when unset).
  static std::pair<StoaModel, RunConfig> load(const std::filesystem::path& path);
  void load_weights(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  Vocab vocab_;
  ParamStore ps_;
  std::optional<VideoEncoder> video_enc_;
  std::optional<TextEncoder> text_enc_;
  std::optional<TrajectoryModule> traj_mod_;
  std::optional<ActionModule> act_mod_;
  std::optional<FusionModule> fusion_;
  Linear vocab_head_;  // d -> V
  Linear vtm_head_;    // d -> 2
  Tensor log_scale_;   // 1x1, init log(1/0.07)
};

}  // namespace stoa
