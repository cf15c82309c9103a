#include "stoa/model.hpp"

#include <cmath>

namespace stoa {

StoaModel::StoaModel(const ModelConfig& cfg, const Vocab& vocab, std::uint64_t seed)
    : cfg_(cfg), vocab_(vocab) {
  cfg_.vocab_size = vocab.size();
  cfg_.validate();
  Rng rng(seed);
  video_enc_.emplace(ps_, cfg_, rng);
  text_enc_.emplace(ps_, cfg_, vocab_.cls, vocab_.sep, rng);
  if (cfg_.use_obj) traj_mod_.emplace(ps_, cfg_, rng);
  if (cfg_.use_act) act_mod_.emplace(ps_, cfg_, rng);
  fusion_.emplace(ps_, cfg_, rng);
  vocab_head_ = Linear(ps_, "head.vocab", cfg_.d, cfg_.vocab_size, rng);
  vtm_head_ = Linear(ps_, "head.vtm", cfg_.d, 2, rng);
  log_scale_ = ps_.create_const("head.log_scale",
                               Mat::Constant(1, 1, std::log(1.0 / 0.07)));
}

VideoSideEncoding StoaModel::encode_video_side(const SampleRecord& rec) const {
  VideoSideEncoding out;
  out.video = (*video_enc_)(rec);
  out.v_pool = mean_rows(out.video.v);
  if (traj_mod_) {
    out.obj = traj_mod_->roi_align_pool(out.video.grid.z_traj, rec.detections);
    out.trajs = traj_mod_->encode_trajectories(*out.obj, cfg_.N);
  }
  if (act_mod_)
    out.acts = (*act_mod_)(out.video.grid.z_act, out.obj ? &*out.obj : nullptr);
  return out;
}

TextFeatures StoaModel::encode_text(const std::vector<int>& tokens,
                                    const std::vector<PosTag>& tags, TextAttention mode) const {
  return (*text_enc_)(tokens, tags, mode == TextAttention::kCausal);
}

FusionOutput StoaModel::fuse(const VideoSideEncoding& vs, const TextFeatures& txt,
                             TextAttention mode) const {
  return (*fusion_)(vs.video.v, vs.trajs ? &*vs.trajs : nullptr, vs.acts ? &*vs.acts : nullptr,
                    txt, mode);
}

void StoaModel::save(const std::filesystem::path& path, const std::string& config_text) const {
  save_checkpoint(ps_, config_text, path);
}

std::pair<StoaModel, RunConfig> StoaModel::load(const std::filesystem::path& path) {
  RunConfig run = RunConfig::parse_text(read_checkpoint_config(path));
  Vocab vocab = run.corpus.vocab_path.empty() ? Vocab::builtin()
                                              : Vocab::from_file(run.corpus.vocab_path);
  StoaModel model(run.model, vocab, run.seed);
  load_checkpoint(model.ps_, path);
  return {std::move(model), std::move(run)};
}

void StoaModel::load_weights(const std::filesystem::path& path) {
  load_checkpoint(ps_, path);
}

}  // namespace stoa
