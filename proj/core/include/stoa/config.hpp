#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "stoa/synthetic.hpp"

namespace stoa {

struct ModelConfig {
  int T{4};
  int S{32};
  int patch{8};
  int K{3};      // detection slots per frame
  int N{3};      // trajectory tokens
  int M{4};      // action query tokens
  int L_max{16};
  int h{48};     // visual width
  int d{48};     // cross-modal width
  int heads{4};
  int video_layers{2};
  int text_layers{2};
  int fusion_layers{2};
  int traj_layers{2};
  int action_layers{2};
  double mlp_ratio{4.0};
  double dropout{0.0};
  bool use_obj{true};
  bool use_act{true};
  int vocab_size{0};
  // Tap layer indices (0-based block outputs) into the video encoder;
  // defaults are the last two layers, trajectory first.
  int tap_traj{-1};
  int tap_act{-1};
  int resolved_tap_traj() const { return tap_traj >= 0 ? tap_traj : std::max(0, video_layers - 2); }
  int resolved_tap_act() const { return tap_act >= 0 ? tap_act : std::max(0, video_layers - 1); }
  void validate() const;
};

struct RunConfig {
  // data
  std::string train_corpus;
  std::string eval_corpus;
  CorpusConfig corpus;  // T, S, patch, K_max, min_objects, L_max, noise, vocab
  // model
  ModelConfig model;
  // losses
  bool loss_vtc{true}, loss_vtm{true}, loss_mlm{true}, loss_plm{true}, loss_ota{true},
      loss_asp{true};
  // optimizer (small models train fine with a fairly aggressive step size)
  double lr{1e-3};
  double beta1{0.9};
  double beta2{0.98};
  std::string schedule{"cosine"};
  int steps{2000};
  int batch_size{8};
  std::uint64_t seed{1};
  // io
  std::string checkpoint_dir{"checkpoints"};
  int checkpoint_every{0};  // 0 = only final
  std::string metrics_path{"metrics.log"};
  // probes
  int rerank_depth{32};
  int qa_adapt_steps{0};
  double qa_adapt_lr{1e-3};
  int caption_adapt_steps{0};
  double caption_adapt_lr{1e-3};

  void validate() const;
  std::string serialize() const;
  static RunConfig parse_text(const std::string& text);
  static RunConfig parse_file(const std::filesystem::path& path);
  void apply_override(const std::string& key, const std::string& value);
};

}  // namespace stoa
