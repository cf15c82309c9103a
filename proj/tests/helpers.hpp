#pragma once

#include "stoa/harness.hpp"

namespace stoa::testing {

// Tiny geometry used throughout the unit tests: 2 frames of 16x16 pixels,
// 2x2 patch grid, widths 8.
inline CorpusConfig tiny_corpus_config() {
  CorpusConfig c;
  c.T = 2;
  c.S = 16;
  c.patch = 8;
  c.K_max = 2;
  c.min_objects = 1;
  c.L_max = 16;
  return c;
}

inline ModelConfig tiny_model_config() {
  ModelConfig m;
  m.T = 2;
  m.S = 16;
  m.patch = 8;
  m.K = 2;
  m.N = 2;
  m.M = 2;
  m.L_max = 16;
  m.h = 8;
  m.d = 8;
  m.heads = 2;
  m.video_layers = 2;
  m.text_layers = 1;
  m.fusion_layers = 1;
  m.traj_layers = 1;
  m.action_layers = 1;
  return m;
}

inline RunConfig tiny_run_config() {
  RunConfig r;
  r.corpus = tiny_corpus_config();
  r.model = tiny_model_config();
  r.batch_size = 2;
  r.steps = 2;
  r.metrics_path.clear();
  return r;
}

inline Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double s = 0.5) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = s * rng.normal();
  return m;
}

}  // namespace stoa::testing
