#pragma once

#include "stoa/config.hpp"
#include "stoa/encoders.hpp"

namespace stoa {

// Per-frame object slots laid out as a flattened (T*K) sequence; invalid
// slots (fewer detections than K) carry zero features and stay masked
// everywhere downstream.
struct ObjectFeatures {
  Tensor flatten;                  // (T*K) x h
  std::vector<int> class_ids;      // T*K, -1 for invalid slots
  std::vector<double> confidences; // T*K, 0 for invalid
  std::vector<bool> validity;      // T*K
  Mat boxes;                       // (T*K) x 4
  int T{0}, K{0};
};

struct TrajectorySelection {
  std::vector<int> classes;  // selected class ids, descending summed confidence
  BMask masks;               // N x (T*K); rows past `present` are all false
  int present{0};
  int requested{0};
};

struct TrajectorySet {
  Tensor o;                              // present x d
  std::vector<int> class_of_trajectory;  // present
  BMask masks;                           // N x (T*K)
  int present{0};
  int requested{0};
};

// Confidence-sum class selection: per distinct class, sum confidence over all
// valid slots; take the top-N classes (ties to the smaller class id).
TrajectorySelection select_trajectories(const std::vector<int>& class_ids,
                                        const std::vector<double>& confidences,
                                        const std::vector<bool>& validity, int T, int K, int N);

// Bilinear 2x2 RoI sampling weights over an H x W grid for a normalized box;
// returns a 4 x (H*W) matrix (one row per output cell, sampled at the cell
// center, align-corners false, border clamped). Exposed for the oracle tests.
Mat roi_sample_weights(const std::array<double, 4>& box, int H, int W);

class TrajectoryModule {
 public:
  TrajectoryModule(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // Eq-1 style pooling: MLP(MaxPool(RoIAlign(z, boxes))) plus a learned
  // frame-index embedding and a linear projection of the box coordinates.
  ObjectFeatures roi_align_pool(const std::vector<Tensor>& z_tap,
                                const std::vector<std::vector<Detection>>& detections) const;

  // Runs the trajectory transformer once per selected class over [CLS] plus
  // the class-visible slots, yielding one temporal-aware embedding per class.
  TrajectorySet encode_trajectories(const ObjectFeatures& of, int N) const;

 private:
  ModelConfig cfg_;
  Linear mlp_in_, mlp_out_;  // h -> h, GELU between
  Tensor pos_frame_;         // T x h
  Linear box_proj_;          // 4 -> h
  Tensor cls_token_;         // 1 x h
  TransformerEncoder enc_;
  Linear proj_;  // h -> d
};

}  // namespace stoa
