#pragma once

#include "stoa/trajectory.hpp"

namespace stoa {

struct ActionFeatureSet {
  Tensor x;                   // M x d, one embedding per action query
  std::vector<Tensor> traces; // per query, T x h attended features
};

// Spatial-temporal action module: M learned queries attend per frame over the
// patch features concatenated with that frame's object slots, then a small
// transformer runs each query's temporal trace.
class ActionModule {
 public:
  ActionModule(ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // z_act: per-frame HW x h patch taps. of may be null (object features
  // disabled); valid object slots extend the per-frame context.
  ActionFeatureSet operator()(const std::vector<Tensor>& z_act, const ObjectFeatures* of) const;

 private:
  ModelConfig cfg_;
  Tensor queries_;       // M x h
  Tensor cls_token_;     // 1 x h
  Tensor pos_temporal_;  // T x h
  TransformerEncoder enc_;
  Linear proj_;  // h -> d
};

}  // namespace stoa
