#include "stoa/action.hpp"

#include <cmath>

namespace stoa {

ActionModule::ActionModule(ParamStore& ps, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      enc_(ps, "action.enc",
           TransformerConfig{cfg.action_layers, cfg.heads, cfg.h, cfg.mlp_ratio, cfg.dropout},
           rng),
      proj_(ps, "action.proj", cfg.h, cfg.d, rng) {
  queries_ = ps.create("action.queries", cfg.M, cfg.h, 0.02, rng);
  cls_token_ = ps.create("action.cls", 1, cfg.h, 0.02, rng);
  pos_temporal_ = ps.create("action.pos_temporal", cfg.T, cfg.h, 0.02, rng);
}

ActionFeatureSet ActionModule::operator()(const std::vector<Tensor>& z_act,
                                          const ObjectFeatures* of) const {
  const int T = static_cast<int>(z_act.size());
  if (T != cfg_.T) throw ShapeError("action module: frame count mismatch");
  if (of && of->T != T) throw ShapeError("action module: object features frame count mismatch");
  const int M = cfg_.M;
  const int K = of ? of->K : 0;
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(cfg_.h));

  // Per frame: queries attend over [patches ; frame's object slots].
  std::vector<std::vector<Tensor>> per_query(static_cast<size_t>(M));
  for (int t = 0; t < T; ++t) {
    const int hw = static_cast<int>(z_act[static_cast<size_t>(t)].rows());
    Tensor context = z_act[static_cast<size_t>(t)];
    BMask mask = BMask::Constant(M, hw + K, true);
    if (of && K > 0) {
      context = concat_rows(
          {context, slice_rows(of->flatten, static_cast<Eigen::Index>(t) * K, K)});
      for (int k = 0; k < K; ++k)
        if (!of->validity[static_cast<size_t>(t) * K + k]) mask.col(hw + k).setConstant(false);
    }
    Tensor scores = scale(matmul(queries_, transpose(context)), inv_sqrt_h);
    Tensor attended = matmul(softmax_rows(scores, &mask), context);  // M x h
    for (int i = 0; i < M; ++i)
      per_query[static_cast<size_t>(i)].push_back(slice_rows(attended, i, 1));
  }

  ActionFeatureSet out;
  std::vector<Tensor> x_rows;
  for (int i = 0; i < M; ++i) {
    Tensor trace = add(concat_rows(per_query[static_cast<size_t>(i)]), pos_temporal_);
    out.traces.push_back(trace);
    Tensor seq = concat_rows({cls_token_, trace});
    Tensor encoded = enc_(seq, nullptr);
    x_rows.push_back(proj_(slice_rows(encoded, 0, 1)));
  }
  out.x = concat_rows(x_rows);
  return out;
}

}  // namespace stoa
