#include "stoa/fusion.hpp"

namespace stoa {

FusionModule::FusionModule(ParamStore& ps, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      enc_(ps, "fusion.enc",
           TransformerConfig{cfg.fusion_layers, cfg.heads, cfg.d, cfg.mlp_ratio, cfg.dropout},
           rng) {
  seg_emb_ = ps.create("fusion.seg_emb", 4, cfg.d, 0.02, rng);
}

FusionOutput FusionModule::operator()(const Tensor& v, const TrajectorySet* trajs,
                                      const ActionFeatureSet* acts, const TextFeatures& txt,
                                      TextAttention text_mode) const {
  if (v.cols() != cfg_.d || txt.t.cols() != cfg_.d)
    throw ShapeError("fusion: feature width mismatch");
  const int T = static_cast<int>(v.rows());
  const int present = trajs ? trajs->present : 0;
  const int M = acts ? static_cast<int>(acts->x.rows()) : 0;
  const int L = static_cast<int>(txt.t.rows());

  FusionOutput out;
  out.video_offset = 0;
  out.v_pool_pos = T;
  out.obj_offset = T + 1;
  out.act_offset = out.obj_offset + present;
  out.text_offset = out.act_offset + M;
  out.length = out.text_offset + L;

  std::vector<Tensor> parts;
  parts.push_back(add_rowvec(concat_rows({v, mean_rows(v)}), slice_rows(seg_emb_, 0, 1)));
  if (present > 0) parts.push_back(add_rowvec(trajs->o, slice_rows(seg_emb_, 1, 1)));
  if (M > 0) parts.push_back(add_rowvec(acts->x, slice_rows(seg_emb_, 2, 1)));
  parts.push_back(add_rowvec(txt.t, slice_rows(seg_emb_, 3, 1)));
  Tensor seq = concat_rows(parts);

  Tensor fused;
  if (text_mode == TextAttention::kBidirectional) {
    fused = enc_(seq, nullptr);
  } else {
    BMask mask = BMask::Constant(out.length, out.length, true);
    // non-text rows never attend to text; text row i sees text rows <= i.
    for (int q = 0; q < out.length; ++q)
      for (int k = out.text_offset; k < out.length; ++k)
        mask(q, k) = q >= out.text_offset && k <= q;
    fused = enc_(seq, &mask);
  }

  out.seq = fused;
  out.v_o = slice_rows(fused, out.v_pool_pos, 1);
  out.t_o = slice_rows(fused, out.text_offset + txt.index_sep, 1);
  return out;
}

}  // namespace stoa
