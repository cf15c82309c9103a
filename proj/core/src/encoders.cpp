#include "stoa/encoders.hpp"

namespace stoa {

VideoEncoder::VideoEncoder(ParamStore& ps, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      patch_embed_(ps, "video.patch_embed", 3 * cfg.patch * cfg.patch, cfg.h, rng),
      enc_(ps, "video.enc",
           TransformerConfig{cfg.video_layers, cfg.heads, cfg.h, cfg.mlp_ratio, cfg.dropout}, rng),
      proj_(ps, "video.proj", cfg.h, cfg.d, rng) {
  const int hw = (cfg.S / cfg.patch) * (cfg.S / cfg.patch);
  cls_token_ = ps.create("video.cls", 1, cfg.h, 0.02, rng);
  pos_spatial_ = ps.create("video.pos_spatial", 1 + hw, cfg.h, 0.02, rng);
  pos_temporal_ = ps.create("video.pos_temporal", cfg.T, cfg.h, 0.02, rng);
}

VideoEncoding VideoEncoder::operator()(const float* frames, int T, int S) const {
  if (S % cfg_.patch != 0) throw ShapeError("frame side not divisible by patch size");
  if (T != cfg_.T || S != cfg_.S) throw ShapeError("frame geometry does not match model config");
  const int p = cfg_.patch;
  const int w = S / p;
  const int hw = w * w;
  VideoEncoding out;
  out.grid.H = w;
  out.grid.W = w;
  const int tap_traj = cfg_.resolved_tap_traj();
  const int tap_act = cfg_.resolved_tap_act();

  std::vector<Tensor> cls_rows;
  cls_rows.reserve(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    // Row per patch (row-major patch index), channel-major pixels inside.
    Mat patches(hw, 3 * p * p);
    const float* frame = frames + static_cast<size_t>(t) * 3 * S * S;
    for (int py = 0; py < w; ++py)
      for (int px = 0; px < w; ++px) {
        const int row = py * w + px;
        int col = 0;
        for (int c = 0; c < 3; ++c)
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx)
              patches(row, col++) =
                  frame[(static_cast<size_t>(c) * S + py * p + dy) * S + px * p + dx];
      }
    Tensor tokens = patch_embed_(constant(std::move(patches)));
    Tensor seq = concat_rows({cls_token_, tokens});
    seq = add(seq, pos_spatial_);
    seq = add_rowvec(seq, slice_rows(pos_temporal_, t, 1));
    std::vector<Tensor> taps;
    Tensor enc_out = enc_(seq, nullptr, &taps);
    out.grid.z_traj.push_back(slice_rows(taps[static_cast<size_t>(tap_traj)], 1, hw));
    out.grid.z_act.push_back(slice_rows(taps[static_cast<size_t>(tap_act)], 1, hw));
    cls_rows.push_back(slice_rows(enc_out, 0, 1));
  }
  out.grid.frame_cls = concat_rows(cls_rows);
  out.v = proj_(out.grid.frame_cls);
  return out;
}

TextEncoder::TextEncoder(ParamStore& ps, const ModelConfig& cfg, int cls_id, int sep_id, Rng& rng)
    : cfg_(cfg),
      cls_id_(cls_id),
      sep_id_(sep_id),
      enc_(ps, "text.enc",
           TransformerConfig{cfg.text_layers, cfg.heads, cfg.d, cfg.mlp_ratio, cfg.dropout}, rng),
      proj_(ps, "text.proj", cfg.d, cfg.d, rng) {
  tok_emb_ = ps.create("text.tok_emb", cfg.vocab_size, cfg.d, 0.02, rng);
  pos_emb_ = ps.create("text.pos_emb", cfg.L_max, cfg.d, 0.02, rng);
}

TextFeatures TextEncoder::operator()(const std::vector<int>& tokens,
                                     const std::vector<PosTag>& tags, bool causal) const {
  if (tokens.empty()) throw ShapeError("empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg_.L_max)
    throw ShapeError("token sequence longer than L_max");
  if (tags.size() != tokens.size()) throw ShapeError("tags must align with tokens");
  TextFeatures out;
  out.tokens = tokens;
  out.tags = tags;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= cfg_.vocab_size)
      throw VocabError("token id out of range: " + std::to_string(tokens[i]));
    if (tokens[i] == cls_id_ && out.index_cls < 0) out.index_cls = static_cast<int>(i);
    if (tokens[i] == sep_id_) out.index_sep = static_cast<int>(i);
  }
  if (out.index_cls < 0 || out.index_sep < 0)
    throw ShapeError("text must contain [CLS] and [SEP]");
  const int L = static_cast<int>(tokens.size());
  Tensor seq = add(gather_rows(tok_emb_, tokens), slice_rows(pos_emb_, 0, L));
  if (causal) {
    BMask mask = BMask::Constant(L, L, false);
    for (int q = 0; q < L; ++q)
      for (int k = 0; k <= q; ++k) mask(q, k) = true;
    out.t = proj_(enc_(seq, &mask));
  } else {
    out.t = proj_(enc_(seq, nullptr));
  }
  return out;
}

}  // namespace stoa
