#include <doctest.h>

#include "helpers.hpp"

using namespace stoa;
using stoa::testing::tiny_model_config;

namespace {

struct Fixture {
  Vocab vocab = Vocab::builtin();
  ModelConfig mc;
  std::unique_ptr<StoaModel> model;
  SampleRecord rec;
  Fixture() {
    mc = tiny_model_config();
    model = std::make_unique<StoaModel>(mc, vocab, 9);
    const CorpusConfig cc = stoa::testing::tiny_corpus_config();
    for (std::uint64_t seed = 1;; ++seed) {
      rec = generate_scene(seed, cc, vocab);
      if (!rec.detections[0].empty()) break;
    }
  }
};

}  // namespace

TEST_CASE("fusion output layout covers all modalities") {
  Fixture f;
  const VideoSideEncoding vs = f.model->encode_video_side(f.rec);
  const TextFeatures txt = f.model->encode_text(f.rec.caption, f.rec.tags);
  const FusionOutput out = f.model->fuse(vs, txt, TextAttention::kBidirectional);
  const int present = vs.trajs ? vs.trajs->present : 0;
  CHECK(out.v_pool_pos == f.mc.T);
  CHECK(out.obj_offset == f.mc.T + 1);
  CHECK(out.act_offset == out.obj_offset + present);
  CHECK(out.text_offset == out.act_offset + f.mc.M);
  CHECK(out.length == out.text_offset + static_cast<int>(f.rec.caption.size()));
  CHECK(out.seq.rows() == out.length);
  CHECK(out.seq.cols() == f.mc.d);
  CHECK((out.v_o.value() - out.seq.value().row(out.v_pool_pos)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((out.t_o.value() - out.seq.value().row(out.text_offset + txt.index_sep))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("causal fusion keeps text invisible to non-text rows") {
  Fixture f;
  const VideoSideEncoding vs = f.model->encode_video_side(f.rec);
  const TextFeatures txt_a =
      f.model->encode_text(f.rec.caption, f.rec.tags, TextAttention::kCausal);
  std::vector<int> other = f.rec.caption;
  // replace the suffix after position 2, keeping [SEP] at the end
  for (size_t i = 3; i + 1 < other.size(); ++i) other[i] = f.vocab.id("the");
  std::vector<PosTag> other_tags;
  for (int id : other) other_tags.push_back(f.vocab.tag_of(id));
  const TextFeatures txt_b = f.model->encode_text(other, other_tags, TextAttention::kCausal);

  const FusionOutput fa = f.model->fuse(vs, txt_a, TextAttention::kCausal);
  const FusionOutput fb = f.model->fuse(vs, txt_b, TextAttention::kCausal);
  // every non-text row and every text row before the replacement point is
  // bit-identical
  const Mat a = fa.seq.value(), b = fb.seq.value();
  CHECK((a.topRows(fa.text_offset) - b.topRows(fb.text_offset)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.middleRows(fa.text_offset, 3) - b.middleRows(fb.text_offset, 3))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((a.row(fa.text_offset + 3) - b.row(fb.text_offset + 3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("bidirectional fusion lets text reach video rows") {
  Fixture f;
  const VideoSideEncoding vs = f.model->encode_video_side(f.rec);
  const TextFeatures txt_a = f.model->encode_text(f.rec.caption, f.rec.tags);
  std::vector<int> other = f.rec.caption;
  for (size_t i = 1; i + 1 < other.size(); ++i) other[i] = f.vocab.id("scene");
  std::vector<PosTag> other_tags;
  for (int id : other) other_tags.push_back(f.vocab.tag_of(id));
  const TextFeatures txt_b = f.model->encode_text(other, other_tags);
  const FusionOutput fa = f.model->fuse(vs, txt_a, TextAttention::kBidirectional);
  const FusionOutput fb = f.model->fuse(vs, txt_b, TextAttention::kBidirectional);
  CHECK((fa.seq.value().row(0) - fb.seq.value().row(0)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fusion works with object and action modules disabled") {
  Fixture f;
  ModelConfig mc = f.mc;
  mc.use_obj = false;
  mc.use_act = false;
  StoaModel lean(mc, f.vocab, 5);
  const VideoSideEncoding vs = lean.encode_video_side(f.rec);
  CHECK(!vs.obj.has_value());
  CHECK(!vs.trajs.has_value());
  CHECK(!vs.acts.has_value());
  const TextFeatures txt = lean.encode_text(f.rec.caption, f.rec.tags);
  const FusionOutput out = lean.fuse(vs, txt, TextAttention::kBidirectional);
  CHECK(out.text_offset == mc.T + 1);
  CHECK(out.length == mc.T + 1 + static_cast<int>(f.rec.caption.size()));
}
