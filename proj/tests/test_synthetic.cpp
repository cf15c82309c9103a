#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"

using namespace stoa;

TEST_CASE("scene generation is deterministic") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  const SampleRecord a = generate_scene(123, cfg, vocab);
  const SampleRecord b = generate_scene(123, cfg, vocab);
  CHECK(a.caption == b.caption);
  CHECK(a.frames == b.frames);
  for (size_t t = 0; t < a.detections.size(); ++t) {
    REQUIRE(a.detections[t].size() == b.detections[t].size());
    for (size_t k = 0; k < a.detections[t].size(); ++k) {
      CHECK(a.detections[t][k].box == b.detections[t][k].box);
      CHECK(a.detections[t][k].class_id == b.detections[t][k].class_id);
      CHECK(a.detections[t][k].confidence == b.detections[t][k].confidence);
    }
  }
  const SampleRecord c = generate_scene(124, cfg, vocab);
  CHECK(a.frames != c.frames);
}

TEST_CASE("boxes match the rendered mask extents exactly") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  for (std::uint64_t seed : {1ull, 9ull, 33ull, 77ull}) {
    const SceneSpec spec = make_scene_spec(seed, cfg);
    const SampleRecord rec = generate_scene(seed, cfg, vocab);
    for (int t = 0; t < cfg.T; ++t) {
      REQUIRE(static_cast<int>(rec.detections[static_cast<size_t>(t)].size()) ==
              spec.num_objects);
      for (int i = 0; i < spec.num_objects; ++i) {
        const ObjectSpec& obj = spec.objects[static_cast<size_t>(i)];
        const auto mask = render_object_mask(object_state_at(obj, t), obj.shape, cfg.S);
        int min_x = cfg.S, max_x = -1, min_y = cfg.S, max_y = -1;
        for (int y = 0; y < cfg.S; ++y)
          for (int x = 0; x < cfg.S; ++x)
            if (mask[static_cast<size_t>(y) * cfg.S + x]) {
              min_x = std::min(min_x, x);
              max_x = std::max(max_x, x);
              min_y = std::min(min_y, y);
              max_y = std::max(max_y, y);
            }
        const Detection& d = rec.detections[static_cast<size_t>(t)][static_cast<size_t>(i)];
        CHECK(d.box[0] == static_cast<double>(min_x) / cfg.S);
        CHECK(d.box[1] == static_cast<double>(min_y) / cfg.S);
        CHECK(d.box[2] == static_cast<double>(max_x + 1) / cfg.S);
        CHECK(d.box[3] == static_cast<double>(max_y + 1) / cfg.S);
        CHECK(d.class_id == obj.class_id());
        CHECK(d.confidence >= 0.5);
        CHECK(d.confidence <= 1.0);
      }
    }
  }
}

TEST_CASE("captions are well-formed and tags line up") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SampleRecord rec = generate_scene(seed, cfg, vocab);
    REQUIRE(rec.caption.size() == rec.tags.size());
    REQUIRE(static_cast<int>(rec.caption.size()) <= cfg.L_max);
    CHECK(rec.caption.front() == vocab.cls);
    CHECK(rec.caption.back() == vocab.sep);
    int nouns = 0, verbs = 0;
    for (size_t i = 0; i < rec.caption.size(); ++i) {
      CHECK(vocab.tag_of(rec.caption[i]) == rec.tags[i]);
      nouns += rec.tags[i] == PosTag::Noun;
      verbs += rec.tags[i] == PosTag::Verb;
    }
    const SceneSpec spec = make_scene_spec(seed, cfg);
    if (spec.num_objects > 0) {
      CHECK(verbs == static_cast<int>(spec.actions.size()));
      CHECK(nouns >= verbs);  // every clause mentions at least one shape noun
    } else {
      CHECK(verbs == 0);
    }
  }
}

TEST_CASE("caption verbs mirror the realized scene actions in order") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SampleRecord rec = generate_scene(seed, cfg, vocab);
    const SceneSpec spec = make_scene_spec(seed, cfg);
    std::vector<int> caption_verbs;
    for (size_t i = 0; i < rec.caption.size(); ++i)
      if (rec.tags[i] == PosTag::Verb) caption_verbs.push_back(rec.caption[i]);
    // generate_scene may trim the second clause to fit L_max
    REQUIRE(caption_verbs.size() <= spec.actions.size());
    for (size_t a = 0; a < caption_verbs.size(); ++a)
      CHECK(caption_verbs[a] == vocab.verb_ids[static_cast<size_t>(spec.actions[a].verb)]);
  }
}

TEST_CASE("empty scenes caption as such") {
  CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  cfg.min_objects = 0;
  const Vocab vocab = Vocab::builtin();
  bool saw_empty = false;
  for (std::uint64_t seed = 0; seed < 200 && !saw_empty; ++seed) {
    const SceneSpec spec = make_scene_spec(seed, cfg);
    if (spec.num_objects != 0) continue;
    saw_empty = true;
    const SampleRecord rec = generate_scene(seed, cfg, vocab);
    CHECK(rec.caption ==
          std::vector<int>{vocab.cls, vocab.id("empty"), vocab.id("scene"), vocab.sep});
    for (const auto& frame : rec.detections) CHECK(frame.empty());
  }
  CHECK(saw_empty);
}

TEST_CASE("generate_corpus yields unique captions when asked") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  const auto samples = generate_corpus(5, 24, cfg, vocab);
  REQUIRE(samples.size() == 24);
  std::set<std::vector<int>> captions;
  for (const auto& rec : samples) captions.insert(rec.caption);
  CHECK(captions.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) CHECK(samples[i].id == static_cast<int>(i));
}

TEST_CASE("corpus round-trips through disk bit-exactly") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  const auto samples = generate_corpus(11, 6, cfg, vocab);
  const auto dir = std::filesystem::temp_directory_path() / "stoa_test_corpus";
  std::filesystem::remove_all(dir);
  write_corpus(samples, dir);
  const auto loaded = read_corpus(dir);
  REQUIRE(loaded.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].id == samples[i].id);
    CHECK(loaded[i].seed == samples[i].seed);
    CHECK(loaded[i].caption == samples[i].caption);
    CHECK(loaded[i].tags == samples[i].tags);
    CHECK(loaded[i].frames == samples[i].frames);
    REQUIRE(loaded[i].detections.size() == samples[i].detections.size());
    for (size_t t = 0; t < samples[i].detections.size(); ++t)
      for (size_t k = 0; k < samples[i].detections[t].size(); ++k) {
        CHECK(loaded[i].detections[t][k].box == samples[i].detections[t][k].box);
        CHECK(loaded[i].detections[t][k].class_id == samples[i].detections[t][k].class_id);
        CHECK(loaded[i].detections[t][k].confidence == samples[i].detections[t][k].confidence);
      }
  }
  CHECK(manifest_hash(dir) == manifest_hash(dir));
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt corpora are rejected") {
  const CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  const Vocab vocab = Vocab::builtin();
  const auto samples = generate_corpus(3, 2, cfg, vocab);
  const auto dir = std::filesystem::temp_directory_path() / "stoa_test_corrupt";
  std::filesystem::remove_all(dir);
  write_corpus(samples, dir);
  {
    std::ofstream blob(dir / "frames.bin", std::ios::binary);
    blob << "JUNKJUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(read_corpus(dir), FormatError);
  CHECK_THROWS_AS(read_corpus(dir / "missing"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("label swap noise perturbs class ids deterministically") {
  CorpusConfig cfg = stoa::testing::tiny_corpus_config();
  cfg.label_swap_noise = 1.0;
  const Vocab vocab = Vocab::builtin();
  const SampleRecord noisy1 = generate_scene(21, cfg, vocab);
  const SampleRecord noisy2 = generate_scene(21, cfg, vocab);
  cfg.label_swap_noise = 0.0;
  const SampleRecord clean = generate_scene(21, cfg, vocab);
  bool any_diff = false;
  for (size_t t = 0; t < clean.detections.size(); ++t)
    for (size_t k = 0; k < clean.detections[t].size(); ++k) {
      CHECK(noisy1.detections[t][k].class_id == noisy2.detections[t][k].class_id);
      any_diff |= noisy1.detections[t][k].class_id != clean.detections[t][k].class_id;
    }
  if (!clean.detections[0].empty()) CHECK(any_diff);
}

TEST_CASE("motion stays inside the unit square") {
  ObjectSpec obj;
  obj.cx = 0.9;
  obj.cy = 0.1;
  obj.vx = 0.1;
  obj.vy = -0.08;
  obj.growth = 1.3;
  for (int f = 0; f < 30; ++f) {
    const ObjectState st = object_state_at(obj, f);
    CHECK(st.cx >= 0.0);
    CHECK(st.cx <= 1.0);
    CHECK(st.cy >= 0.0);
    CHECK(st.cy <= 1.0);
    CHECK(st.size <= 0.22);
    CHECK(st.size >= 0.05);
  }
}
