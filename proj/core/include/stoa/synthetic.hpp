#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "stoa/vocab.hpp"

namespace stoa {

struct CorpusConfig {
  int T{4};
  int S{32};
  int patch{8};       // frame side must be divisible by this
  int K_max{3};       // max objects per scene (also detection slots K)
  int min_objects{1};
  int L_max{16};
  double label_swap_noise{0.0};  // probability a detection's class id is swapped
  bool unique_captions{true};   // generate_corpus skips duplicate captions
  std::string vocab_path;       // empty = builtin vocabulary
  void validate() const;
};

// Verb indices into Vocab::verb_words(): moves, bounces, spins, shrinks,
// grows, collides.
enum Verb { kMoves = 0, kBounces, kSpins, kShrinks, kGrows, kCollides };

struct ObjectSpec {
  int shape{0};      // index into shape_words
  int color{0};      // index into color_words
  double cx{0.5}, cy{0.5};
  double vx{0.0}, vy{0.0};  // per-frame, components in [-0.1, 0.1]
  double size{0.1};         // circumradius, normalized units
  double omega{0.0};        // rotation per frame, radians
  double growth{1.0};       // size multiplier per frame
  int class_id() const { return shape * 8 + color; }
};

struct SceneSpec {
  std::uint64_t seed{0};
  int num_objects{0};
  std::vector<ObjectSpec> objects;
  // Realized action labels, in caption order: (object index, verb,
  // partner object index or -1).
  struct Action {
    int object;
    int verb;
    int partner;
  };
  std::vector<Action> actions;
};

struct ObjectState {
  double cx, cy, size, angle;
};

struct Detection {
  std::array<double, 4> box;  // x1, y1, x2, y2 normalized
  int class_id;
  double confidence;
};

struct SampleRecord {
  int id{0};
  std::uint64_t seed{0};
  int T{0}, S{0};
  std::vector<float> frames;  // T*3*S*S, [t][channel][y][x], values in [0,1]
  std::vector<std::vector<Detection>> detections;
  std::vector<int> caption;
  std::vector<PosTag> tags;
};

// Deterministic scene synthesis. Same (seed, config) gives bit-identical
// output.
SceneSpec make_scene_spec(std::uint64_t seed, const CorpusConfig& cfg);
SampleRecord generate_scene(std::uint64_t seed, const CorpusConfig& cfg, const Vocab& vocab);

// Closed-form object state at a frame (reflecting motion, rotation, growth).
ObjectState object_state_at(const ObjectSpec& obj, int frame);

// Rasterizes one object alone; returns the S*S mask (row-major, y*S+x).
std::vector<std::uint8_t> render_object_mask(const ObjectState& st, int shape, int S);

// Generates `count` samples starting at base_seed (skipping duplicate
// captions when cfg.unique_captions).
std::vector<SampleRecord> generate_corpus(std::uint64_t base_seed, int count,
                                          const CorpusConfig& cfg, const Vocab& vocab);

// Corpus on disk: dir/manifest.jsonl (header line + one JSON record per
// sample) plus dir/frames.bin (header: magic "STOA", version u32, T u32,
// S u32; then per record T*3*S*S row-major little-endian f32).
std::filesystem::path write_corpus(const std::vector<SampleRecord>& samples,
                                   const std::filesystem::path& dir);
std::vector<SampleRecord> read_corpus(const std::filesystem::path& dir);

// FNV-1a over manifest bytes; recorded in metrics logs for replayability.
std::uint64_t manifest_hash(const std::filesystem::path& dir);

}  // namespace stoa
