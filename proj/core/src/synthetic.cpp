#include "stoa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "stoa/rng.hpp"

namespace stoa {

using json = nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

const double kPalette[8][3] = {
    {1.0, 0.0, 0.0},   // red
    {0.0, 1.0, 0.0},   // green
    {0.0, 0.0, 1.0},   // blue
    {1.0, 1.0, 0.0},   // yellow
    {0.6, 0.0, 0.8},   // purple
    {1.0, 0.55, 0.0},  // orange
    {1.0, 1.0, 1.0},   // white
    {0.0, 1.0, 1.0},   // cyan
};

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// One reflecting step on [0,1].
void reflect_step(double& x, double& v) {
  x += v;
  if (x > 1.0) {
    x = 2.0 - x;
    v = -v;
  }
  if (x < 0.0) {
    x = -x;
    v = -v;
  }
}

}  // namespace

void CorpusConfig::validate() const {
  if (T < 1) throw ConfigError("T must be >= 1");
  if (S < 2) throw ConfigError("S must be >= 2");
  if (patch < 1 || S % patch != 0) throw ConfigError("S must be divisible by patch size");
  if (K_max < 0) throw ConfigError("K_max must be >= 0");
  if (min_objects < 0 || min_objects > K_max) throw ConfigError("min_objects must be in [0, K_max]");
  if (L_max < 4) throw ConfigError("L_max must be >= 4");
  if (label_swap_noise < 0.0 || label_swap_noise > 1.0)
    throw ConfigError("label_swap_noise must be in [0,1]");
}

ObjectState object_state_at(const ObjectSpec& obj, int frame) {
  ObjectState st{obj.cx, obj.cy, obj.size, 0.0};
  double vx = obj.vx, vy = obj.vy;
  for (int i = 0; i < frame; ++i) {
    reflect_step(st.cx, vx);
    reflect_step(st.cy, vy);
    st.size = clamp(st.size * obj.growth, 0.05, 0.22);
  }
  st.angle = obj.omega * frame;
  return st;
}

std::vector<std::uint8_t> render_object_mask(const ObjectState& st, int shape, int S) {
  std::vector<std::uint8_t> mask(static_cast<size_t>(S) * S, 0);
  const double r = st.size;
  const double ca = std::cos(-st.angle), sa = std::sin(-st.angle);
  // Triangle vertices (circumradius r), rotated by angle.
  double tx[3], ty[3];
  if (shape == 2) {
    for (int k = 0; k < 3; ++k) {
      const double a = st.angle - kPi / 2.0 + 2.0 * kPi * k / 3.0;
      tx[k] = st.cx + r * std::cos(a);
      ty[k] = st.cy + r * std::sin(a);
    }
  }
  bool any = false;
  const int x0 = std::max(0, static_cast<int>(std::floor((st.cx - r * 1.5) * S)));
  const int x1 = std::min(S - 1, static_cast<int>(std::ceil((st.cx + r * 1.5) * S)));
  const int y0 = std::max(0, static_cast<int>(std::floor((st.cy - r * 1.5) * S)));
  const int y1 = std::min(S - 1, static_cast<int>(std::ceil((st.cy + r * 1.5) * S)));
  for (int py = y0; py <= y1; ++py) {
    for (int px = x0; px <= x1; ++px) {
      const double x = (px + 0.5) / S;
      const double y = (py + 0.5) / S;
      const double dx = x - st.cx, dy = y - st.cy;
      bool inside = false;
      if (shape == 0) {  // circle
        inside = dx * dx + dy * dy <= r * r;
      } else if (shape == 1) {  // square, half-side 0.8 r, rotated
        const double rx = ca * dx - sa * dy;
        const double ry = sa * dx + ca * dy;
        const double hs = 0.8 * r;
        inside = std::abs(rx) <= hs && std::abs(ry) <= hs;
      } else {  // equilateral triangle via half-plane tests
        inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
          const int k2 = (k + 1) % 3;
          const double ex = tx[k2] - tx[k], ey = ty[k2] - ty[k];
          const double cross = ex * (y - ty[k]) - ey * (x - tx[k]);
          if (cross < 0.0) inside = false;
        }
      }
      if (inside) {
        mask[static_cast<size_t>(py) * S + px] = 1;
        any = true;
      }
    }
  }
  if (!any) {
    // Sub-pixel object: mark the pixel under the center so it stays detectable.
    const int px = std::min(S - 1, std::max(0, static_cast<int>(st.cx * S)));
    const int py = std::min(S - 1, std::max(0, static_cast<int>(st.cy * S)));
    mask[static_cast<size_t>(py) * S + px] = 1;
  }
  return mask;
}

SceneSpec make_scene_spec(std::uint64_t seed, const CorpusConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.num_objects =
      cfg.K_max == 0 ? 0 : cfg.min_objects + rng.uniform_int(cfg.K_max - cfg.min_objects + 1);
  if (spec.num_objects == 0) return spec;

  std::set<std::pair<int, int>> used_classes;
  for (int i = 0; i < spec.num_objects; ++i) {
    ObjectSpec obj;
    for (int attempt = 0; attempt < 200; ++attempt) {
      obj.shape = rng.uniform_int(3);
      obj.color = rng.uniform_int(8);
      const bool class_free = !used_classes.count({obj.shape, obj.color});
      const bool shape_ok = i >= 2 || spec.objects.empty() || obj.shape != spec.objects[0].shape;
      if (class_free && shape_ok) break;
    }
    used_classes.insert({obj.shape, obj.color});
    obj.size = rng.uniform(0.09, 0.15);
    for (int attempt = 0; attempt < 20; ++attempt) {
      obj.cx = rng.uniform(0.2, 0.8);
      obj.cy = rng.uniform(0.2, 0.8);
      bool clear = true;
      for (auto& other : spec.objects) {
        const double d = std::hypot(obj.cx - other.cx, obj.cy - other.cy);
        if (d < obj.size + other.size + 0.05) clear = false;
      }
      if (clear) break;
    }
    obj.vx = rng.uniform(-0.06, 0.06);
    obj.vy = rng.uniform(-0.06, 0.06);
    spec.objects.push_back(obj);
  }

  auto pick_verb = [&](int obj_idx, bool allow_pair) {
    std::vector<int> candidates;
    for (int v = 0; v < 6; ++v) {
      if (v == kCollides && (!allow_pair || spec.num_objects < 2)) continue;
      if (v == kSpins && spec.objects[static_cast<size_t>(obj_idx)].shape == 0) continue;
      candidates.push_back(v);
    }
    return candidates[static_cast<size_t>(rng.uniform_int(static_cast<int>(candidates.size())))];
  };

  auto realize = [&](int idx, int verb, int partner) {
    ObjectSpec& obj = spec.objects[static_cast<size_t>(idx)];
    switch (verb) {
      case kMoves: {
        if (partner >= 0) {
          const ObjectSpec& other = spec.objects[static_cast<size_t>(partner)];
          const double d = std::hypot(other.cx - obj.cx, other.cy - obj.cy);
          const double speed = rng.uniform(0.05, 0.09);
          obj.vx = (other.cx - obj.cx) / std::max(d, 1e-9) * speed;
          obj.vy = (other.cy - obj.cy) / std::max(d, 1e-9) * speed;
        } else {
          const double speed = std::hypot(obj.vx, obj.vy);
          if (speed < 0.03) {
            const double a = rng.uniform(0.0, 2.0 * kPi);
            obj.vx = 0.05 * std::cos(a);
            obj.vy = 0.05 * std::sin(a);
          }
        }
        break;
      }
      case kBounces: {
        // Place the object so a wall reflection happens within the clip.
        const bool horizontal = rng.uniform() < 0.5;
        const bool positive = rng.uniform() < 0.5;
        const double speed = 0.095;
        const double travel = speed * std::max(1, cfg.T - 1);
        const double dist = clamp(rng.uniform(0.3, 0.9) * travel, 0.02, 0.45);
        double& c = horizontal ? obj.cx : obj.cy;
        double& v = horizontal ? obj.vx : obj.vy;
        c = positive ? 1.0 - dist : dist;
        v = positive ? speed : -speed;
        break;
      }
      case kSpins: {
        obj.omega = (rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.5, 1.0);
        obj.vx *= 0.3;
        obj.vy *= 0.3;
        break;
      }
      case kShrinks:
        obj.growth = 0.82;
        break;
      case kGrows:
        obj.growth = 1.18;
        obj.size = std::min(obj.size, 0.11);
        break;
      case kCollides: {
        ObjectSpec& other = spec.objects[static_cast<size_t>(partner)];
        // Pull the partner close enough that they meet within T frames.
        double d = std::hypot(other.cx - obj.cx, other.cy - obj.cy);
        if (d > 0.45 || d < 1e-6) {
          const double a = rng.uniform(0.0, 2.0 * kPi);
          const double want = rng.uniform(0.3, 0.45);
          other.cx = clamp(obj.cx + want * std::cos(a), 0.1, 0.9);
          other.cy = clamp(obj.cy + want * std::sin(a), 0.1, 0.9);
          d = std::hypot(other.cx - obj.cx, other.cy - obj.cy);
        }
        const double per_step = d / std::max(1, cfg.T - 1) * 0.6;
        obj.vx = clamp((other.cx - obj.cx) / d * per_step, -0.1, 0.1);
        obj.vy = clamp((other.cy - obj.cy) / d * per_step, -0.1, 0.1);
        other.vx = -obj.vx;
        other.vy = -obj.vy;
        break;
      }
      default:
        break;
    }
    obj.vx = clamp(obj.vx, -0.1, 0.1);
    obj.vy = clamp(obj.vy, -0.1, 0.1);
  };

  const int verb0 = pick_verb(0, true);
  int partner0 = -1;
  if (verb0 == kCollides) {
    partner0 = 1;
  } else if (verb0 == kMoves && spec.num_objects >= 2 && rng.uniform() < 0.5) {
    partner0 = 1;
  }
  realize(0, verb0, partner0);
  spec.actions.push_back({0, verb0, partner0});

  if (spec.num_objects >= 2 && partner0 < 0 && rng.uniform() < 0.6) {
    const int verb1 = pick_verb(1, false);
    realize(1, verb1, -1);
    spec.actions.push_back({1, verb1, -1});
  }
  return spec;
}

namespace {

std::vector<std::string> caption_words(const SceneSpec& spec) {
  std::vector<std::string> words;
  words.push_back("[CLS]");
  if (spec.num_objects == 0) {
    words.push_back("empty");
    words.push_back("scene");
    words.push_back("[SEP]");
    return words;
  }
  auto mention = [&](int idx) {
    const ObjectSpec& o = spec.objects[static_cast<size_t>(idx)];
    words.push_back("the");
    words.push_back(Vocab::color_words()[static_cast<size_t>(o.color)]);
    words.push_back(Vocab::shape_words()[static_cast<size_t>(o.shape)]);
  };
  for (size_t a = 0; a < spec.actions.size(); ++a) {
    const auto& act = spec.actions[a];
    if (a > 0) words.push_back("and");
    mention(act.object);
    words.push_back(Vocab::verb_words()[static_cast<size_t>(act.verb)]);
    if (act.partner >= 0) {
      words.push_back(act.verb == kCollides ? "with" : "toward");
      mention(act.partner);
    }
  }
  words.push_back("[SEP]");
  return words;
}

}  // namespace

SampleRecord generate_scene(std::uint64_t seed, const CorpusConfig& cfg, const Vocab& vocab) {
  SceneSpec spec = make_scene_spec(seed, cfg);
  SampleRecord rec;
  rec.seed = seed;
  rec.T = cfg.T;
  rec.S = cfg.S;

  std::vector<std::string> words = caption_words(spec);
  if (static_cast<int>(words.size()) > cfg.L_max && spec.actions.size() > 1) {
    // Drop the second clause when it does not fit.
    SceneSpec trimmed = spec;
    trimmed.actions.resize(1);
    words = caption_words(trimmed);
    spec = trimmed;
  }
  if (static_cast<int>(words.size()) > cfg.L_max)
    throw ConfigError("caption does not fit L_max=" + std::to_string(cfg.L_max));
  rec.caption = vocab.encode(words);
  rec.tags.reserve(rec.caption.size());
  for (int id : rec.caption) rec.tags.push_back(vocab.tag_of(id));

  const int S = cfg.S;
  rec.frames.assign(static_cast<size_t>(cfg.T) * 3 * S * S, 0.0f);
  rec.detections.resize(static_cast<size_t>(cfg.T));
  for (int t = 0; t < cfg.T; ++t) {
    float* frame = rec.frames.data() + static_cast<size_t>(t) * 3 * S * S;
    for (int i = 0; i < spec.num_objects; ++i) {
      const ObjectSpec& obj = spec.objects[static_cast<size_t>(i)];
      const ObjectState st = object_state_at(obj, t);
      const std::vector<std::uint8_t> mask = render_object_mask(st, obj.shape, S);
      int min_x = S, max_x = -1, min_y = S, max_y = -1;
      for (int py = 0; py < S; ++py)
        for (int px = 0; px < S; ++px)
          if (mask[static_cast<size_t>(py) * S + px]) {
            min_x = std::min(min_x, px);
            max_x = std::max(max_x, px);
            min_y = std::min(min_y, py);
            max_y = std::max(max_y, py);
            for (int c = 0; c < 3; ++c)
              frame[(static_cast<size_t>(c) * S + py) * S + px] =
                  static_cast<float>(kPalette[obj.color][c]);
          }
      Detection det;
      det.box = {static_cast<double>(min_x) / S, static_cast<double>(min_y) / S,
                 static_cast<double>(max_x + 1) / S, static_cast<double>(max_y + 1) / S};
      det.class_id = obj.class_id();
      det.confidence = 0.5 + 0.5 * hash_uniform(hash_combine(seed, static_cast<std::uint64_t>(t) * 64 +
                                                                       static_cast<std::uint64_t>(i)));
      if (cfg.label_swap_noise > 0.0) {
        const std::uint64_t h = hash_combine(seed ^ 0x5157ULL, static_cast<std::uint64_t>(t) * 64 +
                                                                   static_cast<std::uint64_t>(i));
        if (hash_uniform(h) < cfg.label_swap_noise)
          det.class_id = static_cast<int>(hash_u64(h) >> 32) % 24;
      }
      rec.detections[static_cast<size_t>(t)].push_back(det);
    }
  }
  return rec;
}

std::vector<SampleRecord> generate_corpus(std::uint64_t base_seed, int count,
                                          const CorpusConfig& cfg, const Vocab& vocab) {
  std::vector<SampleRecord> samples;
  std::set<std::vector<int>> seen;
  std::uint64_t seed = base_seed;
  const std::uint64_t limit = base_seed + static_cast<std::uint64_t>(std::max(count, 1)) * 4096;
  while (static_cast<int>(samples.size()) < count) {
    if (seed >= limit)
      throw ConfigError("could not generate enough distinct captions; vocabulary too small?");
    SampleRecord rec = generate_scene(seed, cfg, vocab);
    ++seed;
    if (cfg.unique_captions && !seen.insert(rec.caption).second) continue;
    rec.id = static_cast<int>(samples.size());
    samples.push_back(std::move(rec));
  }
  return samples;
}

namespace {

constexpr char kBlobMagic[4] = {'S', 'T', 'O', 'A'};
constexpr std::uint32_t kBlobVersion = 1;

void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("frame blob truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::filesystem::path write_corpus(const std::vector<SampleRecord>& samples,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / "manifest.jsonl";
  const auto blob_path = dir / "frames.bin";
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot write frame blob: " + blob_path.string());
  blob.write(kBlobMagic, 4);
  write_u32_le(blob, kBlobVersion);
  const int T = samples.empty() ? 0 : samples[0].T;
  const int S = samples.empty() ? 0 : samples[0].S;
  write_u32_le(blob, static_cast<std::uint32_t>(T));
  write_u32_le(blob, static_cast<std::uint32_t>(S));

  std::ofstream manifest(manifest_path);
  if (!manifest) throw IoError("cannot write manifest: " + manifest_path.string());
  json header = {{"magic", "STOA-MANIFEST"},
                 {"version", 1},
                 {"count", samples.size()},
                 {"T", T},
                 {"S", S}};
  manifest << header.dump() << "\n";

  std::uint64_t offset = 16;  // blob header
  for (const auto& rec : samples) {
    if (rec.T != T || rec.S != S) throw FormatError("mixed frame shapes in corpus");
    json j;
    j["id"] = rec.id;
    j["seed"] = rec.seed;
    j["offset"] = offset;
    j["tokens"] = rec.caption;
    std::vector<std::string> tags;
    for (auto t : rec.tags) tags.push_back(pos_tag_name(t));
    j["tags"] = tags;
    json dets = json::array();
    for (const auto& frame : rec.detections) {
      json fd = json::array();
      for (const auto& d : frame)
        fd.push_back({{"box", d.box}, {"class_id", d.class_id}, {"confidence", d.confidence}});
      dets.push_back(fd);
    }
    j["detections"] = dets;
    manifest << j.dump() << "\n";

    for (float f : rec.frames) {
      std::uint32_t u;
      static_assert(sizeof(float) == 4);
      std::memcpy(&u, &f, 4);
      write_u32_le(blob, u);
    }
    offset += rec.frames.size() * 4;
  }
  if (!manifest || !blob) throw IoError("corpus write failed");
  return manifest_path;
}

std::vector<SampleRecord> read_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  const auto blob_path = dir / "frames.bin";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw IoError("cannot open manifest: " + manifest_path.string());
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open frame blob: " + blob_path.string());

  char magic[4];
  blob.read(magic, 4);
  if (!blob || std::memcmp(magic, kBlobMagic, 4) != 0)
    throw FormatError("bad frame blob magic");
  const std::uint32_t version = read_u32_le(blob);
  if (version != kBlobVersion) throw FormatError("unsupported frame blob version");
  const int T = static_cast<int>(read_u32_le(blob));
  const int S = static_cast<int>(read_u32_le(blob));

  std::string line;
  if (!std::getline(manifest, line)) throw FormatError("empty manifest");
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("magic", "") != "STOA-MANIFEST")
    throw FormatError("bad manifest header");
  if (header.value("version", 0) != 1) throw FormatError("unsupported manifest version");
  const size_t count = header.value("count", size_t{0});

  std::vector<SampleRecord> samples;
  samples.reserve(count);
  const size_t frame_floats = static_cast<size_t>(T) * 3 * S * S;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError("bad manifest record");
    SampleRecord rec;
    rec.id = j.at("id").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.T = T;
    rec.S = S;
    rec.caption = j.at("tokens").get<std::vector<int>>();
    for (const auto& t : j.at("tags")) rec.tags.push_back(pos_tag_from_name(t.get<std::string>()));
    for (const auto& fd : j.at("detections")) {
      std::vector<Detection> frame;
      for (const auto& dj : fd) {
        Detection d;
        d.box = dj.at("box").get<std::array<double, 4>>();
        d.class_id = dj.at("class_id").get<int>();
        d.confidence = dj.at("confidence").get<double>();
        frame.push_back(d);
      }
      rec.detections.push_back(std::move(frame));
    }
    const std::uint64_t offset = j.at("offset").get<std::uint64_t>();
    blob.seekg(static_cast<std::streamoff>(offset));
    rec.frames.resize(frame_floats);
    for (size_t i = 0; i < frame_floats; ++i) {
      const std::uint32_t u = read_u32_le(blob);
      float f;
      std::memcpy(&f, &u, 4);
      rec.frames[i] = f;
    }
    samples.push_back(std::move(rec));
  }
  if (samples.size() != count) throw FormatError("manifest record count mismatch");
  return samples;
}

std::uint64_t manifest_hash(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.jsonl", std::ios::binary);
  if (!is) throw IoError("cannot open manifest for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (is.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace stoa
