#include "stoa/config.hpp"

#include <fstream>
#include <sstream>

namespace stoa {

void ModelConfig::validate() const {
  if (T < 1) throw ConfigError("T must be >= 1");
  if (S < 2 || patch < 1 || S % patch != 0) throw ConfigError("S must be divisible by patch");
  if (K < 0) throw ConfigError("K must be >= 0");
  if (N < 1) throw ConfigError("N must be >= 1");
  if (M < 1) throw ConfigError("M must be >= 1");
  if (L_max < 4) throw ConfigError("L_max must be >= 4");
  if (h < 1 || d < 1) throw ConfigError("h and d must be >= 1");
  if (heads < 1 || h % heads != 0 || d % heads != 0)
    throw ConfigError("h and d must be divisible by heads");
  if (video_layers < 1 || text_layers < 1) throw ConfigError("encoder layers must be >= 1");
  if (fusion_layers < 0 || traj_layers < 0 || action_layers < 0)
    throw ConfigError("layer counts must be >= 0");
  if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (resolved_tap_traj() >= video_layers || resolved_tap_act() >= video_layers)
    throw ConfigError("tap layer beyond video encoder depth");
  if (vocab_size < 6) throw ConfigError("vocabulary too small");
}

void RunConfig::validate() const {
  corpus.validate();
  ModelConfig m = model;
  m.vocab_size = m.vocab_size == 0 ? 6 : m.vocab_size;  // resolved later from vocab
  m.validate();
  if (model.T != corpus.T || model.S != corpus.S || model.patch != corpus.patch ||
      model.K != corpus.K_max || model.L_max != corpus.L_max)
    throw ConfigError("model and corpus geometry out of sync");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("betas must be in [0,1)");
  if (schedule != "cosine" && schedule != "constant")
    throw ConfigError("schedule must be cosine or constant");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (rerank_depth < 1) throw ConfigError("rerank_depth must be >= 1");
  if (qa_adapt_steps < 0) throw ConfigError("qa_adapt_steps must be >= 0");
  if (caption_adapt_steps < 0) throw ConfigError("caption_adapt_steps must be >= 0");
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "on" || v == "1" || v == "true") return true;
  if (v == "off" || v == "0" || v == "false") return false;
  throw ConfigError("boolean key " + key + " must be on/off");
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw ConfigError("key " + key + " needs an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return r;
  } catch (...) {
    throw ConfigError("key " + key + " needs a number, got '" + v + "'");
  }
}

}  // namespace

void RunConfig::apply_override(const std::string& key, const std::string& value) {
  if (key == "train_corpus") train_corpus = value;
  else if (key == "eval_corpus") eval_corpus = value;
  else if (key == "vocab_path") corpus.vocab_path = value;
  else if (key == "T") { corpus.T = parse_int(value, key); model.T = corpus.T; }
  else if (key == "S") { corpus.S = parse_int(value, key); model.S = corpus.S; }
  else if (key == "patch") { corpus.patch = parse_int(value, key); model.patch = corpus.patch; }
  else if (key == "K_max") { corpus.K_max = parse_int(value, key); model.K = corpus.K_max; }
  else if (key == "min_objects") corpus.min_objects = parse_int(value, key);
  else if (key == "L_max") { corpus.L_max = parse_int(value, key); model.L_max = corpus.L_max; }
  else if (key == "label_swap_noise") corpus.label_swap_noise = parse_double(value, key);
  else if (key == "unique_captions") corpus.unique_captions = parse_bool(value, key);
  else if (key == "h") model.h = parse_int(value, key);
  else if (key == "d") model.d = parse_int(value, key);
  else if (key == "heads") model.heads = parse_int(value, key);
  else if (key == "video_layers") model.video_layers = parse_int(value, key);
  else if (key == "text_layers") model.text_layers = parse_int(value, key);
  else if (key == "fusion_layers") model.fusion_layers = parse_int(value, key);
  else if (key == "traj_layers") model.traj_layers = parse_int(value, key);
  else if (key == "action_layers") model.action_layers = parse_int(value, key);
  else if (key == "N") model.N = parse_int(value, key);
  else if (key == "M") model.M = parse_int(value, key);
  else if (key == "mlp_ratio") model.mlp_ratio = parse_double(value, key);
  else if (key == "dropout") model.dropout = parse_double(value, key);
  else if (key == "tap_traj") model.tap_traj = parse_int(value, key);
  else if (key == "tap_act") model.tap_act = parse_int(value, key);
  else if (key == "model.use_obj") model.use_obj = parse_bool(value, key);
  else if (key == "model.use_act") model.use_act = parse_bool(value, key);
  else if (key == "loss.vtc") loss_vtc = parse_bool(value, key);
  else if (key == "loss.vtm") loss_vtm = parse_bool(value, key);
  else if (key == "loss.mlm") loss_mlm = parse_bool(value, key);
  else if (key == "loss.plm") loss_plm = parse_bool(value, key);
  else if (key == "loss.ota") loss_ota = parse_bool(value, key);
  else if (key == "loss.asp") loss_asp = parse_bool(value, key);
  else if (key == "lr") lr = parse_double(value, key);
  else if (key == "beta1") beta1 = parse_double(value, key);
  else if (key == "beta2") beta2 = parse_double(value, key);
  else if (key == "schedule") schedule = value;
  else if (key == "steps") steps = parse_int(value, key);
  else if (key == "batch_size") batch_size = parse_int(value, key);
  else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "checkpoint_dir") checkpoint_dir = value;
  else if (key == "checkpoint_every") checkpoint_every = parse_int(value, key);
  else if (key == "metrics_path") metrics_path = value;
  else if (key == "rerank_depth") rerank_depth = parse_int(value, key);
  else if (key == "qa_adapt_steps") qa_adapt_steps = parse_int(value, key);
  else if (key == "qa_adapt_lr") qa_adapt_lr = parse_double(value, key);
  else if (key == "caption_adapt_steps") caption_adapt_steps = parse_int(value, key);
  else if (key == "caption_adapt_lr") caption_adapt_lr = parse_double(value, key);
  else throw ConfigError("unknown config key: " + key);
}

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    line = line.substr(start);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    cfg.apply_override(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_text(buf.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "on" : "off"; };
  os << "train_corpus=" << train_corpus << "\n";
  os << "eval_corpus=" << eval_corpus << "\n";
  os << "vocab_path=" << corpus.vocab_path << "\n";
  os << "T=" << corpus.T << "\nS=" << corpus.S << "\npatch=" << corpus.patch << "\n";
  os << "K_max=" << corpus.K_max << "\nmin_objects=" << corpus.min_objects << "\n";
  os << "L_max=" << corpus.L_max << "\nlabel_swap_noise=" << corpus.label_swap_noise << "\n";
  os << "unique_captions=" << b(corpus.unique_captions) << "\n";
  os << "h=" << model.h << "\nd=" << model.d << "\nheads=" << model.heads << "\n";
  os << "video_layers=" << model.video_layers << "\ntext_layers=" << model.text_layers << "\n";
  os << "fusion_layers=" << model.fusion_layers << "\ntraj_layers=" << model.traj_layers << "\n";
  os << "action_layers=" << model.action_layers << "\n";
  os << "N=" << model.N << "\nM=" << model.M << "\n";
  os << "mlp_ratio=" << model.mlp_ratio << "\ndropout=" << model.dropout << "\n";
  os << "tap_traj=" << model.tap_traj << "\ntap_act=" << model.tap_act << "\n";
  os << "model.use_obj=" << b(model.use_obj) << "\nmodel.use_act=" << b(model.use_act) << "\n";
  os << "loss.vtc=" << b(loss_vtc) << "\nloss.vtm=" << b(loss_vtm) << "\n";
  os << "loss.mlm=" << b(loss_mlm) << "\nloss.plm=" << b(loss_plm) << "\n";
  os << "loss.ota=" << b(loss_ota) << "\nloss.asp=" << b(loss_asp) << "\n";
  os << "lr=" << lr << "\nbeta1=" << beta1 << "\nbeta2=" << beta2 << "\n";
  os << "schedule=" << schedule << "\nsteps=" << steps << "\nbatch_size=" << batch_size << "\n";
  os << "seed=" << seed << "\n";
  os << "checkpoint_dir=" << checkpoint_dir << "\ncheckpoint_every=" << checkpoint_every << "\n";
  os << "metrics_path=" << metrics_path << "\n";
  os << "rerank_depth=" << rerank_depth << "\nqa_adapt_steps=" << qa_adapt_steps << "\n";
  os << "qa_adapt_lr=" << qa_adapt_lr << "\n";
  os << "caption_adapt_steps=" << caption_adapt_steps << "\n";
  os << "caption_adapt_lr=" << caption_adapt_lr << "\n";
  return os.str();
}

}  // namespace stoa
