#include "stoa/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace stoa {

namespace {

const std::vector<std::string> kSpecials = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[ANS]"};
const std::vector<std::string> kColors = {"red",    "green", "blue",  "yellow",
                                          "purple", "orange", "white", "cyan"};
const std::vector<std::string> kShapes = {"circle", "square", "triangle"};
const std::vector<std::string> kVerbs = {"moves", "bounces", "spins", "shrinks", "grows", "collides"};
const std::vector<std::string> kFunctionWords = {"the",  "and",  "empty", "scene", "toward", "with",
                                                 "what", "color", "is",   "does",  "do"};

}  // namespace

std::string pos_tag_name(PosTag t) {
  switch (t) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Verb: return "VERB";
    case PosTag::Other: return "OTHER";
    case PosTag::Special: return "SPECIAL";
  }
  return "OTHER";
}

PosTag pos_tag_from_name(const std::string& s) {
  if (s == "NOUN") return PosTag::Noun;
  if (s == "VERB") return PosTag::Verb;
  if (s == "OTHER") return PosTag::Other;
  if (s == "SPECIAL") return PosTag::Special;
  throw FormatError("unknown POS tag: " + s);
}

const std::vector<std::string>& Vocab::color_words() { return kColors; }
const std::vector<std::string>& Vocab::shape_words() { return kShapes; }
const std::vector<std::string>& Vocab::verb_words() { return kVerbs; }

Vocab Vocab::builtin() {
  Vocab v;
  for (auto& t : kSpecials) v.tokens_.push_back(t);
  for (auto& t : kFunctionWords) v.tokens_.push_back(t);
  for (auto& t : kColors) v.tokens_.push_back(t);
  for (auto& t : kShapes) v.tokens_.push_back(t);
  for (auto& t : kVerbs) v.tokens_.push_back(t);
  v.index_words();
  return v;
}

Vocab Vocab::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open vocabulary file: " + path.string());
  Vocab v;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) throw FormatError("empty line in vocabulary file");
    v.tokens_.push_back(line);
  }
  v.index_words();
  return v;
}

void Vocab::index_words() {
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw FormatError("duplicate vocabulary token: " + tokens_[i]);
  }
  auto must = [&](const std::string& t) {
    auto it = ids_.find(t);
    if (it == ids_.end()) throw FormatError("vocabulary missing required token: " + t);
    return it->second;
  };
  pad = must("[PAD]");
  cls = must("[CLS]");
  sep = must("[SEP]");
  mask = must("[MASK]");
  ans = must("[ANS]");
  color_ids.clear();
  shape_ids.clear();
  verb_ids.clear();
  for (auto& c : kColors) color_ids.push_back(must(c));
  for (auto& s : kShapes) shape_ids.push_back(must(s));
  for (auto& w : kVerbs) verb_ids.push_back(must(w));
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw VocabError("unknown token: " + token);
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw VocabError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<size_t>(id)];
}

bool Vocab::is_special(int id) const {
  const std::string& t = token(id);
  return std::find(kSpecials.begin(), kSpecials.end(), t) != kSpecials.end();
}

PosTag Vocab::tag_of(int id) const {
  if (is_special(id)) return PosTag::Special;
  if (std::find(shape_ids.begin(), shape_ids.end(), id) != shape_ids.end()) return PosTag::Noun;
  if (std::find(verb_ids.begin(), verb_ids.end(), id) != verb_ids.end()) return PosTag::Verb;
  return PosTag::Other;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (auto& w : words) out.push_back(id(w));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::ostringstream os;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ' ';
    os << token(ids[i]);
  }
  return os.str();
}

}  // namespace stoa
