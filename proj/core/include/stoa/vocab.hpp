#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "stoa/errors.hpp"

namespace stoa {

enum class PosTag { Noun, Verb, Other, Special };

std::string pos_tag_name(PosTag t);
PosTag pos_tag_from_name(const std::string& s);

// Closed template vocabulary. Tokenization is whitespace over known tokens;
// POS tags are derived from token class membership (shapes are nouns, motion
// verbs are verbs, specials are special, everything else is other).
class Vocab {
 public:
  static Vocab builtin();
  // One token per line, line number = id. Must contain the special tokens and
  // the full color/shape/verb word lists.
  static Vocab from_file(const std::filesystem::path& path);

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  bool is_special(int id) const;
  PosTag tag_of(int id) const;

  std::vector<int> encode(const std::vector<std::string>& words) const;
  std::string decode(const std::vector<int>& ids) const;

  int pad{-1}, cls{-1}, sep{-1}, mask{-1}, ans{-1};
  std::vector<int> color_ids;  // 8 colors
  std::vector<int> shape_ids;  // circle, square, triangle
  std::vector<int> verb_ids;   // moves, bounces, spins, shrinks, grows, collides

  static const std::vector<std::string>& color_words();
  static const std::vector<std::string>& shape_words();
  static const std::vector<std::string>& verb_words();

 private:
  void index_words();
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace stoa
