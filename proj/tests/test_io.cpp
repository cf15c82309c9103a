#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"

using namespace stoa;
using stoa::testing::random_mat;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "stoa_io_tests";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("checkpoint round-trips parameters bit-exactly at 32-bit precision") {
  Rng rng(1);
  ParamStore ps;
  Tensor a = ps.create("block.a", 3, 4, 0.5, rng);
  Tensor b = ps.create("block.b", 1, 7, 0.5, rng);
  const Mat a0 = a.value(), b0 = b.value();
  const fs::path path = temp_dir() / "roundtrip.stoaw";
  save_checkpoint(ps, "hello=world\n", path);

  a.raw_value().setZero();
  b.raw_value().setConstant(42.0);
  const std::string cfg = load_checkpoint(ps, path);
  CHECK(cfg == "hello=world\n");
  CHECK(read_checkpoint_config(path) == "hello=world\n");
  // stored values went through f32, so compare against the f32 cast
  for (Eigen::Index i = 0; i < a0.rows(); ++i)
    for (Eigen::Index j = 0; j < a0.cols(); ++j)
      CHECK(a.value()(i, j) == static_cast<double>(static_cast<float>(a0(i, j))));
  for (Eigen::Index j = 0; j < b0.cols(); ++j)
    CHECK(b.value()(0, j) == static_cast<double>(static_cast<float>(b0(0, j))));
}

TEST_CASE("checkpoint errors: magic, truncation, unknown name, shape mismatch") {
  Rng rng(2);
  ParamStore ps;
  ps.create("w", 2, 2, 0.5, rng);
  const fs::path dir = temp_dir();

  const fs::path bad_magic = dir / "bad_magic.stoaw";
  { std::ofstream(bad_magic, std::ios::binary) << "NOTSTOAW_GARBAGE"; }
  CHECK_THROWS_AS(load_checkpoint(ps, bad_magic), FormatError);

  const fs::path good = dir / "good.stoaw";
  save_checkpoint(ps, "", good);
  const auto full = static_cast<std::size_t>(fs::file_size(good));
  std::string bytes(full, '\0');
  { std::ifstream(good, std::ios::binary).read(bytes.data(), static_cast<std::streamsize>(full)); }
  const fs::path truncated = dir / "truncated.stoaw";
  { std::ofstream(truncated, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(full - 5)); }
  CHECK_THROWS_AS(load_checkpoint(ps, truncated), IoError);
  CHECK_THROWS_AS(load_checkpoint(ps, dir / "does_not_exist.stoaw"), IoError);

  ParamStore other;
  other.create("different_name", 2, 2, 0.5, rng);
  CHECK_THROWS_AS(load_checkpoint(other, good), FormatError);
  ParamStore mismatched;
  mismatched.create("w", 2, 3, 0.5, rng);
  CHECK_THROWS_AS(load_checkpoint(mismatched, good), FormatError);
}

TEST_CASE("config parsing handles comments, whitespace, and reports bad lines") {
  const std::string text =
      "# a comment line\n"
      "\n"
      "  lr=0.5   # trailing comment\n"
      "\tsteps=7\n"
      "loss.ota=off\n";
  const RunConfig cfg = RunConfig::parse_text(text);
  CHECK(cfg.lr == 0.5);
  CHECK(cfg.steps == 7);
  CHECK(!cfg.loss_ota);
  CHECK(cfg.loss_vtc);  // untouched defaults survive

  CHECK_THROWS_AS(RunConfig::parse_text("no_such_key=1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_text("steps=abc\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_text("loss.vtm=maybe\n"), ConfigError);
  CHECK_THROWS_WITH_AS(RunConfig::parse_text("lr=0.1\njust a line\n"),
                       doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse_file("/nonexistent/path.cfg"), IoError);
}

TEST_CASE("config serialize/parse round-trip is lossless") {
  RunConfig cfg = stoa::testing::tiny_run_config();
  cfg.lr = 0.012345678901234567;
  cfg.seed = 9876543210ULL;
  cfg.loss_plm = false;
  cfg.model.use_act = false;
  cfg.schedule = "constant";
  cfg.train_corpus = "some/dir";
  const RunConfig back = RunConfig::parse_text(cfg.serialize());
  CHECK(back.serialize() == cfg.serialize());
  CHECK(back.lr == cfg.lr);
  CHECK(back.seed == cfg.seed);
  CHECK(!back.loss_plm);
  CHECK(!back.model.use_act);
}

TEST_CASE("config validation catches inconsistent geometry") {
  RunConfig cfg = stoa::testing::tiny_run_config();
  cfg.validate();  // baseline is fine
  RunConfig bad = cfg;
  bad.model.T = 3;  // corpus still says 2
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.schedule = "linear";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("vocabulary file round-trip preserves ids") {
  const Vocab builtin = Vocab::builtin();
  const fs::path path = temp_dir() / "vocab.txt";
  {
    std::ofstream os(path);
    for (int i = 0; i < builtin.size(); ++i) os << builtin.token(i) << "\n";
  }
  const Vocab loaded = Vocab::from_file(path);
  REQUIRE(loaded.size() == builtin.size());
  for (int i = 0; i < builtin.size(); ++i) CHECK(loaded.token(i) == builtin.token(i));
  CHECK(loaded.cls == builtin.cls);
  CHECK(loaded.shape_ids == builtin.shape_ids);

  // missing a required token
  const fs::path broken = temp_dir() / "vocab_broken.txt";
  {
    std::ofstream os(broken);
    for (int i = 1; i < builtin.size(); ++i) os << builtin.token(i) << "\n";  // drop [PAD]
  }
  CHECK_THROWS_AS(Vocab::from_file(broken), FormatError);
  CHECK_THROWS_AS(Vocab::from_file(temp_dir() / "nope.txt"), IoError);
}

TEST_CASE("vocabulary lookups and tags") {
  const Vocab v = Vocab::builtin();
  CHECK_THROWS_AS(v.id("zebra"), VocabError);
  CHECK_THROWS_AS(v.token(-1), VocabError);
  CHECK_THROWS_AS(v.token(v.size()), VocabError);
  CHECK(v.tag_of(v.id("circle")) == PosTag::Noun);
  CHECK(v.tag_of(v.id("moves")) == PosTag::Verb);
  CHECK(v.tag_of(v.id("red")) == PosTag::Other);
  CHECK(v.tag_of(v.cls) == PosTag::Special);
  CHECK(v.decode(v.encode({"the", "red", "circle"})) == "the red circle");
  CHECK(pos_tag_from_name(pos_tag_name(PosTag::Verb)) == PosTag::Verb);
  CHECK_THROWS_AS(pos_tag_from_name("ADJ"), FormatError);
}
