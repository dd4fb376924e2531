#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ncelm/corpus.hpp"
#include "ncelm/optim.hpp"
#include "ncelm/rng.hpp"

using namespace ncelm;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "ncelm_test_corpus";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

TokenStream iota_stream(std::size_t n) {
  TokenStream s;
  for (std::size_t i = 0; i < n; ++i) s.ids.push_back(static_cast<WordId>(i));
  return s;
}

}  // namespace

TEST_CASE("vocabulary: hand count") {
  const auto v = Vocabulary::build("a a b\n", 100);
  CHECK(v.size() == 4);
  CHECK(v.count(v.id("a")) == 2);
  CHECK(v.count(v.id("b")) == 1);
  CHECK(v.count(v.eos_id()) == 1);
  CHECK(v.find("<unk>").has_value());
  CHECK(v.word(0) == "a");  // most frequent first
  CHECK(v.id("z") == v.unk_id());
  CHECK_FALSE(v.find("z").has_value());
}

TEST_CASE("vocabulary: cap folds the tail into <unk>") {
  const auto v = Vocabulary::build("a a a b b c d\n", 4);
  CHECK(v.size() == 4);
  CHECK(v.find("a"));
  CHECK(v.find("b"));
  CHECK_FALSE(v.find("c"));
  CHECK(v.count(v.unk_id()) == 2);
}

TEST_CASE("vocabulary: ties keep first occurrence, rebuild is identical") {
  const std::string text = "y x z x y z\n";
  const auto a = Vocabulary::build(text, 10), b = Vocabulary::build(text, 10);
  CHECK(a == b);
  CHECK(a.id("y") < a.id("x"));
  CHECK(a.id("x") < a.id("z"));
  CHECK(Vocabulary::from_words(a.words(), a.counts()) == a);
  CHECK_THROWS(Vocabulary::build("   \n\t", 10));
}

TEST_CASE("encode and decode") {
  const auto v = Vocabulary::build("a b\n", 10);
  CHECK(encode(v, "a b\n").ids == std::vector<WordId>{v.id("a"), v.id("b"), v.eos_id()});
  CHECK(encode(v, "z").ids == std::vector<WordId>{v.unk_id()});
  const auto words = decode(v, encode(v, "b q a\n"));
  CHECK(words == std::vector<std::string>{"b", "<unk>", "a", "<eos>"});
}

TEST_CASE("make_batches: hand trace") {
  const auto plan = make_batches(iota_stream(13), 2, 3);
  CHECK(plan.row_length() == 6);
  CHECK(plan.num_batches() == 1);
  const Batch b = plan.batch(0);
  CHECK(b.x == std::vector<WordId>{0, 1, 2, 6, 7, 8});
  CHECK(b.y == std::vector<WordId>{1, 2, 3, 7, 8, 9});
  const auto tail = plan.tail();
  REQUIRE(tail.has_value());
  CHECK(tail->steps == 2);
  CHECK(tail->x == std::vector<WordId>{3, 4, 9, 10});
  CHECK(tail->y == std::vector<WordId>{4, 5, 10, 11});
}

TEST_CASE("make_batches: boundary and errors") {
  CHECK(make_batches(iota_stream(8), 2, 3).num_batches() == 1);
  CHECK_FALSE(make_batches(iota_stream(8), 2, 3).tail().has_value());
  try {
    make_batches(iota_stream(7), 2, 3);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("8") != std::string::npos);
  }
}

TEST_CASE("batches walk every row continuously") {
  const auto plan = make_batches(iota_stream(100), 4, 5);
  CHECK(plan.row_length() == 25);
  CHECK(plan.num_batches() == 4);  // 24 predictable positions per row
  for (std::size_t i = 0; i + 1 < plan.num_batches(); ++i) {
    const Batch a = plan.batch(i), b = plan.batch(i + 1);
    for (std::size_t r = 0; r < 4; ++r) CHECK(b.input(r, 0) == a.target(r, 4));
  }
}

TEST_CASE("embeddings: matched, missing and fallback") {
  const auto vocab = Vocabulary::build("cat dog bird\n", 10);
  const auto path = write_temp("emb.txt", "2 3\ncat 0.1 0.2 0.3\ndog -1 -2 -3\n");
  RngStream rng(1);
  const auto fallback = InitHeuristic::symmetric(0.05);
  EmbeddingLoadOptions opts;
  const auto t = load_embeddings(path, vocab, opts, fallback, rng);
  CHECK(t.table.rows() == vocab.size());
  CHECK(t.table.cols() == 3);
  CHECK(t.matched == 2);
  CHECK(t.missing == vocab.size() - 2);
  CHECK(t.table(vocab.id("cat"), 1) == 0.2);
  CHECK(t.table(vocab.id("dog"), 2) == -3.0);
  CHECK(t.found[vocab.id("cat")]);
  CHECK_FALSE(t.found[vocab.id("bird")]);
  for (double x : t.table.row(vocab.id("bird"))) {
    CHECK(x >= -0.05);
    CHECK(x < 0.05);
  }
}

TEST_CASE("embeddings: short line names the line") {
  const auto vocab = Vocabulary::build("a b\n", 10);
  std::string text = "5 50\n";
  std::string line = "a";
  for (int i = 0; i < 49; ++i) line += " 0.5";
  text += line + "\n";
  const auto path = write_temp("bad.txt", text);
  RngStream rng(1);
  try {
    load_embeddings(path, vocab, {}, InitHeuristic::symmetric(0.1), rng);
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("embeddings: dimension mismatch and lowercase switch") {
  const auto vocab = Vocabulary::build("apple\n", 10);
  const auto path = write_temp("case.txt", "1 2\nApple 1 2\n");
  RngStream rng(1);
  EmbeddingLoadOptions opts;
  opts.expected_dim = 3;
  CHECK_THROWS(load_embeddings(path, vocab, opts, InitHeuristic::symmetric(0.1), rng));
  opts.expected_dim = 2;
  CHECK(load_embeddings(path, vocab, opts, InitHeuristic::symmetric(0.1), rng).matched == 0);
  opts.lowercase = true;
  CHECK(load_embeddings(path, vocab, opts, InitHeuristic::symmetric(0.1), rng).matched == 1);
}

TEST_CASE("read_text_file reports missing files") {
  CHECK_THROWS(read_text_file("/nonexistent/definitely/not/here.txt"));
}
