#include <algorithm>
#include <cctype>
#include <random>

#include "doctest.h"
#include "promptprobe/error.hpp"
#include "promptprobe/vocab.hpp"
#include "test_support.hpp"

using namespace promptprobe;

namespace {

// Naive per-token scan: walk the prompt byte by byte building lowercase
// letter runs, then compare each run against every vocabulary entry.
std::vector<std::uint8_t> scan_labels(const std::string& text, const std::vector<std::string>& vocab) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text + " ") {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  std::vector<std::uint8_t> out(vocab.size(), 0);
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    for (const auto& w : words) {
      if (w == vocab[j]) out[j] = 1;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("vocab") {

TEST_CASE("tokenize lowercases and splits on non-letters") {
  CHECK(tokenize("A Red-Cat, 8k x2!") == std::vector<std::string>{"a", "red", "cat", "k", "x"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("123 ... ").empty());
}

TEST_CASE("frequency order with lexicographic ties") {
  const auto v = build_vocabulary({{0, "red cat"}, {1, "red dog"}}, 2, {});
  CHECK(v.tokens() == std::vector<std::string>{"red", "cat"});
  CHECK(v.index_of("cat") == 1);
  CHECK(v.index_of("dog") == v.size());
}

TEST_CASE("too few eligible tokens reports the available count") {
  try {
    build_vocabulary({{0, "castle"}, {1, "castle"}}, 2, {});
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& err) {
    CHECK(std::string(err.what()).find("only 1") != std::string::npos);
  }
  CHECK_THROWS_AS(build_vocabulary({}, 1, {}), InvalidArgument);
  CHECK_THROWS_AS(build_vocabulary({{0, "castle"}}, 0, {}), InvalidArgument);
}

TEST_CASE("stopwords and short tokens are excluded") {
  const auto v = build_vocabulary({{0, "the cat of the sea at an oak"}}, 3, default_stopwords());
  CHECK(v.tokens() == std::vector<std::string>{"cat", "oak", "sea"});
}

TEST_CASE("token filter hook rejects candidates") {
  const TokenFilter no_c = [](std::string_view t) { return t.front() != 'c'; };
  const auto v = build_vocabulary({{0, "cat cat dog castle bird"}}, 2, {}, no_c);
  CHECK(v.tokens() == std::vector<std::string>{"bird", "dog"});
}

TEST_CASE("label vector examples") {
  const Vocabulary v({"dog", "cat", "car"});
  CHECK(make_label_vector({0, "a dog and a cat"}, v) == std::vector<std::uint8_t>{1, 1, 0});
  CHECK(make_label_vector({0, "!!! 42"}, v) == std::vector<std::uint8_t>{0, 0, 0});
  CHECK(make_label_vector({0, "car, CAT; dog"}, v) == std::vector<std::uint8_t>{1, 1, 1});
  // Token match, not substring match.
  CHECK(make_label_vector({0, "catalog of cars"}, v) == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("label matrix composes row calls") {
  const Vocabulary v({"dog", "cat", "car"});
  const std::vector<PromptRecord> prompts = {{0, "a dog"}, {1, "cat car"}};
  const auto m = make_label_matrix(prompts, v);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  for (std::size_t i = 0; i < 2; ++i) CHECK(m.row(i) == make_label_vector(prompts[i], v));
  const auto empty = make_label_matrix({}, v);
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 3);
}

TEST_CASE("label matrix matches a naive scan on random prompts") {
  std::mt19937_64 rng(100);
  const std::vector<std::string> words = {"cat", "Dog", "sky", "skyline", "red", "blue", "oak", "the", "a",
                                          "catalog", "RED", "x9", "-", "  ", ",", "mountain"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> len(0, 12);
  std::vector<PromptRecord> prompts;
  for (std::uint64_t i = 0; i < 100; ++i) {
    std::string text;
    for (int k = len(rng); k > 0; --k) {
      text += words[pick(rng)];
      if (rng() % 3 != 0) text += ' ';
    }
    prompts.push_back({i, text});
  }
  const Vocabulary v({"cat", "dog", "sky", "red", "blue", "oak", "mountain", "catalog", "skyline"});
  const auto m = make_label_matrix(prompts, v);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CHECK(m.row(i) == scan_labels(prompts[i].text, v.tokens()));
  }
  const auto dense = m.to_eigen();
  for (std::size_t j = 0; j < v.size(); ++j) {
    CHECK(dense.col(static_cast<Eigen::Index>(j)).sum() == static_cast<double>(m.column_sum(j)));
  }
}

TEST_CASE("labels ignore word order and repetition") {
  const Vocabulary v({"cat", "dog", "sky", "red"});
  std::mt19937_64 rng(9);
  std::vector<std::string> words = {"red", "cat", "under", "sky", "tree"};
  const auto base = make_label_vector({0, "red cat under sky tree"}, v);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(words.begin(), words.end(), rng);
    std::string text;
    for (const auto& w : words) text += w + " " + (rng() % 2 ? w + " " : "");
    CHECK(make_label_vector({0, text}, v) == base);
  }
}

TEST_CASE("every vocabulary token appears in its source corpus") {
  std::mt19937_64 rng(21);
  const std::vector<std::string> pool = {"castle", "dragon", "forest", "neon", "portrait", "city",
                                         "river", "the", "of", "sunset", "robot", "glass"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<PromptRecord> prompts;
  for (std::uint64_t i = 0; i < 60; ++i) {
    std::string text;
    for (int k = 0; k < 4; ++k) text += pool[pick(rng)] + " ";
    prompts.push_back({i, text});
  }
  const auto v = build_vocabulary(prompts, 8, default_stopwords());
  const auto m = make_label_matrix(prompts, v);
  for (std::size_t j = 0; j < v.size(); ++j) CHECK(m.column_sum(j) > 0);
}

TEST_CASE("vocabulary file round trip") {
  promptprobe::testing::TempDir dir("vocab");
  const Vocabulary v({"red", "cat", "mountain"});
  v.save(dir / "v.txt");
  CHECK(Vocabulary::load(dir / "v.txt") == v);
  CHECK_THROWS_AS(Vocabulary({"red", "red"}), DataError);
  CHECK_THROWS_AS(Vocabulary::load(dir / "missing.txt"), IoError);
}

}  // TEST_SUITE
