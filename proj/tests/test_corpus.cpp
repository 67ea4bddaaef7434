#include <doctest.h>

#include <filesystem>

#include "npd/corpus.hpp"
#include "npd/errors.hpp"
#include "oracles.hpp"

using namespace npd;

TEST_CASE("reverse task: target is the reversed payload plus EOS") {
  Vocab vocab(16);
  TaskSpec spec;
  spec.kind = TaskKind::Reverse;
  std::vector<Token> payload = {vocab.payload(0), vocab.payload(1), vocab.payload(2)};
  auto target = task_target(vocab, spec, payload);
  std::vector<Token> expect = {vocab.payload(2), vocab.payload(1), vocab.payload(0),
                               Vocab::kEos};
  CHECK(target == expect);
}

TEST_CASE("modadd task: digits [3,4,5] mod 10 give [3,7,2]") {
  Vocab vocab(16);
  TaskSpec spec;
  spec.kind = TaskKind::ModAdd;
  spec.alphabet_size = 10;
  std::vector<Token> payload = {vocab.payload(3), vocab.payload(4), vocab.payload(5)};
  auto target = task_target(vocab, spec, payload);
  std::vector<Token> expect = {vocab.payload(3), vocab.payload(7), vocab.payload(2),
                               Vocab::kEos};
  CHECK(target == expect);

  // cross-check arbitrary digit strings against the cumsum oracle
  std::vector<uint32_t> digits = {9, 9, 1, 0, 7, 3, 3};
  std::vector<Token> pl;
  for (auto d : digits) pl.push_back(vocab.payload(d));
  auto got = task_target(vocab, spec, pl);
  auto want = oracles::cumsum_mod(digits, 10);
  REQUIRE(got.size() == want.size() + 1);
  for (size_t i = 0; i < want.size(); ++i) CHECK(got[i] == vocab.payload(want[i]));
  CHECK(got.back() == Vocab::kEos);
}

TEST_CASE("gen_corpus is deterministic and task-correct") {
  Vocab vocab(16);
  TaskSpec spec;
  spec.kind = TaskKind::Reverse;
  spec.prompt_len_min = 1;
  spec.prompt_len_max = 4;
  spec.alphabet_size = 12;
  spec.seed = 99;

  auto a = gen_corpus(vocab, spec, 200);
  auto b = gen_corpus(vocab, spec, 200);
  REQUIRE(a.size() == 200);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prompt == b[i].prompt);
    CHECK(a[i].target == b[i].target);
    // frame: BOS ... SEP / ... EOS, all ids in vocab
    CHECK(a[i].prompt.front() == Vocab::kBos);
    CHECK(a[i].prompt.back() == Vocab::kSep);
    CHECK(a[i].target.back() == Vocab::kEos);
    for (Token t : a[i].prompt) CHECK(vocab.valid(t));
    // independent re-computation of the task function
    std::span<const Token> payload(a[i].prompt.data() + 1, a[i].prompt.size() - 2);
    CHECK(a[i].target == task_target(vocab, spec, payload));
  }
}

TEST_CASE("gen_corpus single fixed example is stable") {
  Vocab vocab(16);
  TaskSpec spec;
  spec.prompt_len_min = 1;
  spec.prompt_len_max = 1;
  spec.seed = 7;
  auto a = gen_corpus(vocab, spec, 1);
  auto b = gen_corpus(vocab, spec, 1);
  REQUIRE(a.size() == 1);
  CHECK(a[0].prompt.size() == 3);  // BOS x SEP
  CHECK(a[0].prompt == b[0].prompt);
}

TEST_CASE("gen_corpus rejects an alphabet larger than the vocab payload") {
  Vocab vocab(16);
  TaskSpec spec;
  spec.alphabet_size = 13;  // payload is 12
  CHECK_THROWS_AS(gen_corpus(vocab, spec, 1), NpdError);
}

TEST_CASE("split_corpus fractions") {
  Vocab vocab(16);
  TaskSpec spec;
  auto corpus = gen_corpus(vocab, spec, 100);

  auto [train, eval] = split_corpus(corpus, 0.9, 0.1);
  CHECK(train.size() == 90);
  CHECK(eval.size() == 10);
  CHECK(train[0].id == corpus[0].id);
  CHECK(eval[0].id == corpus[90].id);

  auto ten = std::vector<Example>(corpus.begin(), corpus.begin() + 10);
  auto [t5, e5] = split_corpus(ten, 0.5, 0.5);
  CHECK(t5.size() == 5);
  CHECK(e5.size() == 5);

  auto one = std::vector<Example>(corpus.begin(), corpus.begin() + 1);
  CHECK_THROWS_AS(split_corpus(one, 0.5, 0.5), NpdError);
}

TEST_CASE("corpus jsonl round-trip") {
  Vocab vocab(16);
  TaskSpec spec;
  auto corpus = gen_corpus(vocab, spec, 50);
  auto path = std::filesystem::temp_directory_path() / "npd_test_corpus.jsonl";
  write_corpus(corpus, path);
  auto back = read_corpus(path);
  REQUIRE(back.size() == corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].id == corpus[i].id);
    CHECK(back[i].prompt == corpus[i].prompt);
    CHECK(back[i].target == corpus[i].target);
  }
  std::filesystem::remove(path);
}
