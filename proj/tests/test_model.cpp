#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fd.hpp"
#include "npd/checkpoint.hpp"
#include "npd/errors.hpp"
#include "npd/model.hpp"
#include "npd/rng.hpp"

using namespace npd;

namespace {

const LmDims kTinyDims{8, 3, 4, 5};

std::vector<uint16_t> zeros16(size_t n) { return std::vector<uint16_t>(n, 0); }

}  // namespace

TEST_CASE("zero parameters give all-zero logits and uniform CE of ln V") {
  LmDims dims{16, 6, 8, 12};
  TinyLm lm = TinyLm::zeros(dims);
  std::vector<Token> tokens = {0, 5, 6, 7, 1};
  auto segs = zeros16(tokens.size());
  auto logits = forward_logits(lm, tokens, segs);
  for (double v : logits) CHECK(v == 0.0);

  std::vector<uint8_t> mask = {0, 0, 1, 1, 1};
  auto res = ce_loss_and_grad(lm, tokens, segs, mask);
  CHECK(res.loss == doctest::Approx(std::log(16.0)).epsilon(1e-12));
  CHECK(std::abs(res.loss - 2.7726) < 1e-4);
}

TEST_CASE("identical same-segment contexts give identical logit rows") {
  TinyLm lm = TinyLm::random_init(kTinyDims, 42);
  // window 3: positions 4 and 8 both see context (5,6,7)
  std::vector<Token> tokens = {4, 5, 6, 7, 3, 5, 6, 7, 3};
  auto segs = zeros16(tokens.size());
  auto logits = forward_logits(lm, tokens, segs);
  uint32_t v = kTinyDims.vocab;
  for (uint32_t c = 0; c < v; ++c)
    CHECK(logits[4 * v + c] == logits[8 * v + c]);
}

TEST_CASE("a position right after a segment boundary matches sequence start") {
  TinyLm lm = TinyLm::random_init(kTinyDims, 43);
  std::vector<Token> a = {6};
  auto la = forward_logits(lm, a, zeros16(1));

  std::vector<Token> b = {4, 5, 7, 6};
  std::vector<uint16_t> segs = {0, 0, 0, 1};  // boundary before the last token
  auto lb = forward_logits(lm, b, segs);
  uint32_t v = kTinyDims.vocab;
  for (uint32_t c = 0; c < v; ++c) CHECK(la[0 * v + c] == lb[3 * v + c]);
}

TEST_CASE("token id out of range is rejected") {
  TinyLm lm = TinyLm::zeros(kTinyDims);
  std::vector<Token> tokens = {0, 99};
  CHECK_THROWS_AS(forward_logits(lm, tokens, zeros16(2)), NpdError);
}

TEST_CASE("ce with a single masked position equals standalone per-position CE") {
  TinyLm lm = TinyLm::random_init(kTinyDims, 44);
  std::vector<Token> tokens = {0, 5, 6, 7, 1};
  auto segs = zeros16(tokens.size());
  std::vector<uint8_t> one = {0, 0, 0, 1, 0};
  auto res = ce_loss_and_grad(lm, tokens, segs, one);

  auto logits = forward_logits(lm, tokens, segs);
  uint32_t v = kTinyDims.vocab;
  std::span<const double> row(logits.data() + 3 * v, v);
  std::vector<double> exps(v);
  auto st = softmax_stats(row, exps);
  double expect = -(row[tokens[3]] - st.max - std::log(st.sum));
  CHECK(res.loss == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("ce requires at least one masked position") {
  TinyLm lm = TinyLm::zeros(kTinyDims);
  std::vector<Token> tokens = {0, 5};
  std::vector<uint8_t> mask = {0, 0};
  CHECK_THROWS_AS(ce_loss_and_grad(lm, tokens, zeros16(2), mask), NpdError);
}

TEST_CASE("analytic CE gradient matches central finite differences") {
  for (uint64_t draw = 0; draw < 3; ++draw) {
    TinyLm lm = TinyLm::random_init(kTinyDims, 100 + draw);
    rng::Stream s(200 + draw);
    std::vector<Token> tokens(9);
    for (auto& t : tokens) t = s.below(kTinyDims.vocab);
    std::vector<uint16_t> segs = {0, 0, 0, 0, 1, 1, 1, 2, 2};
    std::vector<uint8_t> mask = {0, 1, 1, 1, 0, 1, 1, 0, 1};

    auto res = ce_loss_and_grad(lm, tokens, segs, mask);
    double err = fd::max_rel_error(lm, res.grad, [&](const TinyLm& m) {
      return ce_loss_and_grad(m, tokens, segs, mask).loss;
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("checkpoint round-trip preserves logits bit-exactly") {
  TinyLm lm = TinyLm::random_init(kTinyDims, 77);
  lm.version = 123;
  auto path = std::filesystem::temp_directory_path() / "npd_test_ckpt.bin";
  uint32_t crc1 = write_checkpoint(lm, path);
  TinyLm back = read_checkpoint(path);
  CHECK(back.version == 123);
  CHECK(back.dims() == lm.dims());

  std::vector<Token> tokens = {0, 4, 5, 6, 7, 1};
  auto segs = zeros16(tokens.size());
  auto la = forward_logits(lm, tokens, segs);
  auto lb = forward_logits(back, tokens, segs);
  CHECK(std::memcmp(la.data(), lb.data(), la.size() * sizeof(double)) == 0);

  uint32_t crc2 = write_checkpoint(back, path);
  CHECK(crc1 == crc2);

  // corrupt one payload byte: CRC validation must fail
  auto bytes = std::filesystem::file_size(path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(bytes / 2));
    char c = 0x5a;
    f.write(&c, 1);
  }
  CHECK_THROWS_AS(read_checkpoint(path), NpdError);
  std::filesystem::remove(path);
}
