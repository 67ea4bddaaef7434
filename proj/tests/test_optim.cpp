#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "npd/errors.hpp"
#include "npd/optim.hpp"
#include "npd/rng.hpp"

using namespace npd;

namespace {
const LmDims kDims{8, 2, 3, 4};
}

TEST_CASE("cosine schedule endpoints") {
  OptConfig cfg;
  cfg.base_lr = 1e-3;
  cfg.final_lr = 1e-4;
  cfg.total_steps = 100;
  CHECK(cosine_lr(cfg, 0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(cosine_lr(cfg, 100) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(cosine_lr(cfg, 50) == doctest::Approx(1e-4 + 0.5 * 9e-4).epsilon(1e-9));
  CHECK(cosine_lr(cfg, 1000) == 1e-4);  // clamped past the horizon
}

TEST_CASE("zero gradient with zero weight decay changes nothing but the version") {
  TinyLm lm = TinyLm::random_init(kDims, 5);
  TinyLm orig = lm;
  OptConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.total_steps = 10;
  OptState opt = OptState::init(kDims, cfg);
  LmTensors grad = LmTensors::zeros(kDims);
  adamw_step(lm, grad, opt);
  CHECK(lm.version == orig.version + 1);
  CHECK(opt.step == 1);
  bool same = true;
  lm.p.for_each([&](const char* name, std::vector<double>& t) {
    orig.p.for_each([&](const char* name2, std::vector<double>& t2) {
      if (std::string(name) == name2 && t != t2) same = false;
    });
  });
  CHECK(same);
}

TEST_CASE("global-norm clipping scales a norm-10 gradient to norm 1") {
  LmTensors grad = LmTensors::zeros(kDims);
  // distribute mass so the global norm is exactly 10
  grad.w1[0] = 6.0;
  grad.w2[0] = 8.0;
  CHECK(global_norm(grad) == doctest::Approx(10.0).epsilon(1e-12));
  double clip = 1.0;
  double scale = clip / global_norm(grad);
  LmTensors clipped = grad;
  clipped.scale(scale);
  CHECK(global_norm(clipped) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("non-finite gradient rejects the step") {
  TinyLm lm = TinyLm::random_init(kDims, 6);
  TinyLm orig = lm;
  OptState opt = OptState::init(kDims, OptConfig{});
  LmTensors grad = LmTensors::zeros(kDims);
  grad.b2[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adamw_step(lm, grad, opt), NpdError);
  CHECK(lm.version == orig.version);
  CHECK(opt.step == 0);
}

TEST_CASE("version strictly increases across steps and only then") {
  TinyLm lm = TinyLm::random_init(kDims, 7);
  OptState opt = OptState::init(kDims, OptConfig{});
  rng::Stream s(99);
  for (int i = 0; i < 5; ++i) {
    LmTensors grad = LmTensors::zeros(kDims);
    grad.for_each([&](const char*, std::vector<double>& t) {
      for (auto& x : t) x = s.next_double() - 0.5;
    });
    uint32_t before = lm.version;
    adamw_step(lm, grad, opt);
    CHECK(lm.version == before + 1);
  }
  CHECK(opt.step == 5);
}

TEST_CASE("optimizer state round-trips through its file format") {
  OptConfig cfg;
  cfg.base_lr = 2e-3;
  cfg.total_steps = 77;
  OptState opt = OptState::init(kDims, cfg);
  rng::Stream s(123);
  opt.m.for_each([&](const char*, std::vector<double>& t) {
    for (auto& x : t) x = s.next_double();
  });
  opt.v.for_each([&](const char*, std::vector<double>& t) {
    for (auto& x : t) x = s.next_double();
  });
  opt.step = 13;

  auto path = std::filesystem::temp_directory_path() / "npd_test_opt.bin";
  write_opt_state(opt, path);
  OptState back = read_opt_state(path);
  CHECK(back.step == 13);
  CHECK(back.cfg.total_steps == 77);
  CHECK(back.cfg.base_lr == 2e-3);
  CHECK(back.m.w1 == opt.m.w1);
  CHECK(back.v.embed == opt.v.embed);
  std::filesystem::remove(path);
}
