#include "npd/optim.hpp"

#include <cmath>

#include "npd/errors.hpp"
#include "npd/io.hpp"
#include "npd/kernels.hpp"

namespace npd {

double cosine_lr(const OptConfig& cfg, uint32_t step) {
  if (step >= cfg.total_steps) return cfg.final_lr;
  double frac = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return cfg.final_lr +
         0.5 * (cfg.base_lr - cfg.final_lr) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

OptState OptState::init(const LmDims& dims, const OptConfig& cfg) {
  OptState s;
  s.cfg = cfg;
  s.m = LmTensors::zeros(dims);
  s.v = LmTensors::zeros(dims);
  return s;
}

double global_norm(const LmTensors& grad) {
  double sq = 0.0;
  grad.for_each([&](const char*, const std::vector<double>& t) {
    sq += kernels::dot(t.data(), t.data(), t.size());
  });
  return std::sqrt(sq);
}

void adamw_step(TinyLm& lm, const LmTensors& grad, OptState& opt) {
  if (!(grad.dims == lm.dims()))
    throw NpdError(ErrorKind::Input, "adamw_step: gradient shape mismatch");
  if (!grad.all_finite())
    throw NpdError(ErrorKind::Numerical, "adamw_step: non-finite gradient, step rejected");

  double gn = global_norm(grad);
  double grad_scale = 1.0;
  if (opt.cfg.grad_clip_norm > 0.0 && gn > opt.cfg.grad_clip_norm)
    grad_scale = opt.cfg.grad_clip_norm / gn;

  double lr = cosine_lr(opt.cfg, opt.step);
  double bias1 = 1.0 - std::pow(opt.cfg.beta1, static_cast<double>(opt.step) + 1.0);
  double bias2 = 1.0 - std::pow(opt.cfg.beta2, static_cast<double>(opt.step) + 1.0);

  double* mp[5];
  double* vp[5];
  size_t idx = 0;
  opt.m.for_each([&](const char*, std::vector<double>& t) { mp[idx++] = t.data(); });
  idx = 0;
  opt.v.for_each([&](const char*, std::vector<double>& t) { vp[idx++] = t.data(); });
  idx = 0;
  const std::vector<double>* gp[5];
  grad.for_each([&](const char*, const std::vector<double>& t) { gp[idx++] = &t; });
  idx = 0;
  lm.p.for_each([&](const char*, std::vector<double>& t) {
    kernels::adamw_update(t.data(), gp[idx]->data(), mp[idx], vp[idx], t.size(),
                          opt.cfg.beta1, opt.cfg.beta2, opt.cfg.eps, lr,
                          opt.cfg.weight_decay, bias1, bias2, grad_scale);
    ++idx;
  });
  opt.step += 1;
  lm.version += 1;
}

namespace {
constexpr char kOptMagic[9] = "NPDOPT01";
}

void write_opt_state(const OptState& opt, const std::filesystem::path& path) {
  io::BinaryWriter w;
  w.magic(kOptMagic);
  const LmDims& d = opt.m.dims;
  w.u32(d.vocab);
  w.u32(d.window);
  w.u32(d.embed_dim);
  w.u32(d.hidden_dim);
  w.u32(opt.step);
  w.u32(opt.cfg.total_steps);
  w.f64(opt.cfg.base_lr);
  w.f64(opt.cfg.final_lr);
  w.f64(opt.cfg.beta1);
  w.f64(opt.cfg.beta2);
  w.f64(opt.cfg.eps);
  w.f64(opt.cfg.weight_decay);
  w.f64(opt.cfg.grad_clip_norm);
  opt.m.for_each([&](const char*, const std::vector<double>& t) {
    w.f64_array(t.data(), t.size());
  });
  opt.v.for_each([&](const char*, const std::vector<double>& t) {
    w.f64_array(t.data(), t.size());
  });
  w.commit(path);
}

OptState read_opt_state(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic(kOptMagic);
  LmDims d;
  d.vocab = r.u32();
  d.window = r.u32();
  d.embed_dim = r.u32();
  d.hidden_dim = r.u32();
  uint32_t step = r.u32();
  OptConfig cfg;
  cfg.total_steps = r.u32();
  cfg.base_lr = r.f64();
  cfg.final_lr = r.f64();
  cfg.beta1 = r.f64();
  cfg.beta2 = r.f64();
  cfg.eps = r.f64();
  cfg.weight_decay = r.f64();
  cfg.grad_clip_norm = r.f64();
  OptState s = OptState::init(d, cfg);
  s.step = step;
  s.m.for_each([&](const char*, std::vector<double>& t) {
    r.f64_array(t.data(), t.size());
  });
  s.v.for_each([&](const char*, std::vector<double>& t) {
    r.f64_array(t.data(), t.size());
  });
  r.verify_trailing_crc();
  return s;
}

}  // namespace npd
