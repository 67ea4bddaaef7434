#pragma once

#include <cstdint>
#include <filesystem>

#include "npd/model.hpp"

namespace npd {

struct OptConfig {
  double base_lr = 1e-3;
  double final_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.1;
  double grad_clip_norm = 1.0;
  uint32_t total_steps = 1;
};

// lr(step) = final + 0.5 * (base - final) * (1 + cos(pi * step / total_steps)),
// clamped to final_lr past total_steps.
double cosine_lr(const OptConfig& cfg, uint32_t step);

struct OptState {
  OptConfig cfg;
  LmTensors m;
  LmTensors v;
  uint32_t step = 0;

  static OptState init(const LmDims& dims, const OptConfig& cfg);
};

double global_norm(const LmTensors& grad);

// One AdamW step: global-norm clip, cosine lr, decoupled weight decay.
// Rejects non-finite gradients without touching params or state.
void adamw_step(TinyLm& lm, const LmTensors& grad, OptState& opt);

void write_opt_state(const OptState& opt, const std::filesystem::path& path);
OptState read_opt_state(const std::filesystem::path& path);

}  // namespace npd
