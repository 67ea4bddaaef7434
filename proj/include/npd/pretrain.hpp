#pragma once

#include <span>

#include "npd/corpus.hpp"
#include "npd/model.hpp"
#include "npd/optim.hpp"

namespace npd {

struct PretrainConfig {
  uint32_t epochs = 30;
  uint32_t batch_packs = 4;
  uint32_t pack_len = 256;
  OptConfig opt;  // total_steps derived from epochs and corpus size
  uint64_t seed = 42;
};

struct PretrainResult {
  TinyLm model;
  double eval_token_accuracy = 0.0;
};

// Plain CE training on ground-truth targets, deterministic given the seed.
PretrainResult pretrain(TinyLm model, std::span<const Example> train,
                        std::span<const Example> eval, const PretrainConfig& cfg);

// Teacher-forced argmax accuracy over response positions.
double token_accuracy(const TinyLm& lm, std::span<const Example> examples);

}  // namespace npd
