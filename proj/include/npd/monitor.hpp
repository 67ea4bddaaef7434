#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npd/corpus.hpp"
#include "npd/model.hpp"
#include "npd/sampling.hpp"

namespace npd {

struct KlLagSample {
  uint64_t step = 0;
  double kl = 0.0;
  uint32_t learner_version = 0;
  uint32_t generator_version = 0;
  size_t num_positions = 0;
};

// Mean exact full-vocabulary KL(learner || generator) over the response
// positions of probe trajectories sampled from the generator snapshot.
KlLagSample kl_lag(const TinyLm& learner, const TinyLm& generator,
                   std::span<const Trajectory> probes);

// Mean full KL(p_model || q_model) at the response positions of ground-truth
// example sequences; the held-out teacher/student alignment metric.
double mean_kl_on_examples(const TinyLm& p_model, const TinyLm& q_model,
                           std::span<const Example> examples);

// Steps whose loss exceeds rolling-median + z * rolling-MAD over a trailing
// window. Pure diagnostic.
std::vector<size_t> spike_report(std::span<const double> series, size_t window,
                                 double z_threshold);

}  // namespace npd
