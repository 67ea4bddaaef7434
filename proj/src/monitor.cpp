#include "npd/monitor.hpp"

#include <algorithm>
#include <cmath>

#include "npd/errors.hpp"
#include "npd/kernels.hpp"
#include "npd/parallel.hpp"

namespace npd {

namespace {

// exact KL(P || Q) from two logit rows
double kl_rows(std::span<const double> p_logits, std::span<const double> q_logits,
               Workspace& wp, Workspace& wq) {
  SoftmaxStats sp = softmax_stats(p_logits, wp.exps);
  SoftmaxStats sq = softmax_stats(q_logits, wq.exps);
  double lzp = std::log(sp.sum);
  double lzq = std::log(sq.sum);
  double kl = 0.0;
  for (size_t i = 0; i < p_logits.size(); ++i) {
    double pi = wp.exps[i] / sp.sum;
    double lp = p_logits[i] - sp.max - lzp;
    double lq = q_logits[i] - sq.max - lzq;
    kl += pi * (lp - lq);
  }
  return kl;
}

struct SeqKl {
  double sum = 0.0;
  size_t positions = 0;
};

SeqKl kl_over_response(const TinyLm& p_model, const TinyLm& q_model,
                       std::span<const Token> prompt, std::span<const Token> response) {
  SeqKl out;
  if (response.empty()) return out;
  std::vector<Token> seq;
  seq.reserve(prompt.size() + response.size());
  seq.insert(seq.end(), prompt.begin(), prompt.end());
  seq.insert(seq.end(), response.begin(), response.end());
  thread_local Workspace wp, wq;
  wp.resize(p_model.dims());
  wq.resize(q_model.dims());
  for (size_t t = prompt.size(); t < seq.size(); ++t) {
    forward_at(p_model, seq, {}, t, wp);
    forward_at(q_model, seq, {}, t, wq);
    out.sum += kl_rows(wp.logits, wq.logits, wp, wq);
    out.positions += 1;
  }
  return out;
}

}  // namespace

KlLagSample kl_lag(const TinyLm& learner, const TinyLm& generator,
                   std::span<const Trajectory> probes) {
  if (learner.dims().vocab != generator.dims().vocab)
    throw NpdError(ErrorKind::Config, "kl_lag: vocab mismatch");
  for (const auto& tr : probes)
    if (tr.policy_version != generator.version)
      throw NpdError(ErrorKind::Provenance,
                     "kl_lag: probe trajectory " + std::to_string(tr.id) +
                         " was sampled from policy v" +
                         std::to_string(tr.policy_version) + ", generator is v" +
                         std::to_string(generator.version));

  std::vector<SeqKl> partial(probes.size());
  par::parallel_for(probes.size(), [&](size_t i) {
    partial[i] = kl_over_response(learner, generator, probes[i].prompt,
                                  probes[i].response);
  });
  KlLagSample s;
  s.learner_version = learner.version;
  s.generator_version = generator.version;
  double sum = 0.0;
  for (const auto& pk : partial) {
    sum += pk.sum;
    s.num_positions += pk.positions;
  }
  s.kl = s.num_positions > 0 ? sum / static_cast<double>(s.num_positions) : 0.0;
  return s;
}

double mean_kl_on_examples(const TinyLm& p_model, const TinyLm& q_model,
                           std::span<const Example> examples) {
  std::vector<SeqKl> partial(examples.size());
  par::parallel_for(examples.size(), [&](size_t i) {
    partial[i] = kl_over_response(p_model, q_model, examples[i].prompt,
                                  examples[i].target);
  });
  double sum = 0.0;
  size_t n = 0;
  for (const auto& pk : partial) {
    sum += pk.sum;
    n += pk.positions;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

std::vector<size_t> spike_report(std::span<const double> series, size_t window,
                                 double z_threshold) {
  if (window < 1 || series.size() < window)
    throw NpdError(ErrorKind::Input, "spike_report: series shorter than window");
  std::vector<size_t> spikes;
  std::vector<double> buf(window), dev(window);
  for (size_t i = window - 1; i < series.size(); ++i) {
    std::copy(series.begin() + (i + 1 - window), series.begin() + (i + 1), buf.begin());
    std::sort(buf.begin(), buf.end());
    double med = buf[window / 2];
    for (size_t j = 0; j < window; ++j) dev[j] = std::abs(buf[j] - med);
    std::sort(dev.begin(), dev.end());
    double mad = dev[window / 2];
    if (series[i] > med + z_threshold * mad) spikes.push_back(i);
  }
  return spikes;
}

}  // namespace npd
