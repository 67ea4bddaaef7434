#include "npd/pretrain.hpp"

#include <cmath>

#include "npd/errors.hpp"
#include "npd/packing.hpp"
#include "npd/parallel.hpp"
#include "npd/rng.hpp"
#include "npd/trainer.hpp"

namespace npd {

PretrainResult pretrain(TinyLm model, std::span<const Example> train,
                        std::span<const Example> eval, const PretrainConfig& cfg) {
  if (train.empty()) throw NpdError(ErrorKind::Input, "pretrain: empty corpus");
  if (cfg.epochs == 0) return {std::move(model), token_accuracy(model, eval)};

  auto items = items_from_examples(train);
  PackConfig pc{cfg.pack_len, PackStrategy::Sequential};
  auto packs = pack(items, pc);

  OptConfig oc = cfg.opt;
  oc.total_steps = cfg.epochs * steps_per_epoch(packs.size(), cfg.batch_packs);
  OptState opt = OptState::init(model.dims(), oc);

  Workspace ws;
  ws.resize(model.dims());
  KdScratch scratch;
  LmTensors grad = LmTensors::zeros(model.dims());

  for (uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<size_t> order(packs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Stream shuffle_stream(cfg.seed, rng::kTagPretrainShuffle, epoch);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_stream.below(static_cast<uint32_t>(i))]);

    for (size_t start = 0; start < order.size(); start += cfg.batch_packs) {
      size_t end = std::min(order.size(), start + cfg.batch_packs);
      grad.set_zero();
      double ce_sum = 0.0, kd_sum = 0.0;
      size_t positions = 0;
      for (size_t bi = start; bi < end; ++bi)
        accumulate_composite(model, packs[order[bi]], nullptr, 0.0,
                             KdMode::Renormalized, ws, scratch, grad, ce_sum,
                             kd_sum, positions);
      if (positions == 0) continue;
      double inv = 1.0 / static_cast<double>(positions);
      if (!std::isfinite(ce_sum * inv))
        throw NpdError(ErrorKind::Numerical, "pretrain: loss diverged (non-finite)");
      grad.scale(inv);
      adamw_step(model, grad, opt);
    }
  }
  double acc = token_accuracy(model, eval);
  return {std::move(model), acc};
}

double token_accuracy(const TinyLm& lm, std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  std::vector<size_t> hits(examples.size()), totals(examples.size());
  par::parallel_for(examples.size(), [&](size_t i) {
    thread_local Workspace ws;
    ws.resize(lm.dims());
    const Example& ex = examples[i];
    std::vector<Token> seq(ex.prompt);
    seq.insert(seq.end(), ex.target.begin(), ex.target.end());
    size_t h = 0;
    for (size_t t = ex.prompt.size(); t < seq.size(); ++t) {
      forward_at(lm, seq, {}, t, ws);
      Token best = 0;
      for (uint32_t c = 1; c < lm.dims().vocab; ++c)
        if (ws.logits[c] > ws.logits[best]) best = c;
      h += (best == seq[t]);
    }
    hits[i] = h;
    totals[i] = ex.target.size();
  });
  size_t h = 0, n = 0;
  for (size_t i = 0; i < examples.size(); ++i) {
    h += hits[i];
    n += totals[i];
  }
  return n > 0 ? static_cast<double>(h) / static_cast<double>(n) : 0.0;
}

}  // namespace npd
