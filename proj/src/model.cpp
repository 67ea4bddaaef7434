#include "npd/model.hpp"

#include <cmath>
#include <cstring>

#include "npd/errors.hpp"
#include "npd/kernels.hpp"
#include "npd/rng.hpp"

namespace npd {

LmTensors LmTensors::zeros(const LmDims& dims) {
  LmTensors t;
  t.dims = dims;
  t.embed.assign(size_t(dims.vocab) * dims.embed_dim, 0.0);
  t.w1.assign(size_t(dims.hidden_dim) * dims.input_dim(), 0.0);
  t.b1.assign(dims.hidden_dim, 0.0);
  t.w2.assign(size_t(dims.vocab) * dims.hidden_dim, 0.0);
  t.b2.assign(dims.vocab, 0.0);
  return t;
}

size_t LmTensors::param_count() const {
  return embed.size() + w1.size() + b1.size() + w2.size() + b2.size();
}

bool LmTensors::all_finite() const {
  bool ok = true;
  for_each([&](const char*, const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) ok = false;
  });
  return ok;
}

void LmTensors::set_zero() {
  for_each([](const char*, std::vector<double>& v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
}

void LmTensors::scale(double c) {
  for_each([&](const char*, std::vector<double>& v) {
    for (double& x : v) x *= c;
  });
}

TinyLm TinyLm::zeros(const LmDims& dims) {
  TinyLm lm;
  lm.p = LmTensors::zeros(dims);
  return lm;
}

TinyLm TinyLm::random_init(const LmDims& dims, uint64_t seed) {
  TinyLm lm = zeros(dims);
  // tanh-friendly fan-in scaling; biases stay zero
  double embed_std = 0.5;
  double w1_std = 1.0 / std::sqrt(static_cast<double>(dims.input_dim()));
  double w2_std = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
  rng::Stream se(seed, 0x11, 0);
  for (auto& x : lm.p.embed) x = embed_std * se.normal();
  rng::Stream s1(seed, 0x12, 0);
  for (auto& x : lm.p.w1) x = w1_std * s1.normal();
  rng::Stream s2(seed, 0x13, 0);
  for (auto& x : lm.p.w2) x = w2_std * s2.normal();
  return lm;
}

void Workspace::resize(const LmDims& dims) {
  ctx.assign(dims.window, 0);
  xcat.assign(dims.input_dim(), 0.0);
  hidden.assign(dims.hidden_dim, 0.0);
  logits.assign(dims.vocab, 0.0);
  exps.assign(dims.vocab, 0.0);
  dlogits.assign(dims.vocab, 0.0);
  dkd.assign(dims.vocab, 0.0);
  dhidden.assign(dims.hidden_dim, 0.0);
  dpre.assign(dims.hidden_dim, 0.0);
  dxcat.assign(dims.input_dim(), 0.0);
}

void validate_tokens(std::span<const Token> tokens, uint32_t vocab_size) {
  for (Token t : tokens)
    if (t >= vocab_size)
      throw NpdError(ErrorKind::Input, "token id " + std::to_string(t) +
                                           " out of range for vocab " +
                                           std::to_string(vocab_size));
}

void gather_context(std::span<const Token> tokens, std::span<const uint16_t> segment_ids,
                    size_t t, uint32_t window, std::span<Token> ctx) {
  uint16_t seg = segment_ids.empty() ? 0 : segment_ids[t];
  for (uint32_t j = 1; j <= window; ++j) {
    size_t slot = window - j;
    if (t >= j) {
      size_t pos = t - j;
      uint16_t pos_seg = segment_ids.empty() ? 0 : segment_ids[pos];
      ctx[slot] = (pos_seg == seg) ? tokens[pos] : Vocab::kBos;
    } else {
      ctx[slot] = Vocab::kBos;
    }
  }
}

void forward_at(const TinyLm& lm, std::span<const Token> tokens,
                std::span<const uint16_t> segment_ids, size_t t, Workspace& ws) {
  const LmDims& d = lm.dims();
  gather_context(tokens, segment_ids, t, d.window, ws.ctx);
  for (uint32_t j = 0; j < d.window; ++j) {
    const double* row = lm.p.embed.data() + size_t(ws.ctx[j]) * d.embed_dim;
    std::memcpy(ws.xcat.data() + size_t(j) * d.embed_dim, row,
                sizeof(double) * d.embed_dim);
  }
  size_t in = d.input_dim();
  for (uint32_t r = 0; r < d.hidden_dim; ++r) {
    double pre = kernels::dot(lm.p.w1.data() + size_t(r) * in, ws.xcat.data(), in) +
                 lm.p.b1[r];
    ws.hidden[r] = std::tanh(pre);
  }
  for (uint32_t r = 0; r < d.vocab; ++r) {
    ws.logits[r] =
        kernels::dot(lm.p.w2.data() + size_t(r) * d.hidden_dim, ws.hidden.data(),
                     d.hidden_dim) +
        lm.p.b2[r];
  }
}

void backward_at(const TinyLm& lm, Workspace& ws, std::span<const double> dlogits,
                 LmTensors& grad) {
  const LmDims& d = lm.dims();
  size_t in = d.input_dim();
  std::fill(ws.dhidden.begin(), ws.dhidden.end(), 0.0);
  for (uint32_t r = 0; r < d.vocab; ++r) {
    double g = dlogits[r];
    kernels::axpy(g, ws.hidden.data(), grad.w2.data() + size_t(r) * d.hidden_dim,
                  d.hidden_dim);
    grad.b2[r] += g;
    kernels::axpy(g, lm.p.w2.data() + size_t(r) * d.hidden_dim, ws.dhidden.data(),
                  d.hidden_dim);
  }
  for (uint32_t r = 0; r < d.hidden_dim; ++r)
    ws.dpre[r] = ws.dhidden[r] * (1.0 - ws.hidden[r] * ws.hidden[r]);
  std::fill(ws.dxcat.begin(), ws.dxcat.end(), 0.0);
  for (uint32_t r = 0; r < d.hidden_dim; ++r) {
    double g = ws.dpre[r];
    kernels::axpy(g, ws.xcat.data(), grad.w1.data() + size_t(r) * in, in);
    grad.b1[r] += g;
    kernels::axpy(g, lm.p.w1.data() + size_t(r) * in, ws.dxcat.data(), in);
  }
  for (uint32_t j = 0; j < d.window; ++j) {
    kernels::axpy(1.0, ws.dxcat.data() + size_t(j) * d.embed_dim,
                  grad.embed.data() + size_t(ws.ctx[j]) * d.embed_dim, d.embed_dim);
  }
}

std::vector<double> forward_logits(const TinyLm& lm, std::span<const Token> tokens,
                                   std::span<const uint16_t> segment_ids) {
  if (tokens.empty()) throw NpdError(ErrorKind::Input, "forward_logits: empty sequence");
  validate_tokens(tokens, lm.dims().vocab);
  Workspace ws;
  ws.resize(lm.dims());
  std::vector<double> out(tokens.size() * lm.dims().vocab);
  for (size_t t = 0; t < tokens.size(); ++t) {
    forward_at(lm, tokens, segment_ids, t, ws);
    std::memcpy(out.data() + t * lm.dims().vocab, ws.logits.data(),
                sizeof(double) * lm.dims().vocab);
  }
  return out;
}

SoftmaxStats softmax_stats(std::span<const double> logits, std::span<double> exps) {
  double m = kernels::max(logits.data(), logits.size());
  for (size_t i = 0; i < logits.size(); ++i) exps[i] = std::exp(logits[i] - m);
  double s = kernels::sum(exps.data(), exps.size());
  return {m, s};
}

CeResult ce_loss_and_grad(const TinyLm& lm, std::span<const Token> tokens,
                          std::span<const uint16_t> segment_ids,
                          std::span<const uint8_t> loss_mask) {
  validate_tokens(tokens, lm.dims().vocab);
  size_t masked = 0;
  for (uint8_t m : loss_mask) masked += (m != 0);
  if (masked == 0)
    throw NpdError(ErrorKind::Input, "ce_loss_and_grad: no masked positions");

  CeResult res;
  res.grad = LmTensors::zeros(lm.dims());
  Workspace ws;
  ws.resize(lm.dims());
  double loss_sum = 0.0;
  uint32_t v = lm.dims().vocab;
  for (size_t t = 0; t < tokens.size(); ++t) {
    if (!loss_mask[t]) continue;
    forward_at(lm, tokens, segment_ids, t, ws);
    SoftmaxStats st = softmax_stats(ws.logits, ws.exps);
    double log_z = std::log(st.sum);
    Token y = tokens[t];
    loss_sum += -(ws.logits[y] - st.max - log_z);
    for (uint32_t i = 0; i < v; ++i) ws.dlogits[i] = ws.exps[i] / st.sum;
    ws.dlogits[y] -= 1.0;
    backward_at(lm, ws, ws.dlogits, res.grad);
  }
  double inv = 1.0 / static_cast<double>(masked);
  res.loss = loss_sum * inv;
  res.grad.scale(inv);
  return res;
}

double mean_sequence_ce(const TinyLm& lm, std::span<const Token> context,
                        std::span<const Token> scored) {
  if (scored.empty()) throw NpdError(ErrorKind::Input, "mean_sequence_ce: empty sequence");
  validate_tokens(context, lm.dims().vocab);
  validate_tokens(scored, lm.dims().vocab);
  std::vector<Token> seq;
  seq.reserve(context.size() + scored.size());
  seq.insert(seq.end(), context.begin(), context.end());
  seq.insert(seq.end(), scored.begin(), scored.end());
  Workspace ws;
  ws.resize(lm.dims());
  double loss_sum = 0.0;
  for (size_t t = context.size(); t < seq.size(); ++t) {
    forward_at(lm, seq, {}, t, ws);
    SoftmaxStats st = softmax_stats(ws.logits, ws.exps);
    loss_sum += -(ws.logits[seq[t]] - st.max - std::log(st.sum));
  }
  return loss_sum / static_cast<double>(scored.size());
}

}  // namespace npd
