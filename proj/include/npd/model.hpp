#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npd/vocab.hpp"

namespace npd {

// Segment label for PAD positions in packed rows.
inline constexpr uint16_t kPadSegment = 0xFFFF;

struct LmDims {
  uint32_t vocab = 16;
  uint32_t window = 6;
  uint32_t embed_dim = 32;
  uint32_t hidden_dim = 128;

  uint32_t input_dim() const { return window * embed_dim; }
  bool operator==(const LmDims&) const = default;
};

// One tensor set with the full parameter shape; also used for gradients and
// optimizer moments.
struct LmTensors {
  LmDims dims;
  std::vector<double> embed;  // vocab x embed_dim
  std::vector<double> w1;     // hidden_dim x (window * embed_dim)
  std::vector<double> b1;     // hidden_dim
  std::vector<double> w2;     // vocab x hidden_dim
  std::vector<double> b2;     // vocab

  static LmTensors zeros(const LmDims& dims);
  size_t param_count() const;
  bool all_finite() const;
  void set_zero();
  void scale(double c);

  template <class F>
  void for_each(F&& f) {
    f("embed", embed);
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
  }
  template <class F>
  void for_each(F&& f) const {
    f("embed", embed);
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
  }
};

// Windowed feed-forward autoregressive LM. Logits at position t are a function
// of the last `window` tokens of the same segment ending at t-1; positions
// near a segment start see virtual BOS tokens in the missing slots.
struct TinyLm {
  LmTensors p;
  uint32_t version = 0;

  const LmDims& dims() const { return p.dims; }

  static TinyLm zeros(const LmDims& dims);
  static TinyLm random_init(const LmDims& dims, uint64_t seed);
};

// Reusable per-thread scratch for forward/backward passes.
struct Workspace {
  std::vector<Token> ctx;
  std::vector<double> xcat, hidden, logits, exps, dlogits, dkd, dhidden, dpre, dxcat;
  void resize(const LmDims& dims);
};

// Fills ctx with the w context tokens used to predict position t.
void gather_context(std::span<const Token> tokens, std::span<const uint16_t> segment_ids,
                    size_t t, uint32_t window, std::span<Token> ctx);

// Forward at one position; leaves ctx/xcat/hidden/logits in ws.
void forward_at(const TinyLm& lm, std::span<const Token> tokens,
                std::span<const uint16_t> segment_ids, size_t t, Workspace& ws);

// Accumulates the gradient of (dlogits . logits_t) into grad, using the
// activations left in ws by forward_at.
void backward_at(const TinyLm& lm, Workspace& ws, std::span<const double> dlogits,
                 LmTensors& grad);

// All positions, row-major T x V. Validates token ids.
std::vector<double> forward_logits(const TinyLm& lm, std::span<const Token> tokens,
                                   std::span<const uint16_t> segment_ids);

// exps[i] = exp(logits[i] - max); returns {max, sum(exps)}
struct SoftmaxStats {
  double max;
  double sum;
};
SoftmaxStats softmax_stats(std::span<const double> logits, std::span<double> exps);

struct CeResult {
  double loss = 0.0;
  LmTensors grad;
};

// Mean cross-entropy (natural log) over masked positions, with the exact
// analytic gradient.
CeResult ce_loss_and_grad(const TinyLm& lm, std::span<const Token> tokens,
                          std::span<const uint16_t> segment_ids,
                          std::span<const uint8_t> loss_mask);

// Mean per-token CE of `scored` given optional `context` prefixed before it
// (single segment). Scores exactly the positions of `scored`.
double mean_sequence_ce(const TinyLm& lm, std::span<const Token> context,
                        std::span<const Token> scored);

void validate_tokens(std::span<const Token> tokens, uint32_t vocab_size);

}  // namespace npd
