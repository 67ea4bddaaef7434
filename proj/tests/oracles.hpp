#pragma once

// Brute-force reference computations used as independent oracles. Everything
// here recomputes results from first principles, deliberately avoiding the
// library's own code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace oracles {

// full-distribution KL(P || Q) from two logit rows, straightforward softmax
inline double full_kl(std::span<const double> p_logits, std::span<const double> q_logits) {
  auto softmax = [](std::span<const double> z) {
    double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
    for (auto& x : p) x /= s;
    return p;
  };
  auto p = softmax(p_logits);
  auto q = softmax(q_logits);
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  return kl;
}

// cumulative sums mod `modulus` (the ModAdd task function on raw digits)
inline std::vector<uint32_t> cumsum_mod(std::span<const uint32_t> digits, uint32_t modulus) {
  std::vector<uint32_t> out;
  uint32_t acc = 0;
  for (uint32_t d : digits) {
    acc = (acc + d) % modulus;
    out.push_back(acc);
  }
  return out;
}

// exhaustive minimal bin count for small instances (branch and bound)
inline size_t optimal_bin_count(std::vector<size_t> lengths, size_t capacity) {
  std::sort(lengths.rbegin(), lengths.rend());
  size_t best = lengths.size();
  std::vector<size_t> bins;
  auto rec = [&](auto&& self, size_t idx) -> void {
    if (bins.size() >= best) return;
    if (idx == lengths.size()) {
      best = std::min(best, bins.size());
      return;
    }
    for (size_t b = 0; b < bins.size(); ++b) {
      if (bins[b] + lengths[idx] <= capacity) {
        bins[b] += lengths[idx];
        self(self, idx + 1);
        bins[b] -= lengths[idx];
      }
    }
    bins.push_back(lengths[idx]);
    self(self, idx + 1);
    bins.pop_back();
  };
  rec(rec, 0);
  return best;
}

// zone rules recomputed from raw losses (Eq. 3-4 from scratch)
enum class Zone { Degenerate, Proximal, CognitiveDisconnect, TeacherUnconfirmed, Flagged };

struct RawLosses {
  double cond_student, uncond_student, cond_teacher, uncond_teacher;
  bool flagged = false;
};

inline Zone classify(const RawLosses& r, double tau, bool quality_gate, double eps_div) {
  if (r.flagged || r.uncond_student < eps_div || r.uncond_teacher < eps_div)
    return Zone::Flagged;
  double ifd_s = r.cond_student / r.uncond_student;
  double ifd_t = r.cond_teacher / r.uncond_teacher;
  double delta = ifd_t - ifd_s;
  if (delta < 0.0) return Zone::Degenerate;
  if (delta > tau) return Zone::CognitiveDisconnect;
  if (quality_gate && ifd_t > 1.0) return Zone::TeacherUnconfirmed;
  return Zone::Proximal;
}

}  // namespace oracles
