#pragma once

// Central finite-difference gradient check over every parameter entry.

#include <algorithm>
#include <cmath>
#include <functional>

#include "npd/model.hpp"

namespace fd {

// loss must be a pure function of the parameters
inline double max_rel_error(npd::TinyLm& lm, const npd::LmTensors& analytic,
                            const std::function<double(const npd::TinyLm&)>& loss,
                            double h = 1e-5) {
  std::vector<std::vector<double>*> params;
  lm.p.for_each([&](const char*, std::vector<double>& t) { params.push_back(&t); });
  std::vector<const std::vector<double>*> grads;
  analytic.for_each([&](const char*, const std::vector<double>& t) { grads.push_back(&t); });

  double worst = 0.0;
  for (size_t ti = 0; ti < params.size(); ++ti) {
    auto& pv = *params[ti];
    const auto& gv = *grads[ti];
    for (size_t i = 0; i < pv.size(); ++i) {
      double orig = pv[i];
      pv[i] = orig + h;
      double lp = loss(lm);
      pv[i] = orig - h;
      double lm_val = loss(lm);
      pv[i] = orig;
      double est = (lp - lm_val) / (2.0 * h);
      double an = gv[i];
      double denom = std::max({1e-3, std::abs(an), std::abs(est)});
      worst = std::max(worst, std::abs(est - an) / denom);
    }
  }
  return worst;
}

}  // namespace fd
