#include <cstdlib>
#include <cstring>

#include "npd/kernels.hpp"

namespace npd::kernels {

namespace {

struct Ops {
  double (*dot)(const double*, const double*, size_t);
  double (*sum)(const double*, size_t);
  double (*max)(const double*, size_t);
  void (*axpy)(double, const double*, double*, size_t);
  void (*adamw)(double*, const double*, double*, double*, size_t, double,
                double, double, double, double, double, double, double);
};

constexpr Ops kScalarOps = {
    detail::dot_scalar, detail::sum_scalar, detail::max_scalar,
    detail::axpy_scalar, detail::adamw_update_scalar,
};

#if defined(__x86_64__) || defined(__i386__)
constexpr Ops kAvx2Ops = {
    detail::dot_avx2, detail::sum_avx2, detail::max_avx2,
    detail::axpy_avx2, detail::adamw_update_avx2,
};
#endif

bool isa_available(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
  if (isa == Isa::Avx2) return detail::avx2_supported();
#else
  if (isa == Isa::Avx2) return false;
#endif
  return true;
}

Isa pick_default() {
  const char* env = std::getenv("NPD_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    if (std::strcmp(env, "avx2") == 0 && isa_available(Isa::Avx2)) return Isa::Avx2;
    // "auto" or unrecognized falls through to detection
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

Isa g_isa = pick_default();

const Ops& ops_for(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
  if (isa == Isa::Avx2) return kAvx2Ops;
#endif
  (void)isa;
  return kScalarOps;
}

}  // namespace

Isa active_isa() { return g_isa; }

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa set_isa(Isa isa) {
  g_isa = isa_available(isa) ? isa : Isa::Scalar;
  return g_isa;
}

double dot(const double* a, const double* b, size_t n) { return ops_for(g_isa).dot(a, b, n); }
double sum(const double* x, size_t n) { return ops_for(g_isa).sum(x, n); }
double max(const double* x, size_t n) { return ops_for(g_isa).max(x, n); }
void axpy(double alpha, const double* x, double* y, size_t n) { ops_for(g_isa).axpy(alpha, x, y, n); }

void adamw_update(double* p, const double* grad, double* m, double* v, size_t n,
                  double beta1, double beta2, double eps, double lr,
                  double weight_decay, double bias1, double bias2,
                  double grad_scale) {
  ops_for(g_isa).adamw(p, grad, m, v, n, beta1, beta2, eps, lr, weight_decay,
                       bias1, bias2, grad_scale);
}

}  // namespace npd::kernels
