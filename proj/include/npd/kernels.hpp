#pragma once

#include <cstddef>

// Data-parallel inner loops behind the numeric core. Every kernel has a scalar
// reference implementation and may have SIMD variants; the active variant is
// chosen once at startup (CPU probe, overridable via NPD_SIMD=scalar|avx2|auto).
//
// All variants are bit-exact equals of the scalar reference. Reductions (dot,
// sum) follow a fixed schedule: four strided partial sums over the aligned
// body, combined as (p0 + p2) + (p1 + p3), then a sequential tail. Elementwise
// kernels (axpy, adamw_update) evaluate each element with the same operation
// order in every variant. Compile with -ffp-contract=off so no path fuses a
// mul/add pair the other path keeps separate.

namespace npd::kernels {

enum class Isa { Scalar, Avx2 };

// Active implementation set. Auto-detected on first use.
Isa active_isa();
const char* isa_name(Isa isa);

// Force a specific ISA (no-op fallback to Scalar when unsupported). Returns
// the ISA actually selected. Used by the equivalence tests.
Isa set_isa(Isa isa);

double dot(const double* a, const double* b, size_t n);
double sum(const double* x, size_t n);
double max(const double* x, size_t n);  // n >= 1, finite inputs

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, size_t n);

// Decoupled-weight-decay Adam element update, applied in place:
//   g'   = grad[i] * grad_scale
//   m[i] = beta1 * m[i] + (1 - beta1) * g'
//   v[i] = beta2 * v[i] + (1 - beta2) * g' * g'
//   p[i] -= lr * ((m[i] / bias1) / (sqrt(v[i] / bias2) + eps) + weight_decay * p[i])
void adamw_update(double* p, const double* grad, double* m, double* v, size_t n,
                  double beta1, double beta2, double eps, double lr,
                  double weight_decay, double bias1, double bias2,
                  double grad_scale);

namespace detail {
// Reference implementations, always available; the dispatch table and the
// equivalence tests point at these.
double dot_scalar(const double* a, const double* b, size_t n);
double sum_scalar(const double* x, size_t n);
double max_scalar(const double* x, size_t n);
void axpy_scalar(double alpha, const double* x, double* y, size_t n);
void adamw_update_scalar(double* p, const double* grad, double* m, double* v,
                         size_t n, double beta1, double beta2, double eps,
                         double lr, double weight_decay, double bias1,
                         double bias2, double grad_scale);

#if defined(__x86_64__) || defined(__i386__)
bool avx2_supported();
double dot_avx2(const double* a, const double* b, size_t n);
double sum_avx2(const double* x, size_t n);
double max_avx2(const double* x, size_t n);
void axpy_avx2(double alpha, const double* x, double* y, size_t n);
void adamw_update_avx2(double* p, const double* grad, double* m, double* v,
                       size_t n, double beta1, double beta2, double eps,
                       double lr, double weight_decay, double bias1,
                       double bias2, double grad_scale);
#endif
}  // namespace detail

}  // namespace npd::kernels
