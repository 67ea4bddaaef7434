#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include "npd/kernels.hpp"

namespace npd::kernels::detail {

bool avx2_supported() { return __builtin_cpu_supports("avx2"); }

namespace {

// combine lanes (p0,p1,p2,p3) as (p0+p2)+(p1+p3), matching the scalar tree
inline double reduce_tree(__m256d acc) {
  __m128d lo = _mm256_castpd256_pd128(acc);    // (p0, p1)
  __m128d hi = _mm256_extractf128_pd(acc, 1);  // (p2, p3)
  __m128d s2 = _mm_add_pd(lo, hi);             // (p0+p2, p1+p3)
  return _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
}

}  // namespace

double dot_avx2(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double s = reduce_tree(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_avx2(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = reduce_tree(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double max_avx2(const double* x, size_t n) {
  // exact for finite inputs in any order
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  double m;
  if (n4 > 0) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i < n4; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d m2 = _mm_max_pd(lo, hi);
    m = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
  } else {
    m = x[0];
    i = 1;
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                                          _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adamw_update_avx2(double* p, const double* grad, double* m, double* v,
                       size_t n, double beta1, double beta2, double eps,
                       double lr, double weight_decay, double bias1,
                       double bias2, double grad_scale) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vwd = _mm256_set1_pd(weight_decay);
  const __m256d vbias1 = _mm256_set1_pd(bias1);
  const __m256d vbias2 = _mm256_set1_pd(bias2);
  const __m256d vgs = _mm256_set1_pd(grad_scale);
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d g = _mm256_mul_pd(_mm256_loadu_pd(grad + i), vgs);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(vc1, g));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(vc2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    __m256d pi = _mm256_loadu_pd(p + i);
    __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_div_pd(vi, vbias2)), veps);
    __m256d step = _mm256_add_pd(_mm256_div_pd(_mm256_div_pd(mi, vbias1), denom),
                                 _mm256_mul_pd(vwd, pi));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(pi, _mm256_mul_pd(vlr, step)));
  }
  if (i < n)
    adamw_update_scalar(p + i, grad + i, m + i, v + i, n - i, beta1, beta2, eps,
                        lr, weight_decay, bias1, bias2, grad_scale);
}

}  // namespace npd::kernels::detail

#endif  // x86
