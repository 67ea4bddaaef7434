#include "npd/kernels.hpp"

#include <cmath>

namespace npd::kernels::detail {

double dot_scalar(const double* a, const double* b, size_t n) {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4) {
    p0 += a[i] * b[i];
    p1 += a[i + 1] * b[i + 1];
    p2 += a[i + 2] * b[i + 2];
    p3 += a[i + 3] * b[i + 3];
  }
  double s = (p0 + p2) + (p1 + p3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_scalar(const double* x, size_t n) {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
  size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4) {
    p0 += x[i];
    p1 += x[i + 1];
    p2 += x[i + 2];
    p3 += x[i + 3];
  }
  double s = (p0 + p2) + (p1 + p3);
  for (; i < n; ++i) s += x[i];
  return s;
}

double max_scalar(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adamw_update_scalar(double* p, const double* grad, double* m, double* v,
                         size_t n, double beta1, double beta2, double eps,
                         double lr, double weight_decay, double bias1,
                         double bias2, double grad_scale) {
  double c1 = 1.0 - beta1;
  double c2 = 1.0 - beta2;
  for (size_t i = 0; i < n; ++i) {
    double g = grad[i] * grad_scale;
    double mi = beta1 * m[i] + c1 * g;
    double vi = beta2 * v[i] + c2 * (g * g);
    m[i] = mi;
    v[i] = vi;
    double step = (mi / bias1) / (std::sqrt(vi / bias2) + eps) + weight_decay * p[i];
    p[i] -= lr * step;
  }
}

}  // namespace npd::kernels::detail
