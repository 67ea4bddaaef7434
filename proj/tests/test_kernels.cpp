#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

#include "npd/kernels.hpp"
#include "npd/rng.hpp"

using namespace npd;

namespace {

std::vector<double> random_vec(size_t n, uint64_t key) {
  rng::Stream s(key);
  std::vector<double> v(n);
  for (auto& x : v) x = 4.0 * s.next_double() - 2.0;
  return v;
}

bool bits_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar dot follows the fixed reduction tree") {
  // n = 6: partials p0 = a0 b0 + a4 b4, p1 = a1 b1 + a5 b5, p2 = a2 b2, p3 = a3 b3
  std::vector<double> a = {1.5, -2.25, 3.0, 0.5, 7.0, 0.125};
  std::vector<double> b = {2.0, 4.0, -1.0, 8.0, 0.25, 16.0};
  double n4 = 8;  // n & ~3 = 4 elements in the body, tail = {a4 b4, a5 b5}
  (void)n4;
  double p0 = a[0] * b[0];
  double p1 = a[1] * b[1];
  double p2 = a[2] * b[2];
  double p3 = a[3] * b[3];
  double expect = (p0 + p2) + (p1 + p3);
  expect += a[4] * b[4];
  expect += a[5] * b[5];
  CHECK(bits_equal(kernels::detail::dot_scalar(a.data(), b.data(), 6), expect));
}

#if defined(__x86_64__) || defined(__i386__)
TEST_CASE("avx2 kernels are bit-exact equals of the scalar reference") {
  if (!kernels::detail::avx2_supported()) {
    MESSAGE("avx2 not available on this host, skipping");
    return;
  }
  for (size_t n : {size_t(1), size_t(3), size_t(4), size_t(7), size_t(64),
                   size_t(193), size_t(1000)}) {
    auto a = random_vec(n, 0x1000 + n);
    auto b = random_vec(n, 0x2000 + n);
    CHECK(bits_equal(kernels::detail::dot_scalar(a.data(), b.data(), n),
                     kernels::detail::dot_avx2(a.data(), b.data(), n)));
    CHECK(bits_equal(kernels::detail::sum_scalar(a.data(), n),
                     kernels::detail::sum_avx2(a.data(), n)));
    CHECK(bits_equal(kernels::detail::max_scalar(a.data(), n),
                     kernels::detail::max_avx2(a.data(), n)));

    auto y1 = random_vec(n, 0x3000 + n);
    auto y2 = y1;
    kernels::detail::axpy_scalar(0.37, a.data(), y1.data(), n);
    kernels::detail::axpy_avx2(0.37, a.data(), y2.data(), n);
    CHECK(bits_equal(y1, y2));

    auto p1 = random_vec(n, 0x4000 + n), p2 = p1;
    auto m1 = random_vec(n, 0x5000 + n), m2 = m1;
    auto v1 = random_vec(n, 0x6000 + n), v2 = v1;
    for (auto& x : v1) x = std::abs(x);
    v2 = v1;
    kernels::detail::adamw_update_scalar(p1.data(), a.data(), m1.data(), v1.data(), n,
                                         0.9, 0.999, 1e-8, 3e-3, 0.1, 0.5, 0.25, 0.8);
    kernels::detail::adamw_update_avx2(p2.data(), a.data(), m2.data(), v2.data(), n,
                                       0.9, 0.999, 1e-8, 3e-3, 0.1, 0.5, 0.25, 0.8);
    CHECK(bits_equal(p1, p2));
    CHECK(bits_equal(m1, m2));
    CHECK(bits_equal(v1, v2));
  }
}
#endif

TEST_CASE("dispatch honors set_isa and stays bit-stable across paths") {
  auto a = random_vec(129, 0xabc);
  auto b = random_vec(129, 0xdef);
  kernels::Isa prev = kernels::active_isa();
  kernels::set_isa(kernels::Isa::Scalar);
  double d_scalar = kernels::dot(a.data(), b.data(), a.size());
  kernels::Isa got = kernels::set_isa(kernels::Isa::Avx2);
  double d_active = kernels::dot(a.data(), b.data(), a.size());
  if (got == kernels::Isa::Avx2) CHECK(bits_equal(d_scalar, d_active));
  kernels::set_isa(prev);
  CHECK(kernels::isa_name(kernels::Isa::Scalar) == std::string("scalar"));
}
