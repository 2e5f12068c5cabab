// Compiled with -mavx2; only reached through dispatch after a CPUID check.

#include <immintrin.h>

#include <cassert>

#include "marketeq/simd.hpp"

namespace marketeq::simd::avx2 {
namespace {

inline double HorizontalSum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// Tail handling; same selection rule as the vector max/min below.
inline double Clip(double v, double lo, double hi) {
  v = v > lo ? v : lo;
  return v < hi ? v : hi;
}

}  // namespace

double Dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(a.data() + i),
                           _mm256_loadu_pd(b.data() + i)));
  }
  double total = HorizontalSum(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double Sum(std::span<const double> a) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a.data() + i));
  double total = HorizontalSum(acc);
  for (; i < n; ++i) total += a[i];
  return total;
}

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y.data() + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x.data() + i)));
    _mm256_storeu_pd(y.data() + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void Sub(std::span<const double> a, std::span<const double> b,
         std::span<double> out) {
  assert(a.size() == b.size() && a.size() == out.size());
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out.data() + i,
                     _mm256_sub_pd(_mm256_loadu_pd(a.data() + i),
                                   _mm256_loadu_pd(b.data() + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void ClipShift(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift,
               std::span<double> out) {
  assert(z.size() == lo.size() && z.size() == hi.size() &&
         z.size() == out.size());
  const std::size_t n = z.size();
  const __m256d vs = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_sub_pd(_mm256_loadu_pd(z.data() + i), vs);
    v = _mm256_max_pd(v, _mm256_loadu_pd(lo.data() + i));
    v = _mm256_min_pd(v, _mm256_loadu_pd(hi.data() + i));
    _mm256_storeu_pd(out.data() + i, v);
  }
  for (; i < n; ++i) out[i] = Clip(z[i] - shift, lo[i], hi[i]);
}

double ClipSum(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift) {
  assert(z.size() == lo.size() && z.size() == hi.size());
  const std::size_t n = z.size();
  const __m256d vs = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_sub_pd(_mm256_loadu_pd(z.data() + i), vs);
    v = _mm256_max_pd(v, _mm256_loadu_pd(lo.data() + i));
    v = _mm256_min_pd(v, _mm256_loadu_pd(hi.data() + i));
    acc = _mm256_add_pd(acc, v);
  }
  double total = HorizontalSum(acc);
  for (; i < n; ++i) total += Clip(z[i] - shift, lo[i], hi[i]);
  return total;
}

}  // namespace marketeq::simd::avx2
