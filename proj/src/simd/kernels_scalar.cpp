#include <cassert>

#include "marketeq/simd.hpp"

namespace marketeq::simd::scalar {

double Dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double Sum(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v;
  return acc;
}

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void Sub(std::span<const double> a, std::span<const double> b,
         std::span<double> out) {
  assert(a.size() == b.size() && a.size() == out.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
}

namespace {

// Same selection rule as _mm256_max_pd/_mm256_min_pd (second operand wins on
// ties), so signed zeros agree bit-for-bit with the AVX2 path.
inline double Clip(double v, double lo, double hi) {
  v = v > lo ? v : lo;
  return v < hi ? v : hi;
}

}  // namespace

void ClipShift(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift,
               std::span<double> out) {
  assert(z.size() == lo.size() && z.size() == hi.size() &&
         z.size() == out.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = Clip(z[i] - shift, lo[i], hi[i]);
  }
}

double ClipSum(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift) {
  assert(z.size() == lo.size() && z.size() == hi.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += Clip(z[i] - shift, lo[i], hi[i]);
  }
  return acc;
}

}  // namespace marketeq::simd::scalar
