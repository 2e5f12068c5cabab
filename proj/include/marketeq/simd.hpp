#pragma once

// Vector kernels used by the solvers' inner loops. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2 variant chosen at runtime.
// Elementwise kernels (axpy, clip_shift, sub) are bit-identical across
// variants; reductions (dot, sum, clip_sum) differ only by summation order.

#include <span>
#include <string_view>

namespace marketeq::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view ToString(Isa isa);

// Best instruction set supported by the running CPU.
Isa Detect();

// Currently dispatched instruction set. Defaults to Detect().
Isa Active();

// Pins dispatch. Requesting kAvx2 on a CPU without it falls back to kScalar;
// the return value is what actually got selected.
Isa SetActive(Isa isa);

double Dot(std::span<const double> a, std::span<const double> b);
double Sum(std::span<const double> a);

// y += alpha * x
void Axpy(double alpha, std::span<const double> x, std::span<double> y);

// out = a - b
void Sub(std::span<const double> a, std::span<const double> b,
         std::span<double> out);

// out_i = clamp(z_i - shift, lo_i, hi_i)
void ClipShift(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift,
               std::span<double> out);

// sum_i clamp(z_i - shift, lo_i, hi_i)
double ClipSum(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift);

// Direct entry points, bypassing dispatch. Used by the equivalence tests.
namespace scalar {
double Dot(std::span<const double> a, std::span<const double> b);
double Sum(std::span<const double> a);
void Axpy(double alpha, std::span<const double> x, std::span<double> y);
void Sub(std::span<const double> a, std::span<const double> b,
         std::span<double> out);
void ClipShift(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift,
               std::span<double> out);
double ClipSum(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MARKETEQ_HAVE_AVX2_KERNELS 1
namespace avx2 {
double Dot(std::span<const double> a, std::span<const double> b);
double Sum(std::span<const double> a);
void Axpy(double alpha, std::span<const double> x, std::span<double> y);
void Sub(std::span<const double> a, std::span<const double> b,
         std::span<double> out);
void ClipShift(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift,
               std::span<double> out);
double ClipSum(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift);
}  // namespace avx2
#endif

}  // namespace marketeq::simd
