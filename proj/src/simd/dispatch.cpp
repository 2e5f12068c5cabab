#include <atomic>

#include "marketeq/simd.hpp"

namespace marketeq::simd {
namespace {

bool CpuHasAvx2() {
#if defined(MARKETEQ_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<Isa>& Selected() {
  static std::atomic<Isa> isa{Detect()};
  return isa;
}

}  // namespace

std::string_view ToString(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

Isa Detect() { return CpuHasAvx2() ? Isa::kAvx2 : Isa::kScalar; }

Isa Active() { return Selected().load(std::memory_order_relaxed); }

Isa SetActive(Isa isa) {
  if (isa == Isa::kAvx2 && !CpuHasAvx2()) isa = Isa::kScalar;
  Selected().store(isa, std::memory_order_relaxed);
  return isa;
}

#if defined(MARKETEQ_HAVE_AVX2_KERNELS)
#define MARKETEQ_DISPATCH(fn, ...)                              \
  (Active() == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define MARKETEQ_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double Dot(std::span<const double> a, std::span<const double> b) {
  return MARKETEQ_DISPATCH(Dot, a, b);
}

double Sum(std::span<const double> a) { return MARKETEQ_DISPATCH(Sum, a); }

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  MARKETEQ_DISPATCH(Axpy, alpha, x, y);
}

void Sub(std::span<const double> a, std::span<const double> b,
         std::span<double> out) {
  MARKETEQ_DISPATCH(Sub, a, b, out);
}

void ClipShift(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift,
               std::span<double> out) {
  MARKETEQ_DISPATCH(ClipShift, z, lo, hi, shift, out);
}

double ClipSum(std::span<const double> z, std::span<const double> lo,
               std::span<const double> hi, double shift) {
  return MARKETEQ_DISPATCH(ClipSum, z, lo, hi, shift);
}

#undef MARKETEQ_DISPATCH

}  // namespace marketeq::simd
