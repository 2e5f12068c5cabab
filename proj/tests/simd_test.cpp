#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "marketeq/simd.hpp"
#include "marketeq/solvers.hpp"
#include "oracles.hpp"

namespace marketeq::simd {
namespace {

bool SameBits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> Mixed(std::mt19937_64& rng, std::size_t n) {
  auto v = testing::RandomVector(rng, n, -3, 3);
  // Signed zeros and exact ties exercise the clip selection rule.
  for (std::size_t i = 0; i < n; i += 5) v[i] = (i % 2) ? -0.0 : 0.0;
  return v;
}

class KernelEquivalenceTest : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (Detect() != Isa::kAvx2) GTEST_SKIP() << "CPU lacks AVX2";
  }
};

#if defined(MARKETEQ_HAVE_AVX2_KERNELS)

TEST_P(KernelEquivalenceTest, ElementwiseKernelsBitIdentical) {
  const std::size_t n = GetParam();
  std::mt19937_64 rng(n);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = Mixed(rng, n), b = Mixed(rng, n);
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = -std::abs(b[i]);
      hi[i] = (i % 7 == 0) ? lo[i] : std::abs(a[i]);
    }
    const double shift = (rep % 3 == 0) ? 0.0 : a.empty() ? 0.5 : a[0];

    std::vector<double> s1(n), s2(n);
    scalar::Sub(a, b, s1);
    avx2::Sub(a, b, s2);
    ASSERT_TRUE(SameBits(s1, s2));

    std::vector<double> y1 = b, y2 = b;
    scalar::Axpy(-0.37, a, y1);
    avx2::Axpy(-0.37, a, y2);
    ASSERT_TRUE(SameBits(y1, y2));

    scalar::ClipShift(a, lo, hi, shift, s1);
    avx2::ClipShift(a, lo, hi, shift, s2);
    ASSERT_TRUE(SameBits(s1, s2));
  }
}

TEST_P(KernelEquivalenceTest, ReductionsAgreeToRounding) {
  const std::size_t n = GetParam();
  std::mt19937_64 rng(1000 + n);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = Mixed(rng, n), b = Mixed(rng, n);
    std::vector<double> lo(n, -1.0), hi(n, 1.0);
    double abs_dot = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      abs_dot += std::abs(a[i] * b[i]);
      abs_sum += std::abs(a[i]);
    }
    const double tol = 4.0 * n * 1.2e-16;
    ASSERT_NEAR(scalar::Dot(a, b), avx2::Dot(a, b), tol * (abs_dot + 1.0));
    ASSERT_NEAR(scalar::Sum(a), avx2::Sum(a), tol * (abs_sum + 1.0));
    ASSERT_NEAR(scalar::ClipSum(a, lo, hi, 0.25), avx2::ClipSum(a, lo, hi, 0.25),
                tol * (static_cast<double>(n) + 1.0));
  }
}

#endif

INSTANTIATE_TEST_SUITE_P(Lengths, KernelEquivalenceTest,
                         ::testing::Values(0, 1, 3, 4, 5, 8, 13, 64, 257));

TEST(DispatchTest, SetActiveSwitchesAndRestores) {
  const Isa original = Active();
  EXPECT_EQ(SetActive(Isa::kScalar), Isa::kScalar);
  EXPECT_EQ(Active(), Isa::kScalar);
  const std::vector<double> a{1, 2, 3, 4, 5}, b{5, 4, 3, 2, 1};
  EXPECT_EQ(Dot(a, b), 35.0);
  const Isa got = SetActive(Isa::kAvx2);
  EXPECT_EQ(got, Detect() == Isa::kAvx2 ? Isa::kAvx2 : Isa::kScalar);
  EXPECT_EQ(Dot(a, b), 35.0);
  SetActive(original);
  EXPECT_EQ(ToString(Isa::kScalar), "scalar");
  EXPECT_EQ(ToString(Isa::kAvx2), "avx2");
}

// Whole solver runs under either kernel set land on the same answer.
TEST(DispatchTest, SolversAgreeAcrossKernelSets) {
  if (Detect() != Isa::kAvx2) GTEST_SKIP() << "CPU lacks AVX2";
  GeneratorParams p;
  p.mode = GeneratorMode::kRegularized;
  p.radius = 0.5;
  const Scenario s = RandomScenario(11, 3, 2, p);
  const Isa original = Active();
  SetActive(Isa::kScalar);
  const auto a = SolvePcgm(s, {}, MarketState(3, 2));
  SetActive(Isa::kAvx2);
  const auto b = SolvePcgm(s, {}, MarketState(3, 2));
  SetActive(original);
  EXPECT_LE(testing::MaxAbsDiff(a.final_state, b.final_state), 1e-9);
  EXPECT_NEAR(a.final_objective, b.final_objective, 1e-9);
}

}  // namespace
}  // namespace marketeq::simd
