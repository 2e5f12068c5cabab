#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "marketeq/error.hpp"
#include "marketeq/model.hpp"
#include "oracles.hpp"

namespace marketeq {
namespace {

AgentSpec BoxAgent(double lower, double upper, double radius) {
  AgentSpec a;
  a.lower = {lower};
  a.upper = {upper};
  a.radius = {radius};
  return a;
}

TEST(FeasibleWindowTest, InfiniteRadiusGivesGlobalBox) {
  const auto w = FeasibleWindow(BoxAgent(-2, 2, kInf), std::vector<double>{1.0});
  EXPECT_EQ(w[0], (Interval{-2.0, 2.0}));
}

TEST(FeasibleWindowTest, WindowInsideBox) {
  const auto w = FeasibleWindow(BoxAgent(-2, 2, 0.5), std::vector<double>{1.0});
  EXPECT_EQ(w[0], (Interval{0.5, 1.5}));
}

TEST(FeasibleWindowTest, UpperEndClampedByBox) {
  const auto w = FeasibleWindow(BoxAgent(-2, 2, 0.5), std::vector<double>{1.8});
  EXPECT_DOUBLE_EQ(w[0].lower, 1.3);
  EXPECT_EQ(w[0].upper, 2.0);
}

TEST(FeasibleWindowTest, StateOutsideBoxThrows) {
  try {
    FeasibleWindow(BoxAgent(-2, 2, 0.5), std::vector<double>{2.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStateOutsideGlobalBox);
  }
}

TEST(BalancedFeasibleTest, ZeroIsFeasible) {
  const Matrix lo(3, 2, -1.0), hi(3, 2, 1.0);
  EXPECT_TRUE(IsBalancedFeasible(Matrix(3, 2), lo, hi, 1e-9));
}

TEST(BalancedFeasibleTest, UnbalancedColumnRejected) {
  Matrix y(2, 2);
  y(0, 1) = 0.5;
  EXPECT_FALSE(IsBalancedFeasible(y, Matrix(2, 2, -1.0), Matrix(2, 2, 1.0), 1e-9));
}

TEST(BalancedFeasibleTest, AntisymmetricPair) {
  Matrix y(2, 2);
  y(0, 0) = 1;
  y(0, 1) = -1;
  y(1, 0) = -1;
  y(1, 1) = 1;
  EXPECT_TRUE(IsBalancedFeasible(y, Matrix(2, 2, -1.0), Matrix(2, 2, 1.0), 1e-9));
}

Scenario TwoByTwo() {
  Scenario s;
  s.dims = {2, 2};
  for (int i = 0; i < 2; ++i) {
    AgentSpec a;
    a.lower = {-1, -1};
    a.upper = {1, 1};
    a.radius = {kInf, kInf};
    a.pricing = LpPricing{};
    s.agents.push_back(a);
  }
  return s;
}

TEST(ValidateAssumptionsTest, InvertedIntervalFlagsA1) {
  Scenario s = TwoByTwo();
  s.agents[0].lower[0] = 3;
  s.agents[0].upper[0] = 1;
  const auto report = ValidateAssumptions(s, AssumptionMode::kA);
  EXPECT_FALSE(report.passed());
  EXPECT_TRUE(report.Mentions("A1"));
}

TEST(ValidateAssumptionsTest, StationaryLpScenarioPassesModeB) {
  EXPECT_TRUE(ValidateAssumptions(TwoByTwo(), AssumptionMode::kB).passed());
}

TEST(ValidateAssumptionsTest, PositiveLowerBoundsEmptyTheBalancedSet) {
  Scenario s = TwoByTwo();
  for (auto& a : s.agents) {
    a.lower[0] = 1;
    a.upper[0] = 2;
  }
  const auto report = ValidateAssumptions(s, AssumptionMode::kA);
  EXPECT_TRUE(report.Mentions("A2'"));
  EXPECT_NE(report.Summary().find("commodity 0"), std::string::npos);
}

TEST(ValidateAssumptionsTest, ModeBRejectsRegularizedPricingAndFiniteRadius) {
  Scenario s = TwoByTwo();
  s.agents[1].pricing = RegularizedPricing{{0.5, 0.5}, 1.0};
  s.agents[0].radius[1] = 0.5;
  const auto report = ValidateAssumptions(s, AssumptionMode::kB);
  EXPECT_TRUE(report.Mentions("B2"));
  EXPECT_TRUE(report.Mentions("B1'"));
}

TEST(ValidateAssumptionsTest, ModeCRequiresRegularizedPricing) {
  const auto report = ValidateAssumptions(TwoByTwo(), AssumptionMode::kC);
  EXPECT_TRUE(report.Mentions("C2"));
}

TEST(ValidateAssumptionsTest, NegativeRadiusAndBadBeta) {
  Scenario s = TwoByTwo();
  for (auto& a : s.agents) a.pricing = RegularizedPricing{{0.5, 0.5}, 1.0};
  s.agents[0].radius[0] = -1;
  std::get<RegularizedPricing>(s.agents[1].pricing).beta = 0.0;
  const auto report = ValidateAssumptions(s, AssumptionMode::kC);
  EXPECT_TRUE(report.Mentions("C3"));
  EXPECT_TRUE(report.Mentions("C2"));
}

TEST(ValidateAssumptionsTest, EmptyPolytopeReported) {
  Scenario s = TwoByTwo();
  // Commodity 0 supplied with no demand commodity: v_0 <= 0, and commodity
  // 1 likewise, leaves nothing on the simplex.
  s.agents[0].technology.supply = {0, 1};
  const auto report = ValidateAssumptions(s, AssumptionMode::kB);
  EXPECT_TRUE(report.Mentions("B2"));
}

TEST(RandomScenarioTest, Deterministic) {
  EXPECT_EQ(RandomScenario(5, 4, 3), RandomScenario(5, 4, 3));
  GeneratorParams reg;
  reg.mode = GeneratorMode::kRegularized;
  reg.radius = 0.3;
  EXPECT_EQ(RandomScenario(9, 3, 2, reg), RandomScenario(9, 3, 2, reg));
  EXPECT_NE(RandomScenario(5, 4, 3), RandomScenario(6, 4, 3));
}

TEST(RandomScenarioTest, ZeroStateFeasibleForSeed42) {
  const Scenario s = RandomScenario(42, 4, 3);
  const auto [lo, hi] = GlobalBounds(s);
  EXPECT_TRUE(IsBalancedFeasible(Matrix(4, 3), lo, hi, 1e-9));
}

TEST(RandomScenarioTest, RejectsSingleAgentAndFiniteLpRadius) {
  EXPECT_THROW(RandomScenario(1, 1, 2), Error);
  GeneratorParams p;
  p.radius = 1.0;
  try {
    RandomScenario(1, 3, 2, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidParams);
  }
}

TEST(RandomScenarioTest, PassesDeclaredModeAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (GeneratorMode mode : {GeneratorMode::kLp, GeneratorMode::kRegularized}) {
      GeneratorParams p;
      p.mode = mode;
      if (mode == GeneratorMode::kRegularized && seed % 2 == 0) p.radius = 0.25 + 0.01 * seed;
      const std::size_t m = 2 + seed % 5;
      const std::size_t n = 1 + seed % 4;
      const Scenario s = RandomScenario(seed, m, n, p);
      const auto report = ValidateAssumptions(s, DeclaredMode(mode));
      ASSERT_TRUE(report.passed()) << "seed " << seed << "\n" << report.Summary();
      for (const auto& a : s.agents) {
        for (std::size_t j = 0; j < n; ++j) {
          ASSERT_LE(a.lower[j], 0.0);
          ASSERT_GE(a.upper[j], 0.0);
        }
      }
    }
  }
}

// x in its own window for random states of the global box.
TEST(WindowPropertyTest, StateContainedInOwnWindow) {
  GeneratorParams p;
  p.mode = GeneratorMode::kRegularized;
  p.radius = 0.2;
  std::mt19937_64 rng(1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scenario s = RandomScenario(seed, 4, 3, p);
    for (int k = 0; k < 1000; ++k) {
      const MarketState x = testing::RandomFeasibleState(s, rng);
      const auto [lo, hi] = WindowBounds(s, x);
      for (std::size_t e = 0; e < x.size(); ++e) {
        ASSERT_LE(lo.flat()[e], x.flat()[e]);
        ASSERT_GE(hi.flat()[e], x.flat()[e]);
      }
    }
  }
}

TEST(WindowPropertyTest, InfiniteRadiusEqualsGlobalBoxExactly) {
  const Scenario s = RandomScenario(3, 5, 3);
  std::mt19937_64 rng(2);
  const auto [glo, ghi] = GlobalBounds(s);
  for (int k = 0; k < 100; ++k) {
    const MarketState x = testing::RandomFeasibleState(s, rng);
    const auto [lo, hi] = WindowBounds(s, x);
    ASSERT_EQ(lo, glo);
    ASSERT_EQ(hi, ghi);
  }
}

TEST(WindowPropertyTest, EndpointsAreOneLipschitz) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> r(0.0, 1.5);
  for (int k = 0; k < 2000; ++k) {
    const AgentSpec a = BoxAgent(-2, 2, r(rng));
    const double x1 = u(rng), x2 = u(rng);
    const auto w1 = FeasibleWindow(a, std::vector<double>{x1});
    const auto w2 = FeasibleWindow(a, std::vector<double>{x2});
    ASSERT_LE(std::abs(w1[0].lower - w2[0].lower), std::abs(x1 - x2) + 1e-15);
    ASSERT_LE(std::abs(w1[0].upper - w2[0].upper), std::abs(x1 - x2) + 1e-15);
  }
}

TEST(CheckStructureTest, RejectsBadShapesAndIndices) {
  Scenario s = TwoByTwo();
  s.agents[0].technology.supply = {5};
  EXPECT_THROW(CheckStructure(s), Error);
  s = TwoByTwo();
  s.agents[1].lower = {0};
  EXPECT_THROW(CheckStructure(s), Error);
  s = TwoByTwo();
  s.dims.agents = 3;
  EXPECT_THROW(CheckStructure(s), Error);
}

}  // namespace
}  // namespace marketeq
