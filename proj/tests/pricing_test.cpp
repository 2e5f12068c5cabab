#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "marketeq/error.hpp"
#include "marketeq/pricing.hpp"
#include "marketeq/verify.hpp"
#include "oracles.hpp"

namespace marketeq {
namespace {

using testing::SegmentAgent;

PricePolytope SegmentPolytope() { return PricePolytope(SegmentAgent().technology, 2); }

AgentSpec RegularizedSegmentAgent(std::vector<double> reference, double beta) {
  AgentSpec a = SegmentAgent();
  a.pricing = RegularizedPricing{std::move(reference), beta};
  return a;
}

// Random technology with at least one demand commodity behind every supply.
TechnologySpec RandomTechnology(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> role(0, 2);
  std::uniform_real_distribution<double> coeff(0.2, 3.0);
  TechnologySpec t;
  std::vector<int> roles(n);
  for (int& r : roles) r = role(rng);
  if (std::count(roles.begin(), roles.end(), 1) > 0 &&
      std::count(roles.begin(), roles.end(), 2) == 0) {
    roles[std::find(roles.begin(), roles.end(), 1) - roles.begin()] = 2;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (roles[j] == 1) t.supply.push_back(j);
    if (roles[j] == 2) t.demand.push_back(j);
  }
  for (std::size_t s : t.demand) {
    for (std::size_t j : t.supply) {
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.8) t.coeff.push_back({s, j, coeff(rng)});
    }
  }
  // Keep every supply commodity backed by some coefficient.
  for (std::size_t j : t.supply) {
    const bool backed = std::any_of(t.coeff.begin(), t.coeff.end(),
                                    [&](const auto& c) { return c.supply_commodity == j; });
    if (!backed) t.coeff.push_back({t.demand[0], j, coeff(rng)});
  }
  return t;
}

TEST(LpMaxTest, SegmentExample) {
  const auto r = LpMax(SegmentPolytope(), std::vector<double>{-1, 1});
  EXPECT_NEAR(r.vertex[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.vertex[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.value, 1.0 / 3.0, 1e-15);
}

TEST(LpMaxTest, ZeroObjectiveGivesLexMinVertex) {
  const auto r = LpMax(SegmentPolytope(), std::vector<double>{0, 0});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_NEAR(r.vertex[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.vertex[1], 2.0 / 3.0, 1e-15);
  EXPECT_FALSE(r.unique);
}

TEST(LpMaxTest, FullSimplexPicksLargestCoordinate) {
  const PricePolytope simplex(TechnologySpec{}, 3);
  const auto r = LpMax(simplex, std::vector<double>{5, 1, 3});
  EXPECT_EQ(r.vertex, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(r.value, 5.0);
}

TEST(LpMaxTest, AgreesWithVertexEnumeration) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 300; ++k) {
    const std::size_t n = 2 + k % 3;
    const PricePolytope poly(RandomTechnology(rng, n), n);
    const auto vertices = EnumerateVertices(poly, 4);
    const auto c = testing::RandomVector(rng, n, -2, 2);
    double best = -kInf;
    std::vector<double> lexmin;
    for (const auto& v : vertices) {
      const double val = testing::Dot(c, v);
      if (val > best + 1e-12) {
        best = val;
        lexmin = v;
      }
    }
    const auto r = LpMax(poly, c);
    ASSERT_NEAR(r.value, best, 1e-12);
    ASSERT_LE(poly.MaxViolation(r.vertex), 1e-12);
  }
}

TEST(PricePolytopeTest, EmptyTechnologyNamesCommodity) {
  TechnologySpec t;
  t.supply = {0, 2};  // no demand commodity: v_0 = v_2 = 0
  t.demand = {};
  const PricePolytope ok(t, 3);  // v_1 = 1 remains
  t.supply = {0, 1, 2};
  try {
    PricePolytope bad(t, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPolytope);
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
}

TEST(PricePolytopeTest, RejectsOverlapAndNegativeCoefficients) {
  TechnologySpec t;
  t.supply = {0};
  t.demand = {0};
  EXPECT_THROW(PricePolytope(t, 2), Error);
  t.demand = {1};
  t.coeff = {{1, 0, -1.0}};
  EXPECT_THROW(PricePolytope(t, 2), Error);
}

TEST(PriceSetVertexTest, SegmentExamples) {
  const AgentSpec a = SegmentAgent();
  const auto p = PriceSetVertex(a, 2, std::vector<double>{-1, 1});
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(PriceSetVertex(a, 2, std::vector<double>{-7, 7}), p);
  const auto p0 = PriceSetVertex(a, 2, std::vector<double>{0, 0});
  EXPECT_NEAR(p0[0], 1.0 / 3.0, 1e-15);
}

TEST(PriceSetVertexTest, WrongModeThrows) {
  try {
    PriceSetVertex(RegularizedSegmentAgent({0.5, 0.5}, 1.0), 2, std::vector<double>{1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWrongPricingMode);
  }
  EXPECT_THROW(EtaValue(SegmentAgent(), 2, std::vector<double>{0, 0}), Error);
}

TEST(MuTest, SegmentValues) {
  const AgentSpec a = SegmentAgent();
  EXPECT_NEAR(MuValue(a, 2, std::vector<double>{-1, 1}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(MuValue(a, 2, std::vector<double>{0, 0}), 0.0);
  EXPECT_NEAR(MuValue(a, 2, std::vector<double>{-2, 2}), 2.0 / 3.0, 1e-15);
}

TEST(RegularizedPriceTest, InteriorReferenceIsItsOwnPrice) {
  const auto p = RegularizedPrice(RegularizedSegmentAgent({0.5, 0.5}, 1.0), 2,
                                  std::vector<double>{0, 0});
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(RegularizedPriceTest, OutsideReferenceClampsToEndpoint) {
  const auto agent = RegularizedSegmentAgent({0, 1}, 1.0);
  const auto p = RegularizedPrice(agent, 2, std::vector<double>{0, 0});
  const std::vector<double> a{1, 0}, b{1.0 / 3.0, 2.0 / 3.0};
  const auto expected = testing::ProjectSegment(std::vector<double>{0, 1}, a, b);
  EXPECT_LE(testing::MaxAbsDiff(p, expected), 1e-14);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(EtaValue(agent, 2, std::vector<double>{0, 0}), -1.0 / 9.0, 1e-14);
}

TEST(RegularizedPriceTest, LargeBetaApproachesProjectedReference) {
  const std::vector<double> x{0.7, -0.4};
  const std::vector<double> base =
      RegularizedPrice(RegularizedSegmentAgent({0, 1}, 1.0), 2, std::vector<double>{0, 0});
  for (double beta : {1.0, 10.0, 100.0, 1e4}) {
    const auto p = RegularizedPrice(RegularizedSegmentAgent({0, 1}, beta), 2, x);
    double dist = 0.0;
    for (int j = 0; j < 2; ++j) dist += (p[j] - base[j]) * (p[j] - base[j]);
    EXPECT_LE(std::sqrt(dist), std::hypot(x[0], x[1]) / beta + 1e-14);
  }
}

TEST(EtaTest, ZeroAtOriginWhenReferenceFeasible) {
  EXPECT_NEAR(EtaValue(RegularizedSegmentAgent({0.5, 0.5}, 2.0), 2, std::vector<double>{0, 0}),
              0.0, 1e-15);
}

TEST(EtaTest, NonFiniteTargetIsNumericalFailure) {
  try {
    EtaValue(RegularizedSegmentAgent({0.5, 0.5}, 1e-320), 2, std::vector<double>{1e300, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericalFailure);
  }
}

class RandomAgentTest : public ::testing::TestWithParam<int> {};

TEST_P(RandomAgentTest, OraclesStayInPolytope) {
  std::mt19937_64 rng(100 + GetParam());
  const std::size_t n = 2 + GetParam() % 3;
  for (int k = 0; k < 50; ++k) {
    AgentSpec a;
    a.technology = RandomTechnology(rng, n);
    a.pricing = RegularizedPricing{testing::RandomVector(rng, n, 0, 1), 0.3 + GetParam() * 0.2};
    const AgentPricer pricer(a, n);
    const auto x = testing::RandomVector(rng, n, -2, 2);
    ASSERT_LE(pricer.polytope().MaxViolation(pricer.Eta(x).gradient), 1e-9);
    ASSERT_LE(pricer.polytope().MaxViolation(LpMax(pricer.polytope(), x).vertex), 1e-9);
  }
}

TEST_P(RandomAgentTest, SupportFunctionLaws) {
  std::mt19937_64 rng(200 + GetParam());
  const std::size_t n = 2 + GetParam() % 3;
  std::uniform_real_distribution<double> scale(0.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    AgentSpec a;
    a.technology = RandomTechnology(rng, n);
    a.pricing = LpPricing{};
    const AgentPricer pricer(a, n);
    const auto x = testing::RandomVector(rng, n, -2, 2);
    const auto y = testing::RandomVector(rng, n, -2, 2);
    const double t = scale(rng);
    std::vector<double> tx(n), xy(n);
    for (std::size_t j = 0; j < n; ++j) {
      tx[j] = t * x[j];
      xy[j] = x[j] + y[j];
    }
    const double mx = pricer.Mu(x).value;
    ASSERT_NEAR(pricer.Mu(tx).value, t * mx, 1e-10 * (1.0 + std::abs(t * mx)));
    ASSERT_LE(pricer.Mu(xy).value, mx + pricer.Mu(y).value + 1e-10);
    // Subgradient inequality.
    const auto p = pricer.Mu(x).gradient;
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) d[j] = y[j] - x[j];
    ASSERT_GE(pricer.Mu(y).value, mx + testing::Dot(p, d) - 1e-10);
    // argmax invariance under positive scaling.
    if (t > 1e-3) ASSERT_EQ(pricer.Mu(tx).gradient, p);
  }
}

TEST_P(RandomAgentTest, CompletedSquareMatchesDirectProjection) {
  std::mt19937_64 rng(300 + GetParam());
  const std::size_t n = 2 + GetParam() % 4;
  for (int k = 0; k < 40; ++k) {
    AgentSpec a;
    a.technology = RandomTechnology(rng, n);
    const auto ref = testing::RandomVector(rng, n, 0, 1);
    const double beta = 0.2 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    a.pricing = RegularizedPricing{ref, beta};
    const AgentPricer pricer(a, n);
    const auto x = testing::RandomVector(rng, n, -1.5, 1.5);
    std::vector<double> q(n);
    for (std::size_t j = 0; j < n; ++j) q[j] = ref[j] + x[j] / beta;
    const auto direct = ProjectPolytopeActiveSet(pricer.polytope(), q);
    ASSERT_LE(testing::MaxAbsDiff(pricer.Eta(x).gradient, direct), 1e-8);
  }
}

TEST_P(RandomAgentTest, EtaIsMidpointConvex) {
  std::mt19937_64 rng(400 + GetParam());
  const std::size_t n = 2 + GetParam() % 3;
  for (int k = 0; k < 100; ++k) {
    AgentSpec a;
    a.technology = RandomTechnology(rng, n);
    a.pricing = RegularizedPricing{testing::RandomVector(rng, n, 0, 1), 0.5};
    const AgentPricer pricer(a, n);
    const auto x = testing::RandomVector(rng, n, -2, 2);
    const auto y = testing::RandomVector(rng, n, -2, 2);
    std::vector<double> mid(n);
    for (std::size_t j = 0; j < n; ++j) mid[j] = 0.5 * x[j] + 0.5 * y[j];
    ASSERT_LE(pricer.Eta(mid).value,
              0.5 * pricer.Eta(x).value + 0.5 * pricer.Eta(y).value + 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomAgentTest, ::testing::Range(0, 6));

TEST(EnumerateVerticesTest, SegmentHasTwoVertices) {
  const auto v = EnumerateVertices(SegmentPolytope());
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0][0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(v[1][0], 1.0, 1e-15);
}

TEST(EnumerateVerticesTest, GuardedByDimension) {
  EXPECT_THROW(EnumerateVertices(PricePolytope(TechnologySpec{}, 5), 4), Error);
}

TEST(MarketPricerTest, StackedOraclesMatchPerAgentCalls) {
  GeneratorParams p;
  p.mode = GeneratorMode::kRegularized;
  const Scenario s = RandomScenario(4, 5, 3, p);
  std::mt19937_64 rng(4);
  const MarketState x = testing::RandomFeasibleState(s, rng);
  const Matrix g = EtaGradient(x, s);
  double total = 0.0;
  for (std::size_t i = 0; i < s.m(); ++i) {
    const auto row = RegularizedPrice(s.agents[i], s.n(), x.row(i));
    for (std::size_t j = 0; j < s.n(); ++j) ASSERT_EQ(g(i, j), row[j]);
    total += EtaValue(s.agents[i], s.n(), x.row(i));
  }
  EXPECT_NEAR(Eta(x, s), total, 1e-14);
  EXPECT_EQ(MarketPricer(s, true).Evaluate(x).prices, g);
  EXPECT_THROW(Mu(x, s), Error);
}

}  // namespace
}  // namespace marketeq
