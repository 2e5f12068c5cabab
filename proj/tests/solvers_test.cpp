#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "marketeq/error.hpp"
#include "marketeq/pricing.hpp"
#include "marketeq/solvers.hpp"
#include "marketeq/verify.hpp"
#include "oracles.hpp"

namespace marketeq {
namespace {

Scenario IdenticalReferenceScenario(std::size_t m, double radius) {
  AgentSpec a;
  a.radius.assign(3, radius);
  a.pricing = RegularizedPricing{{0.2, 0.3, 0.5}, 1.0};
  return testing::UniformScenario(m, 3, a);
}

Scenario RegularizedScenario(std::uint64_t seed, std::size_t m, std::size_t n, double radius) {
  GeneratorParams p;
  p.mode = GeneratorMode::kRegularized;
  p.radius = radius;
  return RandomScenario(seed, m, n, p);
}

std::string Csv(const ConvergenceTrace& t) {
  std::ostringstream out;
  WriteTraceCsv(out, t);
  return out.str();
}

void ExpectInBalancedSet(const Scenario& s, const MarketState& x) {
  const auto [lo, hi] = GlobalBounds(s);
  ASSERT_LE(BalanceViolation(x), 1e-9);
  ASSERT_LE(BoxViolation(x, lo, hi), 1e-9);
}

TEST(GapTest, IdenticalReferencesGiveZeroGapAtOrigin) {
  const Scenario s = IdenticalReferenceScenario(4, kInf);
  const GapReport g = Gap(MarketState(4, 3), s);
  EXPECT_NEAR(g.gap, 0.0, 1e-15);
  EXPECT_NEAR(g.objective, 0.0, 1e-15);
}

TEST(GapTest, NonnegativeAndShiftInvariant) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    const Scenario s = RegularizedScenario(k, 2 + k % 4, 1 + k % 3, kInf);
    const MarketState x = testing::RandomFeasibleState(s, rng);
    const GapReport g = Gap(x, s);
    ASSERT_GE(g.gap, -1e-12);
    const auto [lo, hi] = GlobalBounds(s);
    const auto boxes = CommodityBoxes(lo, hi);
    Matrix shifted = g.prices;
    const auto shift = testing::RandomVector(rng, s.n(), -3, 3);
    for (std::size_t i = 0; i < s.m(); ++i) {
      for (std::size_t j = 0; j < s.n(); ++j) shifted(i, j) += shift[j];
    }
    const MarketLmo lmo = LmoMarket(shifted, boxes);
    double shifted_gap = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
      shifted_gap += shifted.flat()[e] * (x.flat()[e] - lmo.y.flat()[e]);
    }
    ASSERT_NEAR(shifted_gap, g.gap, 1e-10);
  }
}

TEST(SgpTest, Seed7ReachesEpigraphOptimum) {
  const Scenario s = RandomScenario(7, 4, 2);
  const ReferenceOptimum ref = BruteForceMuOptimum(s);
  SgpConfig c;
  c.max_iter = 200000;
  const ConvergenceTrace t = SolveSgp(s, c, MarketState(4, 2));
  EXPECT_LE(t.records.size(), 200001u);
  EXPECT_LE(t.final_objective - ref.value, 1e-3);
  EXPECT_GE(t.final_objective - ref.value, -1e-9);
  // The aggregated gap bounds the suboptimality.
  EXPECT_LE(t.final_objective - ref.value, t.final_gap + 1e-12);
}

TEST(SgpTest, StepRuleIdentity) {
  const Scenario s = RandomScenario(3, 3, 2);
  SgpConfig c;
  c.theta0 = 0.7;
  c.max_iter = 500;
  c.target_gap = 1e-12;
  const ConvergenceTrace t = SolveSgp(s, c, MarketState(3, 2));
  ASSERT_EQ(t.records.size(), 501u);
  for (const auto& r : t.records) {
    ASSERT_DOUBLE_EQ(r.theta * static_cast<double>(r.iter + 1), c.theta0);
  }
  EXPECT_EQ(t.status, TraceStatus::kIterationCap);
}

TEST(SgpTest, IdenticalPolytopesAndSymmetricBoxesStopAtOrigin) {
  AgentSpec a = testing::SegmentAgent();
  const Scenario s = testing::UniformScenario(4, 2, a);
  const ConvergenceTrace t = SolveSgp(s, {}, MarketState(4, 2));
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_NEAR(t.final_gap, 0.0, 1e-15);
  EXPECT_TRUE(t.converged());
  EXPECT_EQ(t.final_state, MarketState(4, 2));
}

TEST(SgpTest, IteratesStayBalancedAndDeterministic) {
  const Scenario s = RandomScenario(21, 5, 3);
  SgpConfig c;
  c.max_iter = 3000;
  RunOptions keep;
  keep.keep_iterates = true;
  const ConvergenceTrace a = SolveSgp(s, c, MarketState(5, 3), keep);
  for (const auto& x : a.iterates) ExpectInBalancedSet(s, x);
  const ConvergenceTrace b = SolveSgp(s, c, MarketState(5, 3));
  EXPECT_EQ(Csv(a), Csv(b));
  RunOptions par;
  par.parallel = true;
  EXPECT_EQ(Csv(SolveSgp(s, c, MarketState(5, 3), par)), Csv(a));
}

TEST(SgpTest, InfeasibleStartIsProjected) {
  const Scenario s = RandomScenario(5, 3, 2);
  MarketState x0(3, 2, 0.5);
  RunOptions keep;
  keep.keep_iterates = true;
  SgpConfig c;
  c.max_iter = 10;
  const ConvergenceTrace t = SolveSgp(s, c, x0, keep);
  ExpectInBalancedSet(s, t.iterates.front());
}

TEST(SgpTest, RejectsRegularizedScenarioAndBadConfig) {
  try {
    SolveSgp(RegularizedScenario(1, 3, 2, kInf), {}, MarketState(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAssumptionViolation);
    EXPECT_NE(std::string(e.what()).find("B2"), std::string::npos);
  }
  SgpConfig c;
  c.theta0 = 0.0;
  EXPECT_THROW(SolveSgp(RandomScenario(1, 3, 2), c, MarketState(3, 2)), Error);
  EXPECT_THROW(SolveSgp(RandomScenario(1, 3, 2), {}, MarketState(2, 2)), Error);
}

TEST(PcgmTest, StationaryStartCascadesThroughRestarts) {
  const Scenario s = IdenticalReferenceScenario(3, 0.5);
  const ConvergenceTrace t = SolvePcgm(s, {}, MarketState(3, 3));
  EXPECT_EQ(t.steps, 0u);
  EXPECT_TRUE(t.converged());
  EXPECT_EQ(t.final_state, MarketState(3, 3));
  ASSERT_EQ(t.restarts.size(), t.records.size());
  for (const auto& r : t.records) EXPECT_TRUE(r.restart);
}

// Every step that passes the descent test decreases eta by beta*theta*delta.
void ExpectCertifiedDecrease(const Scenario& s, const PcgmConfig& c) {
  RunOptions keep;
  keep.keep_iterates = true;
  const ConvergenceTrace t = SolvePcgm(s, c, MarketState(s.m(), s.n()), keep);
  ASSERT_NE(t.status, TraceStatus::kIterationCap);
  std::size_t checked = 0;
  for (std::size_t r = 0; r + 1 < t.records.size(); ++r) {
    const TraceRecord& rec = t.records[r];
    if (!rec.accepted) continue;
    const double before = Eta(t.iterates[r], s);
    const double after = Eta(t.iterates[r + 1], s);
    ASSERT_LE(after, before - c.beta * rec.theta * t.record_delta[r] + 1e-10)
        << "record " << r;
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(PcgmTest, CertifiedDecreaseOnShippedScenarios) {
  ExpectCertifiedDecrease(RegularizedScenario(11, 3, 2, 0.5), {});
  ExpectCertifiedDecrease(RegularizedScenario(12, 4, 3, 0.3), {});
  ExpectCertifiedDecrease(RegularizedScenario(13, 5, 2, 1.0), {});
}

TEST(PcgmTest, Seed11CertificateAndRestarts) {
  const Scenario s = RegularizedScenario(11, 3, 2, 0.5);
  RunOptions keep;
  keep.keep_iterates = true;
  const ConvergenceTrace t = SolvePcgm(s, {}, MarketState(3, 2), keep);
  ASSERT_TRUE(t.converged());
  EXPECT_LE(Gap(t.final_state, s).gap, 1e-5);
  for (const auto& w : t.restarts) {
    EXPECT_LE(Gap(w.w, s).gap, w.delta + 1e-10);
  }
  for (const auto& x : t.iterates) {
    ExpectInBalancedSet(s, x);
    const auto [lo, hi] = WindowBounds(s, x);
    for (std::size_t e = 0; e < x.size(); ++e) {
      ASSERT_GE(x.flat()[e], lo.flat()[e]);
      ASSERT_LE(x.flat()[e], hi.flat()[e]);
    }
  }
}

TEST(PcgmTest, StepSizeSchedule) {
  const Scenario s = RegularizedScenario(12, 4, 3, 0.3);
  const PcgmConfig c;
  const ConvergenceTrace t = SolvePcgm(s, c, MarketState(4, 3));
  for (std::size_t r = 0; r < t.records.size(); ++r) {
    const auto& rec = t.records[r];
    const double tau_l = c.tau0 * std::pow(c.tau_decay, static_cast<double>(rec.l));
    ASSERT_LE(rec.theta, tau_l);
    if (rec.iter == 0) ASSERT_EQ(rec.theta, c.tau0);
  }
}

TEST(PcgmTest, CapsReportedNotThrown) {
  const Scenario s = RegularizedScenario(11, 3, 2, 0.5);
  PcgmConfig c;
  c.stage_cap = 2;
  EXPECT_EQ(SolvePcgm(s, c, MarketState(3, 2)).status, TraceStatus::kStageCap);
  c = {};
  c.iter_cap = 1;
  c.delta_min = 1e-9;
  EXPECT_EQ(SolvePcgm(s, c, MarketState(3, 2)).status, TraceStatus::kIterationCap);
  c = {};
  c.beta = 1.5;
  EXPECT_THROW(SolvePcgm(s, c, MarketState(3, 2)), Error);
  EXPECT_THROW(SolvePcgm(RandomScenario(1, 3, 2), {}, MarketState(3, 2)), Error);
}

TEST(FpiTest, InfiniteRadiiReproduceSgpBitForBit) {
  const Scenario s = RandomScenario(7, 4, 2);
  SgpConfig c;
  c.max_iter = 2000;
  const ConvergenceTrace sgp = SolveSgp(s, c, MarketState(4, 2));
  const ConvergenceTrace fpi = SolveFpi(s, c, MarketState(4, 2));
  EXPECT_TRUE(fpi.experimental);
  EXPECT_EQ(Csv(sgp), Csv(fpi));
  EXPECT_EQ(sgp.final_state, fpi.final_state);
}

TEST(FpiTest, MovingWindowIteratesBalanced) {
  const Scenario s = RegularizedScenario(4, 4, 3, 0.4);
  SgpConfig c;
  c.max_iter = 500;
  RunOptions keep;
  keep.keep_iterates = true;
  const ConvergenceTrace t = SolveFpi(s, c, MarketState(4, 3), keep);
  for (const auto& x : t.iterates) ExpectInBalancedSet(s, x);
}

TEST(TraceCsvTest, HeaderAndFormatting) {
  ConvergenceTrace t;
  t.records.push_back({1, 2, 3, 0.1, 1.0 / 3.0, 0.5, true, false});
  EXPECT_EQ(Csv(t),
            "stage,iter,l,objective,gap,theta,accepted,restart\n"
            "1,2,3,0.10000000000000001,0.33333333333333331,0.5,1,0\n");
}

}  // namespace
}  // namespace marketeq
