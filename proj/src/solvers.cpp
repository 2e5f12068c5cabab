#include "marketeq/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "marketeq/error.hpp"
#include "marketeq/pricing.hpp"
#include "marketeq/simd.hpp"

namespace marketeq {

std::string_view ToString(Method method) {
  switch (method) {
    case Method::kSgp: return "sgp";
    case Method::kPcgm: return "pcgm";
    case Method::kFpi: return "fpi";
  }
  return "unknown";
}

std::string_view ToString(TraceStatus status) {
  switch (status) {
    case TraceStatus::kConverged: return "converged";
    case TraceStatus::kIterationCap: return "iteration_cap";
    case TraceStatus::kStageCap: return "stage_cap";
  }
  return "unknown";
}

namespace {

void RequireMode(const Scenario& scenario, AssumptionMode mode) {
  const AssumptionReport report = ValidateAssumptions(scenario, mode);
  if (!report.passed()) {
    throw Error(ErrorCode::kAssumptionViolation, report.Summary());
  }
}

// x0 if it already lies in D-tilde, else its projection onto D-tilde.
MarketState FeasibleStart(const Scenario& scenario, const MarketState& x0,
                          bool parallel) {
  if (x0.rows() != scenario.m() || x0.cols() != scenario.n()) {
    throw Error(ErrorCode::kInvalidParams, "initial state must be m x n");
  }
  const auto [lo, hi] = GlobalBounds(scenario);
  if (IsBalancedFeasible(x0, lo, hi)) return x0;
  const auto boxes = CommodityBoxes(lo, hi);
  return ProjectMarket(x0, boxes, parallel).y;
}

double GapValue(const Matrix& prices, const MarketState& x, const MarketState& y) {
  std::vector<double> diff(x.size());
  simd::Sub(x.flat(), y.flat(), diff);
  return simd::Dot(prices.flat(), diff);
}

GapReport GapWith(const MarketPricer& pricer, const MarketState& x,
                  const Scenario& scenario, bool parallel) {
  GapReport out;
  MarketPrices mp = pricer.Evaluate(x);
  const auto [lo, hi] = WindowBounds(scenario, x);
  const auto boxes = CommodityBoxes(lo, hi);
  MarketLmo lmo = LmoMarket(mp.prices, boxes, parallel);
  out.gap = GapValue(mp.prices, x, lmo.y);
  out.y = std::move(lmo.y);
  out.prices = std::move(mp.prices);
  out.objective = mp.objective;
  out.multipliers = std::move(lmo.multipliers);
  return out;
}

void CheckSgpConfig(const SgpConfig& c) {
  if (!(c.theta0 > 0.0) || !std::isfinite(c.theta0) || !(c.target_gap > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "SGP needs theta0 > 0 and target_gap > 0");
  }
}

// Shared loop of SGP (moving = false: project onto D-tilde) and the
// moving-set iteration (moving = true: project onto D(x^k)). With infinite
// radii both produce the same bits.
ConvergenceTrace RunProjection(const Scenario& scenario, const SgpConfig& config,
                               const MarketState& x0, const RunOptions& options,
                               bool moving) {
  CheckSgpConfig(config);
  const MarketPricer pricer(scenario, options.parallel);
  const auto [glo, ghi] = GlobalBounds(scenario);
  const auto global_boxes = CommodityBoxes(glo, ghi);

  ConvergenceTrace trace;
  trace.method = moving ? Method::kFpi : Method::kSgp;
  trace.experimental = moving;
  MarketState x = FeasibleStart(scenario, x0, options.parallel);

  // With set-valued prices the selected subgradient need not certify
  // anything near a kink, so the gap uses the step-weighted average of all
  // subgradients so far: mu(x) - min_y <p_avg, y>, an upper bound on
  // mu(x) - min mu over the current set.
  const bool aggregate = std::all_of(scenario.agents.begin(), scenario.agents.end(),
                                     [](const AgentSpec& a) { return IsLpPricing(a); });
  Matrix average(x.rows(), x.cols());
  std::vector<double> step(x.size());
  double weight = 0.0;

  for (std::size_t k = 0;; ++k) {
    const MarketPrices mp = pricer.Evaluate(x);
    const double theta = config.theta0 / static_cast<double>(k + 1);
    const auto [lo, hi] = WindowBounds(scenario, x);
    const auto window = CommodityBoxes(lo, hi);
    double gap = 0.0;
    ClearingPrices multipliers;
    if (aggregate) {
      weight += theta;
      simd::Sub(mp.prices.flat(), average.flat(), step);
      simd::Axpy(theta / weight, step, average.flat());
      MarketLmo lmo = LmoMarket(average, window, options.parallel);
      gap = mp.objective - lmo.value;
      multipliers = std::move(lmo.multipliers);
    } else {
      MarketLmo lmo = LmoMarket(mp.prices, window, options.parallel);
      gap = GapValue(mp.prices, x, lmo.y);
      multipliers = std::move(lmo.multipliers);
    }
    const bool stop = gap <= config.target_gap || k >= config.max_iter;
    trace.records.push_back({0, k, 0, mp.objective, gap, theta, !stop, false});
    if (options.keep_iterates) trace.iterates.push_back(x);
    if (stop) {
      trace.status = gap <= config.target_gap ? TraceStatus::kConverged
                                              : TraceStatus::kIterationCap;
      trace.final_gap = gap;
      trace.final_objective = mp.objective;
      trace.final_prices = std::move(multipliers);
      break;
    }

    MarketState z = x;
    simd::Axpy(-theta, mp.prices.flat(), z.flat());
    MarketProjection proj =
        ProjectMarket(z, moving ? window : global_boxes, options.parallel);
    // Projection multiplier mu_j solves y = clip(x - theta p - mu_j); the
    // clearing price of the step's per-commodity problem is -mu_j / theta.
    trace.projection_prices = proj.multipliers;
    for (double& v : trace.projection_prices.lambda) v = -v / theta;
    x = std::move(proj.y);
    ++trace.steps;
  }
  trace.final_state = std::move(x);
  return trace;
}

void CheckPcgmConfig(const PcgmConfig& c) {
  const auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(c.beta) || !open_unit(c.delta_decay) || !open_unit(c.tau0) ||
      !open_unit(c.tau_decay) || !(c.delta0 > 0.0) || !std::isfinite(c.delta0) ||
      !(c.delta_min > 0.0) || c.stage_cap == 0 || c.iter_cap == 0) {
    throw Error(ErrorCode::kInvalidParams,
                "PCGM needs beta, tau0, decays in (0,1), delta0, delta_min > 0 and "
                "positive caps");
  }
}

}  // namespace

GapReport Gap(const MarketState& x, const Scenario& scenario, bool parallel) {
  return GapWith(MarketPricer(scenario, parallel), x, scenario, parallel);
}

ConvergenceTrace SolveSgp(const Scenario& scenario, const SgpConfig& config,
                          const MarketState& x0, const RunOptions& options) {
  RequireMode(scenario, AssumptionMode::kB);
  return RunProjection(scenario, config, x0, options, /*moving=*/false);
}

ConvergenceTrace SolveFpi(const Scenario& scenario, const SgpConfig& config,
                          const MarketState& x0, const RunOptions& options) {
  RequireMode(scenario, AssumptionMode::kA);
  return RunProjection(scenario, config, x0, options, /*moving=*/true);
}

ConvergenceTrace SolvePcgm(const Scenario& scenario, const PcgmConfig& config,
                           const MarketState& w0, const RunOptions& options) {
  RequireMode(scenario, AssumptionMode::kC);
  CheckPcgmConfig(config);
  const MarketPricer pricer(scenario, options.parallel);

  ConvergenceTrace trace;
  trace.method = Method::kPcgm;
  MarketState x = FeasibleStart(scenario, w0, options.parallel);
  MarketPrices at_x = pricer.Evaluate(x);
  MarketState d(x.rows(), x.cols());
  ClearingPrices last_multipliers;
  double last_gap = 0.0;

  const auto finish = [&](TraceStatus status) {
    trace.status = status;
    trace.final_gap = last_gap;
    trace.final_objective = at_x.objective;
    trace.final_prices = last_multipliers;
    trace.final_state = x;
  };

  for (std::size_t s = 0;; ++s) {
    if (s >= config.stage_cap) {
      finish(TraceStatus::kStageCap);
      return trace;
    }
    const double delta = config.delta0 * std::pow(config.delta_decay, static_cast<double>(s));
    std::size_t l = 0;
    const auto tau = [&](std::size_t index) {
      return config.tau0 * std::pow(config.tau_decay, static_cast<double>(index));
    };
    double theta = tau(0);

    for (std::size_t k = 0;; ++k) {
      const auto [lo, hi] = WindowBounds(scenario, x);
      MarketLmo lmo = LmoMarket(at_x.prices, CommodityBoxes(lo, hi), options.parallel);
      last_gap = GapValue(at_x.prices, x, lmo.y);
      last_multipliers = std::move(lmo.multipliers);

      if (last_gap < delta) {
        trace.records.push_back({s, k, l, at_x.objective, last_gap, theta, false, true});
        trace.record_delta.push_back(delta);
        if (options.keep_iterates) trace.iterates.push_back(x);
        trace.restarts.push_back({s, delta, x});
        ++trace.stages;
        break;
      }
      if (k >= config.iter_cap) {
        trace.records.push_back({s, k, l, at_x.objective, last_gap, theta, false, false});
        trace.record_delta.push_back(delta);
        if (options.keep_iterates) trace.iterates.push_back(x);
        finish(TraceStatus::kIterationCap);
        return trace;
      }

      simd::Sub(lmo.y.flat(), x.flat(), d.flat());
      MarketState next = x;
      simd::Axpy(theta, d.flat(), next.flat());
      MarketPrices at_next = pricer.Evaluate(next);
      const bool descent = simd::Dot(at_next.prices.flat(), d.flat()) <=
                           config.beta * simd::Dot(at_x.prices.flat(), d.flat());

      trace.records.push_back({s, k, l, at_x.objective, last_gap, theta, descent, false});
      trace.record_delta.push_back(delta);
      if (options.keep_iterates) trace.iterates.push_back(x);

      if (descent) {
        theta = std::min(2.0 * theta, tau(l));
      } else {
        ++l;
        theta = std::min(theta, tau(l));
      }
      x = std::move(next);
      at_x = std::move(at_next);
      ++trace.steps;
    }

    if (delta <= config.delta_min) {
      finish(TraceStatus::kConverged);
      return trace;
    }
  }
}

void WriteTraceCsv(std::ostream& out, const ConvergenceTrace& trace) {
  out << "stage,iter,l,objective,gap,theta,accepted,restart\n";
  char buf[128];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.17g,%.17g,%.17g,%d,%d\n", r.stage,
                  r.iter, r.l, r.objective, r.gap, r.theta, r.accepted ? 1 : 0,
                  r.restart ? 1 : 0);
    out << buf;
  }
}

}  // namespace marketeq
