#include "marketeq/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "marketeq/error.hpp"
#include "marketeq/pricing.hpp"

namespace marketeq {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kInvalidScenario: return "InvalidScenario";
    case ErrorCode::kStateOutsideGlobalBox: return "StateOutsideGlobalBox";
    case ErrorCode::kEmptyPolytope: return "EmptyPolytope";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kWrongPricingMode: return "WrongPricingMode";
    case ErrorCode::kEmptyBalanceSet: return "EmptyBalanceSet";
    case ErrorCode::kInfeasibleMarket: return "InfeasibleMarket";
    case ErrorCode::kInfeasiblePoint: return "InfeasiblePoint";
    case ErrorCode::kAssumptionViolation: return "AssumptionViolation";
    case ErrorCode::kTooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::kOracleNotConverged: return "OracleNotConverged";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

bool IsLpPricing(const AgentSpec& agent) {
  return std::holds_alternative<LpPricing>(agent.pricing);
}

bool IsRegularizedPricing(const AgentSpec& agent) {
  return std::holds_alternative<RegularizedPricing>(agent.pricing);
}

void CheckStructure(const Scenario& s) {
  const auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidScenario, msg);
  };
  if (s.m() < 1 || s.n() < 1) fail("m and n must be positive");
  if (s.agents.size() != s.m()) fail("agents length must equal m");
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AgentSpec& a = s.agents[i];
    const std::string who = "agent " + std::to_string(i) + ": ";
    if (a.lower.size() != s.n() || a.upper.size() != s.n() || a.radius.size() != s.n()) {
      fail(who + "lower, upper and radius need n entries");
    }
    const auto check_index = [&](std::size_t j) {
      if (j >= s.n()) fail(who + "technology index " + std::to_string(j) + " >= n");
    };
    for (std::size_t j : a.technology.supply) check_index(j);
    for (std::size_t j : a.technology.demand) check_index(j);
    for (const auto& c : a.technology.coeff) {
      check_index(c.demand_commodity);
      check_index(c.supply_commodity);
    }
    if (const auto* reg = std::get_if<RegularizedPricing>(&a.pricing)) {
      if (reg->reference.size() != s.n()) fail(who + "reference price needs n entries");
    }
  }
}

std::vector<Interval> FeasibleWindow(const AgentSpec& agent,
                                     std::span<const double> x_row) {
  const std::size_t n = x_row.size();
  if (agent.lower.size() != n || agent.upper.size() != n || agent.radius.size() != n) {
    throw Error(ErrorCode::kInvalidParams, "window dimension mismatch");
  }
  std::vector<Interval> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = x_row[j];
    if (!(x >= agent.lower[j] - kFeasibilityTol && x <= agent.upper[j] + kFeasibilityTol)) {
      std::ostringstream msg;
      msg << "x[" << j << "] = " << x << " outside [" << agent.lower[j] << ", "
          << agent.upper[j] << "]";
      throw Error(ErrorCode::kStateOutsideGlobalBox, msg.str());
    }
    const double inside = std::clamp(x, agent.lower[j], agent.upper[j]);
    out[j].lower = std::max(agent.lower[j], inside - agent.radius[j]);
    out[j].upper = std::min(agent.upper[j], inside + agent.radius[j]);
  }
  return out;
}

std::pair<Matrix, Matrix> WindowBounds(const Scenario& s, const MarketState& x) {
  Matrix lo(s.m(), s.n()), hi(s.m(), s.n());
  for (std::size_t i = 0; i < s.m(); ++i) {
    const auto w = FeasibleWindow(s.agents[i], x.row(i));
    for (std::size_t j = 0; j < s.n(); ++j) {
      lo(i, j) = w[j].lower;
      hi(i, j) = w[j].upper;
    }
  }
  return {std::move(lo), std::move(hi)};
}

std::pair<Matrix, Matrix> GlobalBounds(const Scenario& s) {
  Matrix lo(s.m(), s.n()), hi(s.m(), s.n());
  for (std::size_t i = 0; i < s.m(); ++i) {
    for (std::size_t j = 0; j < s.n(); ++j) {
      lo(i, j) = s.agents[i].lower[j];
      hi(i, j) = s.agents[i].upper[j];
    }
  }
  return {std::move(lo), std::move(hi)};
}

double BalanceViolation(const MarketState& y) {
  double worst = 0.0;
  for (std::size_t j = 0; j < y.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) sum += y(i, j);
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

double BoxViolation(const MarketState& y, const Matrix& lower,
                    const Matrix& upper) {
  double worst = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.cols(); ++j) {
      worst = std::max({worst, lower(i, j) - y(i, j), y(i, j) - upper(i, j)});
    }
  }
  return worst;
}

bool IsBalancedFeasible(const MarketState& y, const Matrix& lower,
                        const Matrix& upper, double tol) {
  if (y.rows() != lower.rows() || y.cols() != lower.cols() ||
      y.rows() != upper.rows() || y.cols() != upper.cols()) {
    return false;
  }
  for (double v : y.flat()) {
    if (!std::isfinite(v)) return false;
  }
  return BalanceViolation(y) <= tol && BoxViolation(y, lower, upper) <= tol;
}

bool AssumptionReport::Mentions(const std::string& group) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const auto& f) { return f.group == group; });
}

std::string AssumptionReport::Summary() const {
  std::ostringstream out;
  for (const auto& f : violations) out << "(" << f.group << ") " << f.message << "\n";
  return out.str();
}

namespace {

struct Groups {
  const char* box;      // compact global boxes
  const char* balance;  // D-tilde nonempty, windows contain the state
  const char* pricing;
};

Groups GroupsFor(AssumptionMode mode) {
  switch (mode) {
    case AssumptionMode::kA: return {"A1", "A2'", "A1"};
    case AssumptionMode::kB: return {"B1'", "B1'", "B2"};
    case AssumptionMode::kC: return {"C1'", "C3", "C2"};
  }
  return {"A1", "A2'", "A1"};
}

}  // namespace

AssumptionReport ValidateAssumptions(const Scenario& s, AssumptionMode mode) {
  AssumptionReport report;
  report.mode = mode;
  const Groups g = GroupsFor(mode);
  const auto flag = [&](const char* group, const std::string& msg) {
    report.violations.push_back({group, msg});
  };

  if (s.m() < 1 || s.n() < 1 || s.agents.size() != s.m()) {
    flag(g.box, "dimensions do not match the agent list");
    return report;
  }
  try {
    CheckStructure(s);
  } catch (const Error& e) {
    flag(g.box, e.what());
    return report;
  }

  const std::size_t n = s.n();
  for (std::size_t i = 0; i < s.m(); ++i) {
    const AgentSpec& a = s.agents[i];
    const std::string who = "agent " + std::to_string(i);
    for (std::size_t j = 0; j < n; ++j) {
      const std::string at = who + ", commodity " + std::to_string(j);
      if (!std::isfinite(a.lower[j]) || !std::isfinite(a.upper[j])) {
        flag(g.box, at + ": global bounds must be finite (compactness)");
      } else if (a.lower[j] > a.upper[j]) {
        flag(g.box, at + ": lower bound exceeds upper bound");
      }
      if (std::isnan(a.radius[j]) || a.radius[j] < 0.0) {
        flag(g.balance, at + ": window radius must be nonnegative");
      }
      if (mode == AssumptionMode::kB && !std::isinf(a.radius[j])) {
        flag("B1'", at + ": stationary transaction sets need an infinite window radius");
      }
    }
    try {
      PricePolytope polytope(a.technology, n);
    } catch (const Error& e) {
      flag(g.pricing, who + ": " + e.what());
    }
    if (const auto* reg = std::get_if<RegularizedPricing>(&a.pricing)) {
      if (!(reg->beta > 0.0) || !std::isfinite(reg->beta)) {
        flag(g.pricing, who + ": regularization weight beta must be positive");
      }
      for (double v : reg->reference) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          flag(g.pricing, who + ": reference prices must be finite and nonnegative");
          break;
        }
      }
      if (mode == AssumptionMode::kB) {
        flag("B2", who + ": set-valued LP pricing required, found regularized pricing");
      }
    } else if (mode == AssumptionMode::kC) {
      flag("C2", who + ": single-valued regularized pricing required, found LP pricing");
    }
  }

  // Box plus one balance equation per commodity: nonempty iff the column's
  // lower bounds sum to <= 0 and its upper bounds to >= 0.
  for (std::size_t j = 0; j < n; ++j) {
    double lo = 0.0, hi = 0.0;
    for (const auto& a : s.agents) {
      lo += a.lower[j];
      hi += a.upper[j];
    }
    if (lo > 0.0 || hi < 0.0) {
      std::ostringstream msg;
      msg << "commodity " << j << ": balanced set empty (sum of lower bounds " << lo
          << ", sum of upper bounds " << hi << ")";
      flag(g.balance, msg.str());
    }
  }
  return report;
}

AssumptionMode DeclaredMode(GeneratorMode mode) {
  return mode == GeneratorMode::kLp ? AssumptionMode::kB : AssumptionMode::kC;
}

Scenario RandomScenario(std::uint64_t seed, std::size_t m, std::size_t n,
                        const GeneratorParams& params) {
  if (m < 2) throw Error(ErrorCode::kInvalidParams, "random scenarios need at least 2 agents");
  if (n < 1) throw Error(ErrorCode::kInvalidParams, "random scenarios need at least 1 commodity");
  if (std::isnan(params.radius) || params.radius < 0.0 || !(params.box_scale > 0.0) ||
      !std::isfinite(params.box_scale) || !(params.beta_min > 0.0) ||
      !(params.beta_min <= params.beta_max) || !std::isfinite(params.beta_max) ||
      !(params.coeff_min > 0.0) || !(params.coeff_min <= params.coeff_max) ||
      !std::isfinite(params.coeff_max)) {
    throw Error(ErrorCode::kInvalidParams, "generator parameters out of range");
  }
  if (params.mode == GeneratorMode::kLp && !std::isinf(params.radius)) {
    throw Error(ErrorCode::kInvalidParams,
                "LP-priced scenarios are stationary; radius must be infinite");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(0.2, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coeff(params.coeff_min, params.coeff_max);
  std::uniform_real_distribution<double> beta(params.beta_min, params.beta_max);
  std::uniform_int_distribution<int> role(0, 2);  // 0 none, 1 supply, 2 demand

  Scenario s;
  s.dims = {m, n};
  s.seed = seed;
  s.agents.resize(m);
  for (AgentSpec& a : s.agents) {
    a.lower.resize(n);
    a.upper.resize(n);
    a.radius.assign(n, params.radius);
    for (std::size_t j = 0; j < n; ++j) {
      a.lower[j] = -params.box_scale * box(rng);
      a.upper[j] = params.box_scale * box(rng);
    }

    std::vector<int> roles(n, 0);
    if (n >= 2) {
      for (int& r : roles) r = role(rng);
    }
    const auto count = [&](int r) { return std::count(roles.begin(), roles.end(), r); };
    if (count(1) > 0 && count(2) == 0) {
      // A supplier needs at least one input commodity to be priceable.
      auto it = std::find(roles.begin(), roles.end(), 0);
      if (it == roles.end()) it = std::find(roles.begin(), roles.end(), 1);
      *it = 2;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (roles[j] == 1) a.technology.supply.push_back(j);
      if (roles[j] == 2) a.technology.demand.push_back(j);
    }
    for (std::size_t s_idx : a.technology.demand) {
      for (std::size_t j : a.technology.supply) {
        a.technology.coeff.push_back({s_idx, j, coeff(rng)});
      }
    }

    if (params.mode == GeneratorMode::kLp) {
      a.pricing = LpPricing{};
    } else {
      RegularizedPricing reg;
      reg.reference.resize(n);
      double total = 0.0;
      for (double& v : reg.reference) {
        v = -std::log(1.0 - unit(rng));  // Dirichlet(1) via normalised Exp(1)
        total += v;
      }
      for (double& v : reg.reference) v /= total;
      reg.beta = beta(rng);
      a.pricing = std::move(reg);
    }
  }
  return s;
}

}  // namespace marketeq
