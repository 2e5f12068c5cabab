#include "marketeq/pricing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "marketeq/error.hpp"
#include "marketeq/simd.hpp"
#include "parallel.hpp"

namespace marketeq {
namespace {

const RegularizedPricing& RequireRegularized(const PricingMode& mode) {
  const auto* reg = std::get_if<RegularizedPricing>(&mode);
  if (reg == nullptr) {
    throw Error(ErrorCode::kWrongPricingMode,
                "agent uses LP pricing; regularized oracle requested");
  }
  return *reg;
}

void RequireLp(const PricingMode& mode) {
  if (!std::holds_alternative<LpPricing>(mode)) {
    throw Error(ErrorCode::kWrongPricingMode,
                "agent uses regularized pricing; LP oracle requested");
  }
}

// Barycentric weights of the point of aff(corral) nearest to q.
std::vector<double> AffineMinimizer(
    const std::vector<std::vector<double>>& corral,
    std::span<const double> q) {
  const std::size_t k = corral.size();
  if (k == 1) return {1.0};
  const std::size_t n = q.size();
  Eigen::MatrixXd d(n, k - 1);
  Eigen::VectorXd rhs(n);
  for (std::size_t r = 0; r < n; ++r) {
    rhs(r) = q[r] - corral[0][r];
    for (std::size_t c = 1; c < k; ++c) d(r, c - 1) = corral[c][r] - corral[0][r];
  }
  const Eigen::VectorXd beta = d.colPivHouseholderQr().solve(rhs);
  std::vector<double> alpha(k);
  double rest = 1.0;
  for (std::size_t c = 1; c < k; ++c) {
    alpha[c] = beta(c - 1);
    rest -= beta(c - 1);
  }
  alpha[0] = rest;
  return alpha;
}

std::vector<double> Combine(const std::vector<std::vector<double>>& corral,
                            const std::vector<double>& weights,
                            std::size_t n) {
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < corral.size(); ++k) {
    for (std::size_t j = 0; j < n; ++j) x[j] += weights[k] * corral[k][j];
  }
  return x;
}

}  // namespace

PricePolytope::PricePolytope(const TechnologySpec& technology, std::size_t n)
    : n_(n) {
  if (n == 0) throw Error(ErrorCode::kInvalidScenario, "zero commodities");
  std::vector<char> is_supply(n, 0), is_demand(n, 0);
  for (std::size_t j : technology.supply) {
    if (j >= n) throw Error(ErrorCode::kInvalidScenario, "supply index out of range");
    is_supply[j] = 1;
  }
  for (std::size_t s : technology.demand) {
    if (s >= n) throw Error(ErrorCode::kInvalidScenario, "demand index out of range");
    if (is_supply[s]) {
      throw Error(ErrorCode::kInvalidScenario,
                  "commodity " + std::to_string(s) +
                      " is both a supply and a demand commodity");
    }
    is_demand[s] = 1;
  }

  std::vector<std::size_t> supply = technology.supply;
  std::sort(supply.begin(), supply.end());
  supply.erase(std::unique(supply.begin(), supply.end()), supply.end());
  for (std::size_t j : supply) {
    std::vector<double> g(n, 0.0);
    g[j] = -1.0;
    rows_.push_back(std::move(g));
  }
  for (const auto& c : technology.coeff) {
    if (c.demand_commodity >= n || c.supply_commodity >= n ||
        !is_demand[c.demand_commodity] || !is_supply[c.supply_commodity]) {
      throw Error(ErrorCode::kInvalidScenario,
                  "technology coefficient must map a demand commodity to a "
                  "supply commodity");
    }
    if (!(c.amount >= 0.0) || !std::isfinite(c.amount)) {
      throw Error(ErrorCode::kInvalidScenario,
                  "technology coefficients must be finite and nonnegative");
    }
    const auto pos = std::lower_bound(supply.begin(), supply.end(),
                                      c.supply_commodity) - supply.begin();
    rows_[static_cast<std::size_t>(pos)][c.demand_commodity] += c.amount;
  }

  // Standard form: variables (v, slack); rows: sum v = 1, <g, v> - s = 0.
  const std::size_t r = rows_.size();
  Matrix a(1 + r, n + r, 0.0);
  std::vector<double> b(1 + r, 0.0);
  for (std::size_t j = 0; j < n; ++j) a(0, j) = 1.0;
  b[0] = 1.0;
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t j = 0; j < n; ++j) a(1 + k, j) = rows_[k][j];
    a(1 + k, n + k) = -1.0;
  }
  lp_ = std::make_shared<const lp::StandardFormLp>(a, b);
  if (!lp_->feasible()) {
    std::ostringstream msg;
    msg << "price polytope is empty: supply commodities {";
    for (std::size_t k = 0; k < supply.size(); ++k) {
      msg << (k ? "," : "") << supply[k];
    }
    msg << "} cannot all be priced at zero while the simplex sums to one";
    throw Error(ErrorCode::kEmptyPolytope, msg.str());
  }
}

double PricePolytope::MaxViolation(std::span<const double> v) const {
  double viol = std::abs(std::accumulate(v.begin(), v.end(), 0.0) - 1.0);
  for (double x : v) viol = std::max(viol, -x);
  for (const auto& g : rows_) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < n_; ++j) lhs += g[j] * v[j];
    viol = std::max(viol, -lhs);
  }
  return viol;
}

LpMaxResult LpMax(const PricePolytope& polytope, std::span<const double> c,
                  TieBreak tie_break) {
  const std::size_t n = polytope.dim();
  if (c.size() != n) {
    throw Error(ErrorCode::kInvalidParams, "objective length mismatch");
  }
  const std::size_t vars = polytope.lp().num_vars();
  std::vector<std::vector<double>> objectives;
  objectives.emplace_back(vars, 0.0);
  for (std::size_t j = 0; j < n; ++j) objectives[0][j] = -c[j];
  if (tie_break == TieBreak::kLexMin) {
    for (std::size_t j = 0; j < n; ++j) {
      objectives.emplace_back(vars, 0.0);
      objectives.back()[j] = 1.0;
    }
  }
  const lp::Solution sol = polytope.lp().Minimize(objectives);
  if (sol.status != lp::Status::kOptimal) {
    throw Error(ErrorCode::kNumericalFailure, "price LP did not reach optimality");
  }
  LpMaxResult out;
  out.vertex.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t j = 0; j < n; ++j) out.value += c[j] * out.vertex[j];
  out.unique = !sol.dual_degenerate;
  return out;
}

std::vector<std::vector<double>> EnumerateVertices(const PricePolytope& polytope,
                                                   std::size_t max_dim) {
  const std::size_t n = polytope.dim();
  if (n > max_dim) {
    throw Error(ErrorCode::kTooLargeForOracle,
                "vertex enumeration limited to n <= " + std::to_string(max_dim));
  }
  // Inequalities <h, v> >= 0: unit rows (nonnegativity) then technology rows.
  std::vector<std::vector<double>> ineq;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    ineq.push_back(std::move(e));
  }
  for (const auto& g : polytope.rows()) ineq.push_back(g);
  const std::size_t total = ineq.size();

  std::vector<std::vector<double>> vertices;
  const auto add_vertex = [&](std::vector<double> v) {
    for (const auto& w : vertices) {
      double diff = 0.0;
      for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(w[j] - v[j]));
      if (diff <= 1e-9) return;
    }
    vertices.push_back(std::move(v));
  };

  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << total); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n - 1) continue;
    Eigen::MatrixXd m(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    m.row(0).setOnes();
    rhs(0) = 1.0;
    Eigen::Index row = 1;
    for (std::size_t k = 0; k < total; ++k) {
      if (!(mask >> k & 1U)) continue;
      for (std::size_t j = 0; j < n; ++j) m(row, static_cast<Eigen::Index>(j)) = ineq[k][j];
      ++row;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.rank() < static_cast<Eigen::Index>(n)) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    std::vector<double> v(sol.data(), sol.data() + n);
    if (polytope.MaxViolation(v) > 1e-9) continue;
    for (double& x : v) {
      if (std::abs(x) < 1e-15) x = 0.0;
    }
    add_vertex(std::move(v));
  }
  std::sort(vertices.begin(), vertices.end());
  return vertices;
}

std::vector<double> ProjectOntoPolytope(const PricePolytope& polytope,
                                        std::span<const double> q,
                                        const ProjectionOptions& options) {
  const std::size_t n = polytope.dim();
  if (q.size() != n) throw Error(ErrorCode::kInvalidParams, "point length mismatch");

  std::vector<std::vector<double>> corral{LpMax(polytope, q, TieBreak::kAny).vertex};
  std::vector<double> weights{1.0};
  std::vector<double> x = corral[0];
  std::vector<double> grad(n), neg(n);
  constexpr double kWeightEps = 1e-12;

  for (std::size_t iter = 0;; ++iter) {
    if (iter >= options.max_iter) {
      throw Error(ErrorCode::kNumericalFailure,
                  "polytope projection did not converge");
    }
    for (std::size_t j = 0; j < n; ++j) {
      grad[j] = x[j] - q[j];
      neg[j] = -grad[j];
    }
    std::vector<double> v = LpMax(polytope, neg, TieBreak::kAny).vertex;
    double gap = 0.0;
    for (std::size_t j = 0; j < n; ++j) gap += grad[j] * (x[j] - v[j]);
    if (gap <= options.gap_tol) break;
    const bool known = std::any_of(corral.begin(), corral.end(), [&](const auto& s) {
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(s[j] - v[j]) > 1e-14) return false;
      }
      return true;
    });
    if (known) break;  // no new vertex improves on the corral: stalled at rounding level
    corral.push_back(std::move(v));
    weights.push_back(0.0);

    // Minor cycles: move toward the affine minimiser, dropping vertices whose
    // weight hits zero, until the minimiser lies inside the corral's hull.
    for (std::size_t minor = 0; minor <= n + 1; ++minor) {
      const std::vector<double> alpha = AffineMinimizer(corral, q);
      if (std::all_of(alpha.begin(), alpha.end(),
                      [&](double a) { return a > kWeightEps; })) {
        weights = alpha;
        break;
      }
      double theta = 1.0;
      for (std::size_t k = 0; k < alpha.size(); ++k) {
        if (alpha[k] <= kWeightEps && weights[k] - alpha[k] > 0.0) {
          theta = std::min(theta, weights[k] / (weights[k] - alpha[k]));
        }
      }
      for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] = (1.0 - theta) * weights[k] + theta * alpha[k];
      }
      std::vector<std::vector<double>> kept;
      std::vector<double> kept_w;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] > kWeightEps) {
          kept.push_back(std::move(corral[k]));
          kept_w.push_back(weights[k]);
        }
      }
      const double total = std::accumulate(kept_w.begin(), kept_w.end(), 0.0);
      for (double& w : kept_w) w /= total;
      corral = std::move(kept);
      weights = std::move(kept_w);
    }
    x = Combine(corral, weights, n);
  }
  return x;
}

AgentPricer::AgentPricer(const AgentSpec& agent, std::size_t n)
    : polytope_(agent.technology, n), mode_(agent.pricing) {}

bool AgentPricer::regularized() const noexcept {
  return std::holds_alternative<RegularizedPricing>(mode_);
}

ValueReport AgentPricer::Mu(std::span<const double> x_row) const {
  RequireLp(mode_);
  if (!std::all_of(x_row.begin(), x_row.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kNumericalFailure, "profit direction is not finite");
  }
  LpMaxResult r = LpMax(polytope_, x_row, TieBreak::kLexMin);
  return {r.value, std::move(r.vertex), r.unique};
}

ValueReport AgentPricer::Eta(std::span<const double> x_row) const {
  const RegularizedPricing& reg = RequireRegularized(mode_);
  const std::size_t n = polytope_.dim();
  std::vector<double> q(n);
  for (std::size_t j = 0; j < n; ++j) {
    q[j] = reg.reference[j] + x_row[j] / reg.beta;
    if (!std::isfinite(q[j])) {
      throw Error(ErrorCode::kNumericalFailure, "projection target is not finite");
    }
  }
  std::vector<double> p = ProjectOntoPolytope(polytope_, q);
  std::vector<double> diff(n);
  simd::Sub(p, reg.reference, diff);
  const double value = simd::Dot(p, x_row) - 0.5 * reg.beta * simd::Dot(diff, diff);
  return {value, std::move(p), true};
}

ValueReport AgentPricer::Evaluate(std::span<const double> x_row) const {
  return regularized() ? Eta(x_row) : Mu(x_row);
}

MarketPricer::MarketPricer(const Scenario& scenario, bool parallel)
    : n_(scenario.n()), parallel_(parallel) {
  agents_.reserve(scenario.agents.size());
  for (const auto& a : scenario.agents) agents_.emplace_back(a, n_);
}

MarketPrices MarketPricer::Evaluate(const MarketState& x) const {
  const std::size_t m = agents_.size();
  std::vector<ValueReport> reports(m);
  detail::ParallelFor(m, parallel_, [&](std::size_t i) {
    reports[i] = agents_[i].Evaluate(x.row(i));
  });
  MarketPrices out;
  out.prices = Matrix(m, n_);
  out.agent_values.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(reports[i].gradient.begin(), reports[i].gradient.end(),
              out.prices.row(i).begin());
    out.agent_values[i] = reports[i].value;
    out.objective += reports[i].value;
    out.all_tight = out.all_tight && reports[i].tight;
  }
  return out;
}

std::vector<double> PriceSetVertex(const AgentSpec& agent, std::size_t n,
                                   std::span<const double> x_row) {
  return AgentPricer(agent, n).Mu(x_row).gradient;
}

double MuValue(const AgentSpec& agent, std::size_t n,
               std::span<const double> x_row) {
  return AgentPricer(agent, n).Mu(x_row).value;
}

std::vector<double> RegularizedPrice(const AgentSpec& agent, std::size_t n,
                                     std::span<const double> x_row) {
  return AgentPricer(agent, n).Eta(x_row).gradient;
}

double EtaValue(const AgentSpec& agent, std::size_t n,
                std::span<const double> x_row) {
  return AgentPricer(agent, n).Eta(x_row).value;
}

namespace {

template <bool kRegularized>
MarketPrices StackedPrices(const MarketState& x, const Scenario& scenario) {
  for (const auto& a : scenario.agents) {
    if (kRegularized) {
      RequireRegularized(a.pricing);
    } else {
      RequireLp(a.pricing);
    }
  }
  return MarketPricer(scenario).Evaluate(x);
}

}  // namespace

Matrix MuSubgradient(const MarketState& x, const Scenario& scenario) {
  return StackedPrices<false>(x, scenario).prices;
}

Matrix EtaGradient(const MarketState& x, const Scenario& scenario) {
  return StackedPrices<true>(x, scenario).prices;
}

double Mu(const MarketState& x, const Scenario& scenario) {
  return StackedPrices<false>(x, scenario).objective;
}

double Eta(const MarketState& x, const Scenario& scenario) {
  return StackedPrices<true>(x, scenario).objective;
}

}  // namespace marketeq
