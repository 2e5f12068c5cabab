#include "marketeq/verify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "marketeq/error.hpp"
#include "marketeq/lp.hpp"
#include "marketeq/simd.hpp"

namespace marketeq {

namespace {

Matrix Clamp(const MarketState& x, const Matrix& lo, const Matrix& hi) {
  Matrix out = x;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.flat()[k] = std::clamp(out.flat()[k], lo.flat()[k], hi.flat()[k]);
  }
  return out;
}

void RequirePricing(const Scenario& scenario, bool regularized) {
  for (std::size_t i = 0; i < scenario.m(); ++i) {
    if (IsRegularizedPricing(scenario.agents[i]) != regularized) {
      throw Error(ErrorCode::kWrongPricingMode,
                  "agent " + std::to_string(i) + " must use " +
                      (regularized ? "regularized" : "lp") + " pricing");
    }
  }
}


// For LP-priced agents any element of the argmax face certifies, so the
// gap is minimised over the eps-argmax faces
//   { v in V_i : <v, x_i> >= mu_i(x) - eps }
// jointly with the clearing prices lambda:
//   min sum_ij (p_ij - lambda_j)_+ (x_ij - lo_ij) + (lambda_j - p_ij)_+ (hi_ij - x_ij).
// Regularized agents keep their unique price.
Matrix CertifyingPrices(const MarketState& x, const MarketPricer& pricer,
                        const MarketPrices& oracle, const Matrix& lo, const Matrix& hi,
                        double eps) {
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  // Column layout: v (m*n) | tech slacks | face slacks (lp agents) |
  // lambda+ (n) | lambda- (n) | c+ (m*n) | c- (m*n).
  std::size_t tech = 0, faces = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (pricer.agent(i).regularized()) continue;
    tech += pricer.agent(i).polytope().rows().size();
    ++faces;
  }
  const std::size_t mn = m * n;
  const std::size_t v0 = 0, ts0 = mn, fs0 = ts0 + tech, lp0 = fs0 + faces, lm0 = lp0 + n,
                    cp0 = lm0 + n, cm0 = cp0 + mn, vars = cm0 + mn;
  std::size_t rows = mn;  // price split rows
  for (std::size_t i = 0; i < m; ++i) rows += pricer.agent(i).regularized() ? n : 1;
  rows += tech + faces;
  Matrix a(rows, vars);
  std::vector<double> b(rows, 0.0);
  std::size_t r = 0, t = 0, f = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const AgentPricer& agent = pricer.agent(i);
    if (agent.regularized()) {
      for (std::size_t j = 0; j < n; ++j, ++r) {
        a(r, v0 + i * n + j) = 1.0;
        b[r] = oracle.prices(i, j);
      }
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) a(r, v0 + i * n + j) = 1.0;
    b[r++] = 1.0;
    for (const auto& g : agent.polytope().rows()) {
      for (std::size_t j = 0; j < n; ++j) a(r, v0 + i * n + j) = g[j];
      a(r++, ts0 + t++) = -1.0;
    }
    for (std::size_t j = 0; j < n; ++j) a(r, v0 + i * n + j) = x(i, j);
    a(r, fs0 + f++) = -1.0;
    b[r++] = oracle.agent_values[i] - eps;
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j, ++r) {
      const std::size_t k = i * n + j;
      a(r, v0 + k) = 1.0;
      a(r, lp0 + j) = -1.0;
      a(r, lm0 + j) = 1.0;
      a(r, cp0 + k) = -1.0;
      a(r, cm0 + k) = 1.0;
    }
  }
  std::vector<double> c(vars, 0.0);
  for (std::size_t k = 0; k < mn; ++k) {
    c[cp0 + k] = std::max(x.flat()[k] - lo.flat()[k], 0.0);
    c[cm0 + k] = std::max(hi.flat()[k] - x.flat()[k], 0.0);
  }
  const lp::StandardFormLp problem(a, b);
  if (!problem.feasible()) return oracle.prices;
  const lp::Solution sol = problem.Minimize(c);
  if (sol.status != lp::Status::kOptimal) return oracle.prices;
  Matrix p(m, n);
  for (std::size_t k = 0; k < mn; ++k) p.flat()[k] = sol.x[v0 + k];
  return p;
}

}  // namespace

CertificateReport CheckQviSolution(const MarketState& x, const Scenario& scenario,
                                   double eps, bool parallel) {
  CheckStructure(scenario);
  if (x.rows() != scenario.m() || x.cols() != scenario.n()) {
    throw Error(ErrorCode::kInvalidParams, "state must be m x n");
  }
  const std::size_t m = scenario.m();
  const std::size_t n = scenario.n();
  CertificateReport report;
  report.eps = eps;

  const auto [glo, ghi] = GlobalBounds(scenario);
  report.feasibility_violation =
      std::max(BalanceViolation(x), BoxViolation(x, glo, ghi));

  const MarketState inside = Clamp(x, glo, ghi);
  const auto [lo, hi] = WindowBounds(scenario, inside);
  const MarketPricer pricer(scenario, parallel);
  const MarketPrices oracle = pricer.Evaluate(x);
  report.prices = CertifyingPrices(inside, pricer, oracle, lo, hi, eps);
  const MarketLmo lmo = LmoMarket(report.prices, CommodityBoxes(lo, hi), parallel);

  std::vector<double> diff(x.size());
  simd::Sub(x.flat(), lmo.y.flat(), diff);
  report.qvi_gap = simd::Dot(report.prices.flat(), diff);
  report.lambda = lmo.multipliers;

  report.partial_violations = Matrix(m, n);
  report.branch_violations = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = report.prices(i, j);
      const double lam = report.lambda.lambda[j];
      const double a = lo(i, j);
      const double b = hi(i, j);
      const double v = x(i, j);
      report.partial_violations(i, j) =
          std::max(p - lam, 0.0) * (v - a) + std::max(lam - p, 0.0) * (b - v);

      const bool at_lower = v <= a + eps;
      const bool at_upper = v >= b - eps;
      double branch = 0.0;
      if (at_lower && at_upper) {
        branch = 0.0;
      } else if (at_lower) {
        branch = std::max(lam - p, 0.0);
      } else if (at_upper) {
        branch = std::max(p - lam, 0.0);
      } else {
        branch = std::abs(p - lam);
      }
      report.branch_violations(i, j) = branch;
      report.max_partial_violation =
          std::max(report.max_partial_violation, report.partial_violations(i, j));
      report.max_branch_violation = std::max(report.max_branch_violation, branch);
    }
  }
  report.passed = report.feasibility_violation <= eps && report.qvi_gap <= eps &&
                  report.max_partial_violation <= eps;
  return report;
}

ReferenceOptimum BruteForceMuOptimum(const Scenario& scenario) {
  const AssumptionReport assumptions = ValidateAssumptions(scenario, AssumptionMode::kB);
  if (!assumptions.passed()) {
    throw Error(ErrorCode::kAssumptionViolation, assumptions.Summary());
  }
  const std::size_t m = scenario.m();
  const std::size_t n = scenario.n();
  if (n > 4) {
    throw Error(ErrorCode::kTooLargeForOracle, "mu oracle limited to n <= 4");
  }
  std::vector<std::vector<std::vector<double>>> vertices(m);
  std::size_t cuts = 0;
  for (std::size_t i = 0; i < m; ++i) {
    vertices[i] = EnumerateVertices(PricePolytope(scenario.agents[i].technology, n), 4);
    cuts += vertices[i].size();
  }
  const auto [lo, hi] = GlobalBounds(scenario);

  // Variables: u (m*n) = x - lower, w (m*n) upper slack, t+ (m), t- (m),
  // s (cuts) epigraph slack.
  const std::size_t mn = m * n;
  const std::size_t u0 = 0, w0 = mn, tp0 = 2 * mn, tm0 = tp0 + m, s0 = tm0 + m;
  const std::size_t vars = s0 + cuts;
  const std::size_t rows = mn + n + cuts;
  Matrix a(rows, vars);
  std::vector<double> b(rows, 0.0);
  std::size_t r = 0;
  for (std::size_t k = 0; k < mn; ++k, ++r) {
    a(r, u0 + k) = 1.0;
    a(r, w0 + k) = 1.0;
    b[r] = hi.flat()[k] - lo.flat()[k];
  }
  for (std::size_t j = 0; j < n; ++j, ++r) {
    double rhs = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      a(r, u0 + i * n + j) = 1.0;
      rhs -= lo(i, j);
    }
    b[r] = rhs;
  }
  std::size_t cut = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& v : vertices[i]) {
      // t_i - <v, u_i> - s = <v, lower_i>
      a(r, tp0 + i) = 1.0;
      a(r, tm0 + i) = -1.0;
      double rhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, u0 + i * n + j) = -v[j];
        rhs += v[j] * lo(i, j);
      }
      a(r, s0 + cut) = -1.0;
      b[r] = rhs;
      ++r;
      ++cut;
    }
  }
  const lp::StandardFormLp problem(a, b);
  if (!problem.feasible()) {
    throw Error(ErrorCode::kEmptyBalanceSet, "mu oracle: balanced set is empty");
  }
  std::vector<double> c(vars, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    c[tp0 + i] = 1.0;
    c[tm0 + i] = -1.0;
  }
  const lp::Solution sol = problem.Minimize(c);
  if (sol.status != lp::Status::kOptimal) {
    throw Error(ErrorCode::kNumericalFailure, "mu oracle LP not optimal");
  }
  ReferenceOptimum out;
  out.x = MarketState(m, n);
  for (std::size_t k = 0; k < mn; ++k) {
    out.x.flat()[k] = lo.flat()[k] + sol.x[u0 + k];
  }
  for (std::size_t i = 0; i < m; ++i) out.value += sol.x[tp0 + i] - sol.x[tm0 + i];
  return out;
}

ReferenceOptimum BruteForceEtaOptimum(const Scenario& scenario,
                                      const EtaOracleOptions& options) {
  CheckStructure(scenario);
  RequirePricing(scenario, /*regularized=*/true);
  double beta_min = kInf;
  for (const auto& agent : scenario.agents) {
    beta_min = std::min(beta_min, std::get<RegularizedPricing>(agent.pricing).beta);
  }
  const double step = beta_min / 2.0;
  const auto [lo, hi] = GlobalBounds(scenario);
  const auto boxes = CommodityBoxes(lo, hi);
  const MarketPricer pricer(scenario);

  MarketState x = ProjectMarket(MarketState(scenario.m(), scenario.n()), boxes).y;
  MarketState z = x;
  std::vector<double> diff(x.size());
  for (std::size_t k = 0; k < options.max_iter; ++k) {
    const MarketPrices p = pricer.Evaluate(x);
    z = x;
    simd::Axpy(-step, p.prices.flat(), z.flat());
    MarketState next = ProjectMarket(z, boxes).y;
    simd::Sub(x.flat(), next.flat(), diff);
    const double mapping = std::sqrt(simd::Dot(diff, diff)) / step;
    if (mapping <= options.tolerance) {
      return {p.objective, std::move(x)};
    }
    x = std::move(next);
  }
  throw Error(ErrorCode::kOracleNotConverged,
              "eta oracle did not reach the gradient-mapping tolerance");
}

MarketState RandomBalancedPoint(const Scenario& scenario, std::mt19937_64& rng) {
  const auto [lo, hi] = GlobalBounds(scenario);
  MarketState z(scenario.m(), scenario.n());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    z.flat()[k] = lo.flat()[k] + unit(rng) * (hi.flat()[k] - lo.flat()[k]);
  }
  return ProjectMarket(z, CommodityBoxes(lo, hi)).y;
}

double GradientCheckAt(const Scenario& scenario, std::span<const MarketState> points,
                       double h) {
  RequirePricing(scenario, /*regularized=*/true);
  const MarketPricer pricer(scenario);
  double worst = 0.0;
  for (const MarketState& x : points) {
    const Matrix grad = pricer.Evaluate(x).prices;
    double err = 0.0;
    double scale = 1.0;
    MarketState probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double orig = probe.flat()[k];
      probe.flat()[k] = orig + h;
      const double up = pricer.Objective(probe);
      probe.flat()[k] = orig - h;
      const double down = pricer.Objective(probe);
      probe.flat()[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      err = std::max(err, std::abs(fd - grad.flat()[k]));
      scale = std::max(scale, std::abs(grad.flat()[k]));
    }
    worst = std::max(worst, err / scale);
  }
  return worst;
}

double GradientCheck(const Scenario& scenario, std::size_t points, double h,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<MarketState> xs;
  xs.reserve(points);
  for (std::size_t k = 0; k < points; ++k) xs.push_back(RandomBalancedPoint(scenario, rng));
  return GradientCheckAt(scenario, xs, h);
}

double ConvexityCheck(ValueFunction function, const Scenario& scenario,
                      std::size_t pairs, std::uint64_t seed) {
  RequirePricing(scenario, function == ValueFunction::kEta);
  const MarketPricer pricer(scenario);
  std::mt19937_64 rng(seed);
  double worst = -kInf;
  for (std::size_t k = 0; k < pairs; ++k) {
    const MarketState a = RandomBalancedPoint(scenario, rng);
    const MarketState b = RandomBalancedPoint(scenario, rng);
    MarketState mid(a.rows(), a.cols());
    for (std::size_t e = 0; e < mid.size(); ++e) {
      mid.flat()[e] = 0.5 * a.flat()[e] + 0.5 * b.flat()[e];
    }
    worst = std::max(worst, pricer.Objective(mid) - 0.5 * pricer.Objective(a) -
                                0.5 * pricer.Objective(b));
  }
  return pairs == 0 ? 0.0 : worst;
}

std::vector<double> ProjectPolytopeActiveSet(const PricePolytope& polytope,
                                             std::span<const double> q) {
  const std::size_t n = polytope.dim();
  if (q.size() != n) throw Error(ErrorCode::kInvalidParams, "point has wrong dimension");
  std::vector<std::vector<double>> ineq;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    ineq.push_back(std::move(e));
  }
  for (const auto& g : polytope.rows()) ineq.push_back(g);
  const std::size_t total = ineq.size();
  if (total > 16) {
    throw Error(ErrorCode::kTooLargeForOracle, "active-set projection limited to 16 constraints");
  }

  const Eigen::Map<const Eigen::VectorXd> qv(q.data(), static_cast<Eigen::Index>(n));
  std::vector<double> best;
  double best_dist = kInf;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << total); ++mask) {
    const auto active = static_cast<std::size_t>(std::popcount(mask));
    if (active >= n) continue;  // the simplex row plus n independent rows pin a point
    Eigen::MatrixXd a(static_cast<Eigen::Index>(active + 1), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(active + 1));
    a.row(0).setOnes();
    rhs(0) = 1.0;
    Eigen::Index r = 1;
    for (std::size_t c = 0; c < total; ++c) {
      if (!(mask >> c & 1)) continue;
      for (std::size_t j = 0; j < n; ++j) a(r, static_cast<Eigen::Index>(j)) = ineq[c][j];
      ++r;
    }
    // v = q - A^T (A A^T)^+ (A q - b)
    const Eigen::MatrixXd gram = a * a.transpose();
    const Eigen::VectorXd mult =
        gram.completeOrthogonalDecomposition().solve(a * qv - rhs);
    const Eigen::VectorXd v = qv - a.transpose() * mult;
    if ((a * v - rhs).cwiseAbs().maxCoeff() > 1e-9) continue;
    std::vector<double> cand(v.data(), v.data() + n);
    if (polytope.MaxViolation(cand) > 1e-11) continue;
    const double dist = (v - qv).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = std::move(cand);
    }
  }
  if (best.empty()) throw Error(ErrorCode::kEmptyPolytope, "no feasible face found");
  return best;
}

}  // namespace marketeq
