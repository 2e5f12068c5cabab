#pragma once

// Equilibrium certificates, brute-force reference optima, and numerical
// cross-checks of the price oracles.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "marketeq/balance.hpp"
#include "marketeq/matrix.hpp"
#include "marketeq/model.hpp"
#include "marketeq/pricing.hpp"

namespace marketeq {

struct CertificateReport {
  double feasibility_violation = 0.0;  // distance-type violation of x in D(x)
  double qvi_gap = 0.0;                // <p(x), x - y*> over D(x)
  ClearingPrices lambda;               // per-commodity LMO multipliers
  // Prices the certificate uses: the regularized price for regularized
  // agents, and for LP-priced agents the element of the eps-argmax face of
  // V_i that minimises the gap.
  Matrix prices;
  // Per-entry share of the gap, (p - lambda)(x - y*) with y* at the
  // window bound the multiplier selects; sums to qvi_gap.
  Matrix partial_violations;
  // Strict branch residuals: interior |p - lambda|, at the window lower
  // bound (lambda - p)_+, at the upper bound (p - lambda)_+. An entry counts
  // as at a bound when within eps of it.
  Matrix branch_violations;
  double max_partial_violation = 0.0;
  double max_branch_violation = 0.0;
  double eps = 0.0;
  bool passed = false;  // feasibility, gap and partial violations all <= eps
};

// Never throws on a bad point: an x outside its global box is reported
// through feasibility_violation and clamped before windows are formed.
CertificateReport CheckQviSolution(const MarketState& x, const Scenario& scenario,
                                   double eps, bool parallel = false);

struct ReferenceOptimum {
  double value = 0.0;
  MarketState x;
};

// min mu over D-tilde by the epigraph LP
//   min sum_i t_i  s.t.  t_i >= <v, x_i> for every vertex v of V_i, x in D-tilde.
// Requires mode B. Throws kTooLargeForOracle when n > 4.
ReferenceOptimum BruteForceMuOptimum(const Scenario& scenario);

struct EtaOracleOptions {
  double tolerance = 1e-10;     // gradient-mapping norm
  std::size_t max_iter = 1000000;
};

// min eta over D-tilde by projected gradient with step min_i beta_i / 2.
// Requires regularized pricing. Throws kOracleNotConverged.
ReferenceOptimum BruteForceEtaOptimum(const Scenario& scenario,
                                      const EtaOracleOptions& options = {});

// Uniform point of the global box projected onto D-tilde.
MarketState RandomBalancedPoint(const Scenario& scenario, std::mt19937_64& rng);

// Max over points of |fd - grad|_inf / max(1, |grad|_inf), central
// differences of eta with step h at random balanced points.
double GradientCheck(const Scenario& scenario, std::size_t points, double h = 1e-6,
                     std::uint64_t seed = 0);

// Same measure at explicit points.
double GradientCheckAt(const Scenario& scenario, std::span<const MarketState> points,
                       double h = 1e-6);

enum class ValueFunction { kMu, kEta };

// Max of f((a + b) / 2) - f(a) / 2 - f(b) / 2 over random balanced pairs.
double ConvexityCheck(ValueFunction function, const Scenario& scenario,
                      std::size_t pairs, std::uint64_t seed = 0);

// Euclidean projection onto V by enumerating active constraint sets and
// keeping the closest feasible affine projection. Independent of the
// conditional-gradient path. Throws kTooLargeForOracle beyond 16 inequality
// constraints.
std::vector<double> ProjectPolytopeActiveSet(const PricePolytope& polytope,
                                             std::span<const double> q);

}  // namespace marketeq
