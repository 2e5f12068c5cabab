#pragma once

// Price oracles. Each agent's feasible prices form the polytope
//   V = { v in simplex : sum_{s in demand} a_sj v_s >= v_j, j in supply }.
// With LP pricing the agent picks a profit-maximising vertex of V (a
// subgradient of the support function mu); with regularized pricing it picks
// the unique maximiser of <p, x> - beta/2 |p - reference|^2 over V, which is
// the gradient of the smooth convex value function eta.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "marketeq/lp.hpp"
#include "marketeq/matrix.hpp"
#include "marketeq/model.hpp"

namespace marketeq {

enum class TieBreak {
  kLexMin,  // lexicographically smallest optimal vertex
  kAny,     // whichever optimal vertex the simplex reaches first
};

class PricePolytope {
 public:
  // Throws Error(kEmptyPolytope) when the technology leaves no feasible
  // price vector, and kInvalidScenario on out-of-range indices.
  PricePolytope(const TechnologySpec& technology, std::size_t n);

  std::size_t dim() const noexcept { return n_; }

  // Rows g with <g, v> >= 0, one per supply commodity.
  const std::vector<std::vector<double>>& rows() const noexcept {
    return rows_;
  }

  // Largest violation of simplex sum, nonnegativity, or technology rows.
  double MaxViolation(std::span<const double> v) const;
  bool Contains(std::span<const double> v, double tol = kFeasibilityTol) const {
    return MaxViolation(v) <= tol;
  }

  const lp::StandardFormLp& lp() const noexcept { return *lp_; }

 private:
  std::size_t n_;
  std::vector<std::vector<double>> rows_;
  std::shared_ptr<const lp::StandardFormLp> lp_;
};

struct LpMaxResult {
  std::vector<double> vertex;
  double value = 0.0;
  bool unique = false;  // conservative: false when the optimum may be a face
};

// argmax_{v in V} <c, v>. Throws kNumericalFailure if the simplex fails.
LpMaxResult LpMax(const PricePolytope& polytope, std::span<const double> c,
                  TieBreak tie_break = TieBreak::kLexMin);

// Every vertex of V, sorted lexicographically. Exhaustive over active sets;
// throws kTooLargeForOracle when n exceeds max_dim.
std::vector<std::vector<double>> EnumerateVertices(const PricePolytope& polytope,
                                                   std::size_t max_dim = 6);

struct ProjectionOptions {
  double gap_tol = 1e-10;
  std::size_t max_iter = 1000;
};

// Euclidean projection of q onto V by a fully corrective conditional-gradient
// (minimum-norm-point) iteration with LpMax as the linear oracle; each step is
// an exact quadratic line search over the current vertex corral. Stops once
// the Frank-Wolfe duality gap <grad, p - v_lmo> drops to gap_tol.
std::vector<double> ProjectOntoPolytope(const PricePolytope& polytope,
                                        std::span<const double> q,
                                        const ProjectionOptions& options = {});

struct ValueReport {
  double value = 0.0;
  std::vector<double> gradient;  // (sub)gradient of the value function
  bool tight = false;            // argmax unique (always true if regularized)
};

// Per-agent oracle with the polytope prepared once.
class AgentPricer {
 public:
  AgentPricer(const AgentSpec& agent, std::size_t n);

  const PricePolytope& polytope() const noexcept { return polytope_; }
  const PricingMode& mode() const noexcept { return mode_; }
  bool regularized() const noexcept;

  // mu_i(x) = max_{v in V} <v, x> with its lexicographic-min argmax.
  ValueReport Mu(std::span<const double> x_row) const;

  // eta_i(x) = max_{p in V} <p, x> - beta/2 |p - ref|^2 and its maximiser.
  ValueReport Eta(std::span<const double> x_row) const;

  // Dispatches on the pricing mode: Mu for LP pricing, Eta for regularized.
  ValueReport Evaluate(std::span<const double> x_row) const;

 private:
  PricePolytope polytope_;
  PricingMode mode_;
};

struct MarketPrices {
  Matrix prices;  // row i is agent i's price vector
  double objective = 0.0;
  std::vector<double> agent_values;
  bool all_tight = true;
};

// Oracles for all agents of a scenario.
class MarketPricer {
 public:
  explicit MarketPricer(const Scenario& scenario, bool parallel = false);

  std::size_t agents() const noexcept { return agents_.size(); }
  const AgentPricer& agent(std::size_t i) const { return agents_[i]; }

  // Prices and objective at x using each agent's own pricing mode.
  MarketPrices Evaluate(const MarketState& x) const;

  // Objective only: sum of each agent's value function.
  double Objective(const MarketState& x) const { return Evaluate(x).objective; }

 private:
  std::vector<AgentPricer> agents_;
  std::size_t n_ = 0;
  bool parallel_ = false;
};

// Free-function forms of the oracles. These rebuild the polytope per call;
// loops should hold an AgentPricer instead.
std::vector<double> PriceSetVertex(const AgentSpec& agent, std::size_t n,
                                   std::span<const double> x_row);
double MuValue(const AgentSpec& agent, std::size_t n,
               std::span<const double> x_row);
std::vector<double> RegularizedPrice(const AgentSpec& agent, std::size_t n,
                                     std::span<const double> x_row);
double EtaValue(const AgentSpec& agent, std::size_t n,
                std::span<const double> x_row);

// Stacked (sub)gradients. Throw kWrongPricingMode if any agent has the
// other pricing mode.
Matrix MuSubgradient(const MarketState& x, const Scenario& scenario);
Matrix EtaGradient(const MarketState& x, const Scenario& scenario);
double Mu(const MarketState& x, const Scenario& scenario);
double Eta(const MarketState& x, const Scenario& scenario);

}  // namespace marketeq
