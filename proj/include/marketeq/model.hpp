#pragma once

// Scenario data model: agents, commodities, box bounds with local windows,
// technology data for price polytopes, and the pricing mode of each agent.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "marketeq/matrix.hpp"

namespace marketeq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kFeasibilityTol = 1e-9;

struct Dimensions {
  std::size_t agents = 0;       // m
  std::size_t commodities = 0;  // n

  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Linear production technology of one agent. coeff entries (s, j, a) state
// that producing one unit of supply commodity j consumes a units of demand
// commodity s; s must be in demand, j in supply.
struct TechnologySpec {
  struct Coefficient {
    std::size_t demand_commodity = 0;  // s
    std::size_t supply_commodity = 0;  // j
    double amount = 0.0;               // a_sj >= 0

    friend bool operator==(const Coefficient&, const Coefficient&) = default;
  };

  std::vector<std::size_t> supply;
  std::vector<std::size_t> demand;
  std::vector<Coefficient> coeff;

  friend bool operator==(const TechnologySpec&, const TechnologySpec&) = default;
};

// Prices are the (set-valued) argmax of the agent's profit over its polytope.
struct LpPricing {
  friend bool operator==(const LpPricing&, const LpPricing&) = default;
};

// Prices are the unique maximiser of profit minus beta/2 |p - reference|^2.
struct RegularizedPricing {
  std::vector<double> reference;
  double beta = 1.0;

  friend bool operator==(const RegularizedPricing&,
                         const RegularizedPricing&) = default;
};

using PricingMode = std::variant<LpPricing, RegularizedPricing>;

struct AgentSpec {
  std::vector<double> lower;   // global box, length n
  std::vector<double> upper;   // global box, length n
  std::vector<double> radius;  // local window radius, +inf for stationary
  TechnologySpec technology;
  PricingMode pricing;

  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

struct SgpConfig {
  double theta0 = 1.0;
  std::size_t max_iter = 200000;
  double target_gap = 1e-5;

  friend bool operator==(const SgpConfig&, const SgpConfig&) = default;
};

struct PcgmConfig {
  double beta = 0.5;
  double delta0 = 1.0;
  double delta_decay = 0.5;
  double tau0 = 0.5;
  double tau_decay = 0.5;
  double delta_min = 1e-5;
  std::size_t stage_cap = 64;
  std::size_t iter_cap = 100000;

  friend bool operator==(const PcgmConfig&, const PcgmConfig&) = default;
};

struct SolverConfig {
  SgpConfig sgp;
  PcgmConfig pcgm;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct Scenario {
  Dimensions dims;
  std::vector<AgentSpec> agents;
  SolverConfig solver;
  std::uint64_t seed = 0;

  std::size_t m() const noexcept { return dims.agents; }
  std::size_t n() const noexcept { return dims.commodities; }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

bool IsLpPricing(const AgentSpec& agent);
bool IsRegularizedPricing(const AgentSpec& agent);

// Throws Error(kInvalidScenario) on shape or index problems. Does not judge
// the economic assumptions; see ValidateAssumptions for that.
void CheckStructure(const Scenario& s);

// Current transaction window of one agent:
//   [max(lower_j, x_j - r_j), min(upper_j, x_j + r_j)] per commodity.
// Throws kStateOutsideGlobalBox when x_row leaves the global box by more
// than kFeasibilityTol.
std::vector<Interval> FeasibleWindow(const AgentSpec& agent,
                                     std::span<const double> x_row);

// Windows of every agent stacked as lower/upper matrices (D(x) boxes).
std::pair<Matrix, Matrix> WindowBounds(const Scenario& s, const MarketState& x);

// Global boxes as lower/upper matrices (D-tilde boxes).
std::pair<Matrix, Matrix> GlobalBounds(const Scenario& s);

// Membership in D-tilde: balanced columns and global box, to tol.
bool IsBalancedFeasible(const MarketState& y, const Matrix& lower,
                        const Matrix& upper, double tol = kFeasibilityTol);

// Largest column-sum magnitude and box excess of y.
double BalanceViolation(const MarketState& y);
double BoxViolation(const MarketState& y, const Matrix& lower,
                    const Matrix& upper);

enum class AssumptionMode { kA, kB, kC };

struct AssumptionFinding {
  std::string group;  // "A1", "A2'", "B1'", "B2", "C1'", "C2", "C3"
  std::string message;
};

struct AssumptionReport {
  AssumptionMode mode = AssumptionMode::kA;
  std::vector<AssumptionFinding> violations;

  bool passed() const noexcept { return violations.empty(); }
  bool Mentions(const std::string& group) const;
  std::string Summary() const;
};

AssumptionReport ValidateAssumptions(const Scenario& s, AssumptionMode mode);

enum class GeneratorMode { kLp, kRegularized };

struct GeneratorParams {
  GeneratorMode mode = GeneratorMode::kLp;
  double radius = kInf;
  double box_scale = 1.0;
  double beta_min = 0.5;
  double beta_max = 2.0;
  double coeff_min = 0.5;
  double coeff_max = 2.0;
};

// Deterministic in (seed, m, n, params). Boxes straddle zero so the zero
// state is always balanced-feasible. Throws kInvalidParams.
Scenario RandomScenario(std::uint64_t seed, std::size_t m, std::size_t n,
                        const GeneratorParams& params = {});

AssumptionMode DeclaredMode(GeneratorMode mode);

}  // namespace marketeq
