#pragma once

// Dynamic processes for the market equilibrium problem:
//  * SolveSgp  - subgradient projection over the stationary balanced set with
//                LP (set-valued) pricing and steps theta0 / (k + 1);
//  * SolvePcgm - parametric conditional gradient with restarts for moving
//                transaction windows and regularized (single-valued) pricing;
//  * SolveFpi  - projection onto the moving set D(x); no convergence claim.

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "marketeq/balance.hpp"
#include "marketeq/matrix.hpp"
#include "marketeq/model.hpp"

namespace marketeq {

enum class Method { kSgp, kPcgm, kFpi };

std::string_view ToString(Method method);

struct TraceRecord {
  std::size_t stage = 0;
  std::size_t iter = 0;  // inner index k within the stage
  std::size_t l = 0;     // step-size schedule index
  double objective = 0.0;
  double gap = 0.0;
  double theta = 0.0;
  bool accepted = false;  // a step was taken from this point (PCGM: and passed the descent test)
  bool restart = false;
};

struct RestartPoint {
  std::size_t stage = 0;
  double delta = 0.0;
  MarketState w;
};

enum class TraceStatus { kConverged, kIterationCap, kStageCap };

std::string_view ToString(TraceStatus status);

struct ConvergenceTrace {
  Method method = Method::kSgp;
  bool experimental = false;
  std::vector<TraceRecord> records;
  std::vector<double> record_delta;       // PCGM: delta_s of each record
  std::vector<MarketState> iterates;      // state at each record, if kept
  std::vector<RestartPoint> restarts;     // PCGM only
  MarketState final_state;
  ClearingPrices final_prices;            // balance multipliers at final_state
  ClearingPrices projection_prices;       // SGP/FPI: last projection, price units
  double final_gap = 0.0;
  double final_objective = 0.0;
  std::size_t steps = 0;                  // state updates performed
  std::size_t stages = 0;                 // PCGM restarts performed
  TraceStatus status = TraceStatus::kIterationCap;

  bool converged() const noexcept { return status == TraceStatus::kConverged; }
};

struct RunOptions {
  bool keep_iterates = false;
  bool parallel = false;
};

struct GapReport {
  double gap = 0.0;
  MarketState y;            // a minimiser of <p(x), y> over D(x)
  Matrix prices;            // p(x)
  double objective = 0.0;   // mu(x) or eta(x)
  ClearingPrices multipliers;
};

// <p(x), x - y> with y from the arrangement oracle over D(x).
GapReport Gap(const MarketState& x, const Scenario& scenario,
              bool parallel = false);

// Throws kAssumptionViolation (mode B) and kInvalidParams on bad config.
ConvergenceTrace SolveSgp(const Scenario& scenario, const SgpConfig& config,
                          const MarketState& x0, const RunOptions& options = {});

// Throws kAssumptionViolation (mode C) and kInvalidParams on bad config.
// Hitting stage_cap or iter_cap is reported through status, not thrown.
ConvergenceTrace SolvePcgm(const Scenario& scenario, const PcgmConfig& config,
                           const MarketState& w0, const RunOptions& options = {});

// Experimental. Uses each agent's own pricing mode.
ConvergenceTrace SolveFpi(const Scenario& scenario, const SgpConfig& config,
                          const MarketState& x0, const RunOptions& options = {});

// Trace CSV: header "stage,iter,l,objective,gap,theta,accepted,restart",
// reals with 17 significant digits, booleans as 0/1.
void WriteTraceCsv(std::ostream& out, const ConvergenceTrace& trace);

}  // namespace marketeq
