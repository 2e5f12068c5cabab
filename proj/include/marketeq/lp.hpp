#pragma once

// Dense two-phase tableau simplex with Bland's rule for small LPs in
// standard form:  minimize c^T x  subject to  A x = b,  x >= 0.
//
// Phase 1 runs once per constraint set; every Minimize() call restarts
// phase 2 from the stored feasible tableau. Several objectives may be given,
// in which case they are optimised lexicographically: after objective k is
// optimal, nonbasic columns with positive reduced cost are frozen at zero
// and objective k+1 is optimised over the remaining optimal face.

#include <cstddef>
#include <span>
#include <vector>

#include "marketeq/matrix.hpp"

namespace marketeq::lp {

enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Solution {
  Status status = Status::kInfeasible;
  std::vector<double> x;
  // True when some nonbasic column had a zero reduced cost for the first
  // objective, i.e. the optimum may not be unique.
  bool dual_degenerate = false;
  std::size_t pivots = 0;
};

struct Options {
  double pivot_tol = 1e-12;
  // Reduced-cost tolerance, relative to the largest objective coefficient.
  double cost_tol = 1e-11;
  double feasibility_tol = 1e-10;
  std::size_t max_pivots = 100000;
};

class StandardFormLp {
 public:
  StandardFormLp(const Matrix& a, std::span<const double> b,
                 const Options& options = {});

  bool feasible() const noexcept { return feasible_; }
  std::size_t num_vars() const noexcept { return num_vars_; }

  // Throws Error(kNumericalFailure) when max_pivots is exceeded.
  Solution Minimize(std::span<const std::vector<double>> objectives) const;
  Solution Minimize(std::span<const double> objective) const;

 private:
  Options options_;
  std::size_t num_vars_ = 0;
  std::size_t num_rows_ = 0;  // after redundant rows are dropped
  bool feasible_ = false;
  // num_rows_ x (num_vars_ + 1); last column is the right-hand side.
  std::vector<double> tableau_;
  std::vector<std::size_t> basis_;
};

}  // namespace marketeq::lp
