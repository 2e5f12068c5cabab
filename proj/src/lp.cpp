#include "marketeq/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marketeq/error.hpp"

namespace marketeq::lp {
namespace {

struct Tableau {
  std::size_t rows = 0;
  std::size_t vars = 0;  // columns excluding the right-hand side
  std::vector<double> cells;
  std::vector<std::size_t> basis;

  std::size_t width() const { return vars + 1; }
  double& at(std::size_t r, std::size_t c) { return cells[r * width() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return cells[r * width() + c];
  }
  double& rhs(std::size_t r) { return at(r, vars); }
  double rhs(std::size_t r) const { return at(r, vars); }

  // Pivots the constraint rows and the objective row z on (r, c).
  void Pivot(std::size_t r, std::size_t c, std::vector<double>& z) {
    const std::size_t w = width();
    double* prow = &cells[r * w];
    const double inv = 1.0 / prow[c];
    for (std::size_t j = 0; j < w; ++j) prow[j] *= inv;
    prow[c] = 1.0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r) continue;
      double* row = &cells[i * w];
      const double f = row[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < w; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
    const double f = z[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j < w; ++j) z[j] -= f * prow[j];
      z[c] = 0.0;
    }
    basis[r] = c;
  }
};

enum class Outcome { kOptimal, kUnbounded };

// Bland's rule: lowest-index improving column enters; among minimum-ratio
// rows the one whose basic variable has the lowest index leaves.
Outcome RunSimplex(Tableau& t, std::vector<double>& z,
                   const std::vector<char>& allowed, double cost_tol,
                   const Options& options, std::size_t& pivots) {
  for (;;) {
    std::size_t enter = t.vars;
    for (std::size_t j = 0; j < t.vars; ++j) {
      if (allowed[j] && z[j] < -cost_tol) {
        enter = j;
        break;
      }
    }
    if (enter == t.vars) return Outcome::kOptimal;

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows; ++i) {
      const double a = t.at(i, enter);
      if (a > options.pivot_tol) best = std::min(best, t.rhs(i) / a);
    }
    if (!std::isfinite(best)) return Outcome::kUnbounded;

    const double slack = 1e-12 * (1.0 + std::abs(best));
    std::size_t leave = t.rows;
    for (std::size_t i = 0; i < t.rows; ++i) {
      const double a = t.at(i, enter);
      if (a <= options.pivot_tol) continue;
      if (t.rhs(i) / a <= best + slack &&
          (leave == t.rows || t.basis[i] < t.basis[leave])) {
        leave = i;
      }
    }
    t.Pivot(leave, enter, z);
    if (++pivots > options.max_pivots) {
      throw Error(ErrorCode::kNumericalFailure,
                  "simplex pivot limit exceeded");
    }
  }
}

std::vector<double> ObjectiveRow(const Tableau& t,
                                 std::span<const double> cost) {
  std::vector<double> z(t.width(), 0.0);
  for (std::size_t j = 0; j < t.vars; ++j) z[j] = cost[j];
  for (std::size_t i = 0; i < t.rows; ++i) {
    const double cb = cost[t.basis[i]];
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j < t.width(); ++j) z[j] -= cb * t.at(i, j);
  }
  return z;
}

}  // namespace

StandardFormLp::StandardFormLp(const Matrix& a, std::span<const double> b,
                               const Options& options)
    : options_(options), num_vars_(a.cols()) {
  if (b.size() != a.rows()) {
    throw Error(ErrorCode::kInvalidParams, "LP row count mismatch");
  }
  const std::size_t rows = a.rows();

  // Phase 1 tableau with one artificial per row.
  Tableau t;
  t.rows = rows;
  t.vars = num_vars_ + rows;
  t.cells.assign(rows * t.width(), 0.0);
  t.basis.resize(rows);
  double b_scale = 1.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < num_vars_; ++j) t.at(i, j) = sign * a(i, j);
    t.at(i, num_vars_ + i) = 1.0;
    t.rhs(i) = sign * b[i];
    t.basis[i] = num_vars_ + i;
    b_scale = std::max(b_scale, std::abs(b[i]));
  }
  std::vector<double> cost(t.vars, 0.0);
  for (std::size_t i = 0; i < rows; ++i) cost[num_vars_ + i] = 1.0;
  std::vector<double> z = ObjectiveRow(t, cost);
  std::vector<char> allowed(t.vars, 1);
  std::size_t pivots = 0;
  RunSimplex(t, z, allowed, options_.cost_tol, options_, pivots);

  if (-z[t.vars] > options_.feasibility_tol * b_scale) {
    feasible_ = false;
    return;
  }
  feasible_ = true;

  // Drive remaining artificials out of the basis; rows where that is
  // impossible are linearly dependent and get dropped.
  std::vector<char> keep(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) {
    if (t.basis[i] < num_vars_) continue;
    std::size_t col = num_vars_;
    double best = options_.pivot_tol;
    for (std::size_t j = 0; j < num_vars_; ++j) {
      if (std::abs(t.at(i, j)) > best) {
        best = std::abs(t.at(i, j));
        col = j;
      }
    }
    if (col == num_vars_) {
      keep[i] = 0;
    } else {
      t.Pivot(i, col, z);
    }
  }

  num_rows_ = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
  const std::size_t w = num_vars_ + 1;
  tableau_.assign(num_rows_ * w, 0.0);
  basis_.clear();
  std::size_t r = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!keep[i]) continue;
    for (std::size_t j = 0; j < num_vars_; ++j) {
      tableau_[r * w + j] = t.at(i, j);
    }
    tableau_[r * w + num_vars_] = std::max(0.0, t.rhs(i));
    basis_.push_back(t.basis[i]);
    ++r;
  }
}

Solution StandardFormLp::Minimize(std::span<const double> objective) const {
  std::vector<std::vector<double>> objectives{
      std::vector<double>(objective.begin(), objective.end())};
  return Minimize(objectives);
}

Solution StandardFormLp::Minimize(
    std::span<const std::vector<double>> objectives) const {
  Solution sol;
  if (!feasible_) {
    sol.status = Status::kInfeasible;
    return sol;
  }
  Tableau t;
  t.rows = num_rows_;
  t.vars = num_vars_;
  t.cells = tableau_;
  t.basis = basis_;

  std::vector<char> allowed(num_vars_, 1);
  std::vector<char> is_basic(num_vars_, 0);
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    const auto& c = objectives[k];
    if (c.size() != num_vars_) {
      throw Error(ErrorCode::kInvalidParams, "LP objective length mismatch");
    }
    double scale = 0.0;
    for (double v : c) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) {
      if (k == 0) sol.dual_degenerate = true;
      continue;
    }
    const double tol = options_.cost_tol * scale;

    std::vector<double> z = ObjectiveRow(t, c);
    if (RunSimplex(t, z, allowed, tol, options_, sol.pivots) ==
        Outcome::kUnbounded) {
      sol.status = Status::kUnbounded;
      return sol;
    }

    std::fill(is_basic.begin(), is_basic.end(), 0);
    for (std::size_t b : t.basis) is_basic[b] = 1;
    for (std::size_t j = 0; j < num_vars_; ++j) {
      if (is_basic[j] || !allowed[j]) continue;
      if (z[j] > tol) {
        allowed[j] = 0;
      } else if (k == 0) {
        sol.dual_degenerate = true;
      }
    }
  }

  sol.status = Status::kOptimal;
  sol.x.assign(num_vars_, 0.0);
  for (std::size_t i = 0; i < t.rows; ++i) {
    sol.x[t.basis[i]] = std::max(0.0, t.rhs(i));
  }
  return sol;
}

}  // namespace marketeq::lp
