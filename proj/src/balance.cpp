#include "marketeq/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "marketeq/error.hpp"
#include "marketeq/simd.hpp"
#include "parallel.hpp"

namespace marketeq {
namespace {

double BoxScale(const CommodityBox& box) {
  double scale = 1.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    scale = std::max({scale, std::abs(box.lower[i]), std::abs(box.upper[i])});
  }
  return scale;
}

// Midpoint of [lo, hi]; if one end is infinite the finite one, else 0.
double PickInInterval(double lo, double hi) {
  const bool lo_finite = std::isfinite(lo);
  const bool hi_finite = std::isfinite(hi);
  if (lo_finite && hi_finite) return 0.5 * (lo + hi);
  if (lo_finite) return lo;
  if (hi_finite) return hi;
  return 0.0;
}

bool SameWidth(double lo, double hi) {
  return std::isfinite(lo) && std::isfinite(hi) &&
         hi - lo <= 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));
}

}  // namespace

void CheckNonempty(const CommodityBox& box) {
  if (box.lower.size() != box.upper.size() || box.lower.empty()) {
    throw Error(ErrorCode::kEmptyBalanceSet, "box bounds have mismatched or zero length");
  }
  double lo_sum = 0.0;
  double hi_sum = 0.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!(box.lower[i] <= box.upper[i]) || !std::isfinite(box.lower[i]) ||
        !std::isfinite(box.upper[i])) {
      throw Error(ErrorCode::kEmptyBalanceSet,
                  "box for agent " + std::to_string(i) + " is inverted or unbounded");
    }
    lo_sum += box.lower[i];
    hi_sum += box.upper[i];
  }
  const double slack = 1e-12 * BoxScale(box) * static_cast<double>(box.size());
  if (lo_sum > slack || hi_sum < -slack) {
    throw Error(ErrorCode::kEmptyBalanceSet,
                "bounds cannot balance: sum of lower bounds " + std::to_string(lo_sum) +
                    ", sum of upper bounds " + std::to_string(hi_sum));
  }
}

BalancedProjection ProjectBalanced(std::span<const double> z,
                                   const CommodityBox& box) {
  CheckNonempty(box);
  const std::size_t m = box.size();
  if (z.size() != m) throw Error(ErrorCode::kInvalidParams, "projection length mismatch");

  std::vector<double> bps;
  bps.reserve(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    bps.push_back(z[i] - box.upper[i]);
    bps.push_back(z[i] - box.lower[i]);
  }
  std::sort(bps.begin(), bps.end());

  std::vector<double> phi(bps.size(), std::numeric_limits<double>::quiet_NaN());
  const auto phi_at = [&](std::size_t k) {
    if (std::isnan(phi[k])) phi[k] = simd::ClipSum(z, box.lower, box.upper, bps[k]);
    return phi[k];
  };
  // First breakpoint index satisfying pred on a nonincreasing phi.
  const auto first_index = [&](auto pred) {
    std::size_t lo = 0, hi = bps.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (pred(phi_at(mid))) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  };
  const std::size_t first_nonpos = first_index([](double v) { return v <= 0.0; });
  const std::size_t first_neg = first_index([](double v) { return v < 0.0; });

  // phi is linear between consecutive breakpoints; interpolate the zero set's
  // ends [left, right].
  const auto interpolate = [&](std::size_t k) {
    const double f0 = phi_at(k), f1 = phi_at(k + 1);
    if (f0 == f1) return bps[k];
    return bps[k] + f0 * (bps[k + 1] - bps[k]) / (f0 - f1);
  };
  double left = -std::numeric_limits<double>::infinity();
  if (first_nonpos > 0) {
    const std::size_t a = first_nonpos - 1;
    left = a + 1 < bps.size() ? interpolate(a) : bps[a];
  }
  double right = std::numeric_limits<double>::infinity();
  if (first_neg < bps.size()) {
    right = first_neg > 0 ? interpolate(first_neg - 1) : bps[first_neg];
  }

  BalancedProjection out;
  out.lambda = PickInInterval(left, right);
  out.degenerate = !SameWidth(left, right);
  out.y.resize(m);
  simd::ClipShift(z, box.lower, box.upper, out.lambda, out.y);
  return out;
}

MarketProjection ProjectMarket(const MarketState& z,
                               std::span<const CommodityBox> boxes,
                               bool parallel) {
  const std::size_t n = z.cols();
  if (boxes.size() != n) throw Error(ErrorCode::kInvalidParams, "one box per commodity required");
  MarketProjection out;
  out.y = MarketState(z.rows(), n);
  out.multipliers.lambda.resize(n);
  out.multipliers.degenerate.resize(n);
  std::vector<BalancedProjection> cols(n);
  detail::ParallelFor(n, parallel, [&](std::size_t j) {
    try {
      cols[j] = ProjectBalanced(z.column(j), boxes[j]);
    } catch (const Error& e) {
      throw Error(e.code(), "commodity " + std::to_string(j) + ": " + e.what());
    }
  });
  for (std::size_t j = 0; j < n; ++j) {
    out.y.set_column(j, cols[j].y);
    out.multipliers.lambda[j] = cols[j].lambda;
    out.multipliers.degenerate[j] = cols[j].degenerate;
  }
  return out;
}

BalancedLmo LmoBalanced(std::span<const double> p, const CommodityBox& box) {
  CheckNonempty(box);
  const std::size_t m = box.size();
  if (p.size() != m) throw Error(ErrorCode::kInvalidParams, "price length mismatch");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  BalancedLmo out;
  out.y = box.lower;
  double need = -std::accumulate(box.lower.begin(), box.lower.end(), 0.0);
  const double tiny = 1e-14 * BoxScale(box);
  std::size_t fractional = m;
  for (std::size_t i : order) {
    if (need <= tiny) break;
    const double cap = box.upper[i] - box.lower[i];
    if (cap <= 0.0) continue;
    if (need < cap) {
      out.y[i] = box.lower[i] + need;
      fractional = i;
      need = 0.0;
      break;
    }
    out.y[i] = box.upper[i];
    need -= cap;
  }

  if (fractional < m) {
    out.lambda = p[fractional];
  } else {
    // Every free coordinate sits on a bound: any lambda between the dearest
    // coordinate raised to its upper bound and the cheapest one left at its
    // lower bound certifies optimality.
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (box.upper[i] <= box.lower[i]) continue;
      if (out.y[i] == box.upper[i]) {
        lo = std::max(lo, p[i]);
      } else {
        hi = std::min(hi, p[i]);
      }
    }
    out.lambda = PickInInterval(lo, hi);
    out.degenerate = !(lo == hi);
  }
  out.value = simd::Dot(p, out.y);
  return out;
}

MarketLmo LmoMarket(const MarketState& p, std::span<const CommodityBox> boxes,
                    bool parallel) {
  const std::size_t n = p.cols();
  if (boxes.size() != n) throw Error(ErrorCode::kInvalidParams, "one box per commodity required");
  MarketLmo out;
  out.y = MarketState(p.rows(), n);
  out.multipliers.lambda.resize(n);
  out.multipliers.degenerate.resize(n);
  std::vector<BalancedLmo> cols(n);
  detail::ParallelFor(n, parallel, [&](std::size_t j) {
    try {
      cols[j] = LmoBalanced(p.column(j), boxes[j]);
    } catch (const Error& e) {
      throw Error(e.code(), "commodity " + std::to_string(j) + ": " + e.what());
    }
  });
  for (std::size_t j = 0; j < n; ++j) {
    out.y.set_column(j, cols[j].y);
    out.multipliers.lambda[j] = cols[j].lambda;
    out.multipliers.degenerate[j] = cols[j].degenerate;
    out.value += cols[j].value;
  }
  return out;
}

std::vector<CommodityBox> CommodityBoxes(const Matrix& lower,
                                         const Matrix& upper) {
  std::vector<CommodityBox> boxes(lower.cols());
  for (std::size_t j = 0; j < lower.cols(); ++j) {
    boxes[j].lower = lower.column(j);
    boxes[j].upper = upper.column(j);
  }
  return boxes;
}

}  // namespace marketeq
