#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "marketeq/balance.hpp"
#include "marketeq/error.hpp"

namespace marketeq {
namespace {

struct Range {
  double lo;
  double hi;
};

// Offer of a trader at clearing price lambda; a set when rho == 0 and the
// trader's price equals lambda.
Range Offer(const AffineTrader& t, double lambda) {
  if (t.rho > 0.0) {
    const double x = std::clamp((lambda - t.mu) / t.rho, t.lower, t.upper);
    return {x, x};
  }
  if (lambda < t.mu) return {t.lower, t.lower};
  if (lambda > t.mu) return {t.upper, t.upper};
  return {t.lower, t.upper};
}

Range Bid(const AffineBuyer& b, double lambda) {
  if (b.sigma > 0.0) {
    const double y = std::clamp((b.nu - lambda) / b.sigma, b.lower, b.upper);
    return {y, y};
  }
  if (lambda < b.nu) return {b.upper, b.upper};
  if (lambda > b.nu) return {b.lower, b.lower};
  return {b.lower, b.upper};
}

// Excess supply range at lambda: [S_min - D_max, S_max - D_min]. Both ends
// are nondecreasing in lambda.
Range Excess(const AffinePriceSpec& spec, double lambda) {
  Range e{0.0, 0.0};
  for (const auto& t : spec.traders) {
    const Range r = Offer(t, lambda);
    e.lo += r.lo;
    e.hi += r.hi;
  }
  for (const auto& b : spec.buyers) {
    const Range r = Bid(b, lambda);
    e.lo -= r.hi;
    e.hi -= r.lo;
  }
  return e;
}

// Smallest lambda in [lo, hi] with pred(lambda) true, pred monotone
// false -> true and pred(hi) true. Runs to floating-point resolution.
template <typename Pred>
double BisectFirstTrue(double lo, double hi, Pred pred) {
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

void Validate(const AffinePriceSpec& spec) {
  for (std::size_t i = 0; i < spec.traders.size(); ++i) {
    const auto& t = spec.traders[i];
    if (!(t.rho >= 0.0) || !std::isfinite(t.rho) || !std::isfinite(t.mu) ||
        !(t.lower <= t.upper) || !std::isfinite(t.lower) || !std::isfinite(t.upper)) {
      throw Error(ErrorCode::kInvalidParams,
                  "trader " + std::to_string(i) +
                      " needs finite price data, rho >= 0 and lower <= upper");
    }
  }
  for (std::size_t j = 0; j < spec.buyers.size(); ++j) {
    const auto& b = spec.buyers[j];
    if (!(b.sigma >= 0.0) || !std::isfinite(b.sigma) || !std::isfinite(b.nu) ||
        !(b.lower <= b.upper) || !std::isfinite(b.lower) || !std::isfinite(b.upper)) {
      throw Error(ErrorCode::kInvalidParams,
                  "buyer " + std::to_string(j) +
                      " needs finite price data, sigma >= 0 and lower <= upper");
    }
  }
}

}  // namespace

double TraderPrice(const AffineTrader& t, double x) { return t.mu + t.rho * x; }
double BuyerPrice(const AffineBuyer& b, double y) { return b.nu - b.sigma * y; }

CapacitySegments SegmentsOf(const AffinePriceSpec& spec) {
  CapacitySegments s;
  for (const auto& t : spec.traders) {
    s.trader_lower.push_back(t.lower);
    s.trader_upper.push_back(t.upper);
  }
  for (const auto& b : spec.buyers) {
    s.buyer_lower.push_back(b.lower);
    s.buyer_upper.push_back(b.upper);
  }
  return s;
}

SingleEquilibrium SolveSingleCommodity(const AffinePriceSpec& spec) {
  Validate(spec);
  double offer_lo = 0.0, offer_hi = 0.0, bid_lo = 0.0, bid_hi = 0.0;
  double scale = 1.0;
  for (const auto& t : spec.traders) {
    offer_lo += t.lower;
    offer_hi += t.upper;
    scale = std::max({scale, std::abs(t.lower), std::abs(t.upper)});
  }
  for (const auto& b : spec.buyers) {
    bid_lo += b.lower;
    bid_hi += b.upper;
    scale = std::max({scale, std::abs(b.lower), std::abs(b.upper)});
  }
  const double slack = 1e-12 * scale;
  if (offer_lo > bid_hi + slack || bid_lo > offer_hi + slack) {
    throw Error(ErrorCode::kInfeasibleMarket,
                "offer range [" + std::to_string(offer_lo) + ", " +
                    std::to_string(offer_hi) + "] and bid range [" +
                    std::to_string(bid_lo) + ", " + std::to_string(bid_hi) +
                    "] do not intersect");
  }

  // Every participant price crosses lambda inside [first, last].
  double first = std::numeric_limits<double>::infinity();
  double last = -first;
  const auto note = [&](double v) {
    first = std::min(first, v);
    last = std::max(last, v);
  };
  for (const auto& t : spec.traders) {
    note(TraderPrice(t, t.lower));
    note(TraderPrice(t, t.upper));
  }
  for (const auto& b : spec.buyers) {
    note(BuyerPrice(b, b.lower));
    note(BuyerPrice(b, b.upper));
  }
  if (!std::isfinite(first)) {
    first = 0.0;
    last = 0.0;
  }
  const double pad = 1.0 + (last - first);
  const double below = first - pad;
  const double above = last + pad;

  // Clearing prices form [low, high]: low = inf{lambda : S_max - D_min >= 0},
  // high = sup{lambda : S_min - D_max <= 0}. Unbounded ends are clamped to
  // the outermost participant price.
  const double tol = 0.0;
  double low = Excess(spec, below).hi >= -tol
                   ? first
                   : BisectFirstTrue(below, above, [&](double l) {
                       return Excess(spec, l).hi >= -tol;
                     });
  double high = Excess(spec, above).lo <= tol
                    ? last
                    : BisectFirstTrue(below, above, [&](double l) {
                        return Excess(spec, l).lo > tol;
                      });
  if (Excess(spec, above).lo > tol) {
    // BisectFirstTrue returned the first lambda with excess; step back to the
    // last one without.
    high = std::nextafter(high, -std::numeric_limits<double>::infinity());
  }
  if (high < low) high = low;

  SingleEquilibrium out;
  out.lambda_low = low;
  out.lambda_high = high;
  out.lambda = 0.5 * (low + high);
  out.price_tie = high - low > 1e-12 * (1.0 + std::abs(low) + std::abs(high));

  // Volumes at the clearing price; indifferent participants start at their
  // lower ends and are raised in index order to restore balance.
  const double lambda = out.lambda;
  const double tie_tol = 1e-12 * (1.0 + std::abs(lambda));
  std::vector<char> trader_free(spec.traders.size(), 0);
  std::vector<char> buyer_free(spec.buyers.size(), 0);
  double balance = 0.0;  // offers minus bids
  for (std::size_t i = 0; i < spec.traders.size(); ++i) {
    const auto& t = spec.traders[i];
    double x;
    if (t.rho == 0.0 && std::abs(lambda - t.mu) <= tie_tol) {
      trader_free[i] = t.upper > t.lower;
      x = t.lower;
    } else {
      x = Offer(t, lambda).lo;
    }
    out.x.push_back(x);
    balance += x;
  }
  for (std::size_t j = 0; j < spec.buyers.size(); ++j) {
    const auto& b = spec.buyers[j];
    double y;
    if (b.sigma == 0.0 && std::abs(lambda - b.nu) <= tie_tol) {
      buyer_free[j] = b.upper > b.lower;
      y = b.lower;
    } else {
      y = Bid(b, lambda).lo;
    }
    out.y.push_back(y);
    balance -= y;
  }
  out.volume_tie = std::any_of(trader_free.begin(), trader_free.end(), [](char c) { return c; }) ||
                   std::any_of(buyer_free.begin(), buyer_free.end(), [](char c) { return c; });

  const auto raise = [](std::vector<double>& v, const std::vector<char>& free,
                        const auto& upper_of, double need) {
    for (std::size_t k = 0; k < v.size() && need > 0.0; ++k) {
      if (!free[k]) continue;
      const double step = std::min(need, upper_of(k) - v[k]);
      v[k] += step;
      need -= step;
    }
  };
  if (balance < 0.0) {
    raise(out.x, trader_free, [&](std::size_t k) { return spec.traders[k].upper; }, -balance);
  } else if (balance > 0.0) {
    raise(out.y, buyer_free, [&](std::size_t k) { return spec.buyers[k].upper; }, balance);
  }
  return out;
}

double CheckSingleEquilibrium(std::span<const double> x,
                              std::span<const double> y, double lambda,
                              std::span<const double> trader_prices,
                              std::span<const double> buyer_prices,
                              const CapacitySegments& seg, double eps) {
  if (x.size() != seg.trader_lower.size() || y.size() != seg.buyer_lower.size() ||
      trader_prices.size() != x.size() || buyer_prices.size() != y.size()) {
    throw Error(ErrorCode::kInvalidParams, "participant counts do not match");
  }
  double offers = 0.0, bids = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < seg.trader_lower[i] - eps || x[i] > seg.trader_upper[i] + eps) {
      throw Error(ErrorCode::kInfeasiblePoint,
                  "trader " + std::to_string(i) + " outside its capacity segment");
    }
    offers += x[i];
  }
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] < seg.buyer_lower[j] - eps || y[j] > seg.buyer_upper[j] + eps) {
      throw Error(ErrorCode::kInfeasiblePoint,
                  "buyer " + std::to_string(j) + " outside its capacity segment");
    }
    bids += y[j];
  }
  if (std::abs(offers - bids) > eps) {
    throw Error(ErrorCode::kInfeasiblePoint, "offers and bids do not balance");
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool at_lo = x[i] - seg.trader_lower[i] <= eps;
    const bool at_hi = seg.trader_upper[i] - x[i] <= eps;
    const double g = trader_prices[i];
    double v = 0.0;
    if (at_lo && at_hi) {
      v = 0.0;
    } else if (at_lo) {
      v = std::max(0.0, lambda - g);
    } else if (at_hi) {
      v = std::max(0.0, g - lambda);
    } else {
      v = std::abs(g - lambda);
    }
    worst = std::max(worst, v);
  }
  for (std::size_t j = 0; j < y.size(); ++j) {
    const bool at_lo = y[j] - seg.buyer_lower[j] <= eps;
    const bool at_hi = seg.buyer_upper[j] - y[j] <= eps;
    const double h = buyer_prices[j];
    double v = 0.0;
    if (at_lo && at_hi) {
      v = 0.0;
    } else if (at_lo) {
      v = std::max(0.0, h - lambda);
    } else if (at_hi) {
      v = std::max(0.0, lambda - h);
    } else {
      v = std::abs(h - lambda);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace marketeq
