#pragma once

// Exact algorithms on box-plus-balance sets
//   D_j = { y in R^m : sum_i y_i = 0, lower_i <= y_i <= upper_i }.
// The balance multiplier follows the Lagrangian <p, y> - lambda * sum y, so
// every coordinate strictly inside its box has p_i = lambda (clearing price).

#include <cstddef>
#include <span>
#include <vector>

#include "marketeq/matrix.hpp"

namespace marketeq {

struct CommodityBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return lower.size(); }
};

// Throws kEmptyBalanceSet unless lower <= upper and
// sum(lower) <= 0 <= sum(upper) (up to a rounding slack).
void CheckNonempty(const CommodityBox& box);

// Clearing prices lambda_j, one per commodity. degenerate[j] is set when the
// multiplier is not unique (every coordinate sits on a bound); lambda then
// holds the midpoint of the admissible interval, or its finite end.
struct ClearingPrices {
  std::vector<double> lambda;
  std::vector<char> degenerate;
};

struct BalancedProjection {
  std::vector<double> y;
  double lambda = 0.0;  // y = clip(z - lambda, lower, upper)
  bool degenerate = false;
};

// argmin |y - z|^2 over D_j by breakpoint search on the nonincreasing dual
// function phi(lambda) = sum_i clip(z_i - lambda).
BalancedProjection ProjectBalanced(std::span<const double> z,
                                   const CommodityBox& box);

struct MarketProjection {
  MarketState y;
  ClearingPrices multipliers;  // raw projection multipliers
};

// Column-wise ProjectBalanced. boxes[j] holds commodity j's bounds.
MarketProjection ProjectMarket(const MarketState& z,
                               std::span<const CommodityBox> boxes,
                               bool parallel = false);

struct BalancedLmo {
  std::vector<double> y;
  double lambda = 0.0;
  double value = 0.0;  // <p, y>
  bool degenerate = false;
};

// argmin <p, y> over D_j. Starting from every coordinate at its lower bound,
// raises the cheapest coordinates first (ties: lower index first) until the
// column balances. The coordinate left strictly inside its box, if any, sets
// lambda.
BalancedLmo LmoBalanced(std::span<const double> p, const CommodityBox& box);

struct MarketLmo {
  MarketState y;
  ClearingPrices multipliers;
  double value = 0.0;
};

MarketLmo LmoMarket(const MarketState& p, std::span<const CommodityBox> boxes,
                    bool parallel = false);

// Per-commodity boxes from stacked lower/upper matrices.
std::vector<CommodityBox> CommodityBoxes(const Matrix& lower,
                                         const Matrix& upper);

// ---------------------------------------------------------------------------
// Single-commodity market with traders (sellers) and buyers.

struct AffineTrader {
  double mu = 0.0;   // price g(x) = mu + rho * x
  double rho = 0.0;  // >= 0
  double lower = 0.0;
  double upper = 0.0;
};

struct AffineBuyer {
  double nu = 0.0;     // price h(y) = nu - sigma * y
  double sigma = 0.0;  // >= 0
  double lower = 0.0;
  double upper = 0.0;
};

struct AffinePriceSpec {
  std::vector<AffineTrader> traders;
  std::vector<AffineBuyer> buyers;
};

struct SingleEquilibrium {
  std::vector<double> x;  // offers
  std::vector<double> y;  // bids
  double lambda = 0.0;    // clearing price
  double lambda_low = 0.0;   // admissible clearing-price interval
  double lambda_high = 0.0;
  bool price_tie = false;   // lambda_low < lambda_high
  bool volume_tie = false;  // some participant is indifferent at lambda
};

// Throws kInfeasibleMarket when the offer and bid capacity ranges cannot
// balance, kInvalidParams on negative slopes or inverted segments.
SingleEquilibrium SolveSingleCommodity(const AffinePriceSpec& spec);

double TraderPrice(const AffineTrader& t, double x);
double BuyerPrice(const AffineBuyer& b, double y);

struct CapacitySegments {
  std::vector<double> trader_lower, trader_upper;
  std::vector<double> buyer_lower, buyer_upper;
};

CapacitySegments SegmentsOf(const AffinePriceSpec& spec);

// Largest violation of the clearing conditions: a trader strictly inside its
// segment must price at lambda, one at its lower end at or above lambda, one
// at its upper end at or below; buyers mirror this. Participant prices are
// supplied by the caller so arbitrary price functions can be checked.
// Throws kInfeasiblePoint if (x, y) is not balanced within eps.
double CheckSingleEquilibrium(std::span<const double> x,
                              std::span<const double> y, double lambda,
                              std::span<const double> trader_prices,
                              std::span<const double> buyer_prices,
                              const CapacitySegments& segments, double eps);

}  // namespace marketeq
