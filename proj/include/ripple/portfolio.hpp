#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ripple/asset_pricing.hpp"
#include "ripple/calendar.hpp"
#include "ripple/market_graph.hpp"
#include "ripple/propagator.hpp"

namespace ripple {

using WeightVector = std::map<FirmId, double>;

/// Each weight 1/n. Throws EmptyUniverse for n = 0.
std::vector<double> weights_equal(std::size_t n);

/// w_i proportional to 1/sigma_i. Throws ZeroVolatility for a non-positive sigma.
std::vector<double> weights_vol(std::span<const double> sigmas);

struct SimplexSolverConfig {
  std::size_t max_iterations = 10'000;
  double tolerance = 1e-10;  // on the objective change
};

/// Maximizes w'mu - (lambda/2) w'Sigma w over the simplex by projected
/// gradient ascent. Throws BadCovariance for a non-symmetric Sigma.
std::vector<double> weights_markowitz(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                      double lambda_risk = 1.0, const SimplexSolverConfig& cfg = {});

/// Minimizes w'Sigma w over the simplex with the same solver.
std::vector<double> weights_minvar(const Eigen::MatrixXd& sigma, const SimplexSolverConfig& cfg = {});

/// Euclidean projection onto {w >= 0, sum w = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct RippleSelection {
  std::vector<FirmId> long_leg;
  std::vector<FirmId> short_leg;
};

/// Top and bottom ceil(decile * n) firms by predicted Z, capped at n / 2 so
/// the legs stay disjoint. Unpredicted firms score 0. Firms are ranked by
/// (Z descending, ticker ascending): the long leg is the head of that order,
/// the short leg its tail.
RippleSelection select_ripple(const ShockVector& z, std::span<const FirmId> universe, double decile = 0.10);

/// Long leg +1/|long| each, short leg -1/|short| each.
WeightVector ripple_weights(const RippleSelection& sel);

/// Target weights held over the return of `date`.
struct ScheduleEntry {
  Date date;
  WeightVector weights;
};

struct BacktestConfig {
  double risk_free = 0.0;  // per period, subtracted in the Sharpe numerator
  bool annualize = false;
  double periods_per_year = 252.0;
};

struct BacktestReport {
  std::vector<Date> dates;
  std::vector<double> daily_returns;
  std::vector<double> equity;  // after each day, starting from 1.0
  double mean_return = 0.0;
  double sharpe = 0.0;             // per period
  double sharpe_annualized = 0.0;  // sqrt(periods) * per period
  double mdd = 0.0;
  double win_rate = 0.0;
};

/// Daily portfolio returns sum(w_i r_i). Firms without a return that day are
/// dropped and the rest of their leg (long or short) renormalized to the
/// leg's original total. Dates absent from the panel are skipped.
/// Throws EmptySchedule.
BacktestReport backtest(std::span<const ScheduleEntry> schedule, const ReturnPanel& returns,
                        const BacktestConfig& cfg = {});

/// Metrics of a plain return series.
BacktestReport metrics_of(std::span<const double> daily_returns, const BacktestConfig& cfg = {});

/// Largest peak-to-trough fractional loss of the curve; the running peak
/// starts at 1.0.
double max_drawdown(std::span<const double> equity);

// --- strategies ------------------------------------------------------------------

enum class Strategy { Ripple, Equal, Volatility, Markowitz, MinVariance };

std::string_view strategy_name(Strategy s) noexcept;
inline constexpr Strategy kAllStrategies[] = {Strategy::Ripple, Strategy::Equal, Strategy::Volatility,
                                              Strategy::Markowitz, Strategy::MinVariance};

struct PortfolioConfig {
  double decile = 0.10;
  std::size_t lookback = 30;  // trading days for sigma, mu and Sigma
  double lambda_risk = 1.0;
  BacktestConfig backtest;
};

/// Weights for trading on `returns.dates()[date_idx]`, estimated from the
/// `lookback` days before it. Firms with any missing return in the window are
/// left out. Returns nullopt when the window is too short or no firm has full
/// history. `z` is used only by the ripple strategy.
std::optional<WeightVector> strategy_weights(Strategy s, const ReturnPanel& returns, std::size_t date_idx,
                                             const ShockVector& z, const PortfolioConfig& cfg);

/// Builds the daily schedule for one strategy. `predictions` maps a trading
/// date to the morning's aggregated Z. Every strategy trades on exactly the
/// prediction dates that have a full lookback window.
std::vector<ScheduleEntry> build_schedule(Strategy s, const ReturnPanel& returns,
                                          const std::map<Date, ShockVector>& predictions,
                                          const PortfolioConfig& cfg);

std::string report_csv_header();
std::string report_csv_row(std::string_view strategy, const BacktestReport& r);
std::string equity_csv_header();
std::string equity_csv_rows(std::string_view strategy, const BacktestReport& r);

}  // namespace ripple
