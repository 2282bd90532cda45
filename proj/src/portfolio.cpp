#include "ripple/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"

namespace ripple {

std::vector<double> weights_equal(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::EmptyUniverse, "no assets to weight");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> weights_vol(std::span<const double> sigmas) {
  if (sigmas.empty()) throw Error(ErrorCode::EmptyUniverse, "no assets to weight");
  std::vector<double> w;
  double total = 0.0;
  for (double s : sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::ZeroVolatility, "volatility must be positive");
    w.push_back(1.0 / s);
    total += 1.0 / s;
  }
  for (auto& v : w) v /= total;
  return w;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const auto n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

namespace {

void check_covariance(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() == 0) throw Error(ErrorCode::EmptyUniverse, "no assets to weight");
  if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::BadCovariance, "covariance is not square");
  if (!sigma.allFinite()) throw Error(ErrorCode::BadCovariance, "covariance has non-finite entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::BadCovariance, "covariance is not symmetric");
  }
}

/// Projected gradient ascent of w'mu - (lambda/2) w'Sigma w from equal weights.
std::vector<double> simplex_qp(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double lambda,
                               const SimplexSolverConfig& cfg) {
  const auto n = sigma.rows();
  auto objective = [&](const Eigen::VectorXd& w) { return w.dot(mu) - 0.5 * lambda * w.dot(sigma * w); };
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const double lipschitz = lambda * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly)
                                        .eigenvalues()
                                        .cwiseAbs()
                                        .maxCoeff();
  // Linear objectives have no curvature; any step reaches the best vertex.
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
  double f = objective(w);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const Eigen::VectorXd grad = mu - lambda * (sigma * w);
    Eigen::VectorXd next = project_to_simplex(w + step * grad);
    const double f_next = objective(next);
    w.swap(next);
    const bool converged = std::abs(f_next - f) < cfg.tolerance;
    f = f_next;
    if (converged) break;
  }
  return {w.data(), w.data() + n};
}

}  // namespace

std::vector<double> weights_markowitz(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double lambda_risk,
                                      const SimplexSolverConfig& cfg) {
  check_covariance(sigma);
  if (mu.size() != sigma.rows()) throw Error(ErrorCode::BadCovariance, "mu and Sigma dimensions differ");
  if (!(lambda_risk >= 0.0)) throw Error(ErrorCode::BadConfig, "risk aversion must be >= 0");
  return simplex_qp(mu, sigma, lambda_risk, cfg);
}

std::vector<double> weights_minvar(const Eigen::MatrixXd& sigma, const SimplexSolverConfig& cfg) {
  check_covariance(sigma);
  // Minimizing w'Sigma w is the zero-mean case scaled by lambda = 2.
  return simplex_qp(Eigen::VectorXd::Zero(sigma.rows()), sigma, 2.0, cfg);
}

RippleSelection select_ripple(const ShockVector& z, std::span<const FirmId> universe, double decile) {
  if (!(decile > 0.0 && decile <= 0.5)) throw Error(ErrorCode::BadConfig, "decile must lie in (0, 0.5]");
  std::vector<std::pair<double, FirmId>> ranked;
  for (const auto& f : universe) {
    auto it = z.find(f);
    ranked.emplace_back(it == z.end() ? 0.0 : it->second, f);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const std::size_t n = ranked.size();
  // The small slack keeps products like 0.1 * 30 from rounding up a whole firm.
  auto count = static_cast<std::size_t>(std::ceil(decile * static_cast<double>(n) - 1e-9));
  count = std::min(count, n / 2);
  RippleSelection sel;
  for (std::size_t i = 0; i < count; ++i) sel.long_leg.push_back(ranked[i].second);
  for (std::size_t i = 0; i < count; ++i) sel.short_leg.push_back(ranked[n - 1 - i].second);
  return sel;
}

WeightVector ripple_weights(const RippleSelection& sel) {
  WeightVector w;
  for (const auto& f : sel.long_leg) w[f] = 1.0 / static_cast<double>(sel.long_leg.size());
  for (const auto& f : sel.short_leg) w[f] = -1.0 / static_cast<double>(sel.short_leg.size());
  return w;
}

double max_drawdown(std::span<const double> equity) {
  double peak = 1.0, mdd = 0.0;
  for (double e : equity) {
    peak = std::max(peak, e);
    if (peak > 0.0) mdd = std::max(mdd, (peak - e) / peak);
  }
  return mdd;
}

BacktestReport metrics_of(std::span<const double> daily_returns, const BacktestConfig& cfg) {
  if (daily_returns.empty()) throw Error(ErrorCode::EmptySchedule, "no trading days");
  BacktestReport r;
  r.daily_returns.assign(daily_returns.begin(), daily_returns.end());
  double equity = 1.0, wins = 0.0;
  for (double x : daily_returns) {
    equity *= 1.0 + x;
    r.equity.push_back(equity);
    if (x > 0.0) wins += 1.0;
  }
  const double n = static_cast<double>(daily_returns.size());
  r.mean_return = std::accumulate(daily_returns.begin(), daily_returns.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : daily_returns) ss += (x - r.mean_return) * (x - r.mean_return);
  const double sd = daily_returns.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.sharpe = sd > 0.0 ? (r.mean_return - cfg.risk_free) / sd : std::numeric_limits<double>::quiet_NaN();
  r.sharpe_annualized = r.sharpe * std::sqrt(cfg.periods_per_year);
  r.mdd = max_drawdown(r.equity);
  r.win_rate = wins / n;
  return r;
}

BacktestReport backtest(std::span<const ScheduleEntry> schedule, const ReturnPanel& returns,
                        const BacktestConfig& cfg) {
  if (schedule.empty()) throw Error(ErrorCode::EmptySchedule, "empty weight schedule");
  std::vector<double> daily;
  std::vector<Date> dates;
  for (const auto& entry : schedule) {
    const auto d = returns.date_index(entry.date);
    if (!d) continue;
    double long_total = 0.0, short_total = 0.0, long_live = 0.0, short_live = 0.0;
    std::vector<std::pair<double, double>> live;  // weight, return
    for (const auto& [firm, w] : entry.weights) {
      (w >= 0.0 ? long_total : short_total) += w;
      const auto f = returns.firm_index(firm);
      if (!f) continue;
      const double r = returns.at(*d, *f);
      if (is_missing(r)) continue;
      (w >= 0.0 ? long_live : short_live) += w;
      live.emplace_back(w, r);
    }
    double ret = 0.0;
    for (const auto& [w, r] : live) {
      const double scale = w >= 0.0 ? (long_live != 0.0 ? long_total / long_live : 0.0)
                                    : (short_live != 0.0 ? short_total / short_live : 0.0);
      ret += w * scale * r;
    }
    daily.push_back(ret);
    dates.push_back(entry.date);
  }
  if (daily.empty()) throw Error(ErrorCode::EmptySchedule, "no scheduled date has returns");
  auto report = metrics_of(daily, cfg);
  report.dates = std::move(dates);
  return report;
}

// --- strategies ------------------------------------------------------------------

std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::Ripple: return "ripple";
    case Strategy::Equal: return "equal";
    case Strategy::Volatility: return "volatility";
    case Strategy::Markowitz: return "markowitz";
    case Strategy::MinVariance: return "min_variance";
  }
  return "ripple";
}

std::optional<WeightVector> strategy_weights(Strategy s, const ReturnPanel& returns, std::size_t date_idx,
                                             const ShockVector& z, const PortfolioConfig& cfg) {
  if (cfg.lookback < 2 || date_idx < cfg.lookback || date_idx >= returns.dates().size()) return std::nullopt;
  const std::size_t lo = date_idx - cfg.lookback;
  std::vector<FirmId> universe;
  std::vector<std::vector<double>> window;
  for (std::size_t f = 0; f < returns.firms().size(); ++f) {
    std::vector<double> w;
    for (std::size_t t = lo; t < date_idx; ++t) w.push_back(returns.at(t, f));
    if (std::any_of(w.begin(), w.end(), is_missing)) continue;
    universe.push_back(returns.firms()[f]);
    window.push_back(std::move(w));
  }
  if (universe.empty()) return std::nullopt;

  const auto n = static_cast<Eigen::Index>(universe.size());
  const auto t = static_cast<Eigen::Index>(cfg.lookback);
  Eigen::MatrixXd x(t, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < t; ++i) x(i, j) = window[j][i];
  const Eigen::VectorXd mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  Eigen::MatrixXd sigma = (centered.transpose() * centered) / static_cast<double>(t - 1);
  sigma = 0.5 * (sigma + sigma.transpose());

  std::vector<double> w;
  switch (s) {
    case Strategy::Ripple:
      return ripple_weights(select_ripple(z, universe, cfg.decile));
    case Strategy::Equal:
      w = weights_equal(universe.size());
      break;
    case Strategy::Volatility: {
      std::vector<FirmId> kept;
      std::vector<double> sds;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (sigma(j, j) <= 0.0) continue;
        kept.push_back(universe[j]);
        sds.push_back(std::sqrt(sigma(j, j)));
      }
      if (kept.empty()) return std::nullopt;
      universe = std::move(kept);
      w = weights_vol(sds);
      break;
    }
    case Strategy::Markowitz:
      w = weights_markowitz(mu, sigma, cfg.lambda_risk);
      break;
    case Strategy::MinVariance:
      w = weights_minvar(sigma);
      break;
  }
  WeightVector out;
  for (std::size_t j = 0; j < universe.size(); ++j) {
    if (w[j] != 0.0) out[universe[j]] = w[j];
  }
  return out;
}

std::vector<ScheduleEntry> build_schedule(Strategy s, const ReturnPanel& returns,
                                          const std::map<Date, ShockVector>& predictions,
                                          const PortfolioConfig& cfg) {
  std::vector<ScheduleEntry> schedule;
  for (const auto& [date, z] : predictions) {
    const auto d = returns.date_index(date);
    if (!d) continue;
    if (auto w = strategy_weights(s, returns, *d, z, cfg)) schedule.push_back({date, std::move(*w)});
  }
  return schedule;
}

std::string report_csv_header() { return "strategy,daily_return,sharpe,mdd,win_rate,sharpe_annualized\n"; }

std::string report_csv_row(std::string_view strategy, const BacktestReport& r) {
  std::ostringstream out;
  out << strategy << ',' << format_double(r.mean_return) << ',' << format_double(r.sharpe) << ','
      << format_double(r.mdd) << ',' << format_double(r.win_rate) << ',' << format_double(r.sharpe_annualized)
      << '\n';
  return out.str();
}

std::string equity_csv_header() { return "date,strategy,equity\n"; }

std::string equity_csv_rows(std::string_view strategy, const BacktestReport& r) {
  std::ostringstream out;
  for (std::size_t i = 0; i < r.equity.size(); ++i) {
    out << (i < r.dates.size() ? r.dates[i].str() : std::to_string(i)) << ',' << strategy << ','
        << format_double(r.equity[i]) << '\n';
  }
  return out.str();
}

}  // namespace ripple
