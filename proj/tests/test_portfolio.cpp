#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ripple/error.hpp"
#include "ripple/portfolio.hpp"
#include "ripple/rng.hpp"
#include "test_support.hpp"

using namespace ripple;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::BadConfig;
}

double sum(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

Eigen::MatrixXd random_covariance(Rng& rng, int n) {
  Eigen::MatrixXd a(n + 2, n);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd s = a.transpose() * a / static_cast<double>(n);
  return 0.5 * (s + s.transpose());
}

double objective(const std::vector<double>& w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& s, double lambda) {
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return v.dot(mu) - 0.5 * lambda * v.dot(s * v);
}

ReturnPanel panel_of(const std::vector<std::string>& firms, const std::vector<std::vector<double>>& rets,
                     Date start = Date{2023, 1, 2}) {
  std::vector<ReturnPanel::Cell> cells;
  Date d = start;
  for (const auto& row : rets) {
    for (std::size_t f = 0; f < firms.size(); ++f) {
      if (!is_missing(row[f])) cells.push_back({d, FirmId(firms[f]), row[f]});
    }
    d = d.next_business_day();
  }
  return ReturnPanel(cells);
}

}  // namespace

TEST_CASE("weights_equal") {
  CHECK(weights_equal(4) == std::vector<double>(4, 0.25));
  CHECK(weights_equal(1) == std::vector<double>{1.0});
  CHECK(std::abs(sum(weights_equal(7)) - 1.0) <= 1e-12);
  CHECK(code_of([] { weights_equal(0); }) == ErrorCode::EmptyUniverse);
}

TEST_CASE("weights_vol") {
  const std::vector<double> a{1.0, 1.0}, b{1.0, 3.0}, bad{1.0, 0.0};
  CHECK(weights_vol(a) == std::vector<double>{0.5, 0.5});
  const auto w = weights_vol(b);
  CHECK(w[0] == doctest::Approx(0.75));
  CHECK(w[1] == doctest::Approx(0.25));
  CHECK(code_of([&] { weights_vol(bad); }) == ErrorCode::ZeroVolatility);
}

TEST_CASE("weights_minvar examples") {
  Eigen::MatrixXd d(2, 2);
  d << 1, 0, 0, 4;
  const auto w = weights_minvar(d);
  CHECK(std::abs(w[0] - 0.8) <= 1e-4);
  CHECK(std::abs(w[1] - 0.2) <= 1e-4);

  const auto eq = weights_minvar(Eigen::MatrixXd::Identity(3, 3));
  for (double v : eq) CHECK(std::abs(v - 1.0 / 3.0) <= 1e-9);

  Rng rng(4, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_covariance(rng, 5);
    const auto m = weights_minvar(s);
    const auto e = weights_equal(5);
    CHECK(-objective(m, Eigen::VectorXd::Zero(5), s, 2.0) <= -objective(e, Eigen::VectorXd::Zero(5), s, 2.0) + 1e-12);
  }
}

TEST_CASE("weights_markowitz examples") {
  const auto eq = weights_markowitz(Eigen::VectorXd::Constant(4, 0.01), Eigen::MatrixXd::Identity(4, 4));
  for (double v : eq) CHECK(std::abs(v - 0.25) <= 1e-6);

  Eigen::MatrixXd ns(2, 2);
  ns << 1, 0.5, 0.2, 1;
  CHECK(code_of([&] { weights_markowitz(Eigen::VectorXd::Zero(2), ns); }) == ErrorCode::BadCovariance);

  SUBCASE("grid-search oracle on 3 assets") {
    Rng rng(8, 0);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_covariance(rng, 3);
      Eigen::VectorXd mu(3);
      for (int i = 0; i < 3; ++i) mu(i) = rng.normal(0.0, 0.5);
      const auto w = weights_markowitz(mu, s, 1.0);
      double best = -1e300;
      for (int i = 0; i <= 1000; ++i) {
        for (int j = 0; i + j <= 1000; ++j) {
          const std::vector<double> g{i / 1000.0, j / 1000.0, (1000 - i - j) / 1000.0};
          best = std::max(best, objective(g, mu, s, 1.0));
        }
      }
      CHECK(objective(w, mu, s, 1.0) >= best - 1e-3);
      CHECK(objective(w, mu, s, 1.0) >= objective(weights_equal(3), mu, s, 1.0) - 1e-8);
    }
  }
  SUBCASE("large risk aversion approaches min-variance") {
    Rng rng(9, 0);
    const auto s = random_covariance(rng, 4);
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(4, 0.3);
    const auto mv = weights_minvar(s);
    const auto mk = weights_markowitz(mu, s, 1e6);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(mk[i] - mv[i]) <= 1e-4);
  }
}

TEST_CASE("benchmark weights are feasible on random inputs") {
  Rng rng(12, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<double> sig(n);
    for (auto& v : sig) v = rng.uniform(0.01, 2.0);
    const auto s = random_covariance(rng, n);
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) mu(i) = rng.normal();
    for (const auto& w : {weights_equal(n), weights_vol(sig), weights_markowitz(mu, s), weights_minvar(s)}) {
      CHECK(std::abs(sum(w) - 1.0) <= 1e-10);
      for (double v : w) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("project_to_simplex") {
  Eigen::VectorXd v(3);
  v << 0.5, 0.2, 0.3;
  CHECK((project_to_simplex(v) - v).norm() <= 1e-15);
  v << 3.0, 0.0, -1.0;
  const auto p = project_to_simplex(v);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == 0.0);
  CHECK(p(2) == 0.0);
}

TEST_CASE("select_ripple examples") {
  const auto firms = testing::tickers(10);
  ShockVector z;
  for (std::size_t i = 0; i < firms.size(); ++i) z[firms[i]] = static_cast<double>(i) - 4.5;
  auto sel = select_ripple(z, firms);
  REQUIRE(sel.long_leg.size() == 1);
  REQUIRE(sel.short_leg.size() == 1);
  CHECK(sel.long_leg[0] == firms[9]);
  CHECK(sel.short_leg[0] == firms[0]);

  sel = select_ripple({}, firms);
  CHECK(sel.long_leg[0] == *std::min_element(firms.begin(), firms.end()));
  CHECK(sel.short_leg[0] == *std::max_element(firms.begin(), firms.end()));

  const auto many = testing::tickers(25);
  sel = select_ripple({}, many);
  CHECK(sel.long_leg.size() == 3);
  CHECK(sel.short_leg.size() == 3);

  CHECK(select_ripple({}, testing::tickers(30)).long_leg.size() == 3);
}

TEST_CASE("ripple legs are disjoint and dollar neutral") {
  Rng rng(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto firms = testing::tickers(2 + rng.below(60));
    ShockVector z;
    for (const auto& f : firms)
      if (rng.bernoulli(0.6)) z[f] = std::round(rng.normal() * 3.0);
    const auto sel = select_ripple(z, firms, rng.uniform(0.01, 0.5));
    for (const auto& f : sel.long_leg)
      CHECK(std::find(sel.short_leg.begin(), sel.short_leg.end(), f) == sel.short_leg.end());
    const auto w = ripple_weights(sel);
    double gross = 0.0, net = 0.0;
    for (const auto& [f, v] : w) {
      gross += std::abs(v);
      net += v;
    }
    CHECK(std::abs(gross - 2.0) <= 1e-12);
    CHECK(std::abs(net) <= 1e-12);
  }
}

TEST_CASE("backtest metric examples") {
  SUBCASE("constant return") {
    const std::vector<double> r(5, 0.01);
    const auto m = metrics_of(r);
    CHECK(m.mean_return == doctest::Approx(0.01));
    CHECK(m.mdd == 0.0);
    CHECK(m.win_rate == 1.0);
  }
  SUBCASE("two-point path") {
    const std::vector<double> eq{1.0, 0.5};
    CHECK(max_drawdown(eq) == 0.5);
    const std::vector<double> r{-0.5};
    CHECK(metrics_of(r).mdd == 0.5);
  }
  SUBCASE("win rate") {
    const std::vector<double> r{0.01, -0.02, 0.03, 0.01};
    CHECK(metrics_of(r).win_rate == 0.75);
  }
  SUBCASE("hand-computed five-day series") {
    const std::vector<double> r{0.10, -0.20, 0.05, 0.0, 0.10};
    const auto m = metrics_of(r);
    // equity 1.1, 0.88, 0.924, 0.924, 1.0164; peak 1.1, trough 0.88
    CHECK(m.equity.back() == 1.1 * 0.8 * 1.05 * 1.0 * 1.1);
    CHECK(m.mdd == (1.1 - 1.1 * 0.8) / 1.1);
    CHECK(m.win_rate == 0.6);
    const double mean = (0.10 - 0.20 + 0.05 + 0.0 + 0.10) / 5.0;
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    CHECK(m.mean_return == mean);
    CHECK(m.sharpe == mean / std::sqrt(ss / 4.0));
  }
  SUBCASE("empty schedule") {
    CHECK(code_of([] { backtest({}, ReturnPanel{}); }) == ErrorCode::EmptySchedule);
  }
}

TEST_CASE("drawdown properties") {
  Rng rng(14, 0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r(2 + rng.below(30));
    for (auto& x : r) x = rng.normal(0.0, 0.05);
    if (trial % 5 == 0)
      for (auto& x : r) x = std::abs(x);
    const auto m = metrics_of(r);
    CHECK(m.mdd >= 0.0);
    CHECK(m.mdd <= 1.0);
    const bool monotone = std::is_sorted(m.equity.begin(), m.equity.end()) && m.equity.front() >= 1.0;
    CHECK((m.mdd == 0.0) == monotone);
  }
}

TEST_CASE("backtest renormalizes legs over missing returns") {
  const double nan = kMissing;
  const auto panel = panel_of({"A", "B", "C", "D"}, {{0.02, nan, -0.01, 0.03}, {0.01, 0.02, 0.03, 0.04}});
  WeightVector w{{FirmId("A"), 0.5}, {FirmId("B"), 0.5}, {FirmId("C"), -0.5}, {FirmId("D"), -0.5}};
  const std::vector<ScheduleEntry> schedule{{panel.dates()[0], w}, {panel.dates()[1], w}};
  const auto r = backtest(schedule, panel);
  REQUIRE(r.daily_returns.size() == 2);
  // B missing: A carries the whole long leg.
  CHECK(r.daily_returns[0] == doctest::Approx(1.0 * 0.02 - 0.5 * (-0.01) - 0.5 * 0.03));
  CHECK(r.daily_returns[1] == doctest::Approx(0.5 * 0.01 + 0.5 * 0.02 - 0.5 * 0.03 - 0.5 * 0.04));
}

TEST_CASE("strategy weights and schedules") {
  Rng rng(21, 0);
  std::vector<std::string> names;
  for (const auto& f : testing::tickers(12)) names.push_back(f.str());
  std::vector<std::vector<double>> rets(45, std::vector<double>(12));
  for (auto& row : rets)
    for (auto& x : row) x = rng.normal(0.0005, 0.01);
  rets[3][5] = kMissing;  // firm 5 lacks full history for early windows
  const auto panel = panel_of(names, rets);

  PortfolioConfig cfg;
  CHECK_FALSE(strategy_weights(Strategy::Equal, panel, 10, {}, cfg).has_value());
  const auto eq = strategy_weights(Strategy::Equal, panel, 31, {}, cfg);
  REQUIRE(eq.has_value());
  CHECK(eq->size() == 11);
  CHECK_FALSE(eq->contains(FirmId(names[5])));
  const auto full = strategy_weights(Strategy::Equal, panel, 40, {}, cfg);
  CHECK(full->size() == 12);

  for (auto s : kAllStrategies) {
    const auto w = strategy_weights(s, panel, 40, {{FirmId(names[2]), 1.0}, {FirmId(names[7]), -1.0}}, cfg);
    REQUIRE(w.has_value());
    double total = 0.0;
    for (const auto& [f, v] : *w) total += v;
    CHECK(std::abs(total - (s == Strategy::Ripple ? 0.0 : 1.0)) <= 1e-10);
    if (s == Strategy::Ripple) {
      CHECK(w->at(FirmId(names[2])) > 0.0);
      CHECK(w->at(FirmId(names[7])) < 0.0);
    }
  }

  std::map<Date, ShockVector> preds;
  for (std::size_t d = 0; d < panel.dates().size(); d += 3) preds[panel.dates()[d]] = {};
  const auto schedule = build_schedule(Strategy::Equal, panel, preds, cfg);
  for (const auto& e : schedule) CHECK(*panel.date_index(e.date) >= cfg.lookback);
  CHECK(schedule.size() == 5);  // dates 30, 33, 36, 39, 42
  const auto report = backtest(schedule, panel);
  CHECK(report.dates.size() == 5);
  CHECK(report_csv_row("equal", report).rfind("equal,", 0) == 0);
  const auto curve = equity_csv_rows("equal", report);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 5);
}
