#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ripple/calendar.hpp"
#include "ripple/market_graph.hpp"

namespace ripple {

enum class PricingModel { Capm, Ff3, Ff5 };

std::string_view model_name(PricingModel model) noexcept;  // capm, ff3, ff5
PricingModel parse_model(std::string_view name);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// One date of factor returns. Fama-French columns are NaN when absent.
struct FactorRow {
  double mkt_rf = 0.0;
  double smb = kMissing;
  double hml = kMissing;
  double rmw = kMissing;
  double cma = kMissing;
  double rf = 0.0;
};

class FactorPanel {
 public:
  FactorPanel() = default;
  /// Dates must be strictly increasing.
  FactorPanel(std::vector<Date> dates, std::vector<FactorRow> rows);

  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<FactorRow>& rows() const noexcept { return rows_; }
  std::optional<std::size_t> index_of(const Date& d) const;
  const FactorRow& at(const Date& d) const;  // MissingFactor when absent

 private:
  std::vector<Date> dates_;
  std::vector<FactorRow> rows_;
};

/// Simple per-period returns on a (date, firm) grid; missing cells are NaN.
class ReturnPanel {
 public:
  struct Cell {
    Date date;
    FirmId firm;
    double ret = 0.0;
  };

  ReturnPanel() = default;
  explicit ReturnPanel(std::span<const Cell> cells);

  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<FirmId>& firms() const noexcept { return firms_; }
  std::optional<std::size_t> date_index(const Date& d) const;
  std::optional<std::size_t> firm_index(const FirmId& f) const;
  /// NaN when missing.
  double at(std::size_t date_idx, std::size_t firm_idx) const {
    return values_[firm_idx][date_idx];
  }
  std::span<const double> series(std::size_t firm_idx) const { return values_[firm_idx]; }

 private:
  std::vector<Date> dates_;
  std::vector<FirmId> firms_;
  std::vector<std::vector<double>> values_;  // [firm][date]
};

/// Factor loadings. CAPM uses only beta; FF3 adds smb/hml; FF5 adds rmw/cma.
struct Loadings {
  double beta = 0.0;
  double smb = 0.0;
  double hml = 0.0;
  double rmw = 0.0;
  double cma = 0.0;
  double alpha = 0.0;  // intercept of the OLS fit; not part of expected return
};

struct BetaEstimate {
  FirmId firm;
  Date as_of;
  PricingModel model = PricingModel::Capm;
  Loadings loadings;
  std::size_t observations = 0;
};

struct WindowConfig {
  std::size_t window = 252;  // trading days
  std::size_t min_obs = 60;
};

/// Closed-form CAPM beta Cov(r, m) / Var(m) on aligned excess-return series.
double capm_beta(std::span<const double> firm_excess, std::span<const double> market_excess);

/// Loadings from aligned excess returns and factor rows. CAPM uses the
/// closed-form beta; FF3/FF5 use OLS with an intercept.
Loadings fit_loadings(PricingModel model, std::span<const double> firm_excess,
                      std::span<const FactorRow> factors, std::size_t min_obs);

/// Estimates loadings from the `cfg.window` factor dates strictly before
/// `as_of`, skipping missing returns.
BetaEstimate estimate_beta(const ReturnPanel& returns, const FactorPanel& factors,
                           const FirmId& firm, const Date& as_of, PricingModel model,
                           const WindowConfig& cfg = {});

double expected_return(PricingModel model, const Loadings& loadings, const FactorRow& factors);

struct ResidualOptions {
  PricingModel model = PricingModel::Capm;
  WindowConfig window;
  /// Only these dates are evaluated when set.
  std::optional<std::set<Date>> dates;
  /// Loadings used verbatim for these firms instead of being estimated.
  std::map<FirmId, Loadings> known_loadings;
};

class ResidualPanel {
 public:
  ResidualPanel() = default;
  ResidualPanel(std::vector<Date> dates, std::vector<FirmId> firms,
                std::vector<std::vector<double>> eps, std::vector<std::vector<Loadings>> loadings);

  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<FirmId>& firms() const noexcept { return firms_; }
  std::optional<std::size_t> date_index(const Date& d) const;
  std::optional<std::size_t> firm_index(const FirmId& f) const;

  /// NaN when the cell is missing.
  double eps(std::size_t date_idx, std::size_t firm_idx) const { return eps_[date_idx][firm_idx]; }
  std::span<const double> cross_section(std::size_t date_idx) const { return eps_[date_idx]; }
  const Loadings& loadings(std::size_t date_idx, std::size_t firm_idx) const {
    return loadings_[date_idx][firm_idx];
  }
  /// Sample standard deviation of the date's residual cross-section.
  double sigma(std::size_t date_idx) const { return sigma_[date_idx]; }

 private:
  std::vector<Date> dates_;
  std::vector<FirmId> firms_;
  std::vector<std::vector<double>> eps_;  // [date][firm]
  std::vector<std::vector<Loadings>> loadings_;
  std::vector<double> sigma_;
};

ResidualPanel residual_panel(const ReturnPanel& returns, const FactorPanel& factors,
                             const ResidualOptions& options = {});

/// Sample standard deviation over the finite entries; 0 for fewer than two.
double cross_sectional_sigma(std::span<const double> values);

// --- ingestion / export -----------------------------------------------------

ReturnPanel parse_returns_csv(std::string_view text);
ReturnPanel read_returns_csv(const std::filesystem::path& path);
std::string returns_to_csv(const ReturnPanel& panel);

FactorPanel parse_factors_csv(std::string_view text);
FactorPanel read_factors_csv(const std::filesystem::path& path);
std::string factors_to_csv(const FactorPanel& panel);

}  // namespace ripple
