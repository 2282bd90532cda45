#include "ripple/asset_pricing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <sstream>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"

namespace ripple {

std::string_view model_name(PricingModel model) noexcept {
  switch (model) {
    case PricingModel::Capm: return "capm";
    case PricingModel::Ff3: return "ff3";
    case PricingModel::Ff5: return "ff5";
  }
  return "unknown";
}

PricingModel parse_model(std::string_view name) {
  if (name == "capm") return PricingModel::Capm;
  if (name == "ff3") return PricingModel::Ff3;
  if (name == "ff5") return PricingModel::Ff5;
  throw Error(ErrorCode::BadConfig, "unknown pricing model '" + std::string(name) + "'");
}

// --- panels -----------------------------------------------------------------

FactorPanel::FactorPanel(std::vector<Date> dates, std::vector<FactorRow> rows)
    : dates_(std::move(dates)), rows_(std::move(rows)) {
  if (dates_.size() != rows_.size()) throw Error(ErrorCode::ParseError, "factor panel size mismatch");
  for (std::size_t i = 1; i < dates_.size(); ++i) {
    if (!(dates_[i - 1] < dates_[i])) {
      throw Error(ErrorCode::ParseError, "factor dates not strictly increasing at " + dates_[i].str());
    }
  }
  for (const auto& r : rows_) {
    if (!std::isfinite(r.mkt_rf) || !std::isfinite(r.rf)) {
      throw Error(ErrorCode::ParseError, "non-finite market or risk-free factor");
    }
  }
}

std::optional<std::size_t> FactorPanel::index_of(const Date& d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

const FactorRow& FactorPanel::at(const Date& d) const {
  auto idx = index_of(d);
  if (!idx) throw Error(ErrorCode::MissingFactor, "no factors for " + d.str());
  return rows_[*idx];
}

ReturnPanel::ReturnPanel(std::span<const Cell> cells) {
  std::set<Date> dates;
  std::set<FirmId> firms;
  for (const auto& c : cells) {
    if (!std::isfinite(c.ret)) throw Error(ErrorCode::ParseError, "non-finite return for " + c.firm.str());
    dates.insert(c.date);
    firms.insert(c.firm);
  }
  dates_.assign(dates.begin(), dates.end());
  firms_.assign(firms.begin(), firms.end());
  values_.assign(firms_.size(), std::vector<double>(dates_.size(), kMissing));
  for (const auto& c : cells) {
    const auto d = *date_index(c.date);
    const auto f = *firm_index(c.firm);
    if (!is_missing(values_[f][d])) {
      throw Error(ErrorCode::ParseError,
                  "duplicate return for " + c.firm.str() + " on " + c.date.str());
    }
    values_[f][d] = c.ret;
  }
}

std::optional<std::size_t> ReturnPanel::date_index(const Date& d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

std::optional<std::size_t> ReturnPanel::firm_index(const FirmId& f) const {
  auto it = std::lower_bound(firms_.begin(), firms_.end(), f);
  if (it == firms_.end() || *it != f) return std::nullopt;
  return static_cast<std::size_t>(it - firms_.begin());
}

ResidualPanel::ResidualPanel(std::vector<Date> dates, std::vector<FirmId> firms,
                             std::vector<std::vector<double>> eps,
                             std::vector<std::vector<Loadings>> loadings)
    : dates_(std::move(dates)),
      firms_(std::move(firms)),
      eps_(std::move(eps)),
      loadings_(std::move(loadings)) {
  sigma_.reserve(eps_.size());
  for (const auto& row : eps_) sigma_.push_back(cross_sectional_sigma(row));
}

std::optional<std::size_t> ResidualPanel::date_index(const Date& d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

std::optional<std::size_t> ResidualPanel::firm_index(const FirmId& f) const {
  auto it = std::lower_bound(firms_.begin(), firms_.end(), f);
  if (it == firms_.end() || *it != f) return std::nullopt;
  return static_cast<std::size_t>(it - firms_.begin());
}

double cross_sectional_sigma(std::span<const double> values) {
  double n = 0.0, mean = 0.0;
  for (double v : values) {
    if (is_missing(v)) continue;
    n += 1.0;
    mean += v;
  }
  if (n < 2.0) return 0.0;
  mean /= n;
  double ss = 0.0;
  for (double v : values) {
    if (!is_missing(v)) ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / (n - 1.0));
}

// --- estimation -------------------------------------------------------------

double capm_beta(std::span<const double> firm_excess, std::span<const double> market_excess) {
  const std::size_t n = firm_excess.size();
  if (n != market_excess.size() || n < 2) {
    throw Error(ErrorCode::InsufficientHistory, "need >= 2 aligned observations");
  }
  double mean_r = 0.0, mean_m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_r += firm_excess[i];
    mean_m += market_excess[i];
  }
  mean_r /= static_cast<double>(n);
  mean_m /= static_cast<double>(n);
  double cov = 0.0, var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dm = market_excess[i] - mean_m;
    cov += (firm_excess[i] - mean_r) * dm;
    var += dm * dm;
  }
  if (var <= 0.0) throw Error(ErrorCode::DegenerateMarket, "market excess return has zero variance");
  return cov / var;
}

namespace {

std::size_t factor_count(PricingModel model) {
  switch (model) {
    case PricingModel::Capm: return 1;
    case PricingModel::Ff3: return 3;
    case PricingModel::Ff5: return 5;
  }
  return 1;
}

void require_factors(PricingModel model, const FactorRow& f) {
  if (model != PricingModel::Capm && (is_missing(f.smb) || is_missing(f.hml))) {
    throw Error(ErrorCode::MissingFactor, "FF3 needs smb and hml");
  }
  if (model == PricingModel::Ff5 && (is_missing(f.rmw) || is_missing(f.cma))) {
    throw Error(ErrorCode::MissingFactor, "FF5 needs rmw and cma");
  }
}

}  // namespace

Loadings fit_loadings(PricingModel model, std::span<const double> firm_excess,
                      std::span<const FactorRow> factors, std::size_t min_obs) {
  const std::size_t n = firm_excess.size();
  if (n != factors.size()) throw Error(ErrorCode::InsufficientHistory, "unaligned series");
  if (n < std::max<std::size_t>(min_obs, 2)) {
    throw Error(ErrorCode::InsufficientHistory,
                std::to_string(n) + " observations, need " + std::to_string(min_obs));
  }
  Loadings out;
  if (model == PricingModel::Capm) {
    std::vector<double> market(n);
    for (std::size_t i = 0; i < n; ++i) market[i] = factors[i].mkt_rf;
    out.beta = capm_beta(firm_excess, market);
    return out;
  }
  const std::size_t k = factor_count(model);
  if (n < k + 2) throw Error(ErrorCode::InsufficientHistory, "too few observations for OLS");
  Eigen::MatrixXd x(n, k + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = factors[i];
    require_factors(model, f);
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = f.mkt_rf;
    x(r, 2) = f.smb;
    x(r, 3) = f.hml;
    if (model == PricingModel::Ff5) {
      x(r, 4) = f.rmw;
      x(r, 5) = f.cma;
    }
    y(r) = firm_excess[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    throw Error(ErrorCode::DegenerateMarket, "factor design is rank deficient");
  }
  const Eigen::VectorXd b = qr.solve(y);
  out.alpha = b(0);
  out.beta = b(1);
  out.smb = b(2);
  out.hml = b(3);
  if (model == PricingModel::Ff5) {
    out.rmw = b(4);
    out.cma = b(5);
  }
  return out;
}

BetaEstimate estimate_beta(const ReturnPanel& returns, const FactorPanel& factors,
                           const FirmId& firm, const Date& as_of, PricingModel model,
                           const WindowConfig& cfg) {
  const auto f = returns.firm_index(firm);
  if (!f) throw Error(ErrorCode::UnknownFirm, firm.str() + " has no returns");
  const auto& fdates = factors.dates();
  const auto end = static_cast<std::size_t>(std::lower_bound(fdates.begin(), fdates.end(), as_of) -
                                            fdates.begin());
  const std::size_t begin = end > cfg.window ? end - cfg.window : 0;
  std::vector<double> excess;
  std::vector<FactorRow> rows;
  for (std::size_t i = begin; i < end; ++i) {
    const auto d = returns.date_index(fdates[i]);
    if (!d) continue;
    const double r = returns.at(*d, *f);
    if (is_missing(r)) continue;
    excess.push_back(r - factors.rows()[i].rf);
    rows.push_back(factors.rows()[i]);
  }
  BetaEstimate est{firm, as_of, model, fit_loadings(model, excess, rows, cfg.min_obs), excess.size()};
  return est;
}

double expected_return(PricingModel model, const Loadings& l, const FactorRow& f) {
  require_factors(model, f);
  double e = f.rf + l.beta * f.mkt_rf;
  if (model != PricingModel::Capm) e += l.smb * f.smb + l.hml * f.hml;
  if (model == PricingModel::Ff5) e += l.rmw * f.rmw + l.cma * f.cma;
  return e;
}

ResidualPanel residual_panel(const ReturnPanel& returns, const FactorPanel& factors,
                             const ResidualOptions& options) {
  const auto& rdates = returns.dates();
  // factor index for every return date
  std::vector<std::optional<std::size_t>> factor_idx(rdates.size());
  for (std::size_t d = 0; d < rdates.size(); ++d) factor_idx[d] = factors.index_of(rdates[d]);
  // return-date index for every factor date
  std::vector<std::optional<std::size_t>> return_idx(factors.dates().size());
  for (std::size_t i = 0; i < factors.dates().size(); ++i) {
    return_idx[i] = returns.date_index(factors.dates()[i]);
  }

  std::vector<Date> out_dates;
  std::vector<std::vector<double>> eps;
  std::vector<std::vector<Loadings>> loadings;
  const std::size_t nf = returns.firms().size();

  std::vector<double> excess;
  std::vector<FactorRow> rows;
  for (std::size_t d = 0; d < rdates.size(); ++d) {
    if (options.dates && !options.dates->contains(rdates[d])) continue;
    if (!factor_idx[d]) throw Error(ErrorCode::MissingFactor, "no factors for " + rdates[d].str());
    const std::size_t fi = *factor_idx[d];
    const FactorRow& today = factors.rows()[fi];
    const std::size_t begin = fi > options.window.window ? fi - options.window.window : 0;

    std::vector<double> row(nf, kMissing);
    std::vector<Loadings> row_loadings(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      const double realized = returns.at(d, f);
      if (is_missing(realized)) continue;
      Loadings l;
      if (auto known = options.known_loadings.find(returns.firms()[f]);
          known != options.known_loadings.end()) {
        l = known->second;
      } else {
        excess.clear();
        rows.clear();
        for (std::size_t i = begin; i < fi; ++i) {
          if (!return_idx[i]) continue;
          const double r = returns.at(*return_idx[i], f);
          if (is_missing(r)) continue;
          excess.push_back(r - factors.rows()[i].rf);
          rows.push_back(factors.rows()[i]);
        }
        try {
          l = fit_loadings(options.model, excess, rows, options.window.min_obs);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::InsufficientHistory || e.code() == ErrorCode::DegenerateMarket) {
            continue;  // cell stays missing
          }
          throw;
        }
      }
      row[f] = realized - expected_return(options.model, l, today);
      row_loadings[f] = l;
    }
    out_dates.push_back(rdates[d]);
    eps.push_back(std::move(row));
    loadings.push_back(std::move(row_loadings));
  }
  return ResidualPanel(std::move(out_dates), returns.firms(), std::move(eps), std::move(loadings));
}

// --- ingestion / export -----------------------------------------------------

ReturnPanel parse_returns_csv(std::string_view text) {
  const auto table = CsvTable::parse(text, "returns.csv");
  const auto c_date = table.column("date");
  const auto c_ticker = table.column("ticker");
  const auto c_ret = table.column("ret");
  std::vector<ReturnPanel::Cell> cells;
  cells.reserve(table.rows().size());
  for (const auto& row : table.rows()) {
    if (row[c_ret].empty()) continue;  // missing cells are skipped
    cells.push_back({Date::parse(row[c_date]), FirmId(row[c_ticker]), parse_double(row[c_ret])});
  }
  return ReturnPanel(cells);
}

ReturnPanel read_returns_csv(const std::filesystem::path& path) {
  return parse_returns_csv(read_text_file(path));
}

std::string returns_to_csv(const ReturnPanel& panel) {
  std::ostringstream out;
  out << "date,ticker,ret\n";
  for (std::size_t d = 0; d < panel.dates().size(); ++d) {
    for (std::size_t f = 0; f < panel.firms().size(); ++f) {
      const double r = panel.at(d, f);
      if (is_missing(r)) continue;
      out << panel.dates()[d].str() << ',' << panel.firms()[f].str() << ',' << format_double(r)
          << '\n';
    }
  }
  return out.str();
}

FactorPanel parse_factors_csv(std::string_view text) {
  const auto table = CsvTable::parse(text, "factors.csv");
  const auto c_date = table.column("date");
  const auto c_mkt = table.column("mkt_rf");
  auto optional_column = [&](std::string_view name) -> std::optional<std::size_t> {
    if (!table.has_column(name)) return std::nullopt;
    return table.column(name);
  };
  const auto c_smb = optional_column("smb");
  const auto c_hml = optional_column("hml");
  const auto c_rmw = optional_column("rmw");
  const auto c_cma = optional_column("cma");
  const auto c_rf = optional_column("rf");
  auto cell = [](const std::vector<std::string>& row, std::optional<std::size_t> c, double fallback) {
    if (!c || row[*c].empty()) return fallback;
    return parse_double(row[*c]);
  };
  std::vector<std::pair<Date, FactorRow>> parsed;
  for (const auto& row : table.rows()) {
    FactorRow f;
    f.mkt_rf = parse_double(row[c_mkt]);
    f.smb = cell(row, c_smb, kMissing);
    f.hml = cell(row, c_hml, kMissing);
    f.rmw = cell(row, c_rmw, kMissing);
    f.cma = cell(row, c_cma, kMissing);
    f.rf = cell(row, c_rf, 0.0);
    parsed.emplace_back(Date::parse(row[c_date]), f);
  }
  std::vector<Date> dates;
  std::vector<FactorRow> rows;
  for (auto& [d, f] : parsed) {
    dates.push_back(d);
    rows.push_back(f);
  }
  return FactorPanel(std::move(dates), std::move(rows));
}

FactorPanel read_factors_csv(const std::filesystem::path& path) {
  return parse_factors_csv(read_text_file(path));
}

std::string factors_to_csv(const FactorPanel& panel) {
  auto cell = [](double v) { return is_missing(v) ? std::string() : format_double(v); };
  std::ostringstream out;
  out << "date,mkt_rf,smb,hml,rmw,cma,rf\n";
  for (std::size_t i = 0; i < panel.dates().size(); ++i) {
    const auto& f = panel.rows()[i];
    out << panel.dates()[i].str() << ',' << format_double(f.mkt_rf) << ',' << cell(f.smb) << ','
        << cell(f.hml) << ',' << cell(f.rmw) << ',' << cell(f.cma) << ',' << format_double(f.rf)
        << '\n';
  }
  return out.str();
}

}  // namespace ripple
