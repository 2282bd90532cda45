#include "ripple/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"
#include "ripple/rng.hpp"

namespace ripple {

namespace {

double two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population variance, matching the expectation in the R2_phi formula.
double population_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

RegressionResult regression_from(const OlsResult& ols, std::span<const double> y, std::span<const double> phi) {
  RegressionResult r;
  r.gamma0 = ols.coef[0];
  r.gamma1 = ols.coef[1];
  r.gamma_controls.assign(ols.coef.begin() + 2, ols.coef.end());
  r.se = ols.se;
  r.t_gamma1 = ols.t[1];
  r.p_gamma1 = ols.p[1];
  r.r2 = ols.r2;
  r.n = ols.n;
  double sq = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double d = y[j] - r.gamma1 * phi[j];
    sq += d * d;
  }
  r.r2_phi = 1.0 - (sq / static_cast<double>(y.size())) / population_variance(y);
  return r;
}

RegressionResult fit(const std::vector<double>& y, const std::vector<double>& phi,
                     const std::vector<std::vector<double>>& controls) {
  const std::size_t n = y.size();
  if (n == 0) throw Error(ErrorCode::TooFewObservations, "empty cross-section");
  if (population_variance(y) == 0.0) throw Error(ErrorCode::DegenerateCrossSection, "standardized residuals are constant");
  Eigen::MatrixXd x(n, 2 + controls.size());
  Eigen::VectorXd yv(n);
  for (std::size_t j = 0; j < n; ++j) {
    x(j, 0) = 1.0;
    x(j, 1) = phi[j];
    for (std::size_t k = 0; k < controls.size(); ++k) x(j, 2 + k) = controls[k][j];
    yv(j) = y[j];
  }
  return regression_from(ols_robust(x, yv), y, phi);
}

}  // namespace

OlsResult ols_robust(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(x.cols());
  if (static_cast<std::size_t>(y.size()) != n) throw Error(ErrorCode::BadConfig, "design and response differ in length");
  if (n <= k) throw Error(ErrorCode::TooFewObservations, "need more rows than regressors");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (static_cast<std::size_t>(qr.rank()) < k) throw Error(ErrorCode::SingularDesign, "design matrix is rank deficient");

  const Eigen::VectorXd b = qr.solve(y);
  const Eigen::VectorXd e = y - x * b;
  const Eigen::MatrixXd bread = (x.transpose() * x).inverse();
  const Eigen::MatrixXd meat = x.transpose() * e.array().square().matrix().asDiagonal() * x;
  const double dof = static_cast<double>(n) / static_cast<double>(n - k);
  const Eigen::MatrixXd cov = dof * bread * meat * bread;

  OlsResult r;
  r.n = n;
  r.k = k;
  r.coef.assign(b.data(), b.data() + k);
  r.residuals.assign(e.data(), e.data() + n);
  for (std::size_t i = 0; i < k; ++i) {
    const double se = std::sqrt(std::max(cov(i, i), 0.0));
    double t = 0.0;
    if (se > 0.0) {
      t = b(i) / se;
    } else if (b(i) != 0.0) {
      t = std::copysign(std::numeric_limits<double>::infinity(), b(i));
    }
    r.se.push_back(se);
    r.t.push_back(t);
    r.p.push_back(se == 0.0 && b(i) == 0.0 ? 1.0 : two_sided_p(t, static_cast<double>(n - k)));
  }
  const double ybar = y.mean();
  const double sst = (y.array() - ybar).square().sum();
  r.r2 = sst > 0.0 ? 1.0 - e.squaredNorm() / sst : 0.0;
  return r;
}

RegressionResult pricing_regression(std::span<const double> eps, double sigma_eps, std::span<const double> phi,
                                    const std::vector<std::vector<double>>& controls) {
  if (eps.size() != phi.size()) throw Error(ErrorCode::BadConfig, "eps and phi differ in length");
  for (const auto& c : controls) {
    if (c.size() != eps.size()) throw Error(ErrorCode::BadConfig, "control column differs in length");
  }
  if (!(sigma_eps > 0.0)) throw Error(ErrorCode::DegenerateCrossSection, "residual sigma is zero");
  std::vector<double> y(eps.begin(), eps.end());
  for (auto& v : y) v /= sigma_eps;
  return fit(y, std::vector<double>(phi.begin(), phi.end()), controls);
}

RegressionResult pooled_pricing_regression(std::span<const CrossSection> sections) {
  if (sections.empty()) throw Error(ErrorCode::TooFewObservations, "no cross-sections");
  const std::size_t k = sections.front().controls.size();
  std::vector<double> y, phi;
  std::vector<std::vector<double>> controls(k);
  for (const auto& cs : sections) {
    if (!(cs.sigma > 0.0)) throw Error(ErrorCode::DegenerateCrossSection, "residual sigma is zero on " + cs.date.str());
    if (cs.controls.size() != k) throw Error(ErrorCode::BadConfig, "cross-sections disagree on controls");
    for (std::size_t j = 0; j < cs.eps.size(); ++j) {
      y.push_back(cs.eps[j] / cs.sigma);
      phi.push_back(cs.phi[j]);
      for (std::size_t c = 0; c < k; ++c) controls[c].push_back(cs.controls[c][j]);
    }
  }
  return fit(y, phi, controls);
}

AnovaResult anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::TooFewObservations, "ANOVA needs at least two groups");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw Error(ErrorCode::TooFewObservations, "ANOVA group with fewer than two observations");
    for (double v : g) total += v;
    n += g.size();
  }
  const double grand = total / static_cast<double>(n);
  AnovaResult a;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    a.ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) a.ss_within += (v - m) * (v - m);
  }
  a.df_between = groups.size() - 1;
  a.df_within = n - groups.size();
  const double ss_total = a.ss_between + a.ss_within;
  a.eta_squared = ss_total > 0.0 ? a.ss_between / ss_total : 0.0;
  const double ms_between = a.ss_between / static_cast<double>(a.df_between);
  const double ms_within = a.ss_within / static_cast<double>(a.df_within);
  if (ms_within > 0.0) {
    a.f = ms_between / ms_within;
    const boost::math::fisher_f dist(static_cast<double>(a.df_between), static_cast<double>(a.df_within));
    a.p = std::clamp(boost::math::cdf(boost::math::complement(dist, a.f)), 0.0, 1.0);
  } else if (ms_between > 0.0) {
    a.f = std::numeric_limits<double>::infinity();
    a.p = 0.0;
  }
  return a;
}

void RefusalStats::add(const PredictionOutcome& outcome) {
  ++total;
  if (const auto* r = std::get_if<Refusal>(&outcome)) {
    ++refusals;
    ++by_reason[r->reason];
  }
}

RefusalStats refusal_stats(std::span<const PredictionOutcome> log) {
  RefusalStats s;
  for (const auto& o : log) s.add(o);
  return s;
}

// --- evaluation pipeline -------------------------------------------------------

Propagator diffusion_propagator(const DiffusionParams& params) {
  params.validate();
  return [params](const GraphSnapshot& s, const Event& e) -> PredictionOutcome {
    return propagate_diffusion(s, e, params);
  };
}

Propagator null_propagator(std::uint64_t seed, std::size_t firms_per_event) {
  return [seed, firms_per_event](const GraphSnapshot& s, const Event& e) -> PredictionOutcome {
    Rng rng(seed, fnv1a64(e.id));
    PredictionSet out;
    out.event_id = e.id;
    std::vector<FirmId> firms = s.firms();
    rng.shuffle(firms);
    firms.resize(std::min(firms_per_event, firms.size()));
    std::sort(firms.begin(), firms.end());
    for (const auto& f : firms) {
      int score = static_cast<int>(rng.below(10)) + 1;
      if (rng.bernoulli(0.5)) score = -score;
      out.claims.push_back({f.str(), score > 0 ? ImpactType::Positive : ImpactType::Negative, score});
      out.y[{f, f}] = score / 10.0;
    }
    out.analysis = "null propagator";
    return out;
  };
}

EvalReport evaluate(const AlignEnvironment& env, const Propagator& propagator, const EvalOptions& options) {
  if (!env.graphs || !env.events || !env.residuals) throw Error(ErrorCode::BadConfig, "incomplete environment");
  if (env.events->empty()) throw Error(ErrorCode::EmptyStream, "no events to evaluate");
  const ResidualPanel& panel = *env.residuals;

  std::vector<const Event*> order;
  for (const auto& e : *env.events) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const Event* a, const Event* b) { return a->id < b->id; });

  EvalReport report;
  std::map<std::size_t, ShockVector> phi_by_date;
  for (const Event* e : order) {
    const auto* snap = env.graphs->find(e->date().month_of());
    const auto date_idx = next_residual_date(panel, e->date());
    if (!snap || !date_idx) {
      ++report.excluded;
      continue;
    }
    PredictionOutcome outcome;
    try {
      outcome = propagator(*snap, *e);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NoSeedInGraph) throw;
      ++report.excluded;
      continue;
    }
    report.refusals.add(outcome);
    if (const auto* pred = std::get_if<PredictionSet>(&outcome)) {
      auto& acc = phi_by_date[*date_idx];
      for (const auto& [firm, z] : aggregate_shocks(*snap, *pred)) acc[firm] += z;
    }
  }

  const std::size_t n_controls = options.control_loadings ? 4 : 0;
  for (const auto& [d, z] : phi_by_date) {
    CrossSection cs;
    cs.date = panel.dates()[d];
    cs.sigma = panel.sigma(d);
    cs.controls.resize(n_controls);
    std::optional<std::size_t> control_date;
    if (options.control_loadings) {
      control_date = options.control_loadings->date_index(cs.date);
      if (!control_date) throw Error(ErrorCode::MissingFactor, "no control loadings on " + cs.date.str());
    }
    for (std::size_t f = 0; f < panel.firms().size(); ++f) {
      const double eps = panel.eps(d, f);
      if (is_missing(eps)) continue;
      const FirmId& firm = panel.firms()[f];
      if (control_date) {
        const auto fi = options.control_loadings->firm_index(firm);
        if (!fi || is_missing(options.control_loadings->eps(*control_date, *fi))) continue;
        const auto& l = options.control_loadings->loadings(*control_date, *fi);
        cs.controls[0].push_back(l.smb);
        cs.controls[1].push_back(l.hml);
        cs.controls[2].push_back(l.rmw);
        cs.controls[3].push_back(l.cma);
      }
      auto it = z.find(firm);
      cs.firms.push_back(firm);
      cs.eps.push_back(eps);
      cs.phi.push_back(it == z.end() ? 0.0 : it->second);
    }
    if (cs.eps.empty() || !(cs.sigma > 0.0)) continue;
    report.sections.push_back(std::move(cs));
  }
  if (report.sections.empty()) return report;

  report.regression = pooled_pricing_regression(report.sections);

  std::vector<std::vector<double>> groups(3);  // phi > 0, phi < 0, phi == 0
  for (const auto& cs : report.sections) {
    for (std::size_t j = 0; j < cs.eps.size(); ++j) {
      const double y = cs.eps[j] / cs.sigma;
      groups[cs.phi[j] > 0.0 ? 0 : cs.phi[j] < 0.0 ? 1 : 2].push_back(y);
    }
  }
  std::erase_if(groups, [](const auto& g) { return g.size() < 2; });
  if (groups.size() >= 2) report.anova = anova(groups);
  return report;
}

std::string regression_csv_header() { return "model,method,coef,t,p,r2,r2_phi,n\n"; }

std::string regression_csv_row(const std::string& model, const std::string& method, const RegressionResult& r) {
  std::ostringstream out;
  out << model << ',' << method << ',' << format_double(r.gamma1) << ',' << format_double(r.t_gamma1) << ','
      << format_double(r.p_gamma1) << ',' << format_double(r.r2) << ',' << format_double(r.r2_phi) << ','
      << r.n << '\n';
  return out.str();
}

std::string anova_csv_header() { return "model,method,anova_f,anova_p,es\n"; }

std::string anova_csv_row(const std::string& model, const std::string& method, const AnovaResult& a) {
  std::ostringstream out;
  out << model << ',' << method << ',' << format_double(a.f) << ',' << format_double(a.p) << ','
      << format_double(a.eta_squared) << '\n';
  return out.str();
}

std::string refusal_csv(const RefusalStats& stats) {
  std::ostringstream out;
  out << "reason,count\n";
  for (auto reason : {RefusalReason::EmptyOutput, RefusalReason::ParseError, RefusalReason::SchemaViolation,
                      RefusalReason::ScoreOutOfRange, RefusalReason::IdMismatch, RefusalReason::Timeout,
                      RefusalReason::Died}) {
    auto it = stats.by_reason.find(reason);
    out << refusal_name(reason) << ',' << (it == stats.by_reason.end() ? 0 : it->second) << '\n';
  }
  out << "total," << stats.total << '\n';
  out << "refusals," << stats.refusals << '\n';
  out << "rate," << format_double(stats.rate()) << '\n';
  return out.str();
}

}  // namespace ripple
