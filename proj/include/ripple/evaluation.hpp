#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ripple/alignment.hpp"
#include "ripple/asset_pricing.hpp"
#include "ripple/propagator.hpp"

namespace ripple {

struct OlsResult {
  std::vector<double> coef;
  std::vector<double> se;  // HC1
  std::vector<double> t;
  std::vector<double> p;   // two-sided, t distribution with n - k df
  std::vector<double> residuals;
  double r2 = 0.0;         // centered
  std::size_t n = 0;
  std::size_t k = 0;
};

/// Least squares with HC1 standard errors. Throws SingularDesign on rank
/// deficiency and TooFewObservations when n <= k.
OlsResult ols_robust(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct RegressionResult {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  std::vector<double> gamma_controls;
  std::vector<double> se;  // gamma0, gamma1, controls
  double t_gamma1 = 0.0;
  double p_gamma1 = 1.0;
  double r2_phi = 0.0;     // literal formula; may be negative
  double r2 = 0.0;         // plain regression R^2
  std::size_t n = 0;
};

/// One date's inputs: residuals, their cross-sectional sigma, propagator
/// scores and control columns (controls[k][j] for firm j).
struct CrossSection {
  Date date;
  std::vector<FirmId> firms;
  std::vector<double> eps;
  double sigma = 0.0;
  std::vector<double> phi;
  std::vector<std::vector<double>> controls;
};

/// Regresses eps/sigma on [1, phi, controls]. R2_phi = 1 - mean((y - g1 phi)^2) / var(y).
/// Throws DegenerateCrossSection when sigma is 0 or the response is constant.
RegressionResult pricing_regression(std::span<const double> eps, double sigma_eps, std::span<const double> phi,
                                    const std::vector<std::vector<double>>& controls = {});

/// Same regression on the rows of several cross-sections stacked together,
/// each standardized by its own sigma.
RegressionResult pooled_pricing_regression(std::span<const CrossSection> sections);

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  double eta_squared = 0.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
};

/// One-way ANOVA. Throws TooFewObservations when fewer than two groups are
/// given or any group has fewer than two observations.
AnovaResult anova(const std::vector<std::vector<double>>& groups);

struct RefusalStats {
  std::size_t total = 0;
  std::size_t refusals = 0;
  std::map<RefusalReason, std::size_t> by_reason;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(refusals) / static_cast<double>(total); }
  void add(const PredictionOutcome& outcome);
};

RefusalStats refusal_stats(std::span<const PredictionOutcome> log);

// --- evaluation pipeline -------------------------------------------------------

using Propagator = std::function<PredictionOutcome(const GraphSnapshot&, const Event&)>;

Propagator diffusion_propagator(const DiffusionParams& params);

/// Claims `firms_per_event` random firms with random non-zero scores, drawn
/// from a stream keyed by (seed, event id). Independent of the residuals.
Propagator null_propagator(std::uint64_t seed, std::size_t firms_per_event = 5);

struct EvalOptions {
  /// Loadings used as controls (smb, hml, rmw, cma); none when null.
  const ResidualPanel* control_loadings = nullptr;
};

struct EvalReport {
  std::optional<RegressionResult> regression;
  std::optional<AnovaResult> anova;
  RefusalStats refusals;
  std::vector<CrossSection> sections;
  std::size_t excluded = 0;  // events without snapshot, residual date or seed
};

/// Runs the propagator over every event (in id order), sums Z per next-day
/// residual date and fits the pooled pricing regression. The ANOVA groups the
/// standardized residuals by the sign of phi.
EvalReport evaluate(const AlignEnvironment& env, const Propagator& propagator, const EvalOptions& options = {});

std::string regression_csv_header();
std::string regression_csv_row(const std::string& model, const std::string& method, const RegressionResult& r);
std::string anova_csv_header();
std::string anova_csv_row(const std::string& model, const std::string& method, const AnovaResult& a);
std::string refusal_csv(const RefusalStats& stats);

}  // namespace ripple
