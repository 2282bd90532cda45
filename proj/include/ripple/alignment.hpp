#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ripple/asset_pricing.hpp"
#include "ripple/market_graph.hpp"
#include "ripple/propagator.hpp"

namespace ripple {

struct RewardConfig {
  double lambda = 0.1;
  /// Coverage as sum(min(Z_j, eps_j)) without absolute values.
  bool literal_coverage = false;

  void validate() const;
};

struct RewardReport {
  double direction = 0.0;
  double coverage = 0.0;
  double total = 0.0;
  double lambda = 0.1;
  std::size_t events = 0;
  std::size_t refusals = 0;
};

/// direction = Z.eps / (|Z| |eps|), coverage = sum min(|Z_j|, |eps_j|) / |eps|_1,
/// total = direction + lambda * coverage. Throws ZeroVector when either side
/// is all zero.
RewardReport reward(std::span<const double> z, std::span<const double> eps, const RewardConfig& cfg = {});

/// Aligns Z to the firms with a residual on `date_idx` (unclaimed firms are 0).
/// Returns (z, eps) vectors over those firms.
std::pair<std::vector<double>, std::vector<double>> align_to_residuals(const ShockVector& z,
                                                                       const ResidualPanel& panel,
                                                                       std::size_t date_idx);

// --- policy ------------------------------------------------------------------

/// Continuous policy coordinates: four decays, hop limit, seed scale.
inline constexpr std::size_t kPolicyDims = kRelationCount + 2;
using PolicyVector = std::array<double, kPolicyDims>;

PolicyVector to_policy_vector(const DiffusionParams& p);
/// Projects a sampled point into valid DiffusionParams (hop limit rounded).
DiffusionParams to_diffusion_params(const PolicyVector& v, int seed_score = 8);

struct PolicyState {
  PolicyVector theta_mean{};
  PolicyVector sigma{};
  std::optional<double> baseline;
  double baseline_decay = 0.1;  // rho
  double clip = 0.2;
  double learning_rate = 0.05;
  std::size_t step = 0;
  std::size_t aborted_updates = 0;

  void validate() const;
};

PolicyState initial_policy(const DiffusionParams& start, double sigma_explore = 0.1);

/// A = r - V, then V <- (1 - rho) V + rho r. The first call seeds V = r.
double advantage(double reward_total, PolicyState& state);

struct PolicySample {
  PolicyVector theta{};
  double log_ratio = 0.0;  // log pi_current(theta) - log pi_sampling(theta)
  double advantage = 0.0;
};

/// Gaussian log-density of `theta` under N(mean, diag(sigma^2)), skipping
/// zero-sigma coordinates.
double policy_log_density(const PolicyVector& theta, const PolicyVector& mean, const PolicyVector& sigma);

/// theta_mean += alpha * mean_b[clip(ratio_b) * A_b * (theta_b - mean) / sigma^2],
/// then projected back into the parameter domain. A non-finite gradient
/// leaves the state unchanged apart from `aborted_updates`.
PolicyState policy_update(const PolicyState& state, std::span<const PolicySample> batch);

// --- alignment loop ----------------------------------------------------------

struct AlignEnvironment {
  const GraphSeries* graphs = nullptr;
  const std::vector<Event>* events = nullptr;
  const ResidualPanel* residuals = nullptr;
};

struct AlignConfig {
  RewardConfig reward;
  DiffusionParams start;
  double sigma_explore = 0.1;
  double learning_rate = 0.05;
  double clip = 0.2;
  double baseline_decay = 0.1;
  std::size_t max_updates = 200;
  std::size_t epochs_per_update = 1;
  /// Months used for training; empty means every month with events.
  std::vector<Month> train_months;
  std::uint64_t seed = 0;
};

struct TraceStep {
  std::size_t step = 0;
  Month month;
  double reward = 0.0;     // mean reward of the month's samples
  double advantage = 0.0;  // mean advantage
  double baseline = 0.0;   // after the month's samples
  PolicyVector theta{};    // sampling mean for this step
  std::size_t samples = 0;
  std::size_t excluded = 0;
};

struct AlignmentTrace {
  std::vector<TraceStep> steps;
  PolicyVector final_theta{};
  DiffusionParams final_params;
  std::size_t aborted_updates = 0;
};

/// One event scored against the next trading day's residuals.
struct ScoredEvent {
  std::string event_id;
  double reward = 0.0;
};

/// Rewards of fixed parameters over the events of `months` (all when empty),
/// in ascending event-id order. Events without a snapshot, a seed firm, or a
/// non-zero Z/eps pair are excluded and counted in `excluded`.
std::vector<ScoredEvent> score_params(const AlignEnvironment& env, const DiffusionParams& params,
                                      const RewardConfig& cfg, const std::vector<Month>& months,
                                      std::size_t* excluded = nullptr);

double mean_reward(const std::vector<ScoredEvent>& scored);

/// Policy-gradient alignment over DiffusionParams. One update per month of
/// events, cycling through the training months until `max_updates`.
AlignmentTrace align(const AlignEnvironment& env, const AlignConfig& cfg);

std::string trace_to_csv(const AlignmentTrace& trace);

/// Index of the first residual date strictly after `d`, if any.
std::optional<std::size_t> next_residual_date(const ResidualPanel& panel, const Date& d);

}  // namespace ripple
