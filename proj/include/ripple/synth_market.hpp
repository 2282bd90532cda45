#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ripple/alignment.hpp"
#include "ripple/asset_pricing.hpp"
#include "ripple/evaluation.hpp"
#include "ripple/market_graph.hpp"
#include "ripple/propagator.hpp"

namespace ripple {

struct SynthConfig {
  std::size_t n_firms = 100;
  std::size_t n_events = 500;
  std::size_t n_months = 24;
  Month first_month{2022, 1};
  /// Trading days of returns before the first month; events never fall there.
  std::size_t warmup_days = 63;
  std::size_t k = 10;   // max firms hit per event
  std::size_t l = 500;  // max events hitting one firm
  double beta_min = 0.5;
  double beta_max = 1.5;
  double market_drift = 0.0003;
  double market_vol = 0.01;
  double risk_free = 0.0001;
  double factor_vol = 0.005;
  double noise_sigma = 0.002;   // sigma_nu
  double impact_scale = 0.02;   // return per unit of diffusion value
  double avg_degree = 3.0;      // expected out-edges per firm and layer
  double negative_share = 0.2;  // share of edges with sign -1
  double churn = 0.1;           // monthly probability an edge is redrawn
  DiffusionParams theta{{0.8, 0.6, 0.3, 0.4}, 2, 1.0, 8};
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  /// Sparse impact columns f(c, e), keyed by event id.
  std::map<std::string, ShockVector> impacts;
  DiffusionParams theta;
  std::map<FirmId, double> betas;
};

struct SynthDataset {
  std::vector<EdgeRecord> edges;
  GraphSeries graphs;
  std::vector<Event> events;
  ReturnPanel returns;
  FactorPanel factors;
  GroundTruth truth;
};

/// Fully determined by cfg.seed. Throws BadConfig for invalid settings and
/// InfeasibleConfig when the sparsity bounds cannot hold every event's seed
/// (k = 0, l = 0, or l * n < m).
SynthDataset generate(const SynthConfig& cfg);

/// Mean reward of each event's true impact column against the residuals of
/// the next trading day. Events with an empty column or no residual date are
/// skipped. `months` restricts the events (all when empty).
double oracle_reward(const GroundTruth& truth, const std::vector<Event>& events, const ResidualPanel& residuals,
                     const RewardConfig& cfg = {}, const std::vector<Month>& months = {});

/// Emits the true impacts as predictions (Z = f exactly).
Propagator truth_propagator(const GroundTruth& truth);

/// Next-day true impacts summed per trading date: perfect-foresight
/// predictions for the backtester.
std::map<Date, ShockVector> truth_by_trade_date(const GroundTruth& truth, const std::vector<Event>& events,
                                                const ReturnPanel& returns);

std::string impacts_to_csv(const GroundTruth& truth);
std::map<std::string, ShockVector> parse_impacts_csv(std::string_view text);
std::string betas_to_csv(const GroundTruth& truth);

/// Writes edges.csv, returns.csv, factors.csv, events.jsonl, truth_impacts.csv
/// and truth_betas.csv into `dir`.
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace ripple
