#include "ripple/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"
#include "ripple/rng.hpp"

namespace ripple {

void RewardConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::BadConfig, "lambda must be >= 0");
}

RewardReport reward(std::span<const double> z, std::span<const double> eps, const RewardConfig& cfg) {
  cfg.validate();
  if (z.size() != eps.size()) throw Error(ErrorCode::BadConfig, "Z and eps are not aligned");
  double dot = 0.0, zz = 0.0, ee = 0.0, l1 = 0.0, overlap = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    dot += z[j] * eps[j];
    zz += z[j] * z[j];
    ee += eps[j] * eps[j];
    l1 += std::abs(eps[j]);
    overlap += cfg.literal_coverage ? std::min(z[j], eps[j]) : std::min(std::abs(z[j]), std::abs(eps[j]));
  }
  if (zz == 0.0) throw Error(ErrorCode::ZeroVector, "predicted shocks are all zero");
  if (ee == 0.0) throw Error(ErrorCode::ZeroVector, "residual cross-section is all zero");
  RewardReport r;
  r.direction = std::clamp(dot / (std::sqrt(zz) * std::sqrt(ee)), -1.0, 1.0);
  r.coverage = overlap / l1;
  r.lambda = cfg.lambda;
  r.total = r.direction + cfg.lambda * r.coverage;
  r.events = 1;
  return r;
}

std::pair<std::vector<double>, std::vector<double>> align_to_residuals(const ShockVector& z,
                                                                       const ResidualPanel& panel,
                                                                       std::size_t date_idx) {
  std::vector<double> zs, es;
  const auto row = panel.cross_section(date_idx);
  for (std::size_t f = 0; f < row.size(); ++f) {
    if (is_missing(row[f])) continue;
    auto it = z.find(panel.firms()[f]);
    zs.push_back(it == z.end() ? 0.0 : it->second);
    es.push_back(row[f]);
  }
  return {std::move(zs), std::move(es)};
}

// --- policy ------------------------------------------------------------------

namespace {

constexpr std::size_t kHopDim = kRelationCount;
constexpr std::size_t kScaleDim = kRelationCount + 1;
constexpr double kMinSeedScale = 1e-3;

PolicyVector project(PolicyVector v) {
  for (std::size_t k = 0; k < kRelationCount; ++k) v[k] = std::clamp(v[k], 0.0, 1.0);
  v[kHopDim] = std::clamp(v[kHopDim], 0.0, 4.0);
  v[kScaleDim] = std::clamp(v[kScaleDim], kMinSeedScale, 1.0);
  return v;
}

}  // namespace

PolicyVector to_policy_vector(const DiffusionParams& p) {
  PolicyVector v{};
  for (std::size_t k = 0; k < kRelationCount; ++k) v[k] = p.decay[k];
  v[kHopDim] = p.hops;
  v[kScaleDim] = p.seed_scale;
  return v;
}

DiffusionParams to_diffusion_params(const PolicyVector& raw, int seed_score) {
  const auto v = project(raw);
  DiffusionParams p;
  for (std::size_t k = 0; k < kRelationCount; ++k) p.decay[k] = v[k];
  p.hops = static_cast<int>(std::lround(v[kHopDim]));
  p.seed_scale = v[kScaleDim];
  p.seed_score = seed_score;
  return p;
}

void PolicyState::validate() const {
  for (double s : sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::BadConfig, "sigma must be >= 0");
  }
  if (!(clip > 0.0 && clip < 1.0)) throw Error(ErrorCode::BadConfig, "clip must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::BadConfig, "learning rate must be > 0");
  if (!(baseline_decay > 0.0 && baseline_decay <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "baseline decay must lie in (0, 1]");
  }
}

PolicyState initial_policy(const DiffusionParams& start, double sigma_explore) {
  PolicyState state;
  state.theta_mean = project(to_policy_vector(start));
  state.sigma.fill(sigma_explore);
  return state;
}

double advantage(double reward_total, PolicyState& state) {
  if (!state.baseline) state.baseline = reward_total;
  const double a = reward_total - *state.baseline;
  *state.baseline = (1.0 - state.baseline_decay) * *state.baseline + state.baseline_decay * reward_total;
  return a;
}

double policy_log_density(const PolicyVector& theta, const PolicyVector& mean, const PolicyVector& sigma) {
  double lp = 0.0;
  for (std::size_t d = 0; d < kPolicyDims; ++d) {
    if (sigma[d] <= 0.0) continue;
    const double z = (theta[d] - mean[d]) / sigma[d];
    lp += -0.5 * z * z - std::log(sigma[d]) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

PolicyState policy_update(const PolicyState& state, std::span<const PolicySample> batch) {
  state.validate();
  if (batch.empty()) throw Error(ErrorCode::BadConfig, "empty policy batch");
  PolicyVector grad{};
  for (const auto& s : batch) {
    const double ratio = std::clamp(std::exp(s.log_ratio), 1.0 - state.clip, 1.0 + state.clip);
    for (std::size_t d = 0; d < kPolicyDims; ++d) {
      if (state.sigma[d] <= 0.0) continue;
      const double score = (s.theta[d] - state.theta_mean[d]) / (state.sigma[d] * state.sigma[d]);
      grad[d] += ratio * s.advantage * score;
    }
  }
  const bool finite = std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
  PolicyState next = state;
  if (!finite) {
    ++next.aborted_updates;
    std::clog << "ripple: policy update aborted at step " << state.step << " (non-finite gradient)\n";
    return next;
  }
  const double n = static_cast<double>(batch.size());
  for (std::size_t d = 0; d < kPolicyDims; ++d) {
    next.theta_mean[d] += state.learning_rate * grad[d] / n;
  }
  next.theta_mean = project(next.theta_mean);
  ++next.step;
  return next;
}

// --- environment helpers ------------------------------------------------------

std::optional<std::size_t> next_residual_date(const ResidualPanel& panel, const Date& d) {
  const auto& dates = panel.dates();
  auto it = std::upper_bound(dates.begin(), dates.end(), d);
  if (it == dates.end()) return std::nullopt;
  return static_cast<std::size_t>(it - dates.begin());
}

namespace {

struct PreparedEvent {
  const Event* event = nullptr;
  const GraphSnapshot* snapshot = nullptr;
  std::size_t residual_date = 0;
};

/// Events grouped by month, each month's list in ascending id order.
std::map<Month, std::vector<PreparedEvent>> prepare(const AlignEnvironment& env,
                                                    const std::vector<Month>& months,
                                                    std::size_t* excluded) {
  if (!env.graphs || !env.events || !env.residuals) throw Error(ErrorCode::BadConfig, "incomplete environment");
  std::map<Month, std::vector<PreparedEvent>> out;
  for (const auto& e : *env.events) {
    const Date d = e.date();
    const Month m = d.month_of();
    if (!months.empty() && std::find(months.begin(), months.end(), m) == months.end()) continue;
    const auto* snap = env.graphs->find(m);
    const auto next = next_residual_date(*env.residuals, d);
    if (!snap || !next) {
      if (excluded) ++*excluded;
      continue;
    }
    out[m].push_back({&e, snap, *next});
  }
  for (auto& [m, list] : out) {
    std::sort(list.begin(), list.end(),
              [](const PreparedEvent& a, const PreparedEvent& b) { return a.event->id < b.event->id; });
  }
  return out;
}

std::optional<double> score_one(const PreparedEvent& pe, const ResidualPanel& residuals,
                                const DiffusionParams& params, const RewardConfig& cfg) {
  try {
    const auto pred = propagate_diffusion(*pe.snapshot, *pe.event, params);
    const auto z = aggregate_shocks(*pe.snapshot, pred);
    const auto [zs, es] = align_to_residuals(z, residuals, pe.residual_date);
    return reward(zs, es, cfg).total;
  } catch (const Error& err) {
    if (err.code() == ErrorCode::ZeroVector || err.code() == ErrorCode::NoSeedInGraph) return std::nullopt;
    throw;
  }
}

}  // namespace

std::vector<ScoredEvent> score_params(const AlignEnvironment& env, const DiffusionParams& params,
                                      const RewardConfig& cfg, const std::vector<Month>& months,
                                      std::size_t* excluded) {
  std::vector<ScoredEvent> out;
  for (const auto& [month, list] : prepare(env, months, excluded)) {
    for (const auto& pe : list) {
      if (auto r = score_one(pe, *env.residuals, params, cfg)) {
        out.push_back({pe.event->id, *r});
      } else if (excluded) {
        ++*excluded;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.event_id < b.event_id; });
  return out;
}

double mean_reward(const std::vector<ScoredEvent>& scored) {
  if (scored.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : scored) sum += s.reward;
  return sum / static_cast<double>(scored.size());
}

AlignmentTrace align(const AlignEnvironment& env, const AlignConfig& cfg) {
  cfg.reward.validate();
  const auto by_month = prepare(env, cfg.train_months, nullptr);
  if (by_month.empty()) throw Error(ErrorCode::EmptyStream, "no alignable events");

  PolicyState state = initial_policy(cfg.start, cfg.sigma_explore);
  state.learning_rate = cfg.learning_rate;
  state.clip = cfg.clip;
  state.baseline_decay = cfg.baseline_decay;
  state.validate();

  Rng rng(cfg.seed, 0xA11C);
  AlignmentTrace trace;
  std::size_t idle_months = 0;
  while (trace.steps.size() < cfg.max_updates) {
    for (const auto& [month, list] : by_month) {
      if (trace.steps.size() >= cfg.max_updates) break;
      TraceStep step;
      step.step = trace.steps.size();
      step.month = month;
      step.theta = state.theta_mean;
      std::vector<PolicySample> batch;
      double reward_sum = 0.0, adv_sum = 0.0;
      for (const auto& pe : list) {
        PolicyVector theta = state.theta_mean;
        for (std::size_t d = 0; d < kPolicyDims; ++d) theta[d] += state.sigma[d] * rng.normal();
        const auto r = score_one(pe, *env.residuals, to_diffusion_params(theta, cfg.start.seed_score), cfg.reward);
        if (!r) {
          ++step.excluded;
          continue;
        }
        const double a = advantage(*r, state);
        batch.push_back({theta, 0.0, a});
        reward_sum += *r;
        adv_sum += a;
      }
      if (batch.empty()) {
        // A month with nothing to learn from still counts as a pass over the data.
        if (++idle_months > by_month.size()) throw Error(ErrorCode::EmptyStream, "no scorable events");
        continue;
      }
      idle_months = 0;
      step.samples = batch.size();
      step.reward = reward_sum / static_cast<double>(batch.size());
      step.advantage = adv_sum / static_cast<double>(batch.size());
      step.baseline = state.baseline.value_or(0.0);

      const PolicyVector sampling_mean = state.theta_mean;
      for (std::size_t epoch = 0; epoch < std::max<std::size_t>(cfg.epochs_per_update, 1); ++epoch) {
        for (auto& s : batch) {
          s.log_ratio = policy_log_density(s.theta, state.theta_mean, state.sigma) -
                        policy_log_density(s.theta, sampling_mean, state.sigma);
        }
        const std::size_t before = state.step;
        state = policy_update(state, batch);
        state.step = before;
      }
      ++state.step;
      trace.steps.push_back(step);
    }
  }
  trace.final_theta = state.theta_mean;
  trace.final_params = to_diffusion_params(state.theta_mean, cfg.start.seed_score);
  trace.aborted_updates = state.aborted_updates;
  return trace;
}

std::string trace_to_csv(const AlignmentTrace& trace) {
  std::ostringstream out;
  out << "step,reward,advantage,baseline";
  for (auto kind : kAllRelations) out << ",decay_" << relation_name(kind);
  out << ",hops,seed_scale,month,samples,excluded\n";
  for (const auto& s : trace.steps) {
    out << s.step << ',' << format_double(s.reward) << ',' << format_double(s.advantage) << ','
        << format_double(s.baseline);
    for (double v : s.theta) out << ',' << format_double(v);
    out << ',' << s.month.str() << ',' << s.samples << ',' << s.excluded << '\n';
  }
  return out.str();
}

}  // namespace ripple
