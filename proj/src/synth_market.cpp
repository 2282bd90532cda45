#include "ripple/synth_market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"
#include "ripple/rng.hpp"

namespace ripple {

namespace {

enum Stream : std::uint64_t { kGraph = 1, kEvents = 2, kBetas = 3, kMarket = 4, kNoise = 5 };

std::vector<FirmId> firm_names(std::size_t n) {
  std::vector<FirmId> out;
  const int width = n <= 1000 ? 3 : static_cast<int>(std::to_string(n - 1).size());
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%0*zu", width, i);
    out.emplace_back(buf);
  }
  return out;
}

Date previous_business_day(Date d) {
  do {
    d = Date::from_days(d.days() - 1);
  } while (d.weekday() >= 5);
  return d;
}

Date first_business_day(Month m) {
  Date d{m.year, m.month, 1};
  while (d.weekday() >= 5) d = Date::from_days(d.days() + 1);
  return d;
}

struct PairKey {
  std::size_t src, dst, kind;
  auto operator<=>(const PairKey&) const = default;
};

/// Monthly edge lists: a base draw, then each month every edge is redrawn
/// with probability `churn` and its weight jittered.
std::vector<EdgeRecord> make_edges(const SynthConfig& cfg, const std::vector<FirmId>& firms,
                                   const std::vector<Month>& months) {
  Rng rng(cfg.seed, kGraph);
  const std::size_t n = firms.size();
  const double p = std::min(1.0, cfg.avg_degree / static_cast<double>(std::max<std::size_t>(n - 1, 1)));
  auto draw_target = [&](std::size_t src) {
    std::size_t dst = rng.below(n - 1);
    return dst >= src ? dst + 1 : dst;
  };
  struct Live {
    double weight;
    int sign;
  };
  std::map<PairKey, Live> live;
  for (std::size_t src = 0; src < n; ++src) {
    for (std::size_t kind = 0; kind < kRelationCount; ++kind) {
      for (std::size_t dst = 0; dst < n; ++dst) {
        if (dst == src || !rng.bernoulli(p)) continue;
        live[{src, dst, kind}] = {rng.uniform(0.2, 1.0), rng.bernoulli(cfg.negative_share) ? -1 : 1};
      }
    }
  }
  std::vector<EdgeRecord> out;
  for (std::size_t mi = 0; mi < months.size(); ++mi) {
    if (mi > 0) {
      std::map<PairKey, Live> next;
      for (const auto& [key, e] : live) {
        if (rng.bernoulli(cfg.churn)) {
          const PairKey moved{key.src, draw_target(key.src), key.kind};
          next[moved] = {rng.uniform(0.2, 1.0), rng.bernoulli(cfg.negative_share) ? -1 : 1};
        } else {
          next[key] = {std::clamp(e.weight * (1.0 + 0.1 * rng.normal()), 0.05, 2.0), e.sign};
        }
      }
      live.swap(next);
    }
    for (const auto& [key, e] : live) {
      auto kind = static_cast<RelationKind>(key.kind);
      std::size_t src = key.src, dst = key.dst;
      // Undirected layers are stored once per unordered pair.
      if (!is_directed(kind) && src > dst) std::swap(src, dst);
      out.push_back({months[mi], firms[src], firms[dst], kind, e.weight, e.sign});
    }
  }
  return out;
}

/// Keeps the `k` largest-magnitude entries; ties go to the earlier firm.
ShockVector top_k(const ShockVector& column, std::size_t k) {
  std::vector<std::pair<FirmId, double>> entries(column.begin(), column.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
  if (entries.size() > k) entries.resize(k);
  return {entries.begin(), entries.end()};
}

}  // namespace

void SynthConfig::validate() const {
  if (n_firms < 2) throw Error(ErrorCode::BadConfig, "need at least two firms");
  if (n_events < 1) throw Error(ErrorCode::BadConfig, "need at least one event");
  if (n_months < 1) throw Error(ErrorCode::BadConfig, "need at least one month");
  if (k > n_firms) throw Error(ErrorCode::BadConfig, "k exceeds the number of firms");
  if (l > n_events) throw Error(ErrorCode::BadConfig, "l exceeds the number of events");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::BadConfig, "noise sigma must be >= 0");
  if (!(beta_min <= beta_max)) throw Error(ErrorCode::BadConfig, "beta range is empty");
  if (!(market_vol >= 0.0) || !(factor_vol >= 0.0)) throw Error(ErrorCode::BadConfig, "volatilities must be >= 0");
  if (!(negative_share >= 0.0 && negative_share <= 1.0)) throw Error(ErrorCode::BadConfig, "negative share outside [0, 1]");
  if (!(churn >= 0.0 && churn <= 1.0)) throw Error(ErrorCode::BadConfig, "churn outside [0, 1]");
  if (!(avg_degree > 0.0)) throw Error(ErrorCode::BadConfig, "average degree must be > 0");
  theta.validate();
}

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.k == 0 || cfg.l == 0 || cfg.l * cfg.n_firms < cfg.n_events) {
    throw Error(ErrorCode::InfeasibleConfig, "sparsity bounds cannot hold every event's seed impact");
  }
  SynthDataset data;
  const auto firms = firm_names(cfg.n_firms);
  std::vector<Month> months{cfg.first_month};
  while (months.size() < cfg.n_months) months.push_back(months.back().next());

  data.edges = make_edges(cfg, firms, months);
  data.graphs = build_series(data.edges);

  // Trading calendar: warm-up days, then every business day of the months,
  // plus one day so the last event still has a next-day return.
  std::vector<Date> dates;
  Date d = first_business_day(cfg.first_month);
  for (std::size_t i = 0; i < cfg.warmup_days; ++i) {
    d = previous_business_day(d);
    dates.push_back(d);
  }
  std::reverse(dates.begin(), dates.end());
  const std::size_t first_event_day = dates.size();
  for (d = first_business_day(cfg.first_month); d.month_of() <= months.back(); d = d.next_business_day()) {
    dates.push_back(d);
  }
  const std::size_t event_days = dates.size() - first_event_day;
  dates.push_back(dates.back().next_business_day());

  // Events on distinct days while possible; beyond that, days repeat in order.
  Rng ev_rng(cfg.seed, kEvents);
  std::vector<std::size_t> day_pool(event_days);
  for (std::size_t i = 0; i < event_days; ++i) day_pool[i] = first_event_day + i;
  std::vector<std::size_t> event_day;
  while (event_day.size() < cfg.n_events) {
    auto pool = day_pool;
    ev_rng.shuffle(pool);
    const std::size_t take = std::min(pool.size(), cfg.n_events - event_day.size());
    event_day.insert(event_day.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(event_day.begin(), event_day.end());

  std::map<FirmId, std::size_t> seed_uses;
  std::map<std::size_t, std::vector<std::string>> events_on_day;
  const int id_width = static_cast<int>(std::to_string(cfg.n_events).size());
  for (std::size_t i = 0; i < cfg.n_events; ++i) {
    const Date day = dates[event_day[i]];
    const auto& snap = data.graphs.at(day.month_of());
    std::vector<FirmId> candidates;
    for (const auto& f : snap.firms()) {
      if (seed_uses[f] < cfg.l) candidates.push_back(f);
    }
    if (candidates.empty()) throw Error(ErrorCode::InfeasibleConfig, "no firm left under the company bound");
    const FirmId seed_firm = candidates[ev_rng.below(candidates.size())];
    ++seed_uses[seed_firm];

    char id[32];
    std::snprintf(id, sizeof id, "evt-%0*zu", id_width, i + 1);
    Event e;
    e.id = id;
    e.datetime = day.str() + "T09:30:00";
    e.company_codes.push_back(seed_firm);
    e.action = ev_rng.bernoulli(0.5) ? "negative" : "positive";
    e.title = "Synthetic " + e.action + " event at " + seed_firm.str();
    e.body = "Generated shock seeded at " + seed_firm.str() + ".";

    const auto z = aggregate_shocks(snap, propagate_diffusion(snap, e, cfg.theta));
    ShockVector column;
    for (const auto& [f, v] : z) {
      if (v != 0.0) column[f] = cfg.impact_scale * v;
    }
    data.truth.impacts[e.id] = top_k(column, cfg.k);
    events_on_day[event_day[i]].push_back(e.id);
    data.events.push_back(std::move(e));
  }

  // Company bound: each firm keeps its l largest impacts; ties go to the earlier event.
  std::map<FirmId, std::vector<std::pair<double, std::string>>> by_firm;
  for (const auto& [id, column] : data.truth.impacts) {
    for (const auto& [f, v] : column) by_firm[f].emplace_back(v, id);
  }
  for (auto& [f, list] : by_firm) {
    if (list.size() <= cfg.l) continue;
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return std::abs(a.first) > std::abs(b.first); });
    for (std::size_t i = cfg.l; i < list.size(); ++i) data.truth.impacts[list[i].second].erase(f);
  }
  data.truth.theta = cfg.theta;

  Rng beta_rng(cfg.seed, kBetas);
  std::vector<double> betas;
  for (const auto& f : firms) {
    betas.push_back(beta_rng.uniform(cfg.beta_min, cfg.beta_max));
    data.truth.betas[f] = betas.back();
  }

  Rng mkt_rng(cfg.seed, kMarket);
  Rng noise_rng(cfg.seed, kNoise);
  std::vector<FactorRow> rows;
  std::vector<ReturnPanel::Cell> cells;
  for (std::size_t t = 0; t < dates.size(); ++t) {
    FactorRow r;
    r.rf = cfg.risk_free;
    r.mkt_rf = cfg.market_drift + cfg.market_vol * mkt_rng.normal();
    r.smb = cfg.factor_vol * mkt_rng.normal();
    r.hml = cfg.factor_vol * mkt_rng.normal();
    r.rmw = cfg.factor_vol * mkt_rng.normal();
    r.cma = cfg.factor_vol * mkt_rng.normal();
    rows.push_back(r);

    ShockVector shock;
    if (t > 0) {
      if (auto it = events_on_day.find(t - 1); it != events_on_day.end()) {
        for (const auto& id : it->second) {
          for (const auto& [f, v] : data.truth.impacts.at(id)) shock[f] += v;
        }
      }
    }
    for (std::size_t j = 0; j < firms.size(); ++j) {
      auto it = shock.find(firms[j]);
      const double impact = it == shock.end() ? 0.0 : it->second;
      const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise_rng.normal() : 0.0;
      cells.push_back({dates[t], firms[j], r.rf + betas[j] * r.mkt_rf + impact + noise});
    }
  }
  data.factors = FactorPanel(dates, rows);
  data.returns = ReturnPanel(cells);
  return data;
}

double oracle_reward(const GroundTruth& truth, const std::vector<Event>& events, const ResidualPanel& residuals,
                     const RewardConfig& cfg, const std::vector<Month>& months) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& e : events) {
    const Date d = e.date();
    if (!months.empty() && std::find(months.begin(), months.end(), d.month_of()) == months.end()) continue;
    auto it = truth.impacts.find(e.id);
    if (it == truth.impacts.end() || it->second.empty()) continue;
    const auto idx = next_residual_date(residuals, d);
    if (!idx) continue;
    const auto [z, eps] = align_to_residuals(it->second, residuals, *idx);
    try {
      total += reward(z, eps, cfg).total;
      ++count;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ZeroVector) throw;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Propagator truth_propagator(const GroundTruth& truth) {
  return [&truth](const GraphSnapshot&, const Event& e) -> PredictionOutcome {
    PredictionSet out;
    out.event_id = e.id;
    out.analysis = "ground truth";
    if (auto it = truth.impacts.find(e.id); it != truth.impacts.end()) {
      for (const auto& [f, v] : it->second) out.y[{f, f}] = v;
    }
    return out;
  };
}

std::map<Date, ShockVector> truth_by_trade_date(const GroundTruth& truth, const std::vector<Event>& events,
                                                const ReturnPanel& returns) {
  std::map<Date, ShockVector> out;
  const auto& dates = returns.dates();
  for (const auto& e : events) {
    auto it = truth.impacts.find(e.id);
    if (it == truth.impacts.end()) continue;
    auto next = std::upper_bound(dates.begin(), dates.end(), e.date());
    if (next == dates.end()) continue;
    auto& z = out[*next];
    for (const auto& [f, v] : it->second) z[f] += v;
  }
  return out;
}

std::string impacts_to_csv(const GroundTruth& truth) {
  std::ostringstream out;
  out << "event_id,ticker,impact\n";
  for (const auto& [id, column] : truth.impacts) {
    for (const auto& [f, v] : column) out << id << ',' << f.str() << ',' << format_double(v) << '\n';
  }
  return out.str();
}

std::map<std::string, ShockVector> parse_impacts_csv(std::string_view text) {
  const auto table = CsvTable::parse(text, "impacts");
  const auto c_id = table.column("event_id");
  const auto c_t = table.column("ticker");
  const auto c_v = table.column("impact");
  std::map<std::string, ShockVector> out;
  for (const auto& row : table.rows()) out[row[c_id]][FirmId(row[c_t])] = parse_double(row[c_v]);
  return out;
}

std::string betas_to_csv(const GroundTruth& truth) {
  std::ostringstream out;
  out << "ticker,beta\n";
  for (const auto& [f, b] : truth.betas) out << f.str() << ',' << format_double(b) << '\n';
  return out.str();
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  write_text_file(dir / "edges.csv", edges_to_csv(data.edges));
  write_text_file(dir / "returns.csv", returns_to_csv(data.returns));
  write_text_file(dir / "factors.csv", factors_to_csv(data.factors));
  write_text_file(dir / "events.jsonl", events_to_jsonl(data.events));
  write_text_file(dir / "truth_impacts.csv", impacts_to_csv(data.truth));
  write_text_file(dir / "truth_betas.csv", betas_to_csv(data.truth));
}

}  // namespace ripple
