#include "ripple/market_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <tuple>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"

namespace ripple {

FirmId::FirmId(std::string ticker) : ticker_(std::move(ticker)) {
  if (ticker_.empty()) throw Error(ErrorCode::ParseError, "empty ticker");
}

std::string_view relation_name(RelationKind kind) noexcept {
  switch (kind) {
    case RelationKind::Technical: return "technical";
    case RelationKind::SupplyChain: return "supply_chain";
    case RelationKind::Leadership: return "leadership";
    case RelationKind::FundHolding: return "fund_holding";
  }
  return "unknown";
}

RelationKind parse_relation(std::string_view name) {
  for (auto kind : kAllRelations) {
    if (relation_name(kind) == name) return kind;
  }
  throw Error(ErrorCode::ParseError, "unknown relation '" + std::string(name) + "'");
}

double technical_closeness(const CpcProfile& a, const CpcProfile& b) {
  std::set<std::string> vocab;
  for (const auto& [code, n] : a.counts) vocab.insert(code);
  for (const auto& [code, n] : b.counts) vocab.insert(code);
  if (vocab.size() < 2) {
    throw Error(ErrorCode::DegenerateProfile,
                "CPC vocabulary of " + a.firm.str() + "/" + b.firm.str() + " has < 2 codes");
  }
  auto lookup = [](const CpcProfile& p, const std::string& code) {
    auto it = p.counts.find(code);
    return it == p.counts.end() ? 0.0 : it->second;
  };
  const double n = static_cast<double>(vocab.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (const auto& code : vocab) {
    mean_a += lookup(a, code);
    mean_b += lookup(b, code);
  }
  mean_a /= n;
  mean_b /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (const auto& code : vocab) {
    const double da = lookup(a, code) - mean_a;
    const double db = lookup(b, code) - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorCode::DegenerateProfile,
                "zero-variance CPC profile for " + (saa == 0.0 ? a.firm.str() : b.firm.str()));
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

void LayerConfig::validate() const {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::BadConfig, "layer weights must be finite and non-negative");
    }
  }
}

// --- GraphSnapshot ----------------------------------------------------------

std::optional<std::size_t> GraphSnapshot::index_of(const FirmId& firm) const {
  auto it = index_.find(firm.str());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t GraphSnapshot::require_index(const FirmId& firm) const {
  auto idx = index_of(firm);
  if (!idx) {
    throw Error(ErrorCode::UnknownFirm, firm.str() + " not in snapshot " + month_.str());
  }
  return *idx;
}

double GraphSnapshot::mu(std::size_t i, std::size_t j) const {
  auto it = mu_.find({i, j});
  return it == mu_.end() ? 0.0 : it->second;
}

double GraphSnapshot::layer_mu(RelationKind kind, std::size_t i, std::size_t j) const {
  const auto& layer = layers_[static_cast<std::size_t>(kind)];
  auto it = layer.find({i, j});
  if (it == layer.end()) return 0.0;
  return config_.weight(kind) * it->second.sign * it->second.normalized;
}

int GraphSnapshot::multiplicity(std::size_t i, std::size_t j) const {
  int count = 0;
  for (const auto& layer : layers_) {
    if (layer.contains({i, j}) || layer.contains({j, i})) ++count;
  }
  return count;
}

GraphSnapshot assemble_snapshot(Month month, std::vector<FirmId> firms,
                                std::array<std::map<GraphSnapshot::Pair, GraphSnapshot::LayerEdge>,
                                           kRelationCount>
                                    layers,
                                const LayerConfig& cfg) {
  GraphSnapshot s;
  s.month_ = month;
  s.config_ = cfg;
  s.firms_ = std::move(firms);
  for (std::size_t i = 0; i < s.firms_.size(); ++i) s.index_.emplace(s.firms_[i].str(), i);
  s.layers_ = std::move(layers);

  std::map<GraphSnapshot::Pair, std::array<double, kRelationCount>> combined;
  for (auto kind : kAllRelations) {
    const auto k = static_cast<std::size_t>(kind);
    for (const auto& [pair, edge] : s.layers_[k]) {
      combined[pair][k] = cfg.weight(kind) * edge.sign * edge.normalized;
    }
  }
  s.out_.assign(s.firms_.size(), {});
  for (const auto& [pair, by_layer] : combined) {
    double total = 0.0;
    for (double v : by_layer) total += v;
    if (total == 0.0) continue;
    s.mu_.emplace(pair, total);
    s.out_[pair.first].push_back({pair.second, total, by_layer});
  }
  return s;
}

namespace {

using LayerMaps = std::array<std::map<GraphSnapshot::Pair, GraphSnapshot::LayerEdge>, kRelationCount>;

// Signed raw sums are accumulated first; magnitude and sign are split afterwards
// and each layer is normalized by its month-max magnitude.
void normalize_layers(LayerMaps& layers) {
  for (auto& layer : layers) {
    double max_weight = 0.0;
    for (const auto& [pair, e] : layer) max_weight = std::max(max_weight, std::abs(e.raw));
    for (auto it = layer.begin(); it != layer.end();) {
      auto& e = it->second;
      if (e.raw == 0.0) {
        it = layer.erase(it);
        continue;
      }
      e.sign = e.raw < 0.0 ? -1 : +1;
      e.raw = std::abs(e.raw);
      e.normalized = e.raw / max_weight;
      ++it;
    }
  }
}

}  // namespace

GraphSnapshot build_snapshot(std::span<const EdgeRecord> edges, std::span<const CpcProfile> cpc,
                             const LayerConfig& cfg, std::optional<Month> month) {
  cfg.validate();
  if (!month) {
    month = edges.empty() ? Month{} : edges.front().month;
  }
  std::set<FirmId> firm_set;
  for (const auto& e : edges) {
    if (e.month != *month) {
      throw Error(ErrorCode::MixedMonth,
                  "record month " + e.month.str() + " differs from " + month->str());
    }
    if (e.src == e.dst) throw Error(ErrorCode::BadConfig, "self-edge on " + e.src.str());
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw Error(ErrorCode::BadConfig, "edge weight must be finite and >= 0");
    }
    if (e.sign != 1 && e.sign != -1) throw Error(ErrorCode::BadConfig, "edge sign must be +-1");
    firm_set.insert(e.src);
    firm_set.insert(e.dst);
  }
  for (const auto& p : cpc) firm_set.insert(p.firm);

  std::vector<FirmId> firms(firm_set.begin(), firm_set.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < firms.size(); ++i) index.emplace(firms[i].str(), i);

  LayerMaps layers;
  auto add = [&](RelationKind kind, std::size_t a, std::size_t b, double signed_weight) {
    auto& layer = layers[static_cast<std::size_t>(kind)];
    layer[{a, b}].raw += signed_weight;
    if (!is_directed(kind)) layer[{b, a}].raw += signed_weight;
  };
  for (const auto& e : edges) {
    add(e.kind, index.at(e.src.str()), index.at(e.dst.str()), e.sign * e.weight);
  }

  std::vector<const CpcProfile*> profiles;
  for (const auto& p : cpc) profiles.push_back(&p);
  std::sort(profiles.begin(), profiles.end(),
            [](const CpcProfile* a, const CpcProfile* b) { return a->firm < b->firm; });
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    for (std::size_t b = a + 1; b < profiles.size(); ++b) {
      if (profiles[a]->firm == profiles[b]->firm) continue;
      double closeness = 0.0;
      try {
        closeness = technical_closeness(*profiles[a], *profiles[b]);
      } catch (const Error&) {
        continue;  // degenerate pair carries no technical edge
      }
      if (closeness == 0.0) continue;
      add(RelationKind::Technical, index.at(profiles[a]->firm.str()),
          index.at(profiles[b]->firm.str()), closeness);
    }
  }

  normalize_layers(layers);
  return assemble_snapshot(*month, std::move(firms), std::move(layers), cfg);
}

double interaction(const GraphSnapshot& s, const FirmId& i, const FirmId& j) {
  return s.mu(s.require_index(i), s.require_index(j));
}

std::set<FirmId> k_hop_neighborhood(const GraphSnapshot& s, const std::set<FirmId>& seeds, int k) {
  if (k < 0) throw Error(ErrorCode::BadConfig, "hop count must be >= 0");
  std::vector<std::vector<std::size_t>> adjacency(s.size());
  for (const auto& [pair, value] : s.mu_map()) {
    adjacency[pair.first].push_back(pair.second);
    adjacency[pair.second].push_back(pair.first);
  }
  std::vector<int> depth(s.size(), -1);
  std::deque<std::size_t> queue;
  for (const auto& seed : seeds) {
    const auto idx = s.require_index(seed);
    if (depth[idx] < 0) {
      depth[idx] = 0;
      queue.push_back(idx);
    }
  }
  while (!queue.empty()) {
    const auto cur = queue.front();
    queue.pop_front();
    if (depth[cur] == k) continue;
    for (auto next : adjacency[cur]) {
      if (depth[next] >= 0) continue;
      depth[next] = depth[cur] + 1;
      queue.push_back(next);
    }
  }
  std::set<FirmId> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (depth[i] >= 0) out.insert(s.firms()[i]);
  }
  return out;
}

GraphSnapshot ablate_relation(const GraphSnapshot& s, RelationKind kind) {
  LayerMaps layers;
  for (auto k : kAllRelations) {
    if (k != kind) layers[static_cast<std::size_t>(k)] = s.layer(k);
  }
  return assemble_snapshot(s.month(), s.firms(), std::move(layers), s.config());
}

// --- GraphSeries ------------------------------------------------------------

void GraphSeries::insert(GraphSnapshot snapshot) {
  const Month m = snapshot.month();
  snapshots_.insert_or_assign(m, std::move(snapshot));
}

const GraphSnapshot& GraphSeries::at(const Month& month) const {
  auto it = snapshots_.find(month);
  if (it == snapshots_.end()) throw Error(ErrorCode::EmptySeries, "no snapshot for " + month.str());
  return it->second;
}

const GraphSnapshot* GraphSeries::find(const Month& month) const {
  auto it = snapshots_.find(month);
  return it == snapshots_.end() ? nullptr : &it->second;
}

GraphSeries build_series(std::span<const EdgeRecord> edges, std::span<const CpcProfile> cpc,
                         const LayerConfig& cfg) {
  std::map<Month, std::vector<EdgeRecord>> by_month;
  for (const auto& e : edges) by_month[e.month].push_back(e);
  GraphSeries series;
  for (const auto& [month, records] : by_month) {
    series.insert(build_snapshot(records, cpc, cfg, month));
  }
  return series;
}

SnapshotStats snapshot_stats(const GraphSeries& series) {
  if (series.empty()) throw Error(ErrorCode::EmptySeries, "no snapshots");
  SnapshotStats stats;
  stats.graphs = series.size();
  std::array<double, 5> by_multiplicity{};
  double nodes = 0.0, edges = 0.0;
  for (const auto& [month, s] : series.snapshots()) {
    nodes += static_cast<double>(s.size());
    std::set<GraphSnapshot::Pair> pairs;
    for (auto kind : kAllRelations) {
      std::set<GraphSnapshot::Pair> layer_pairs;
      for (const auto& [pair, e] : s.layer(kind)) {
        layer_pairs.insert({std::min(pair.first, pair.second), std::max(pair.first, pair.second)});
      }
      edges += static_cast<double>(layer_pairs.size());
      pairs.insert(layer_pairs.begin(), layer_pairs.end());
    }
    for (const auto& [a, b] : pairs) by_multiplicity[s.multiplicity(a, b)] += 1.0;
  }
  stats.avg_nodes = nodes / static_cast<double>(stats.graphs);
  stats.avg_edges = edges / static_cast<double>(stats.graphs);
  const double connected = by_multiplicity[1] + by_multiplicity[2] + by_multiplicity[3] +
                           by_multiplicity[4];
  if (connected > 0.0) {
    stats.single_pct = 100.0 * by_multiplicity[1] / connected;
    stats.dual_pct = 100.0 * by_multiplicity[2] / connected;
    stats.triple_pct = 100.0 * by_multiplicity[3] / connected;
    stats.quad_pct = 100.0 * by_multiplicity[4] / connected;
  }
  return stats;
}

// --- ingestion / export -----------------------------------------------------

std::vector<EdgeRecord> parse_edges_csv(std::string_view text) {
  const auto table = CsvTable::parse(text, "edges.csv");
  const auto c_month = table.column("month");
  const auto c_src = table.column("src");
  const auto c_dst = table.column("dst");
  const auto c_rel = table.column("relation");
  const auto c_weight = table.column("weight");
  const bool has_sign = table.has_column("sign");
  const auto c_sign = has_sign ? table.column("sign") : 0;
  std::vector<EdgeRecord> out;
  out.reserve(table.rows().size());
  for (const auto& row : table.rows()) {
    EdgeRecord e;
    e.month = Month::parse(row[c_month]);
    e.src = FirmId(row[c_src]);
    e.dst = FirmId(row[c_dst]);
    e.kind = parse_relation(row[c_rel]);
    e.weight = parse_double(row[c_weight]);
    e.sign = has_sign && !row[c_sign].empty() ? static_cast<int>(parse_long(row[c_sign])) : 1;
    if (e.sign != 1 && e.sign != -1) throw Error(ErrorCode::ParseError, "sign must be 1 or -1");
    if (e.weight < 0.0) throw Error(ErrorCode::ParseError, "negative edge weight");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EdgeRecord> read_edges_csv(const std::filesystem::path& path) {
  return parse_edges_csv(read_text_file(path));
}

std::vector<CpcProfile> parse_cpc_csv(std::string_view text) {
  const auto table = CsvTable::parse(text, "cpc.csv");
  const auto c_ticker = table.column("ticker");
  const auto c_cpc = table.column("cpc");
  const auto c_count = table.column("count");
  std::map<std::string, CpcProfile> profiles;
  for (const auto& row : table.rows()) {
    const double count = parse_double(row[c_count]);
    if (count < 0.0) throw Error(ErrorCode::ParseError, "negative CPC count");
    auto& p = profiles[row[c_ticker]];
    p.firm = FirmId(row[c_ticker]);
    p.counts[row[c_cpc]] += count;
  }
  std::vector<CpcProfile> out;
  for (auto& [ticker, p] : profiles) {
    const bool any_positive =
        std::any_of(p.counts.begin(), p.counts.end(), [](const auto& kv) { return kv.second > 0; });
    if (any_positive) out.push_back(std::move(p));
  }
  return out;
}

std::vector<CpcProfile> read_cpc_csv(const std::filesystem::path& path) {
  return parse_cpc_csv(read_text_file(path));
}

std::string edges_to_csv(std::span<const EdgeRecord> edges) {
  std::ostringstream out;
  out << "month,src,dst,relation,weight,sign\n";
  for (const auto& e : edges) {
    out << e.month.str() << ',' << e.src.str() << ',' << e.dst.str() << ','
        << relation_name(e.kind) << ',' << format_double(e.weight) << ',' << e.sign << '\n';
  }
  return out.str();
}

std::string export_snapshot_csv(const GraphSnapshot& s) {
  struct Row {
    std::string src, dst;
    std::string_view relation;
    double weight;
    int sign;
    double mu;
  };
  std::vector<Row> rows;
  for (auto kind : kAllRelations) {
    for (const auto& [pair, e] : s.layer(kind)) {
      const auto& a = s.firms()[pair.first];
      const auto& b = s.firms()[pair.second];
      if (!is_directed(kind) && !(a < b)) continue;
      rows.push_back({a.str(), b.str(), relation_name(kind), e.raw, e.sign,
                      s.mu(pair.first, pair.second)});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(x.src, x.dst, x.relation) < std::tie(y.src, y.dst, y.relation);
  });
  std::ostringstream out;
  out << "month,src,dst,relation,weight,sign,mu\n";
  for (const auto& r : rows) {
    out << s.month().str() << ',' << r.src << ',' << r.dst << ',' << r.relation << ','
        << format_double(r.weight) << ',' << r.sign << ',' << format_double(r.mu) << '\n';
  }
  return out.str();
}

}  // namespace ripple
