#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ripple/calendar.hpp"

namespace ripple {

/// Ticker symbol of a listed firm.
class FirmId {
 public:
  FirmId() = default;
  explicit FirmId(std::string ticker);

  const std::string& str() const noexcept { return ticker_; }

  auto operator<=>(const FirmId&) const = default;

 private:
  std::string ticker_;
};

enum class RelationKind { Technical = 0, SupplyChain = 1, Leadership = 2, FundHolding = 3 };

inline constexpr std::array<RelationKind, 4> kAllRelations = {
    RelationKind::Technical, RelationKind::SupplyChain, RelationKind::Leadership,
    RelationKind::FundHolding};
inline constexpr std::size_t kRelationCount = kAllRelations.size();

/// Wire name: technical, supply_chain, leadership, fund_holding.
std::string_view relation_name(RelationKind kind) noexcept;
RelationKind parse_relation(std::string_view name);
/// Supply-chain edges keep their orientation; the other layers are mirrored.
constexpr bool is_directed(RelationKind kind) noexcept { return kind == RelationKind::SupplyChain; }

struct CpcProfile {
  FirmId firm;
  std::map<std::string, double> counts;
};

/// Pearson correlation of two CPC count vectors over the union of their codes
/// (missing codes count as zero). Throws DegenerateProfile on zero variance.
double technical_closeness(const CpcProfile& a, const CpcProfile& b);

struct EdgeRecord {
  Month month;
  FirmId src;
  FirmId dst;
  RelationKind kind = RelationKind::SupplyChain;
  double weight = 0.0;
  int sign = +1;
};

/// Per-layer combination weights applied after month-max normalization.
struct LayerConfig {
  std::array<double, kRelationCount> weights{0.25, 0.25, 0.25, 0.25};

  double weight(RelationKind kind) const { return weights[static_cast<std::size_t>(kind)]; }
  void validate() const;
};

/// One month of the signed multi-relation firm graph. Immutable once built.
class GraphSnapshot {
 public:
  using Pair = std::pair<std::size_t, std::size_t>;

  struct LayerEdge {
    double raw = 0.0;         // aggregated magnitude in relation units
    int sign = +1;
    double normalized = 0.0;  // raw / layer month-max, in [0, 1]
  };

  /// Outgoing channel i -> target with the combined and per-layer signed terms.
  struct Channel {
    std::size_t target = 0;
    double mu = 0.0;
    std::array<double, kRelationCount> by_layer{};
  };

  GraphSnapshot() = default;

  const Month& month() const noexcept { return month_; }
  const std::vector<FirmId>& firms() const noexcept { return firms_; }
  std::size_t size() const noexcept { return firms_.size(); }
  bool empty() const noexcept { return firms_.empty(); }
  const LayerConfig& config() const noexcept { return config_; }

  bool contains(const FirmId& firm) const { return index_.contains(firm.str()); }
  std::optional<std::size_t> index_of(const FirmId& firm) const;
  /// Throws UnknownFirm.
  std::size_t require_index(const FirmId& firm) const;

  double mu(std::size_t i, std::size_t j) const;
  /// Signed contribution of one layer to mu(i, j).
  double layer_mu(RelationKind kind, std::size_t i, std::size_t j) const;

  const std::map<Pair, LayerEdge>& layer(RelationKind kind) const {
    return layers_[static_cast<std::size_t>(kind)];
  }
  const std::map<Pair, double>& mu_map() const noexcept { return mu_; }
  const std::vector<Channel>& out_channels(std::size_t i) const { return out_[i]; }

  /// Number of relations (kinds) linking i and j in either direction.
  int multiplicity(std::size_t i, std::size_t j) const;

 private:
  friend GraphSnapshot assemble_snapshot(Month month, std::vector<FirmId> firms,
                                         std::array<std::map<Pair, LayerEdge>, kRelationCount> layers,
                                         const LayerConfig& cfg);

  Month month_;
  LayerConfig config_;
  std::vector<FirmId> firms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::array<std::map<Pair, LayerEdge>, kRelationCount> layers_;
  std::map<Pair, double> mu_;
  std::vector<std::vector<Channel>> out_;
};

/// Builds a snapshot from one month's edge records plus optional CPC
/// profiles, which contribute technical edges via `technical_closeness`.
/// `month` is required when `edges` is empty.
GraphSnapshot build_snapshot(std::span<const EdgeRecord> edges,
                             std::span<const CpcProfile> cpc = {},
                             const LayerConfig& cfg = {},
                             std::optional<Month> month = std::nullopt);

/// mu(i, j); zero when unconnected. Throws UnknownFirm.
double interaction(const GraphSnapshot& s, const FirmId& i, const FirmId& j);

std::set<FirmId> k_hop_neighborhood(const GraphSnapshot& s, const std::set<FirmId>& seeds,
                                    int k);

/// Copy of `s` with one relation layer removed and mu recombined.
GraphSnapshot ablate_relation(const GraphSnapshot& s, RelationKind kind);

class GraphSeries {
 public:
  void insert(GraphSnapshot snapshot);
  const GraphSnapshot& at(const Month& month) const;
  const GraphSnapshot* find(const Month& month) const;
  const std::map<Month, GraphSnapshot>& snapshots() const noexcept { return snapshots_; }
  bool empty() const noexcept { return snapshots_.empty(); }
  std::size_t size() const noexcept { return snapshots_.size(); }

 private:
  std::map<Month, GraphSnapshot> snapshots_;
};

/// Groups records by month and builds one snapshot per month.
GraphSeries build_series(std::span<const EdgeRecord> edges, std::span<const CpcProfile> cpc = {},
                         const LayerConfig& cfg = {});

struct SnapshotStats {
  std::size_t graphs = 0;
  double avg_nodes = 0.0;
  double avg_edges = 0.0;  // relation edges, one per (unordered pair, kind)
  double single_pct = 0.0;
  double dual_pct = 0.0;
  double triple_pct = 0.0;
  double quad_pct = 0.0;  // all four layers; keeps the buckets summing to 100
};

SnapshotStats snapshot_stats(const GraphSeries& series);

// --- ingestion and export -------------------------------------------------

/// edges.csv: month,src,dst,relation,weight,sign (sign optional, default +1).
std::vector<EdgeRecord> read_edges_csv(const std::filesystem::path& path);
std::vector<EdgeRecord> parse_edges_csv(std::string_view text);
/// cpc.csv: ticker,cpc,count.
std::vector<CpcProfile> read_cpc_csv(const std::filesystem::path& path);
std::vector<CpcProfile> parse_cpc_csv(std::string_view text);

std::string edges_to_csv(std::span<const EdgeRecord> edges);
/// One row per layer edge, sorted by (src, dst, relation); symmetric layers are
/// written once (src < dst) so the file is ingestible as edges.csv again.
std::string export_snapshot_csv(const GraphSnapshot& s);

}  // namespace ripple

template <>
struct std::hash<ripple::FirmId> {
  std::size_t operator()(const ripple::FirmId& f) const noexcept {
    return std::hash<std::string>{}(f.str());
  }
};
