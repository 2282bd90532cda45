#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ripple/calendar.hpp"
#include "ripple/market_graph.hpp"

namespace ripple {

struct Event {
  std::string id;
  std::string datetime;  // ISO-8601; the date part drives residual lookup
  std::vector<FirmId> company_codes;
  std::string title;
  std::string body;
  std::string action;

  Date date() const { return Date::parse(datetime); }
};

enum class ImpactType { Positive, Negative, Neutral };

std::string_view impact_type_name(ImpactType t) noexcept;

struct ImpactClaim {
  std::string name;
  ImpactType impact_type = ImpactType::Neutral;
  int impact_score = 0;  // signed, in [-10, 10]

  bool operator==(const ImpactClaim&) const = default;
};

/// Sparse source -> target channel matrix. Diagonal entries are direct claims.
using ChannelMatrix = std::map<std::pair<FirmId, FirmId>, double>;

struct PredictionSet {
  std::string event_id;
  std::vector<ImpactClaim> claims;
  std::string analysis;
  ChannelMatrix y;
  std::vector<std::string> unresolved;  // claimed names not present in the snapshot

  bool operator==(const PredictionSet&) const = default;
};

enum class RefusalReason { EmptyOutput, ParseError, SchemaViolation, ScoreOutOfRange, IdMismatch, Timeout, Died };

std::string_view refusal_name(RefusalReason r) noexcept;

struct Refusal {
  RefusalReason reason = RefusalReason::ParseError;
  std::string detail;
};

using PredictionOutcome = std::variant<PredictionSet, Refusal>;

struct DiffusionParams {
  std::array<double, kRelationCount> decay{0.5, 0.5, 0.5, 0.5};
  int hops = 2;
  double seed_scale = 1.0;
  int seed_score = 8;

  double decay_of(RelationKind k) const { return decay[static_cast<std::size_t>(k)]; }
  void validate() const;
};

using ShockVector = std::map<FirmId, double>;

/// Signed diffusion from the event's firms. Seeds start at
/// seed_scale * seed_score / 10, negated when the event's action is
/// "negative". Hop h adds v_j += sum_k decay_k * mu_k(i, j) * frontier_{h-1}(i)
/// for every channel i -> j.
/// Throws NoSeedInGraph when none of the event's firms are in the snapshot.
PredictionSet propagate_diffusion(const GraphSnapshot& s, const Event& e, const DiffusionParams& p);

/// Z_j = Y_jj + sum_{i != j} mu(i, j) Y_ij. Entries naming firms outside the
/// snapshot are skipped and their names appended to `skipped` when given.
ShockVector aggregate_shocks(const GraphSnapshot& s, const PredictionSet& pred,
                             std::vector<std::string>* skipped = nullptr);

/// Strict parse of one response line carrying an `impact_analysis` object.
PredictionOutcome parse_prediction(std::string_view text);

/// One-line JSON response in the wire format; inverse of parse_prediction for
/// claim-based prediction sets.
std::string serialize_prediction(const PredictionSet& p);

// --- external propagator wire format ---------------------------------------

struct ContextEdge {
  FirmId src;
  FirmId dst;
  RelationKind relation = RelationKind::SupplyChain;
  double mu = 0.0;  // the layer's signed contribution to mu(src, dst)
};

struct ContextView {
  std::vector<FirmId> firms;
  std::vector<ContextEdge> edges;
};

/// Seeds' 2-hop neighborhood, keeping the `edge_budget` strongest layer edges.
ContextView trim_context(const GraphSnapshot& s, const Event& e, std::size_t edge_budget = 500);

std::string build_request(const Event& e, const ContextView& context);

// --- events ------------------------------------------------------------------

std::vector<Event> parse_events_jsonl(std::string_view text);
std::vector<Event> read_events_jsonl(const std::filesystem::path& path);
std::string events_to_jsonl(const std::vector<Event>& events);

}  // namespace ripple
