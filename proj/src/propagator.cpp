#include "ripple/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "ripple/csv.hpp"
#include "ripple/error.hpp"

namespace ripple {

using ordered_json = nlohmann::ordered_json;

std::string_view impact_type_name(ImpactType t) noexcept {
  switch (t) {
    case ImpactType::Positive: return "positive";
    case ImpactType::Negative: return "negative";
    case ImpactType::Neutral: return "neutral";
  }
  return "neutral";
}

std::string_view refusal_name(RefusalReason r) noexcept {
  switch (r) {
    case RefusalReason::EmptyOutput: return "EmptyOutput";
    case RefusalReason::ParseError: return "ParseError";
    case RefusalReason::SchemaViolation: return "SchemaViolation";
    case RefusalReason::ScoreOutOfRange: return "ScoreOutOfRange";
    case RefusalReason::IdMismatch: return "IdMismatch";
    case RefusalReason::Timeout: return "Timeout";
    case RefusalReason::Died: return "Died";
  }
  return "ParseError";
}

void DiffusionParams::validate() const {
  for (double d : decay) {
    if (!(d >= 0.0 && d <= 1.0)) throw Error(ErrorCode::BadConfig, "decays must lie in [0, 1]");
  }
  if (hops < 0 || hops > 4) throw Error(ErrorCode::BadConfig, "hop limit must be in 0..4");
  if (!(seed_scale > 0.0 && seed_scale <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "seed scale must be in (0, 1]");
  }
  if (seed_score < -10 || seed_score > 10) throw Error(ErrorCode::BadConfig, "seed score out of range");
}

PredictionSet propagate_diffusion(const GraphSnapshot& s, const Event& e, const DiffusionParams& p) {
  p.validate();
  PredictionSet out;
  out.event_id = e.id;

  const std::size_t n = s.size();
  std::vector<double> frontier(n, 0.0);
  std::set<std::size_t> seeds;
  for (const auto& code : e.company_codes) {
    if (auto idx = s.index_of(code)) {
      seeds.insert(*idx);
    } else {
      out.unresolved.push_back(code.str());
    }
  }
  if (seeds.empty()) {
    throw Error(ErrorCode::NoSeedInGraph, "event " + e.id + " names no firm in " + s.month().str());
  }
  const double polarity = e.action == "negative" ? -1.0 : 1.0;
  const double seed_value = polarity * p.seed_scale * p.seed_score / 10.0;
  for (auto idx : seeds) frontier[idx] = seed_value;

  std::vector<double> value = frontier;
  std::vector<double> emitted(n, 0.0);  // total frontier mass each firm propagated
  std::vector<double> next(n);
  for (int hop = 1; hop <= p.hops; ++hop) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (frontier[i] == 0.0) continue;
      emitted[i] += frontier[i];
      for (const auto& ch : s.out_channels(i)) {
        double gain = 0.0;
        for (auto kind : kAllRelations) {
          gain += p.decay_of(kind) * ch.by_layer[static_cast<std::size_t>(kind)];
        }
        next[ch.target] += gain * frontier[i];
      }
    }
    frontier.swap(next);
    for (std::size_t j = 0; j < n; ++j) value[j] += frontier[j];
  }

  const auto& firms = s.firms();
  for (auto idx : seeds) out.y[{firms[idx], firms[idx]}] = seed_value;
  for (std::size_t i = 0; i < n; ++i) {
    if (emitted[i] == 0.0) continue;
    for (const auto& ch : s.out_channels(i)) {
      double gain = 0.0;
      for (auto kind : kAllRelations) {
        gain += p.decay_of(kind) * ch.by_layer[static_cast<std::size_t>(kind)];
      }
      if (gain == 0.0) continue;
      // Stored so that mu(i, j) * Y_ij is the channel's contribution.
      out.y[{firms[i], firms[ch.target]}] = gain / ch.mu * emitted[i];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (value[j] == 0.0) continue;
    const auto score = static_cast<int>(std::clamp(std::lround(10.0 * value[j]), -10L, 10L));
    if (score == 0) continue;
    out.claims.push_back({firms[j].str(), score > 0 ? ImpactType::Positive : ImpactType::Negative, score});
  }
  std::ostringstream analysis;
  analysis << "signed diffusion over " << p.hops << " hops from " << seeds.size() << " seed firm(s)";
  out.analysis = analysis.str();
  return out;
}

ShockVector aggregate_shocks(const GraphSnapshot& s, const PredictionSet& pred,
                             std::vector<std::string>* skipped) {
  ShockVector z;
  for (const auto& [pair, y] : pred.y) {
    const auto src = s.index_of(pair.first);
    const auto dst = s.index_of(pair.second);
    if (!src || !dst) {
      if (skipped) skipped->push_back(!src ? pair.first.str() : pair.second.str());
      continue;
    }
    const double weight = *src == *dst ? 1.0 : s.mu(*src, *dst);
    if (weight == 0.0) continue;
    z[pair.second] += weight * y;
  }
  return z;
}

namespace {

Refusal refuse(RefusalReason reason, std::string detail) { return Refusal{reason, std::move(detail)}; }

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

PredictionOutcome parse_prediction(std::string_view text) {
  if (blank(text)) return refuse(RefusalReason::EmptyOutput, "empty response");
  const auto doc = ordered_json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return refuse(RefusalReason::ParseError, "response is not valid JSON");
  if (!doc.is_object()) return refuse(RefusalReason::SchemaViolation, "top level is not an object");

  PredictionSet out;
  if (auto id = doc.find("id"); id != doc.end()) {
    if (!id->is_string()) return refuse(RefusalReason::SchemaViolation, "id is not a string");
    out.event_id = id->get<std::string>();
  }
  const auto ia = doc.find("impact_analysis");
  if (ia == doc.end() || !ia->is_object()) {
    return refuse(RefusalReason::SchemaViolation, "missing impact_analysis object");
  }
  const auto companies = ia->find("affected_companies");
  if (companies == ia->end() || !companies->is_array()) {
    return refuse(RefusalReason::SchemaViolation, "missing affected_companies array");
  }
  const auto analysis = ia->find("analysis");
  if (analysis == ia->end() || !analysis->is_string()) {
    return refuse(RefusalReason::SchemaViolation, "missing analysis string");
  }
  out.analysis = analysis->get<std::string>();

  for (const auto& c : *companies) {
    if (!c.is_object()) return refuse(RefusalReason::SchemaViolation, "company entry is not an object");
    const auto name = c.find("name");
    const auto type = c.find("impact_type");
    const auto score = c.find("impact_score");
    if (name == c.end() || !name->is_string() || name->get<std::string>().empty()) {
      return refuse(RefusalReason::SchemaViolation, "company without a name");
    }
    if (type == c.end() || !type->is_string()) {
      return refuse(RefusalReason::SchemaViolation, "company without impact_type");
    }
    if (score == c.end() || !score->is_number_integer()) {
      return refuse(RefusalReason::SchemaViolation, "impact_score is not an integer");
    }
    ImpactClaim claim;
    claim.name = name->get<std::string>();
    const auto type_text = type->get<std::string>();
    if (type_text == "positive") {
      claim.impact_type = ImpactType::Positive;
    } else if (type_text == "negative") {
      claim.impact_type = ImpactType::Negative;
    } else if (type_text == "neutral") {
      claim.impact_type = ImpactType::Neutral;
    } else {
      return refuse(RefusalReason::SchemaViolation, "unknown impact_type '" + type_text + "'");
    }
    const auto raw = score->get<long long>();
    if (raw < -10 || raw > 10) {
      return refuse(RefusalReason::ScoreOutOfRange, "impact_score " + std::to_string(raw));
    }
    int value = static_cast<int>(raw);
    switch (claim.impact_type) {
      case ImpactType::Neutral:
        if (value != 0) return refuse(RefusalReason::SchemaViolation, "neutral claim with nonzero score");
        break;
      case ImpactType::Positive:
        if (value < 0) return refuse(RefusalReason::SchemaViolation, "positive claim with negative score");
        break;
      case ImpactType::Negative:
        // Magnitudes are accepted for negative claims; the stored score is signed.
        value = -std::abs(value);
        break;
    }
    claim.impact_score = value;
    out.y[{FirmId(claim.name), FirmId(claim.name)}] += value / 10.0;
    out.claims.push_back(std::move(claim));
  }
  return out;
}

std::string serialize_prediction(const PredictionSet& p) {
  ordered_json companies = ordered_json::array();
  for (const auto& c : p.claims) {
    companies.push_back(ordered_json{{"name", c.name},
                                     {"impact_type", impact_type_name(c.impact_type)},
                                     {"impact_score", c.impact_score}});
  }
  ordered_json doc{{"id", p.event_id},
                   {"impact_analysis", {{"affected_companies", companies}, {"analysis", p.analysis}}}};
  return doc.dump();
}

ContextView trim_context(const GraphSnapshot& s, const Event& e, std::size_t edge_budget) {
  std::set<FirmId> seeds;
  for (const auto& code : e.company_codes) {
    if (s.contains(code)) seeds.insert(code);
  }
  ContextView view;
  if (seeds.empty()) return view;
  const auto hood = k_hop_neighborhood(s, seeds, 2);
  view.firms.assign(hood.begin(), hood.end());
  for (auto kind : kAllRelations) {
    for (const auto& [pair, edge] : s.layer(kind)) {
      const auto& a = s.firms()[pair.first];
      const auto& b = s.firms()[pair.second];
      if (!hood.contains(a) || !hood.contains(b)) continue;
      view.edges.push_back({a, b, kind, s.layer_mu(kind, pair.first, pair.second)});
    }
  }
  std::sort(view.edges.begin(), view.edges.end(), [](const ContextEdge& x, const ContextEdge& y) {
    const double ax = std::abs(x.mu), ay = std::abs(y.mu);
    if (ax != ay) return ax > ay;
    return std::tie(x.src, x.dst, x.relation) < std::tie(y.src, y.dst, y.relation);
  });
  if (view.edges.size() > edge_budget) view.edges.resize(edge_budget);
  return view;
}

std::string build_request(const Event& e, const ContextView& context) {
  ordered_json codes = ordered_json::array();
  for (const auto& c : e.company_codes) codes.push_back(c.str());
  ordered_json firms = ordered_json::array();
  for (const auto& f : context.firms) firms.push_back(f.str());
  ordered_json edges = ordered_json::array();
  for (const auto& edge : context.edges) {
    edges.push_back(ordered_json::array(
        {edge.src.str(), edge.dst.str(), relation_name(edge.relation), edge.mu}));
  }
  ordered_json doc{{"id", e.id},
                   {"event",
                    {{"datetime", e.datetime},
                     {"company_codes", codes},
                     {"title", e.title},
                     {"body", e.body}}},
                   {"context", {{"firms", firms}, {"edges", edges}}}};
  return doc.dump();
}

std::vector<Event> parse_events_jsonl(std::string_view text) {
  std::vector<Event> out;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto doc = ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw Error(ErrorCode::ParseError, "events line " + std::to_string(line_no) + " is not a JSON object");
    }
    try {
      Event e;
      e.id = doc.at("id").get<std::string>();
      e.datetime = doc.at("datetime").get<std::string>();
      for (const auto& c : doc.at("company_codes")) e.company_codes.emplace_back(c.get<std::string>());
      e.title = doc.value("title", "");
      e.body = doc.value("body", "");
      e.action = doc.value("action", "");
      (void)e.date();
      if (!ids.insert(e.id).second) throw Error(ErrorCode::ParseError, "duplicate event id " + e.id);
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ParseError, "events line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Event> read_events_jsonl(const std::filesystem::path& path) {
  return parse_events_jsonl(read_text_file(path));
}

std::string events_to_jsonl(const std::vector<Event>& events) {
  std::string out;
  for (const auto& e : events) {
    ordered_json codes = ordered_json::array();
    for (const auto& c : e.company_codes) codes.push_back(c.str());
    ordered_json doc{{"id", e.id},         {"datetime", e.datetime}, {"company_codes", codes},
                     {"title", e.title},   {"body", e.body},         {"action", e.action}};
    out += doc.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ripple
