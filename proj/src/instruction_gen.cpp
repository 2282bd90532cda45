#include "ripple/instruction_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "ripple/error.hpp"
#include "ripple/rng.hpp"

namespace ripple {

namespace {

std::string_view relation_label(RelationKind kind) noexcept {
  switch (kind) {
    case RelationKind::Technical: return "technical similarity";
    case RelationKind::SupplyChain: return "supply chain";
    case RelationKind::Leadership: return "common CEO";
    case RelationKind::FundHolding: return "common fund holding";
  }
  return "unknown";
}

std::string join(const std::vector<std::string>& parts) {
  if (parts.empty()) return "None";
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out;
}

bool linked(const GraphSnapshot& s, RelationKind kind, std::size_t a, std::size_t b) {
  const auto& layer = s.layer(kind);
  return layer.contains({a, b}) || layer.contains({b, a});
}

/// Tickers linked to `a` in `kind` (either direction), sorted.
std::vector<std::string> neighbours(const GraphSnapshot& s, RelationKind kind, std::size_t a) {
  std::set<std::string> out;
  for (const auto& [pair, edge] : s.layer(kind)) {
    if (pair.first == a) out.insert(s.firms()[pair.second].str());
    if (pair.second == a) out.insert(s.firms()[pair.first].str());
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> by_multiplicity(const GraphSnapshot& s, std::size_t a, bool multiple) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j == a) continue;
    const int m = s.multiplicity(a, j);
    if (m == 0) continue;
    if ((m >= 2) == multiple) out.push_back(s.firms()[j].str());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> technical_score(const GraphSnapshot& s, std::size_t a, std::size_t b) {
  const auto& layer = s.layer(RelationKind::Technical);
  auto it = layer.find({a, b});
  if (it == layer.end()) it = layer.find({b, a});
  if (it == layer.end()) return std::nullopt;
  return it->second.sign * it->second.raw;
}

std::string_view similarity_band(double v) noexcept {
  if (v >= 0.7) return "high";
  if (v >= 0.3) return "moderate";
  if (v >= 0.0) return "low";
  return "negative";
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void emit(std::vector<InstructionPair>& out, const GraphSnapshot& s, Template t, const SourceTriple& triple) {
  out.push_back(InstructionPair{question_for(t, triple), answer_for(s, t, triple), template_class(t), t, triple});
}

}  // namespace

std::string_view question_class_name(QuestionClass c) noexcept {
  switch (c) {
    case QuestionClass::Retrieval: return "retrieval";
    case QuestionClass::FactualJudgment: return "factual_judgment";
    case QuestionClass::FactualQuestion: return "factual_question";
  }
  return "unknown";
}

QuestionClass template_class(Template t) noexcept {
  switch (t) {
    case Template::CommonCeoWith:
    case Template::UpstreamDownstreamWith:
    case Template::MultipleRelationsWith:
    case Template::OneRelationWith:
    case Template::SameFundAs: return QuestionClass::Retrieval;
    case Template::SupplyChainBetween:
    case Template::SameFundBetween:
    case Template::RelationBetween: return QuestionClass::FactualJudgment;
    case Template::WhatRelationship:
    case Template::TechnicalSimilarity:
    case Template::TechnicalScore: return QuestionClass::FactualQuestion;
  }
  return QuestionClass::FactualQuestion;
}

void InstructionConfig::validate() const {
  if (!retrieval && !judgment && !factual) throw Error(ErrorCode::BadConfig, "every question class is disabled");
}

std::string question_for(Template t, const SourceTriple& tr) {
  const std::string& a = tr.src.str();
  const std::string& b = tr.dst.str();
  switch (t) {
    case Template::CommonCeoWith: return "Which companies have a common CEO relationship with " + a + "?";
    case Template::UpstreamDownstreamWith:
      return "Which companies have an upstream-downstream relationship with " + a + "?";
    case Template::MultipleRelationsWith: return "Which companies have multiple relationships with " + a + "?";
    case Template::OneRelationWith: return "Which companies have one relationship with " + a + "?";
    case Template::SameFundAs: return "Which companies are held by the same fund as " + a + "?";
    case Template::SupplyChainBetween:
      return "Are there supply chain upstream and downstream transactions between " + a + " and " + b + "?";
    case Template::SameFundBetween: return "Are the companies " + a + " and " + b + " held by the same fund?";
    case Template::RelationBetween:
      return "Is there a " + std::string(relation_label(tr.kind)) + " relationship between " + a + " and " + b + "?";
    case Template::WhatRelationship: return "What is the relationship between " + a + " and " + b + "?";
    case Template::TechnicalSimilarity: return "What is the technical similarity between " + a + " and " + b + "?";
    case Template::TechnicalScore:
      return "What is the technical similarity score between " + a + " and " + b + "?";
  }
  return {};
}

std::string answer_for(const GraphSnapshot& s, Template t, const SourceTriple& tr) {
  const std::size_t a = s.require_index(tr.src);
  const std::size_t b = s.require_index(tr.dst);
  const auto yes_no = [](bool v) { return std::string(v ? "Yes" : "No"); };
  switch (t) {
    case Template::CommonCeoWith: return join(neighbours(s, RelationKind::Leadership, a));
    case Template::UpstreamDownstreamWith: return join(neighbours(s, RelationKind::SupplyChain, a));
    case Template::MultipleRelationsWith: return join(by_multiplicity(s, a, true));
    case Template::OneRelationWith: return join(by_multiplicity(s, a, false));
    case Template::SameFundAs: return join(neighbours(s, RelationKind::FundHolding, a));
    case Template::SupplyChainBetween: return yes_no(linked(s, RelationKind::SupplyChain, a, b));
    case Template::SameFundBetween: return yes_no(linked(s, RelationKind::FundHolding, a, b));
    case Template::RelationBetween: return yes_no(linked(s, tr.kind, a, b));
    case Template::WhatRelationship: {
      std::vector<std::string> labels;
      for (auto kind : kAllRelations)
        if (linked(s, kind, a, b)) labels.emplace_back(relation_label(kind));
      return join(labels);
    }
    case Template::TechnicalSimilarity: {
      const auto v = technical_score(s, a, b);
      return v ? std::string(similarity_band(*v)) : "None";
    }
    case Template::TechnicalScore: {
      const auto v = technical_score(s, a, b);
      return v ? fixed4(*v) : "None";
    }
  }
  return {};
}

std::vector<InstructionPair> generate_instructions(const GraphSnapshot& s, const InstructionConfig& cfg) {
  cfg.validate();
  std::vector<InstructionPair> out;
  for (auto kind : kAllRelations) {
    for (const auto& [pair, edge] : s.layer(kind)) {
      if (!is_directed(kind) && pair.first > pair.second) continue;
      const SourceTriple tr{s.firms()[pair.first], kind, s.firms()[pair.second], s.month()};
      if (cfg.retrieval) {
        switch (kind) {
          case RelationKind::Leadership: emit(out, s, Template::CommonCeoWith, tr); break;
          case RelationKind::SupplyChain: emit(out, s, Template::UpstreamDownstreamWith, tr); break;
          case RelationKind::FundHolding: emit(out, s, Template::SameFundAs, tr); break;
          case RelationKind::Technical:
            emit(out, s,
                 s.multiplicity(pair.first, pair.second) >= 2 ? Template::MultipleRelationsWith
                                                                : Template::OneRelationWith,
                 tr);
            break;
        }
      }
      if (cfg.judgment) {
        switch (kind) {
          case RelationKind::SupplyChain: emit(out, s, Template::SupplyChainBetween, tr); break;
          case RelationKind::FundHolding: emit(out, s, Template::SameFundBetween, tr); break;
          default: emit(out, s, Template::RelationBetween, tr); break;
        }
      }
      if (cfg.factual) {
        emit(out, s, Template::WhatRelationship, tr);
        if (kind == RelationKind::Technical) {
          emit(out, s, Template::TechnicalSimilarity, tr);
          emit(out, s, Template::TechnicalScore, tr);
        }
      }
    }
  }
  Rng rng(cfg.seed, 0x1257);
  rng.shuffle(out);
  return out;
}

RotatingBuffer::RotatingBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::BadConfig, "buffer capacity must be positive");
}

void RotatingBuffer::update(std::span<const std::pair<InstructionPair, double>> fresh) {
  for (const auto& [pair, score] : fresh)
    if (!std::isfinite(score)) throw Error(ErrorCode::BadConfig, "buffer score must be finite");
  for (const auto& [pair, score] : fresh) entries_.push_back(BufferEntry{pair, score, next_seq_++});
  std::stable_sort(entries_.begin(), entries_.end(), [](const BufferEntry& x, const BufferEntry& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.seq < y.seq;
  });
  if (entries_.size() > capacity_) entries_.resize(capacity_);
}

std::string instructions_to_jsonl(std::span<const InstructionPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["question"] = p.question;
    j["answer"] = p.answer;
    j["class"] = std::string(question_class_name(p.question_class));
    j["month"] = p.triple.month.str();
    j["triple"] = {p.triple.src.str(), std::string(relation_name(p.triple.kind)), p.triple.dst.str()};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ripple
