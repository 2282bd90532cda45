#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ripple/calendar.hpp"
#include "ripple/market_graph.hpp"

namespace ripple {

enum class QuestionClass { Retrieval, FactualJudgment, FactualQuestion };

std::string_view question_class_name(QuestionClass c) noexcept;

/// The fixed template bank.
enum class Template {
  CommonCeoWith,          // retrieval
  UpstreamDownstreamWith, // retrieval
  MultipleRelationsWith,  // retrieval
  OneRelationWith,        // retrieval
  SameFundAs,             // retrieval
  SupplyChainBetween,     // judgment
  SameFundBetween,        // judgment
  RelationBetween,        // judgment, any relation
  WhatRelationship,       // factual question
  TechnicalSimilarity,    // factual question, qualitative
  TechnicalScore,         // factual question, 4 decimals
};

inline constexpr std::size_t kTemplateCount = 11;

QuestionClass template_class(Template t) noexcept;

struct SourceTriple {
  FirmId src;
  RelationKind kind = RelationKind::SupplyChain;
  FirmId dst;
  Month month;

  bool operator==(const SourceTriple&) const = default;
};

struct InstructionPair {
  std::string question;
  std::string answer;
  QuestionClass question_class = QuestionClass::Retrieval;
  Template template_id = Template::WhatRelationship;
  SourceTriple triple;

  bool operator==(const InstructionPair&) const = default;
};

struct InstructionConfig {
  bool retrieval = true;
  bool judgment = true;
  bool factual = true;
  std::uint64_t seed = 0;

  void validate() const;  // BadConfig when every class is disabled
};

/// One pair per (layer edge, enabled class), plus the technical score
/// question for technical edges. Undirected layers contribute each pair
/// once (src < dst). Output order is shuffled by the seed.
std::vector<InstructionPair> generate_instructions(const GraphSnapshot& s, const InstructionConfig& cfg = {});

/// Re-derives the answer to `t` for `triple` from the snapshot.
std::string answer_for(const GraphSnapshot& s, Template t, const SourceTriple& triple);

/// Question text of `t` for `triple`.
std::string question_for(Template t, const SourceTriple& triple);

struct BufferEntry {
  InstructionPair pair;
  double score = 0.0;
  std::uint64_t seq = 0;  // insertion order; lower is older
};

class RotatingBuffer {
 public:
  explicit RotatingBuffer(std::size_t capacity);

  std::size_t capacity() const noexcept { return capacity_; }
  const std::vector<BufferEntry>& entries() const noexcept { return entries_; }

  /// Union of the old and new entries, sorted by score descending (older
  /// first on ties) and truncated to capacity. Throws BadConfig on a
  /// non-finite score.
  void update(std::span<const std::pair<InstructionPair, double>> fresh);

 private:
  std::size_t capacity_;
  std::uint64_t next_seq_ = 0;
  std::vector<BufferEntry> entries_;
};

/// `{"question","answer","class","month","triple":[src,kind,dst]}` per line.
std::string instructions_to_jsonl(std::span<const InstructionPair> pairs);

}  // namespace ripple
