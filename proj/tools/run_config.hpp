#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "ripple/alignment.hpp"
#include "ripple/asset_pricing.hpp"
#include "ripple/instruction_gen.hpp"
#include "ripple/market_graph.hpp"
#include "ripple/portfolio.hpp"
#include "ripple/synth_market.hpp"

namespace ripple::cli {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "RIPPLE_OUTPUT_DIR";

struct DataPaths {
  std::string edges;
  std::string cpc;
  std::string returns;
  std::string factors;
  std::string events;
  std::string truth_impacts;
};

struct ExternalConfig {
  std::size_t edge_budget = 500;
  long timeout_ms = 30000;
};

/// The declarative run document. Every key has a default; unknown keys are
/// rejected.
struct RunConfig {
  DataPaths paths;
  PricingModel model = PricingModel::Capm;
  WindowConfig window;
  LayerConfig layers;
  RewardConfig reward;
  DiffusionParams diffusion;
  AlignConfig alignment;
  std::size_t holdout_months = 0;
  PortfolioConfig portfolio;
  InstructionConfig instructions;
  SynthConfig synth;
  ExternalConfig external;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
};

ordered_json to_json(const RunConfig& cfg);
/// Overlays `doc` on the defaults. Throws BadConfig on unknown keys or
/// ill-typed values.
RunConfig from_json(const ordered_json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// The config without output_dir, which does not affect results.
ordered_json manifest_config(const RunConfig& cfg);

/// Lower-case hex of fnv1a64 over the compact manifest_config dump.
std::string config_hash(const RunConfig& cfg);

}  // namespace ripple::cli
