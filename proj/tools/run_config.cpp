#include "run_config.hpp"

#include <cstdio>

#include "ripple/csv.hpp"
#include "ripple/error.hpp"
#include "ripple/rng.hpp"

namespace ripple::cli {

namespace {

ordered_json diffusion_json(const DiffusionParams& p) {
  return {{"decay", p.decay}, {"hops", p.hops}, {"seed_scale", p.seed_scale}, {"seed_score", p.seed_score}};
}

DiffusionParams diffusion_from(const ordered_json& j) {
  DiffusionParams p;
  p.decay = j.at("decay").get<std::array<double, kRelationCount>>();
  p.hops = j.at("hops").get<int>();
  p.seed_scale = j.at("seed_scale").get<double>();
  p.seed_score = j.at("seed_score").get<int>();
  return p;
}

/// Every key of `doc` must exist in `defaults`; objects are checked
/// recursively, everything else is a leaf.
void check_keys(const ordered_json& doc, const ordered_json& defaults, const std::string& where) {
  if (!doc.is_object()) throw Error(ErrorCode::BadConfig, where + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) throw Error(ErrorCode::BadConfig, "unknown config key " + path);
    if (defaults.at(key).is_object()) check_keys(value, defaults.at(key), path);
  }
}

void merge(ordered_json& base, const ordered_json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (base[key].is_object() && value.is_object()) {
      merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

ordered_json to_json(const RunConfig& c) {
  ordered_json months = ordered_json::array();
  for (const auto& m : c.alignment.train_months) months.push_back(m.str());
  const auto& s = c.synth;
  return {
      {"paths",
       {{"edges", c.paths.edges},
        {"cpc", c.paths.cpc},
        {"returns", c.paths.returns},
        {"factors", c.paths.factors},
        {"events", c.paths.events},
        {"truth_impacts", c.paths.truth_impacts}}},
      {"model", std::string(model_name(c.model))},
      {"window", {{"window", c.window.window}, {"min_obs", c.window.min_obs}}},
      {"layer_weights", c.layers.weights},
      {"reward", {{"lambda", c.reward.lambda}, {"literal_coverage", c.reward.literal_coverage}}},
      {"diffusion", diffusion_json(c.diffusion)},
      {"alignment",
       {{"start", diffusion_json(c.alignment.start)},
        {"sigma_explore", c.alignment.sigma_explore},
        {"learning_rate", c.alignment.learning_rate},
        {"clip", c.alignment.clip},
        {"baseline_decay", c.alignment.baseline_decay},
        {"max_updates", c.alignment.max_updates},
        {"epochs_per_update", c.alignment.epochs_per_update},
        {"train_months", months},
        {"holdout_months", c.holdout_months}}},
      {"portfolio",
       {{"decile", c.portfolio.decile},
        {"lookback", c.portfolio.lookback},
        {"lambda_risk", c.portfolio.lambda_risk},
        {"risk_free", c.portfolio.backtest.risk_free},
        {"annualize", c.portfolio.backtest.annualize},
        {"periods_per_year", c.portfolio.backtest.periods_per_year}}},
      {"instructions",
       {{"retrieval", c.instructions.retrieval},
        {"judgment", c.instructions.judgment},
        {"factual", c.instructions.factual}}},
      {"synth",
       {{"n_firms", s.n_firms},
        {"n_events", s.n_events},
        {"n_months", s.n_months},
        {"first_month", s.first_month.str()},
        {"warmup_days", s.warmup_days},
        {"k", s.k},
        {"l", s.l},
        {"beta_min", s.beta_min},
        {"beta_max", s.beta_max},
        {"market_drift", s.market_drift},
        {"market_vol", s.market_vol},
        {"risk_free", s.risk_free},
        {"factor_vol", s.factor_vol},
        {"noise_sigma", s.noise_sigma},
        {"impact_scale", s.impact_scale},
        {"avg_degree", s.avg_degree},
        {"negative_share", s.negative_share},
        {"churn", s.churn},
        {"theta", diffusion_json(s.theta)}}},
      {"external", {{"edge_budget", c.external.edge_budget}, {"timeout_ms", c.external.timeout_ms}}},
      {"seed", c.seed ? ordered_json(*c.seed) : ordered_json(nullptr)},
      {"output_dir", c.output_dir},
  };
}

RunConfig from_json(const ordered_json& doc) {
  const RunConfig defaults;
  ordered_json j = to_json(defaults);
  check_keys(doc, j, "");
  merge(j, doc);
  RunConfig c;
  try {
    const auto& p = j.at("paths");
    c.paths = {p.at("edges").get<std::string>(),   p.at("cpc").get<std::string>(),
               p.at("returns").get<std::string>(), p.at("factors").get<std::string>(),
               p.at("events").get<std::string>(),  p.at("truth_impacts").get<std::string>()};
    c.model = parse_model(j.at("model").get<std::string>());
    c.window.window = j.at("window").at("window").get<std::size_t>();
    c.window.min_obs = j.at("window").at("min_obs").get<std::size_t>();
    c.layers.weights = j.at("layer_weights").get<std::array<double, kRelationCount>>();
    c.reward.lambda = j.at("reward").at("lambda").get<double>();
    c.reward.literal_coverage = j.at("reward").at("literal_coverage").get<bool>();
    c.diffusion = diffusion_from(j.at("diffusion"));

    const auto& a = j.at("alignment");
    c.alignment.reward = c.reward;
    c.alignment.start = diffusion_from(a.at("start"));
    c.alignment.sigma_explore = a.at("sigma_explore").get<double>();
    c.alignment.learning_rate = a.at("learning_rate").get<double>();
    c.alignment.clip = a.at("clip").get<double>();
    c.alignment.baseline_decay = a.at("baseline_decay").get<double>();
    c.alignment.max_updates = a.at("max_updates").get<std::size_t>();
    c.alignment.epochs_per_update = a.at("epochs_per_update").get<std::size_t>();
    for (const auto& m : a.at("train_months")) c.alignment.train_months.push_back(Month::parse(m.get<std::string>()));
    c.holdout_months = a.at("holdout_months").get<std::size_t>();

    const auto& pf = j.at("portfolio");
    c.portfolio.decile = pf.at("decile").get<double>();
    c.portfolio.lookback = pf.at("lookback").get<std::size_t>();
    c.portfolio.lambda_risk = pf.at("lambda_risk").get<double>();
    c.portfolio.backtest.risk_free = pf.at("risk_free").get<double>();
    c.portfolio.backtest.annualize = pf.at("annualize").get<bool>();
    c.portfolio.backtest.periods_per_year = pf.at("periods_per_year").get<double>();

    const auto& in = j.at("instructions");
    c.instructions.retrieval = in.at("retrieval").get<bool>();
    c.instructions.judgment = in.at("judgment").get<bool>();
    c.instructions.factual = in.at("factual").get<bool>();

    const auto& s = j.at("synth");
    auto& y = c.synth;
    y.n_firms = s.at("n_firms").get<std::size_t>();
    y.n_events = s.at("n_events").get<std::size_t>();
    y.n_months = s.at("n_months").get<std::size_t>();
    y.first_month = Month::parse(s.at("first_month").get<std::string>());
    y.warmup_days = s.at("warmup_days").get<std::size_t>();
    y.k = s.at("k").get<std::size_t>();
    y.l = s.at("l").get<std::size_t>();
    y.beta_min = s.at("beta_min").get<double>();
    y.beta_max = s.at("beta_max").get<double>();
    y.market_drift = s.at("market_drift").get<double>();
    y.market_vol = s.at("market_vol").get<double>();
    y.risk_free = s.at("risk_free").get<double>();
    y.factor_vol = s.at("factor_vol").get<double>();
    y.noise_sigma = s.at("noise_sigma").get<double>();
    y.impact_scale = s.at("impact_scale").get<double>();
    y.avg_degree = s.at("avg_degree").get<double>();
    y.negative_share = s.at("negative_share").get<double>();
    y.churn = s.at("churn").get<double>();
    y.theta = diffusion_from(s.at("theta"));

    c.external.edge_budget = j.at("external").at("edge_budget").get<std::size_t>();
    c.external.timeout_ms = j.at("external").at("timeout_ms").get<long>();
    if (!j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("ill-typed config value: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  c.layers.validate();
  c.reward.validate();
  c.diffusion.validate();
  c.alignment.start.validate();
  if (c.external.timeout_ms <= 0) throw Error(ErrorCode::BadConfig, "external.timeout_ms must be positive");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  return from_json(doc);
}

ordered_json manifest_config(const RunConfig& cfg) {
  ordered_json j = to_json(cfg);
  j.erase("output_dir");
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(manifest_config(cfg).dump())));
  return buf;
}

}  // namespace ripple::cli
