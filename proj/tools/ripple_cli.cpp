#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ripple/csv.hpp"
#include "ripple/error.hpp"
#include "ripple/evaluation.hpp"
#include "ripple/external_client.hpp"
#include "ripple/rng.hpp"
#include "run_config.hpp"

using namespace ripple;
using namespace ripple::cli;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig:
    case ErrorCode::InfeasibleConfig: return kUsage;
    case ErrorCode::ClientDead: return kRuntime;
    default: return kData;
  }
}

void error_line(std::string_view code, int exit_code, const std::string& message) {
  std::cerr << "ripple: error code=" << code << " exit=" << exit_code
            << " message=" << ordered_json(message).dump() << '\n';
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Writes outputs under one directory and records their checksums.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, const std::string& content) {
    write_text_file(root_ / rel, content);
    files_[rel] = hex64(fnv1a64(content));
  }

  void write_manifest(const std::string& command, const RunConfig& cfg, const ordered_json& args) {
    ordered_json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = cfg.seed ? ordered_json(*cfg.seed) : ordered_json(nullptr);
    m["config_hash"] = config_hash(cfg);
    m["args"] = args;
    m["config"] = manifest_config(cfg);
    m["files"] = files_;
    write_text_file(root_ / "manifest.json", m.dump(2) + "\n");
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<std::string, std::string> files_;
};

std::string csv_to_jsonl(const std::string& csv) {
  const auto table = CsvTable::parse(csv);
  std::string out;
  for (const auto& row : table.rows()) {
    ordered_json j;
    for (std::size_t c = 0; c < table.header().size(); ++c) {
      const std::string& cell = c < row.size() ? row[c] : std::string();
      try {
        j[table.header()[c]] = parse_double(cell);
      } catch (const Error&) {
        j[table.header()[c]] = cell;
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

struct Session {
  RunConfig cfg;
  std::string format = "csv";
  std::unique_ptr<OutputDir> out;

  void report(const std::string& stem, const std::string& csv) {
    if (format == "jsonl") {
      out->write(stem + ".jsonl", csv_to_jsonl(csv));
    } else {
      out->write(stem + ".csv", csv);
    }
  }

  std::uint64_t seed_or_zero() const { return cfg.seed.value_or(0); }

  std::uint64_t required_seed(const std::string& command) const {
    if (!cfg.seed) throw Error(ErrorCode::BadConfig, command + " requires a seed (--seed or config \"seed\")");
    return *cfg.seed;
  }
};

fs::path require_path(const std::string& key, const std::string& value) {
  if (value.empty()) throw Error(ErrorCode::BadConfig, "paths." + key + " is required for this command");
  if (!fs::exists(value)) throw Error(ErrorCode::IoError, "paths." + key + " does not exist: " + value);
  return value;
}

GraphSeries load_graphs(const RunConfig& cfg) {
  const auto edges = read_edges_csv(require_path("edges", cfg.paths.edges));
  std::vector<CpcProfile> cpc;
  if (!cfg.paths.cpc.empty()) cpc = read_cpc_csv(require_path("cpc", cfg.paths.cpc));
  auto series = build_series(edges, cpc, cfg.layers);
  if (series.empty()) throw Error(ErrorCode::EmptySeries, "no snapshots in " + cfg.paths.edges);
  return series;
}

struct MarketData {
  GraphSeries graphs;
  std::vector<Event> events;
  ReturnPanel returns;
  FactorPanel factors;
  ResidualPanel residuals;
};

MarketData load_market(const RunConfig& cfg) {
  // Check every path before any parsing.
  const auto edges = require_path("edges", cfg.paths.edges);
  const auto returns = require_path("returns", cfg.paths.returns);
  const auto factors = require_path("factors", cfg.paths.factors);
  const auto events = require_path("events", cfg.paths.events);
  MarketData m;
  m.graphs = load_graphs(cfg);
  m.events = read_events_jsonl(events);
  m.returns = read_returns_csv(returns);
  m.factors = read_factors_csv(factors);
  ResidualOptions opt;
  opt.model = cfg.model;
  opt.window = cfg.window;
  m.residuals = residual_panel(m.returns, m.factors, opt);
  return m;
}

GroundTruth load_truth(const RunConfig& cfg) {
  GroundTruth truth;
  truth.impacts = parse_impacts_csv(read_text_file(require_path("truth_impacts", cfg.paths.truth_impacts)));
  return truth;
}

std::string stats_csv(const SnapshotStats& s) {
  std::ostringstream out;
  out << "graphs,avg_nodes,avg_edges,single_pct,dual_pct,triple_pct,quad_pct\n"
      << s.graphs << ',' << format_double(s.avg_nodes) << ',' << format_double(s.avg_edges) << ','
      << format_double(s.single_pct) << ',' << format_double(s.dual_pct) << ',' << format_double(s.triple_pct)
      << ',' << format_double(s.quad_pct) << '\n';
  return out.str();
}

// --- kg -----------------------------------------------------------------------

void write_snapshots(Session& ss, const GraphSeries& series, const std::string& dir) {
  for (const auto& [month, snap] : series.snapshots()) ss.out->write(dir + "/" + month.str() + ".csv", export_snapshot_csv(snap));
}

void kg_build(Session& ss) {
  const auto series = load_graphs(ss.cfg);
  write_snapshots(ss, series, "snapshots");
  ss.report("kg_stats", stats_csv(snapshot_stats(series)));
  ss.out->write_manifest("kg build", ss.cfg, ordered_json::object());
  std::cout << "kg build: " << series.size() << " snapshots\n";
}

void kg_stats(Session& ss) {
  const auto series = load_graphs(ss.cfg);
  const auto csv = stats_csv(snapshot_stats(series));
  ss.report("kg_stats", csv);
  ss.out->write_manifest("kg stats", ss.cfg, ordered_json::object());
  std::cout << csv;
}

void kg_ablate(Session& ss, const std::string& relation) {
  const RelationKind kind = parse_relation(relation);
  const auto series = load_graphs(ss.cfg);
  GraphSeries ablated;
  for (const auto& [month, snap] : series.snapshots()) ablated.insert(ablate_relation(snap, kind));
  write_snapshots(ss, ablated, "ablated");
  ss.report("kg_stats", stats_csv(snapshot_stats(ablated)));
  ss.out->write_manifest("kg ablate", ss.cfg, {{"relation", relation}});
  std::cout << "kg ablate: removed " << relation << " from " << ablated.size() << " snapshots\n";
}

// --- instr / synth ------------------------------------------------------------

void instr_gen(Session& ss, const std::string& month) {
  const auto series = load_graphs(ss.cfg);
  InstructionConfig ic = ss.cfg.instructions;
  ic.seed = ss.seed_or_zero();
  std::string jsonl;
  std::size_t n = 0;
  for (const auto& [m, snap] : series.snapshots()) {
    if (!month.empty() && m.str() != month) continue;
    const auto pairs = generate_instructions(snap, ic);
    n += pairs.size();
    jsonl += instructions_to_jsonl(pairs);
  }
  if (!month.empty() && !series.find(Month::parse(month)))
    throw Error(ErrorCode::EmptySeries, "no snapshot for month " + month);
  ss.out->write("instructions.jsonl", jsonl);
  ss.out->write_manifest("instr gen", ss.cfg, {{"month", month}});
  std::cout << "instr gen: " << n << " pairs\n";
}

void synth_gen(Session& ss) {
  SynthConfig sc = ss.cfg.synth;
  sc.seed = ss.required_seed("synth gen");
  const auto data = generate(sc);
  ss.out->write("edges.csv", edges_to_csv(data.edges));
  ss.out->write("returns.csv", returns_to_csv(data.returns));
  ss.out->write("factors.csv", factors_to_csv(data.factors));
  ss.out->write("events.jsonl", events_to_jsonl(data.events));
  ss.out->write("truth_impacts.csv", impacts_to_csv(data.truth));
  ss.out->write("truth_betas.csv", betas_to_csv(data.truth));
  ss.out->write_manifest("synth gen", ss.cfg, ordered_json::object());
  std::cout << "synth gen: " << data.returns.firms().size() << " firms, " << data.events.size() << " events, "
            << data.graphs.size() << " months\n";
}

// --- align --------------------------------------------------------------------

ordered_json params_json(const DiffusionParams& p) {
  return {{"decay", p.decay}, {"hops", p.hops}, {"seed_scale", p.seed_scale}, {"seed_score", p.seed_score}};
}

void align_run(Session& ss) {
  const std::uint64_t seed = ss.required_seed("align run");
  const auto m = load_market(ss.cfg);
  AlignConfig ac = ss.cfg.alignment;
  ac.seed = seed;

  std::set<Month> event_months;
  for (const auto& e : m.events) event_months.insert(e.date().month_of());
  std::vector<Month> holdout;
  if (ss.cfg.holdout_months > 0) {
    if (ss.cfg.holdout_months >= event_months.size())
      throw Error(ErrorCode::BadConfig, "holdout_months leaves no training months");
    std::vector<Month> all(event_months.begin(), event_months.end());
    const auto split = all.end() - static_cast<std::ptrdiff_t>(ss.cfg.holdout_months);
    holdout.assign(split, all.end());
    if (ac.train_months.empty()) ac.train_months.assign(all.begin(), split);
  }

  const AlignEnvironment env{&m.graphs, &m.events, &m.residuals};
  const auto trace = align(env, ac);
  ss.out->write("trace.csv", trace_to_csv(trace));

  ordered_json theta;
  theta["params"] = params_json(trace.final_params);
  theta["policy_mean"] = trace.final_theta;
  theta["steps"] = trace.steps.size();
  theta["aborted_updates"] = trace.aborted_updates;
  theta["start_reward_train"] = mean_reward(score_params(env, ac.start, ac.reward, ac.train_months));
  theta["final_reward_train"] = mean_reward(score_params(env, trace.final_params, ac.reward, ac.train_months));
  if (!holdout.empty()) {
    ordered_json months = ordered_json::array();
    for (const auto& h : holdout) months.push_back(h.str());
    theta["holdout_months"] = months;
    theta["final_reward_holdout"] = mean_reward(score_params(env, trace.final_params, ac.reward, holdout));
  }
  ss.out->write("theta.json", theta.dump(2) + "\n");
  ss.out->write_manifest("align run", ss.cfg, ordered_json::object());
  std::cout << "align run: " << trace.steps.size() << " updates, train reward "
            << format_double(theta["final_reward_train"].get<double>()) << '\n';
}

// --- eval ---------------------------------------------------------------------

struct ExternalHolder {
  std::unique_ptr<PropagatorClient> client;
};

void eval_run(Session& ss, const std::string& propagator) {
  const auto m = load_market(ss.cfg);
  Propagator prop;
  std::string method = propagator;
  std::optional<GroundTruth> truth;
  auto holder = std::make_shared<ExternalHolder>();
  if (propagator == "diffusion") {
    prop = diffusion_propagator(ss.cfg.diffusion);
  } else if (propagator == "null") {
    prop = null_propagator(ss.seed_or_zero());
  } else if (propagator == "truth") {
    truth = load_truth(ss.cfg);
    prop = truth_propagator(*truth);
  } else if (propagator.rfind("external:", 0) == 0) {
    const std::string command = propagator.substr(9);
    if (command.empty()) throw Error(ErrorCode::BadConfig, "external propagator needs a command");
    holder->client = std::make_unique<PropagatorClient>(command);
    const auto budget = ss.cfg.external.edge_budget;
    const std::chrono::milliseconds timeout{ss.cfg.external.timeout_ms};
    prop = [holder, budget, timeout](const GraphSnapshot& s, const Event& e) {
      return run_external(*holder->client, e, trim_context(s, e, budget), timeout);
    };
    method = "external";
  } else {
    throw Error(ErrorCode::BadConfig, "unknown propagator " + propagator);
  }

  const AlignEnvironment env{&m.graphs, &m.events, &m.residuals};
  EvalOptions opt;
  if (ss.cfg.model != PricingModel::Capm) opt.control_loadings = &m.residuals;
  const auto report = evaluate(env, prop, opt);
  if (!report.regression) throw Error(ErrorCode::TooFewObservations, "no usable cross-section for the regression");
  const std::string model(model_name(ss.cfg.model));
  ss.report("regression", regression_csv_header() + regression_csv_row(model, method, *report.regression));
  std::string anova = anova_csv_header();
  if (report.anova) anova += anova_csv_row(model, method, *report.anova);
  ss.report("anova", anova);
  ss.report("refusals", refusal_csv(report.refusals));
  ss.out->write_manifest("eval run", ss.cfg, {{"propagator", propagator}});
  const auto& r = *report.regression;
  std::cout << "eval run: gamma1 " << format_double(r.gamma1) << " p " << format_double(r.p_gamma1) << " r2_phi "
            << format_double(r.r2_phi) << " n " << r.n << " refusal_rate " << format_double(report.refusals.rate())
            << '\n';
}

// --- backtest -----------------------------------------------------------------

std::map<Date, ShockVector> diffusion_predictions(const MarketData& m, const DiffusionParams& params) {
  std::map<Date, ShockVector> out;
  const auto& dates = m.returns.dates();
  for (const auto& e : m.events) {
    const Date d = e.date();
    const auto* snap = m.graphs.find(d.month_of());
    if (!snap) continue;
    const auto next = std::upper_bound(dates.begin(), dates.end(), d);
    if (next == dates.end()) continue;
    PredictionSet pred;
    try {
      pred = propagate_diffusion(*snap, e, params);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NoSeedInGraph) throw;
      continue;
    }
    auto& z = out[*next];
    for (const auto& [f, v] : aggregate_shocks(*snap, pred)) z[f] += v;
  }
  return out;
}

void backtest_run(Session& ss, const std::string& predictions, const std::vector<std::string>& strategies) {
  const auto m = load_market(ss.cfg);
  std::map<Date, ShockVector> preds;
  if (predictions == "truth") {
    preds = truth_by_trade_date(load_truth(ss.cfg), m.events, m.returns);
  } else if (predictions == "diffusion") {
    preds = diffusion_predictions(m, ss.cfg.diffusion);
  } else {
    throw Error(ErrorCode::BadConfig, "unknown predictions source " + predictions);
  }

  std::vector<Strategy> chosen;
  for (auto s : kAllStrategies) {
    if (strategies.empty() || std::find(strategies.begin(), strategies.end(), strategy_name(s)) != strategies.end())
      chosen.push_back(s);
  }
  for (const auto& name : strategies) {
    if (std::none_of(std::begin(kAllStrategies), std::end(kAllStrategies),
                     [&](Strategy s) { return strategy_name(s) == name; }))
      throw Error(ErrorCode::BadConfig, "unknown strategy " + name);
  }

  std::string report = report_csv_header();
  std::string equity = equity_csv_header();
  for (auto s : chosen) {
    const auto schedule = build_schedule(s, m.returns, preds, ss.cfg.portfolio);
    const auto r = backtest(schedule, m.returns, ss.cfg.portfolio.backtest);
    report += report_csv_row(strategy_name(s), r);
    equity += equity_csv_rows(strategy_name(s), r);
    std::cout << "backtest " << strategy_name(s) << ": sharpe " << format_double(r.sharpe) << " mdd "
              << format_double(r.mdd) << '\n';
  }
  ss.report("backtest", report);
  ss.report("equity", equity);
  ordered_json names = ordered_json::array();
  for (auto s : chosen) names.push_back(std::string(strategy_name(s)));
  ss.out->write_manifest("backtest run", ss.cfg, {{"predictions", predictions}, {"strategies", names}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event ripple engine: graph, alignment, evaluation and backtests"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(0, 1);

  std::string config_path, out_dir, data_dir, format = "csv";
  std::optional<std::uint64_t> seed;
  bool print_config = false;
  app.add_option("--config", config_path, "Run config document (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out_dir, "Output directory (overrides config and " + std::string(kOutputDirEnv) + ")");
  app.add_option("--data", data_dir, "Directory holding edges.csv, returns.csv, factors.csv, events.jsonl");
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "jsonl"}));
  app.add_flag("--print-config", print_config, "Print the effective config and exit");

  auto group = [&](const char* name, const char* help) {
    auto* g = app.add_subcommand(name, help);
    g->require_subcommand(1);
    g->fallthrough();
    return g;
  };
  auto action = [](CLI::App* g, const char* name, const char* help) {
    auto* a = g->add_subcommand(name, help);
    a->fallthrough();
    return a;
  };

  auto* kg = group("kg", "Knowledge-graph snapshots");
  auto* kg_build_cmd = action(kg, "build", "Build monthly snapshots and write them as CSV");
  auto* kg_stats_cmd = action(kg, "stats", "Snapshot statistics");
  auto* kg_ablate_cmd = action(kg, "ablate", "Remove one relation layer");
  std::string relation;
  kg_ablate_cmd->add_option("--relation", relation, "technical|supply_chain|leadership|fund_holding")->required();

  auto* instr = group("instr", "Instruction datasets");
  auto* instr_gen_cmd = action(instr, "gen", "Generate instruction pairs from the snapshots");
  std::string month;
  instr_gen_cmd->add_option("--month", month, "Restrict to one month (YYYY-MM)");

  auto* synth = group("synth", "Synthetic markets");
  auto* synth_gen_cmd = action(synth, "gen", "Generate a synthetic market with ground truth");

  auto* align_grp = group("align", "Market alignment");
  auto* align_run_cmd = action(align_grp, "run", "Policy-gradient alignment of the diffusion parameters");

  auto* eval = group("eval", "Pricing-error evaluation");
  auto* eval_run_cmd = action(eval, "run", "Regression, ANOVA and refusal statistics");
  std::string propagator = "diffusion";
  eval_run_cmd->add_option("--propagator", propagator, "diffusion|null|truth|external:<cmd>");

  auto* bt = group("backtest", "Portfolio backtests");
  auto* bt_run_cmd = action(bt, "run", "Backtest the ripple strategy and the benchmarks");
  std::string predictions = "diffusion";
  std::vector<std::string> strategies;
  bt_run_cmd->add_option("--predictions", predictions, "diffusion|truth");
  bt_run_cmd->add_option("--strategies", strategies, "Subset of ripple,equal,volatility,markowitz,min_variance")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    error_line("UsageError", kUsage, e.what());
    return kUsage;
  }

  try {
    Session ss;
    ss.format = format;
    ss.cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) ss.cfg.seed = seed;
    if (!data_dir.empty()) {
      const fs::path d(data_dir);
      ss.cfg.paths.edges = (d / "edges.csv").string();
      ss.cfg.paths.returns = (d / "returns.csv").string();
      ss.cfg.paths.factors = (d / "factors.csv").string();
      ss.cfg.paths.events = (d / "events.jsonl").string();
      if (fs::exists(d / "cpc.csv")) ss.cfg.paths.cpc = (d / "cpc.csv").string();
      if (fs::exists(d / "truth_impacts.csv")) ss.cfg.paths.truth_impacts = (d / "truth_impacts.csv").string();
    }
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) ss.cfg.output_dir = env;
    if (!out_dir.empty()) ss.cfg.output_dir = out_dir;

    if (print_config) {
      std::cout << to_json(ss.cfg).dump(2) << '\n';
      return kOk;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      error_line("UsageError", kUsage, "a command is required");
      return kUsage;
    }
    ss.out = std::make_unique<OutputDir>(ss.cfg.output_dir);

    if (*kg_build_cmd) kg_build(ss);
    else if (*kg_stats_cmd) kg_stats(ss);
    else if (*kg_ablate_cmd) kg_ablate(ss, relation);
    else if (*instr_gen_cmd) instr_gen(ss, month);
    else if (*synth_gen_cmd) synth_gen(ss);
    else if (*align_run_cmd) align_run(ss);
    else if (*eval_run_cmd) eval_run(ss, propagator);
    else if (*bt_run_cmd) backtest_run(ss, predictions, strategies);
    return kOk;
  } catch (const Error& e) {
    const int code = exit_for(e.code());
    error_line(to_string(e.code()), code, e.what());
    return code;
  } catch (const std::exception& e) {
    error_line("RuntimeError", kRuntime, e.what());
    return kRuntime;
  }
}
