// relaxometry: command-line front end for the simulation studies.
//
//   simulate        adaptive or sweep runs -> records.jsonl, summary.json, trace.csv
//   rank-protocols  cost of every independent protocol, optional robust/optimal ratio sweep
//   bias-study      reciprocal estimator bias against R
//   speedup         adaptive-versus-sweep speedup over equal rate pairs
//   show            pretty-print an artifact written by the commands above
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relax/config.hpp"
#include "relax/errors.hpp"
#include "relax/io.hpp"

using namespace relax;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  std::string optimizer;
  std::string repetitions;  // text so "1e6" and "1e4" both work
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t replicates = 0;
  std::size_t iterations = 0;
  unsigned threads = 0;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;  // 0: caller picks
};

// "a:b" or "a:b:n"; a and b may carry units.
Range parse_range(const std::string& text, Unit unit, const std::string& field) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() < 2 || parts.size() > 3) throw ConfigError(field, "expected lo:hi or lo:hi:n, got '" + text + "'");
  Range r;
  r.lo = parse_quantity(parts[0], unit, field);
  r.hi = parse_quantity(parts[1], unit, field);
  if (parts.size() == 3) {
    const double n = parse_quantity(parts[2], Unit::None, field);
    if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError(field, "point count must be a positive integer");
    r.n = static_cast<std::size_t>(n);
  }
  if (!(r.lo > 0.0) || !(r.hi >= r.lo)) throw ConfigError(field, "need 0 < lo <= hi");
  return r;
}

std::int64_t parse_repetitions(const std::string& text) {
  const double r = parse_quantity(text, Unit::None, "R");
  if (!(r >= 1.0) || r != std::floor(r) || r > 9.0e15) throw ConfigError("R", "must be a positive integer");
  return static_cast<std::int64_t>(r);
}

fs::path output_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("RELAX_OUT_DIR"); env && *env) return env;
  return "relax-out";
}

void add_common(CLI::App* app, Common& c, bool with_config) {
  if (with_config) app->add_option("--config", c.config, "YAML or JSON run configuration");
  app->add_option("--preset", c.preset, "fig2, fig5, fig6 or fig7");
  app->add_option("--out", c.out, "output directory (default $RELAX_OUT_DIR or ./relax-out)");
  app->add_option("--seed", c.seed, "base seed; replicate k uses seed + k")->each([&](const std::string&) { c.seed_set = true; });
  app->add_option("--replicates", c.replicates, "number of replicates");
  app->add_option("--R", c.repetitions, "repetitions per measurement, e.g. 1e6");
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) {
    if (!c.preset.empty()) throw ConfigError("preset", "set the preset inside the config file when --config is used");
    cfg = load_run_config(c.config);
  } else {
    cfg = default_run_config(c.preset.empty() ? "fig2" : c.preset);
  }
  ExperimentConfig& e = cfg.experiment;
  if (c.seed_set) e.seed = c.seed;
  if (!c.optimizer.empty()) {
    try {
      e.optimizer = parse_optimizer(c.optimizer);
    } catch (const DomainError& err) {
      throw ConfigError("optimizer", err.what());
    }
  }
  if (!c.repetitions.empty()) e.params.repetitions = parse_repetitions(c.repetitions);
  if (c.replicates) cfg.replicates = c.replicates;
  if (c.iterations) e.iterations = c.iterations;
  if (c.threads) cfg.threads = c.threads;
  cfg.resolved().validate();
  return cfg;
}

void finish_manifest(RunManifest& m, const fs::path& dir) {
  m.finished_utc = utc_now();
  m.outputs.push_back("manifest.json");
  write_file(dir, "manifest.json", m.to_json().dump(2) + "\n");
}

std::string table_text(const CsvTable& t) {
  std::ostringstream os;
  t.write(os);
  return os.str();
}

int cmd_simulate(const Common& c, bool snapshot) {
  const RunConfig cfg = resolve_config(c);
  const fs::path dir = output_dir(c);
  RunManifest m;
  m.command = "simulate";
  m.config_hash = config_hash(cfg);
  m.seed = cfg.experiment.seed;
  m.tool_version = tool_version();
  m.started_utc = utc_now();

  ExperimentConfig run = cfg.resolved();
  run.keep_posterior = snapshot;
  const std::vector<RunRecord> runs = run_replicates(run, cfg.replicates, cfg.threads);

  write_file(dir, "config.json", canonical_text(cfg));
  std::ostringstream records;
  write_records(records, runs);
  write_file(dir, "records.jsonl", records.str());
  const json summary = summary_json(runs, cfg);
  write_file(dir, "summary.json", summary.dump(2) + "\n");
  write_file(dir, "trace.csv", table_text(trace_table(runs)));
  m.outputs = {"config.json", "records.jsonl", "summary.json", "trace.csv"};
  if (snapshot && runs.front().posterior) {
    write_file(dir, "posterior.json", posterior_json(*runs.front().posterior).dump() + "\n");
    m.outputs.push_back("posterior.json");
  }
  finish_manifest(m, dir);

  std::cout << optimizer_name(run.optimizer) << ": " << runs.size() << " replicate(s), seed " << run.seed << "\n";
  for (std::size_t r = 0; r < runs.size() && r < 10; ++r) {
    const Moments& f = runs[r].final;
    std::cout << std::setprecision(5) << "  [" << r << "] Gamma+ = " << f.mean_plus << " +- " << f.sigma_plus
              << " ms^-1, Gamma- = " << f.mean_minus << " +- " << f.sigma_minus << " ms^-1, T = "
              << runs[r].total_time_s << " s\n";
  }
  std::cout << "coverage within 3 sigma: " << summary["coverage_3_sigma"].get<double>() << "\nwrote " << dir.string()
            << "\n";
  return 0;
}

int cmd_rank(const Common& c, double gamma_plus, double gamma_minus, const std::string& sweep) {
  if (!c.config.empty()) throw ConfigError("config", "rank-protocols takes no config file");
  RankConfig rc;
  if (!c.preset.empty()) rc.params = preset(c.preset).params;
  if (!c.repetitions.empty()) rc.timing.repetitions = parse_repetitions(c.repetitions);
  rc.params.repetitions = rc.timing.repetitions;
  const fs::path dir = output_dir(c);
  RunManifest m;
  m.command = "rank-protocols";
  m.tool_version = tool_version();
  m.started_utc = utc_now();

  RatePair rates(1.0, 1.0);
  try {
    rates = RatePair(gamma_plus, gamma_minus);
  } catch (const DomainError& e) {
    throw ConfigError("gamma", e.what());
  }
  const ProtocolRanking ranking = rank_protocols(rates, rc);
  write_file(dir, "protocols.csv", table_text(ranking_table(ranking)));
  m.outputs.push_back("protocols.csv");
  std::cout << "protocols ranked at Gamma = (" << gamma_plus << ", " << gamma_minus << ") ms^-1: "
            << ranking.entries.size() << "\n";
  for (std::size_t k = 0; k < ranking.entries.size() && k < 5; ++k) {
    const RankEntry& e = ranking.entries[k];
    std::cout << "  " << k + 1 << ". " << e.protocol.label() << "  cost ratio " << std::setprecision(4) << e.ratio
              << "\n";
  }

  if (!sweep.empty()) {
    const Range r = parse_range(sweep, Unit::None, "ratio-sweep");
    const std::vector<RatioRow> rows = sensitivity_ratio_curve(log_space(r.lo, r.hi, r.n ? r.n : 25), rc);
    write_file(dir, "ratio_sweep.csv", table_text(ratio_sweep_table(rows)));
    m.outputs.push_back("ratio_sweep.csv");
    double lo = rows.front().ratio, hi = lo;
    for (const RatioRow& row : rows) lo = std::min(lo, row.ratio), hi = std::max(hi, row.ratio);
    std::cout << "robust/optimal cost ratio over Gamma+/Gamma- in [" << r.lo << ", " << r.hi << "]: " << lo << " .. "
              << hi << ((lo >= 1.2 && hi <= 1.6) ? "  (inside [1.2, 1.6])" : "  (outside [1.2, 1.6])") << "\n";
  }
  finish_manifest(m, dir);
  return 0;
}

int cmd_bias(const Common& c, const std::string& range) {
  if (!c.config.empty()) throw ConfigError("config", "bias-study takes no config file");
  const Range r = parse_range(range, Unit::None, "R");
  const std::size_t n = r.n ? r.n : static_cast<std::size_t>(std::lround(2.0 * std::log10(r.hi / r.lo))) + 1;
  BiasStudyConfig bc;
  bc.params = preset(c.preset.empty() ? "fig2" : c.preset).params;
  if (c.seed_set) bc.seed = c.seed;
  if (c.replicates) bc.replicates = static_cast<std::int64_t>(c.replicates);
  if (bc.replicates < 1000) throw ConfigError("replicates", "bias-study needs at least 1000 replicates");
  for (double x : log_space(r.lo, r.hi, n)) bc.repetitions.push_back(std::llround(x));
  const fs::path dir = output_dir(c);
  RunManifest m;
  m.command = "bias-study";
  m.seed = bc.seed;
  m.tool_version = tool_version();
  m.started_utc = utc_now();

  const std::vector<BiasRow> rows = bias_study(bc);
  SignalParams one = bc.params;
  one.repetitions = 1;
  const double zt = z_true(bc.measurement, bc.rates, one);
  write_file(dir, "bias.csv", table_text(bias_table(rows, zt)));
  m.outputs.push_back("bias.csv");
  finish_manifest(m, dir);
  std::cout << "R            mean Z/Z_true (nonlinear)   mean Z/Z_true (linear)\n";
  for (const BiasRow& row : rows) {
    std::cout << std::left << std::setw(12) << row.repetitions << " " << std::setw(27) << csv_number(row.mean_ratio_nonlinear)
              << " " << csv_number(row.mean_ratio_linear) << "\n";
  }
  return 0;
}

int cmd_speedup(const Common& c, const std::string& range, double budget_factor) {
  if (!c.config.empty()) throw ConfigError("config", "speedup takes no config file");
  const Range r = parse_range(range, Unit::PerMillisecond, "rates");
  std::vector<RatePair> rates;
  for (double g : log_space(r.lo, r.hi, r.n ? r.n : 5)) rates.emplace_back(g, g);
  SpeedupConfig s = speedup_preset(rates);
  if (c.seed_set) s.adaptive.seed = s.nap.seed = c.seed;
  if (!c.repetitions.empty()) s.adaptive.params.repetitions = s.nap.params.repetitions = parse_repetitions(c.repetitions);
  if (c.iterations) s.adaptive.iterations = c.iterations;
  s.adaptive_replicates = s.nap_replicates = c.replicates ? c.replicates : 10;
  s.nap_budget_factor = budget_factor;
  s.threads = c.threads;
  if (!c.optimizer.empty()) {
    try {
      s.adaptive.optimizer = parse_optimizer(c.optimizer);
    } catch (const DomainError& err) {
      throw ConfigError("optimizer", err.what());
    }
  }
  s.validate();
  const fs::path dir = output_dir(c);
  RunManifest m;
  m.command = "speedup";
  m.seed = s.adaptive.seed;
  m.tool_version = tool_version();
  m.started_utc = utc_now();
  const std::vector<SpeedupPoint> points = speedup_study(s);
  write_file(dir, "speedup.csv", table_text(speedup_table(points)));
  m.outputs.push_back("speedup.csv");
  finish_manifest(m, dir);
  std::cout << "Gamma (ms^-1)  speedup+   speedup-   (lower bounds +/-)\n";
  for (const SpeedupPoint& p : points) {
    std::cout << std::left << std::setw(14) << csv_number(p.rates.plus()) << " " << std::setw(10) << csv_number(p.plus.mean)
              << " " << std::setw(10) << csv_number(p.minus.mean) << " (" << p.plus.lower_bounds << "/"
              << p.minus.lower_bounds << " of " << p.pairings << ")\n";
  }
  return 0;
}

std::string short_number(const json& v) {
  std::ostringstream os;
  os << std::setprecision(5) << v.get<double>();
  return os.str();
}

std::string fmt_moments(const json& m) {
  std::ostringstream os;
  os << std::setprecision(5) << m.at("gamma_plus").get<double>() << " +- " << m.at("sigma_plus").get<double>() << ", "
     << m.at("gamma_minus").get<double>() << " +- " << m.at("sigma_minus").get<double>();
  return os.str();
}

int cmd_show(const std::string& file, std::size_t limit) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  if (fs::path(file).extension() == ".jsonl") {
    std::cout << "rep  iter  tau+ (ms)    tau- (ms)    Gamma+ +- s, Gamma- +- s (ms^-1)          elapsed (s)\n";
    std::size_t shown = 0;
    for (std::string line; std::getline(in, line) && shown < limit; ++shown) {
      const json j = json::parse(line);
      std::cout << std::left << std::setw(4) << j.at("replicate").get<std::size_t>() << " " << std::setw(5)
                << j.at("iteration").get<std::size_t>() << " " << std::setw(12) << short_number(j.at("tau_plus_ms"))
                << " " << std::setw(12) << short_number(j.at("tau_minus_ms")) << " " << std::setw(40)
                << fmt_moments(j.at("posterior")) << " " << short_number(j.at("elapsed_s")) << "\n";
    }
    return 0;
  }
  const json j = json::parse(in);
  if (j.contains("replicates") && j["replicates"].is_array()) {
    std::cout << "optimizer " << j.value("optimizer", "?") << ", truth (" << j["truth"]["gamma_plus"] << ", "
              << j["truth"]["gamma_minus"] << ") ms^-1\n";
    for (const json& r : j["replicates"]) {
      std::cout << "  [" << r["replicate"] << "] seed " << r["seed"] << ": " << fmt_moments(r["final"]) << " ms^-1, T "
                << short_number(r["total_time_s"]) << " s, failures " << r["failures"] << "\n";
    }
    std::cout << "coverage within 3 sigma: " << j["coverage_3_sigma"] << "\n";
    return 0;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive relaxometry simulations"};
  app.require_subcommand(1);

  Common sim_c, rank_c, bias_c, speed_c;
  bool snapshot = false;
  auto* sim = app.add_subcommand("simulate", "run adaptive (nob, pf) or sweep (nap) experiments");
  add_common(sim, sim_c, true);
  sim->add_option("--optimizer", sim_c.optimizer, "nob, pf or nap");
  sim->add_option("--iterations", sim_c.iterations, "iterations per replicate");
  sim->add_flag("--snapshot", snapshot, "write the final posterior grid of replicate 0");

  double gp = 1.0, gm = 3.0;
  std::string sweep;
  auto* rank = app.add_subcommand("rank-protocols", "rank the independent measurement protocols");
  add_common(rank, rank_c, false);
  rank->add_option("--gamma-plus", gp, "Gamma+ in ms^-1");
  rank->add_option("--gamma-minus", gm, "Gamma- in ms^-1");
  rank->add_option("--ratio-sweep", sweep, "Gamma+/Gamma- range lo:hi[:n] for the robust/optimal ratio");

  std::string r_range = "1e3:1e7";
  auto* bias = app.add_subcommand("bias-study", "reciprocal estimator bias versus R");
  add_common(bias, bias_c, false);
  bias->get_option("--R")->description("R range lo:hi[:n]");
  bias_c.repetitions.clear();

  std::string rates = "0.05:100";
  double budget = 50.0;
  auto* speed = app.add_subcommand("speedup", "adaptive versus sweep speedup over equal rates");
  add_common(speed, speed_c, false);
  speed->add_option("--rates", rates, "rate range lo:hi[:n] (ms^-1 unless suffixed)");
  speed->add_option("--optimizer", speed_c.optimizer, "adaptive arm: nob or pf");
  speed->add_option("--iterations", speed_c.iterations, "adaptive iterations");
  speed->add_option("--budget-factor", budget, "sweep time budget in units of the longest adaptive run");

  std::string show_file;
  std::size_t show_limit = 50;
  auto* show = app.add_subcommand("show", "pretty-print records.jsonl, summary.json or any JSON artifact");
  show->add_option("file", show_file, "artifact to print")->required();
  show->add_option("--limit", show_limit, "lines to print from a .jsonl file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*sim) return cmd_simulate(sim_c, snapshot);
    if (*rank) return cmd_rank(rank_c, gp, gm, sweep);
    if (*bias) {
      if (!bias_c.repetitions.empty()) r_range = bias_c.repetitions;
      return cmd_bias(bias_c, r_range);
    }
    if (*speed) return cmd_speedup(speed_c, rates, budget);
    if (*show) return cmd_show(show_file, show_limit);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return 0;
}
