#include "relax/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "relax/errors.hpp"

#ifndef RELAX_VERSION
#define RELAX_VERSION "0.1.0"
#endif

namespace relax {

using nlohmann::json;

namespace {

json moments_json(const Moments& m) {
  return {{"gamma_plus", m.mean_plus},   {"gamma_minus", m.mean_minus}, {"sigma_plus", m.sigma_plus},
          {"sigma_minus", m.sigma_minus}, {"covariance", m.covariance}};
}

// JSON has no inf/nan; they become null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string text(double v) { return csv_number(v); }

}  // namespace

json iteration_json(const IterationRecord& it, std::size_t replicate) {
  json j = {
      {"replicate", replicate},
      {"iteration", it.index},
      {"tau_plus_ms", it.delays.tau_plus},
      {"tau_minus_ms", it.delays.tau_minus},
      {"m_plus", it.pair.m_plus},
      {"m_minus", it.pair.m_minus},
      {"sigma_m_plus", it.pair.sigma_plus},
      {"sigma_m_minus", it.pair.sigma_minus},
      {"posterior", moments_json(it.posterior)},
      {"delay_time_s", it.time.delay_s},
      {"dead_time_s", it.time.dead_s},
      {"cpu_time_s", it.time.cpu_s},
      {"elapsed_s", it.elapsed_s},
      {"elapsed_without_cpu_s", it.elapsed_without_cpu_s},
      {"refreshed", it.posterior_refreshed},
  };
  json flags = json::array();
  if (it.estimator_failed) flags.push_back("estimator_failed");
  if (it.update_rejected) flags.push_back("update_rejected");
  if (it.selection_fallback) flags.push_back("selection_fallback");
  j["flags"] = flags;
  return j;
}

void write_records(std::ostream& out, const std::vector<RunRecord>& runs) {
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const IterationRecord& it : runs[r].iterations) out << iteration_json(it, r).dump() << '\n';
  }
}

json summary_json(const std::vector<RunRecord>& runs, const RunConfig& cfg) {
  const RatePair truth = cfg.experiment.truth;
  json reps = json::array();
  std::size_t covered = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const RunRecord& run = runs[r];
    const bool in3 = std::abs(run.final.mean_plus - truth.plus()) <= 3.0 * run.final.sigma_plus &&
                     std::abs(run.final.mean_minus - truth.minus()) <= 3.0 * run.final.sigma_minus;
    covered += in3;
    reps.push_back({
        {"replicate", r},
        {"seed", run.seed},
        {"iterations", run.iterations.size()},
        {"final", moments_json(run.final)},
        {"delay_time_s", run.delay_time_s},
        {"total_time_s", run.total_time_s},
        {"duty_cycle", run.duty_cycle},
        {"failures", run.failures},
        {"decay_exponent_plus", finite_or_null(decay_exponent(run, Branch::Plus))},
        {"decay_exponent_minus", finite_or_null(decay_exponent(run, Branch::Minus))},
        {"within_3_sigma", in3},
    });
  }
  return {
      {"optimizer", optimizer_name(cfg.experiment.optimizer)},
      {"truth", {{"gamma_plus", truth.plus()}, {"gamma_minus", truth.minus()}}},
      {"replicates", reps},
      {"coverage_3_sigma", runs.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(runs.size())},
      {"config_hash", config_hash(cfg)},
  };
}

json posterior_json(const PosteriorGrid& g) {
  return {
      {"gamma_plus_axis", g.plus_axis()},
      {"gamma_minus_axis", g.minus_axis()},
      {"weights", g.weights()},
      {"layout", "row-major, gamma_plus index outermost"},
      {"units", "ms^-1"},
      {"hard_bounds", {g.hard_bounds().lo, g.hard_bounds().hi}},
      {"moments", moments_json(g.moments())},
  };
}

PosteriorGrid posterior_from_json(const json& j) {
  try {
    const auto bounds = j.at("hard_bounds").get<std::vector<double>>();
    if (bounds.size() != 2) throw ConfigError("hard_bounds", "expected [lo, hi]");
    return PosteriorGrid(j.at("gamma_plus_axis").get<std::vector<double>>(),
                         j.at("gamma_minus_axis").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>(),
                         Bounds{bounds[0], bounds[1]});
  } catch (const json::exception& e) {
    throw ConfigError("posterior", e.what());
  }
}

json RunManifest::to_json() const {
  return {{"command", command},         {"config_hash", config_hash}, {"seed", seed},
          {"tool_version", tool_version}, {"started_utc", started_utc}, {"finished_utc", finished_utc},
          {"outputs", outputs}};
}

std::string tool_version() { return RELAX_VERSION; }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::logic_error("CSV row width does not match the header");
  rows_.push_back(std::move(row));
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvTable trace_table(const std::vector<RunRecord>& runs) {
  CsvTable t({"replicate", "iteration", "tau_plus_ms", "tau_minus_ms", "gamma_plus_ms^-1", "sigma_plus_ms^-1",
              "gamma_minus_ms^-1", "sigma_minus_ms^-1", "elapsed_s", "elapsed_without_cpu_s", "refreshed"});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const IterationRecord& it : runs[r].iterations) {
      t.add({std::to_string(r), std::to_string(it.index), text(it.delays.tau_plus), text(it.delays.tau_minus),
             text(it.posterior.mean_plus), text(it.posterior.sigma_plus), text(it.posterior.mean_minus),
             text(it.posterior.sigma_minus), text(it.elapsed_s), text(it.elapsed_without_cpu_s),
             it.posterior_refreshed ? "1" : "0"});
    }
  }
  return t;
}

CsvTable ranking_table(const ProtocolRanking& r) {
  CsvTable t({"rank", "protocol", "tau_plus_ms", "tau_minus_ms", "cost_s^0.5", "ratio_to_reference",
              "eta_insensitive_plus", "eta_insensitive_minus"});
  for (std::size_t k = 0; k < r.entries.size(); ++k) {
    const RankEntry& e = r.entries[k];
    const bool finite = std::isfinite(e.cost);
    t.add({std::to_string(k + 1), "\"" + e.protocol.label() + "\"", finite ? text(e.delays.tau_plus) : "",
           finite ? text(e.delays.tau_minus) : "", text(e.cost), text(e.ratio), e.eta_insensitive_plus ? "1" : "0",
           e.eta_insensitive_minus ? "1" : "0"});
  }
  return t;
}

CsvTable ratio_sweep_table(const std::vector<RatioRow>& rows) {
  CsvTable t({"gamma_ratio", "cost_robust_s^0.5", "cost_optimal_s^0.5", "robust_over_optimal", "robust_tau_plus_ms",
              "robust_tau_minus_ms", "optimal_tau_plus_ms", "optimal_tau_minus_ms"});
  for (const RatioRow& r : rows) {
    t.add({text(r.rate_ratio), text(r.cost_robust), text(r.cost_optimal), text(r.ratio), text(r.robust_delays.tau_plus),
           text(r.robust_delays.tau_minus), text(r.optimal_delays.tau_plus), text(r.optimal_delays.tau_minus)});
  }
  return t;
}

CsvTable bias_table(const std::vector<BiasRow>& rows, double z_true_per_readout) {
  CsvTable t({"repetitions", "z_true_per_count", "mean_z_over_true_nonlinear", "std_z_over_true_nonlinear",
              "mean_z_over_true_linear", "std_z_over_true_linear", "zero_denominators", "nonpositive_denominators"});
  for (const BiasRow& r : rows) {
    t.add({std::to_string(r.repetitions), text(z_true_per_readout / static_cast<double>(r.repetitions)),
           text(r.mean_ratio_nonlinear), text(r.std_nonlinear), text(r.mean_ratio_linear), text(r.std_linear),
           std::to_string(r.zero_denominator_count), std::to_string(r.nonpositive_count)});
  }
  return t;
}

CsvTable speedup_table(const std::vector<SpeedupPoint>& points) {
  CsvTable t({"gamma_plus_ms^-1", "gamma_minus_ms^-1", "speedup_plus", "speedup_plus_std", "speedup_plus_delay_only",
              "speedup_minus", "speedup_minus_std", "speedup_minus_delay_only", "lower_bounds_plus",
              "lower_bounds_minus", "pairings", "adaptive_duty", "nap_duty", "adaptive_time_s"});
  for (const SpeedupPoint& p : points) {
    t.add({text(p.rates.plus()), text(p.rates.minus()), text(p.plus.mean), text(p.plus.stddev),
           text(p.plus.delay_only_mean), text(p.minus.mean), text(p.minus.stddev), text(p.minus.delay_only_mean),
           std::to_string(p.plus.lower_bounds), std::to_string(p.minus.lower_bounds), std::to_string(p.pairings),
           text(p.adaptive_duty), text(p.nap_duty), text(p.adaptive_time_s)});
  }
  return t;
}

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace relax
