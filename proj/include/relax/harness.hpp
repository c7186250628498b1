#pragma once

// Simulated experiments: the adaptive loop, the non-adaptive sweep, time
// accounting and the adaptive-versus-sweep speedup study.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relax/design.hpp"
#include "relax/inference.hpp"
#include "relax/signal_model.hpp"

namespace relax {

enum class Optimizer { Nob, Pf, Nap };

std::string optimizer_name(Optimizer o);
/// Accepts "nob", "pf", "nap" (any case). Throws DomainError otherwise.
Optimizer parse_optimizer(std::string_view text);

enum class CpuOverhead { Fixed, Measured };

/// How the non-adaptive list is consumed.
enum class NapMode {
  Accumulate,  // sweep the list, sum counts per delay, recompute from a flat prior each sweep
  Sequential,  // one list entry per iteration through the adaptive update path
};

/// Width used in the likelihood of each reading.
enum class WidthMode {
  Reported,   // the estimator's sigma_M, fixed per reading
  Predicted,  // sigma_M re-evaluated at each candidate's predicted M (see ModelWidth)
};

struct HarnessTiming {
  double overhead_s = 0.0;   // T0 per iteration
  double per_shot_s = 0.0;   // fixed time per repetition
  double duty_cycle = 1.0;   // delay fraction of the acquisition; < 1 adds proportional dead time
  CpuOverhead cpu = CpuOverhead::Fixed;
  double cpu_fixed_s = 0.0;  // used when cpu == Fixed

  void validate() const;
};

/// Time of one iteration, split by origin (seconds).
struct IterationTime {
  double delay_s = 0.0;  // 2 R (tau+ + tau-)
  double dead_s = 0.0;   // duty-cycle dead time, T0 and per-shot time
  double cpu_s = 0.0;
  double without_cpu() const noexcept { return delay_s + dead_s; }
  double with_cpu() const noexcept { return delay_s + dead_s + cpu_s; }
};

IterationTime iteration_time(const DelayPair& d, std::int64_t repetitions, const HarnessTiming& t, double cpu_s);

struct ExperimentConfig {
  RatePair truth{1.0, 3.0};
  SignalParams params{};
  ProtocolSpec protocol = ProtocolSpec::robust();
  Optimizer optimizer = Optimizer::Nob;
  std::size_t iterations = 200;
  std::vector<DelayPair> nap_delays;  // empty: 20 log-spaced equal delays over 3 us..5.5 ms
  NapMode nap_mode = NapMode::Accumulate;
  DelayGrid grid{};
  Bounds prior{};
  PriorMeasure prior_measure = PriorMeasure::Uniform;
  std::size_t grid_points = 200;
  HarnessTiming timing{};
  UtilityConfig utility{};
  std::optional<DriftSchedule> drift;
  WidthMode width = WidthMode::Predicted;
  bool noiseless = false;        // expectations instead of Poisson draws
  double time_budget_s = 0.0;    // stop once cumulative time (with CPU) reaches this; 0 = no limit
  std::optional<double> stop_sigma_plus;   // sweep runs stop once both targets are met
  std::optional<double> stop_sigma_minus;
  bool keep_posterior = false;   // store the final grid in RunRecord::posterior
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::vector<DelayPair> nap_list() const;
};

/// 20 log-spaced equal delay pairs over [lo, hi] ms.
std::vector<DelayPair> default_nap_delays(double lo = 0.003, double hi = 5.5, std::size_t n = 20);

struct IterationRecord {
  std::size_t index = 0;
  DelayPair delays;
  MeasurementPair pair;
  Moments posterior;
  IterationTime time;
  double elapsed_s = 0.0;             // cumulative, with CPU overhead
  double elapsed_without_cpu_s = 0.0;
  bool estimator_failed = false;
  bool update_rejected = false;
  bool selection_fallback = false;
  bool posterior_refreshed = true;    // false inside a sweep between recomputes
};

struct RunRecord {
  Optimizer optimizer = Optimizer::Nob;
  std::uint64_t seed = 0;
  RatePair truth{1.0, 1.0};
  std::vector<IterationRecord> iterations;
  Moments final;
  double delay_time_s = 0.0;
  double total_time_s = 0.0;
  double duty_cycle = 0.0;  // delay time / total time
  std::size_t failures = 0;
  std::optional<PosteriorGrid> posterior;  // final grid when requested

  /// (elapsed time, sigma) at every refreshed posterior.
  std::vector<std::pair<double, double>> sigma_trace(Branch b, bool with_cpu = true) const;
};

/// select delays -> sample both branches -> estimate -> update -> regrid.
RunRecord run_adaptive(const ExperimentConfig& cfg);

/// The non-adaptive baseline (optimizer must be Nap).
RunRecord run_nap(const ExperimentConfig& cfg);

/// Dispatches on cfg.optimizer.
RunRecord run_experiment(const ExperimentConfig& cfg);

/// Runs cfg with seeds seed, seed+1, ... on up to `threads` workers (0 = hardware concurrency).
std::vector<RunRecord> run_replicates(const ExperimentConfig& cfg, std::size_t replicates, unsigned threads = 0);

/// Least-squares slope of log sigma against log T over the final `decades`
/// of elapsed time. NaN with fewer than three points.
double decay_exponent(const RunRecord& r, Branch b, double decades = 1.0);

/// Elapsed time at which the trace first reaches `target`, log-log
/// interpolated; nullopt when it never does.
std::optional<double> time_to_reach(const std::vector<std::pair<double, double>>& trace, double target);

struct SpeedupConfig {
  ExperimentConfig adaptive;  // optimizer Nob or Pf
  ExperimentConfig nap;       // optimizer Nap
  std::vector<RatePair> rates;
  std::size_t adaptive_replicates = 30;
  std::size_t nap_replicates = 30;
  double nap_budget_factor = 50.0;  // sweep budget in units of the longest adaptive run
  unsigned threads = 0;

  void validate() const;
};

struct SpeedupStat {
  double mean = 0.0;
  double stddev = 0.0;
  double delay_only_mean = 0.0;  // same ratio using delay time only
  std::size_t lower_bounds = 0;  // pairings where the sweep never reached the target
};

struct SpeedupPoint {
  RatePair rates{1.0, 1.0};
  SpeedupStat plus;
  SpeedupStat minus;
  std::size_t pairings = 0;
  double adaptive_duty = 0.0;
  double nap_duty = 0.0;
  double adaptive_time_s = 0.0;  // mean total
};

/// For each rate pair: every adaptive/sweep pairing gives the ratio of the
/// sweep time needed to reach the adaptive final sigma to the adaptive time.
std::vector<SpeedupPoint> speedup_study(const SpeedupConfig& cfg);

/// Named configurations: "fig2", "fig5", "fig6", "fig7". Throws
/// ConfigError for an unknown name.
ExperimentConfig preset(std::string_view name);

/// Speedup study with the wide adaptive delay grid, the 20-point sweep
/// list and duty cycles of 80.2 % (adaptive) and 89.5 % (sweep).
SpeedupConfig speedup_preset(std::vector<RatePair> rates);

}  // namespace relax
