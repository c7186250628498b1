#include "relax/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "relax/errors.hpp"
#include "relax/ratio_estimator.hpp"

namespace relax {

namespace {

using Clock = std::chrono::steady_clock;

void add_into(SignalSample& acc, const SignalSample& s) {
  acc.counts += s.counts;
  acc.expectation += s.expectation;
  acc.tau = s.tau;
  acc.signal = s.signal;
}

void add_into(FourSignals& acc, const FourSignals& s) {
  add_into(acc.s1_tau, s.s1_tau);
  add_into(acc.s2_tau, s.s2_tau);
  add_into(acc.s1_zero, s.s1_zero);
  add_into(acc.s2_zero, s.s2_zero);
}

struct Acquisition {
  FourSignals plus;
  FourSignals minus;
};

// Both branches of iteration n. The random stream depends only on (seed, n),
// so any two loops that acquire the same delays at the same n see the same noise.
Acquisition acquire(const ExperimentConfig& cfg, const DelayPair& d, std::size_t n, double elapsed_s) {
  Acquisition a;
  if (cfg.noiseless) {
    a.plus = expected_signals(cfg.protocol.m_plus, d.tau_plus, cfg.truth, cfg.params);
    a.minus = expected_signals(cfg.protocol.m_minus, d.tau_minus, cfg.truth, cfg.params);
    return a;
  }
  Rng rng = make_stream(cfg.seed, n);
  const DriftSchedule* drift = cfg.drift ? &*cfg.drift : nullptr;
  const double duty = cfg.timing.duty_cycle;
  AcquisitionClock clock;
  clock.t_start = elapsed_s;
  clock.rep_duration = 2.0 * d.tau_plus * 1e-3 / duty;
  a.plus = sample_signals(cfg.protocol.m_plus, d.tau_plus, cfg.truth, cfg.params, rng, drift, clock);
  clock.t_start += clock.rep_duration * static_cast<double>(cfg.params.repetitions);
  clock.rep_duration = 2.0 * d.tau_minus * 1e-3 / duty;
  a.minus = sample_signals(cfg.protocol.m_minus, d.tau_minus, cfg.truth, cfg.params, rng, drift, clock);
  return a;
}

// Throws EstimationError when either branch has no usable counts.
MeasurementPair estimate(const ExperimentConfig& cfg, const FourSignals& plus, const FourSignals& minus,
                         const DelayPair& d) {
  const RatioEstimate ep = cfg.noiseless ? expected_estimate(plus) : measurement_estimate(plus);
  const RatioEstimate em = cfg.noiseless ? expected_estimate(minus) : measurement_estimate(minus);
  MeasurementPair pair{ep.m_bar, em.m_bar, ep.sigma_m, em.sigma_m, d.tau_plus, d.tau_minus, std::nullopt, std::nullopt};
  if (cfg.width == WidthMode::Predicted) {
    pair.width_plus = ModelWidth{ep.z_max * ep.sigma_a, ep.sigma_z / ep.z_max};
    pair.width_minus = ModelWidth{em.z_max * em.sigma_a, em.sigma_z / em.z_max};
  }
  return pair;
}

PosteriorGrid flat_prior(const ExperimentConfig& cfg, double plo, double phi, double mlo, double mhi) {
  const std::size_t n = cfg.grid_points;
  std::vector<double> px = linear_axis(plo, phi, n);
  std::vector<double> mx = linear_axis(mlo, mhi, n);
  std::vector<double> w(n * n, 1.0);
  if (cfg.prior_measure == PriorMeasure::LogUniform) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i * n + j] = 1.0 / (px[i] * mx[j]);
  }
  return PosteriorGrid(std::move(px), std::move(mx), std::move(w), cfg.prior);
}

PosteriorGrid initial_grid(const ExperimentConfig& cfg) {
  return flat_prior(cfg, cfg.prior.lo, cfg.prior.hi, cfg.prior.lo, cfg.prior.hi);
}

RunRecord start_record(const ExperimentConfig& cfg) {
  RunRecord r;
  r.optimizer = cfg.optimizer;
  r.seed = cfg.seed;
  r.truth = cfg.truth;
  return r;
}

void finish_record(RunRecord& r, const Moments& final_moments) {
  r.final = final_moments;
  r.duty_cycle = r.total_time_s > 0.0 ? r.delay_time_s / r.total_time_s : 0.0;
}

bool budget_spent(const ExperimentConfig& cfg, const RunRecord& r) {
  return cfg.time_budget_s > 0.0 && r.total_time_s >= cfg.time_budget_s;
}

using Selector = std::function<DelayChoice(const PosteriorGrid&, std::size_t n, double t0_s)>;

// The shared sequential loop: select, acquire, estimate, update, regrid.
RunRecord sequential_loop(const ExperimentConfig& cfg, const Selector& select) {
  RunRecord rec = start_record(cfg);
  PosteriorGrid grid = initial_grid(cfg);
  const ModelPair models = model_pair(cfg.protocol, cfg.params);
  double last_dead = cfg.timing.overhead_s + cfg.timing.cpu_fixed_s;

  for (std::size_t n = 0; n < cfg.iterations && !budget_spent(cfg, rec); ++n) {
    IterationRecord it;
    it.index = n;
    const auto t_start = Clock::now();
    const DelayChoice choice = select(grid, n, last_dead);
    const double measured = std::chrono::duration<double>(Clock::now() - t_start).count();
    const double cpu = cfg.timing.cpu == CpuOverhead::Measured ? measured : cfg.timing.cpu_fixed_s;
    it.delays = choice.delays;
    it.selection_fallback = choice.fallback;
    it.time = iteration_time(choice.delays, cfg.params.repetitions, cfg.timing, cpu);

    const Acquisition a = acquire(cfg, choice.delays, n, rec.total_time_s + cpu);
    try {
      it.pair = estimate(cfg, a.plus, a.minus, choice.delays);
      try {
        grid.update(it.pair, models);
        grid.regrid(cfg.grid_points);
      } catch (const UpdateRejected&) {
        it.update_rejected = true;
      }
    } catch (const EstimationError&) {
      it.estimator_failed = true;
      it.pair.tau_plus = choice.delays.tau_plus;
      it.pair.tau_minus = choice.delays.tau_minus;
    }
    if (it.estimator_failed || it.update_rejected) ++rec.failures;

    rec.delay_time_s += it.time.delay_s;
    rec.total_time_s += it.time.with_cpu();
    it.elapsed_s = rec.total_time_s;
    it.elapsed_without_cpu_s = (rec.iterations.empty() ? 0.0 : rec.iterations.back().elapsed_without_cpu_s) +
                               it.time.without_cpu();
    it.posterior = grid.moments();
    rec.iterations.push_back(it);
    last_dead = cfg.timing.overhead_s + cpu;
  }
  finish_record(rec, grid.moments());
  if (cfg.keep_posterior) rec.posterior = std::move(grid);
  return rec;
}

struct Box {
  double plo, phi, mlo, mhi;
};

Box span_box(const Moments& m, const PosteriorGrid& g, Bounds hard) {
  auto span = [&](double mean, double sigma, const std::vector<double>& axis) {
    const double cell = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
    const double resolved = std::sqrt(sigma * sigma + cell * cell / 12.0);
    const double half = std::max(10.0 * resolved, 2.0 * cell);
    double lo = std::max(mean - half, hard.lo);
    double hi = std::min(mean + half, hard.hi);
    if (!(hi > lo)) {
      lo = std::max(hard.lo, hi - 2.0 * cell);
      hi = std::min(hard.hi, lo + 2.0 * cell);
    }
    return std::pair{lo, hi};
  };
  const auto [plo, phi] = span(m.mean_plus, m.sigma_plus, g.plus_axis());
  const auto [mlo, mhi] = span(m.mean_minus, m.sigma_minus, g.minus_axis());
  return {plo, phi, mlo, mhi};
}

bool box_stable(const Box& a, const Box& b) {
  const double wp = a.phi - a.plo, wm = a.mhi - a.mlo;
  return std::abs(a.plo - b.plo) < 0.05 * wp && std::abs(a.phi - b.phi) < 0.05 * wp &&
         std::abs(a.mlo - b.mlo) < 0.05 * wm && std::abs(a.mhi - b.mhi) < 0.05 * wm;
}

// Fresh flat prior times all aggregated pairs, zooming the box onto the
// posterior until it stops moving.
PosteriorGrid recompute(const ExperimentConfig& cfg, const std::vector<MeasurementPair>& pairs,
                        const ModelPair& models, Box& box) {
  PosteriorGrid g = flat_prior(cfg, box.plo, box.phi, box.mlo, box.mhi);
  for (int pass = 0; pass < 12; ++pass) {
    g = flat_prior(cfg, box.plo, box.phi, box.mlo, box.mhi);
    g.update_batch(pairs, models);
    const Box next = span_box(g.moments(), g, cfg.prior);
    if (box_stable(box, next)) break;
    box = next;
  }
  return g;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::Nob: return "nob";
    case Optimizer::Pf: return "pf";
    case Optimizer::Nap: return "nap";
  }
  return "?";
}

Optimizer parse_optimizer(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "nob") return Optimizer::Nob;
  if (t == "pf" || t == "obe") return Optimizer::Pf;
  if (t == "nap") return Optimizer::Nap;
  throw DomainError("unknown optimizer '" + std::string(text) + "' (expected nob, pf or nap)");
}

void HarnessTiming::validate() const {
  if (!(overhead_s >= 0.0) || !std::isfinite(overhead_s)) throw ConfigError("timing.overhead", "must be >= 0");
  if (!(per_shot_s >= 0.0) || !std::isfinite(per_shot_s)) throw ConfigError("timing.per_shot", "must be >= 0");
  if (!(duty_cycle > 0.0 && duty_cycle <= 1.0)) throw ConfigError("timing.duty_cycle", "must lie in (0, 1]");
  if (!(cpu_fixed_s >= 0.0) || !std::isfinite(cpu_fixed_s)) throw ConfigError("timing.cpu_fixed", "must be >= 0");
}

IterationTime iteration_time(const DelayPair& d, std::int64_t repetitions, const HarnessTiming& t, double cpu_s) {
  IterationTime it;
  it.delay_s = 2.0 * static_cast<double>(repetitions) * (d.tau_plus + d.tau_minus) * 1e-3;
  it.dead_s = it.delay_s * (1.0 / t.duty_cycle - 1.0) + t.overhead_s + static_cast<double>(repetitions) * t.per_shot_s;
  it.cpu_s = cpu_s;
  return it;
}

std::vector<DelayPair> default_nap_delays(double lo, double hi, std::size_t n) {
  std::vector<DelayPair> out;
  const DelayGrid g{lo, hi, n};
  for (double t : g.values()) out.push_back({t, t});
  return out;
}

std::vector<DelayPair> ExperimentConfig::nap_list() const {
  return nap_delays.empty() ? default_nap_delays() : nap_delays;
}

void ExperimentConfig::validate() const {
  try {
    params.validate();
  } catch (const DomainError& e) {
    throw ConfigError("signal", e.what());
  }
  if (params.repetitions < 1) throw ConfigError("signal.repetitions", "must be >= 1");
  timing.validate();
  try {
    grid.validate();
  } catch (const DomainError& e) {
    throw ConfigError("delay_grid", e.what());
  }
  if (!(prior.lo > 0.0 && prior.hi > prior.lo)) throw ConfigError("prior", "need 0 < lo < hi");
  if (!(truth.plus() >= prior.lo && truth.plus() <= prior.hi && truth.minus() >= prior.lo &&
        truth.minus() <= prior.hi)) {
    throw ConfigError("truth", "true rates lie outside the prior bounds");
  }
  if (grid_points < 2) throw ConfigError("prior.points", "must be >= 2");
  if (!(time_budget_s >= 0.0)) throw ConfigError("stop.time_budget", "must be >= 0");
  if (optimizer == Optimizer::Pf && utility.particles < 2) throw ConfigError("pf.particles", "must be >= 2");
  if (optimizer == Optimizer::Nap) {
    const auto list = nap_list();
    if (list.empty()) throw ConfigError("nap.delays", "empty");
    for (const DelayPair& d : list)
      if (!(d.tau_plus > 0.0 && d.tau_minus > 0.0)) throw ConfigError("nap.delays", "delays must be positive");
    if (nap_mode == NapMode::Accumulate) {
      for (std::size_t k = 1; k < list.size(); ++k) {
        if (!(list[k].tau_plus > list[k - 1].tau_plus && list[k].tau_minus > list[k - 1].tau_minus)) {
          throw ConfigError("nap.delays", "must be strictly increasing");
        }
      }
    }
  }
}

std::vector<std::pair<double, double>> RunRecord::sigma_trace(Branch b, bool with_cpu) const {
  std::vector<std::pair<double, double>> out;
  for (const IterationRecord& it : iterations) {
    if (!it.posterior_refreshed) continue;
    const double s = b == Branch::Plus ? it.posterior.sigma_plus : it.posterior.sigma_minus;
    out.emplace_back(with_cpu ? it.elapsed_s : it.elapsed_without_cpu_s, s);
  }
  return out;
}

RunRecord run_adaptive(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.optimizer == Optimizer::Nap) throw ConfigError("optimizer", "run_adaptive needs nob or pf");
  const ModelPair models = model_pair(cfg.protocol, cfg.params);
  auto timing_for = [&](double t0) {
    return TimingModel{cfg.params.repetitions, t0, cfg.timing.per_shot_s};
  };
  if (cfg.optimizer == Optimizer::Nob) {
    return sequential_loop(cfg, [&](const PosteriorGrid& g, std::size_t, double t0) {
      return nob_select_delays(g.moments(), timing_for(t0), cfg.grid, models);
    });
  }
  // Particle path: a separate stream family so acquisitions match the NOB loop's.
  return sequential_loop(cfg, [&](const PosteriorGrid& g, std::size_t n, double t0) {
    Rng rng = make_stream(cfg.seed ^ 0x9E3779B97F4A7C15ull, n);
    const ParticleCloud cloud = sample_cloud(g, cfg.utility.particles, rng);
    return pf_select_delays(cloud, timing_for(t0), cfg.grid, cfg.utility, models);
  });
}

RunRecord run_nap(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.optimizer != Optimizer::Nap) throw ConfigError("optimizer", "run_nap needs nap");
  const std::vector<DelayPair> list = cfg.nap_list();

  if (cfg.nap_mode == NapMode::Sequential) {
    return sequential_loop(cfg, [&](const PosteriorGrid&, std::size_t n, double) {
      DelayChoice c;
      c.delays = list[n % list.size()];
      return c;
    });
  }

  RunRecord rec = start_record(cfg);
  const ModelPair models = model_pair(cfg.protocol, cfg.params);
  std::vector<FourSignals> acc_plus(list.size()), acc_minus(list.size());
  std::vector<bool> seen(list.size(), false);
  Box box{cfg.prior.lo, cfg.prior.hi, cfg.prior.lo, cfg.prior.hi};
  Moments current = initial_grid(cfg).moments();
  double without_cpu = 0.0;

  for (std::size_t n = 0; n < cfg.iterations && !budget_spent(cfg, rec); ++n) {
    const std::size_t k = n % list.size();
    IterationRecord it;
    it.index = n;
    it.delays = list[k];
    it.time = iteration_time(it.delays, cfg.params.repetitions, cfg.timing, 0.0);
    const Acquisition a = acquire(cfg, it.delays, n, rec.total_time_s);
    add_into(acc_plus[k], a.plus);
    add_into(acc_minus[k], a.minus);
    seen[k] = true;
    try {
      it.pair = estimate(cfg, a.plus, a.minus, it.delays);
    } catch (const EstimationError&) {
      it.estimator_failed = true;
      it.pair.tau_plus = it.delays.tau_plus;
      it.pair.tau_minus = it.delays.tau_minus;
    }

    it.posterior_refreshed = false;
    if (k + 1 == list.size()) {
      std::vector<MeasurementPair> pairs;
      for (std::size_t j = 0; j < list.size(); ++j) {
        if (!seen[j]) continue;
        try {
          pairs.push_back(estimate(cfg, acc_plus[j], acc_minus[j], list[j]));
        } catch (const EstimationError&) {
        }
      }
      if (pairs.empty()) {
        it.estimator_failed = true;
      } else {
        try {
          PosteriorGrid g = recompute(cfg, pairs, models, box);
          current = g.moments();
          if (cfg.keep_posterior) rec.posterior = std::move(g);
          it.posterior_refreshed = true;
        } catch (const UpdateRejected&) {
          it.update_rejected = true;
        }
      }
    }
    if (it.estimator_failed || it.update_rejected) ++rec.failures;
    rec.delay_time_s += it.time.delay_s;
    rec.total_time_s += it.time.with_cpu();
    without_cpu += it.time.without_cpu();
    it.elapsed_s = rec.total_time_s;
    it.elapsed_without_cpu_s = without_cpu;
    it.posterior = current;
    rec.iterations.push_back(it);

    if (it.posterior_refreshed && cfg.stop_sigma_plus && cfg.stop_sigma_minus &&
        current.sigma_plus <= *cfg.stop_sigma_plus && current.sigma_minus <= *cfg.stop_sigma_minus) {
      break;
    }
  }
  if (cfg.keep_posterior && !rec.posterior) rec.posterior = initial_grid(cfg);
  finish_record(rec, current);
  return rec;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  return cfg.optimizer == Optimizer::Nap ? run_nap(cfg) : run_adaptive(cfg);
}

std::vector<RunRecord> run_replicates(const ExperimentConfig& cfg, std::size_t replicates, unsigned threads) {
  std::vector<RunRecord> out(replicates);
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(replicates, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto work = [&] {
    for (std::size_t k = next++; k < replicates; k = next++) {
      try {
        ExperimentConfig c = cfg;
        c.seed = cfg.seed + k;
        out[k] = run_experiment(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double decay_exponent(const RunRecord& r, Branch b, double decades) {
  const auto trace = r.sigma_trace(b);
  if (trace.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double t_end = trace.back().first;
  const double t_from = t_end / std::pow(10.0, decades);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& [t, s] : trace) {
    if (t < t_from || !(s > 0.0) || !(t > 0.0)) continue;
    const double x = std::log(t), y = std::log(s);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

std::optional<double> time_to_reach(const std::vector<std::pair<double, double>>& trace, double target) {
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (!(trace[k].second <= target)) continue;
    if (k == 0) return trace[0].first;
    const auto [t0, s0] = trace[k - 1];
    const auto [t1, s1] = trace[k];
    if (!(s0 > s1) || !(s1 > 0.0) || !(t0 > 0.0)) return t1;
    const double f = std::log(s0 / target) / std::log(s0 / s1);
    return std::exp(std::log(t0) + f * std::log(t1 / t0));
  }
  return std::nullopt;
}

void SpeedupConfig::validate() const {
  if (adaptive.optimizer == Optimizer::Nap) throw ConfigError("adaptive.optimizer", "must be nob or pf");
  if (nap.optimizer != Optimizer::Nap) throw ConfigError("nap.optimizer", "must be nap");
  if (nap.nap_mode != NapMode::Accumulate) throw ConfigError("nap.mode", "speedup needs the accumulating sweep");
  if (rates.empty()) throw ConfigError("rates", "no rate points");
  if (adaptive_replicates < 1 || nap_replicates < 1) throw ConfigError("replicates", "must be >= 1");
  if (!(nap_budget_factor > 1.0)) throw ConfigError("nap_budget_factor", "must exceed 1");
}

std::vector<SpeedupPoint> speedup_study(const SpeedupConfig& cfg) {
  cfg.validate();
  std::vector<SpeedupPoint> out;
  for (std::size_t r = 0; r < cfg.rates.size(); ++r) {
    ExperimentConfig ad = cfg.adaptive;
    ad.truth = cfg.rates[r];
    ad.seed = cfg.adaptive.seed + 100000 * r;
    const auto adaptive = run_replicates(ad, cfg.adaptive_replicates, cfg.threads);

    double min_sp = std::numeric_limits<double>::infinity(), min_sm = min_sp, max_t = 0.0;
    for (const RunRecord& a : adaptive) {
      min_sp = std::min(min_sp, a.final.sigma_plus);
      min_sm = std::min(min_sm, a.final.sigma_minus);
      max_t = std::max(max_t, a.total_time_s);
    }
    ExperimentConfig nap = cfg.nap;
    nap.truth = cfg.rates[r];
    nap.seed = cfg.nap.seed + 100000 * r + 50000;
    nap.stop_sigma_plus = min_sp;
    nap.stop_sigma_minus = min_sm;
    nap.time_budget_s = cfg.nap_budget_factor * max_t;
    nap.iterations = std::numeric_limits<std::size_t>::max();
    const auto sweeps = run_replicates(nap, cfg.nap_replicates, cfg.threads);

    SpeedupPoint p;
    p.rates = cfg.rates[r];
    std::vector<double> rp, rm, dp, dm;
    double ad_duty = 0.0, nap_duty = 0.0, ad_time = 0.0;
    for (const RunRecord& a : adaptive) {
      ad_duty += a.duty_cycle;
      ad_time += a.total_time_s;
    }
    for (const RunRecord& s : sweeps) nap_duty += s.duty_cycle;
    for (const RunRecord& a : adaptive) {
      for (const RunRecord& s : sweeps) {
        for (Branch b : {Branch::Plus, Branch::Minus}) {
          const double target = b == Branch::Plus ? a.final.sigma_plus : a.final.sigma_minus;
          const auto reached = time_to_reach(s.sigma_trace(b), target);
          const double t = reached ? *reached : s.total_time_s;
          const double ratio = t / a.total_time_s;
          const double delay_ratio = ratio * s.duty_cycle / a.duty_cycle;
          SpeedupStat& st = b == Branch::Plus ? p.plus : p.minus;
          if (!reached) ++st.lower_bounds;
          (b == Branch::Plus ? rp : rm).push_back(ratio);
          (b == Branch::Plus ? dp : dm).push_back(delay_ratio);
        }
      }
    }
    auto fill = [](SpeedupStat& st, const std::vector<double>& v, const std::vector<double>& d) {
      st.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      st.stddev = sample_std(v, st.mean);
      st.delay_only_mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    };
    fill(p.plus, rp, dp);
    fill(p.minus, rm, dm);
    p.pairings = adaptive.size() * sweeps.size();
    p.adaptive_duty = ad_duty / static_cast<double>(adaptive.size());
    p.nap_duty = nap_duty / static_cast<double>(sweeps.size());
    p.adaptive_time_s = ad_time / static_cast<double>(adaptive.size());
    out.push_back(p);
  }
  return out;
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.truth = RatePair(1.0, 3.0);
  c.params = SignalParams{};  // f0 0.02, C 0.24, alpha 0.8, eta 0.05, b 0, R 1e6
  c.params.repetitions = 1000000;
  c.protocol = ProtocolSpec::robust();
  c.optimizer = Optimizer::Nob;
  c.grid = DelayGrid::experiment();
  c.prior = Bounds{0.055, 100.0};
  c.timing.cpu = CpuOverhead::Fixed;
  c.timing.cpu_fixed_s = 0.3;
  c.iterations = 200;
  if (name == "fig2" || name == "fig6") return c;
  if (name == "fig5") {
    c.grid = DelayGrid::wide();
    c.prior = Bounds{0.005, 300.0};
    c.timing.duty_cycle = 0.802;
    c.iterations = 100;
    return c;
  }
  if (name == "fig7") {
    c.params = SignalParams::ideal();
    c.protocol = ProtocolSpec::optimal();
    c.timing = HarnessTiming{};
    return c;
  }
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "' (expected fig2, fig5, fig6 or fig7)");
}

SpeedupConfig speedup_preset(std::vector<RatePair> rates) {
  SpeedupConfig s;
  s.adaptive = preset("fig5");
  s.nap = preset("fig5");
  s.nap.optimizer = Optimizer::Nap;
  s.nap.nap_mode = NapMode::Accumulate;
  s.nap.nap_delays = default_nap_delays();
  s.nap.timing.duty_cycle = 0.895;
  s.nap.timing.cpu_fixed_s = 0.0;
  s.rates = std::move(rates);
  return s;
}

}  // namespace relax
