#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "relax/errors.hpp"
#include "relax/harness.hpp"
#include "relax/ratio_estimator.hpp"

using namespace relax;

namespace {

ExperimentConfig quick(std::size_t iterations = 40) {
  ExperimentConfig c = preset("fig2");
  c.iterations = iterations;
  return c;
}

double cell(const std::vector<double>& axis) { return (axis.back() - axis.front()) / (axis.size() - 1); }

}  // namespace

TEST_CASE("iteration timing") {
  HarnessTiming t;
  const IterationTime a = iteration_time({0.1, 0.1}, 1000000, t, 0.0);
  CHECK(a.delay_s == doctest::Approx(400.0).epsilon(1e-15));
  CHECK(a.with_cpu() == doctest::Approx(400.0).epsilon(1e-15));
  t.duty_cycle = 0.8;
  t.overhead_s = 2.0;
  const IterationTime b = iteration_time({0.1, 0.1}, 1000000, t, 0.5);
  CHECK(b.delay_s / b.without_cpu() == doctest::Approx(400.0 / 502.0));
  CHECK(b.dead_s == doctest::Approx(102.0));
  CHECK(b.with_cpu() == doctest::Approx(502.5));

  t.duty_cycle = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("fixed overhead shifts cumulative time by the overhead sum") {
  ExperimentConfig c = quick(12);
  c.optimizer = Optimizer::Nap;
  c.nap_mode = NapMode::Sequential;
  c.nap_delays = default_nap_delays(0.05, 1.0, 6);
  const RunRecord a = run_nap(c);
  c.timing.overhead_s = 3.5;
  const RunRecord b = run_nap(c);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t k = 0; k < a.iterations.size(); ++k) {
    CHECK(b.iterations[k].elapsed_s - a.iterations[k].elapsed_s == doctest::Approx(3.5 * (k + 1)).epsilon(1e-12));
    CHECK(b.iterations[k].posterior.mean_plus == a.iterations[k].posterior.mean_plus);
  }
  for (std::size_t k = 1; k < a.iterations.size(); ++k) CHECK(a.iterations[k].elapsed_s > a.iterations[k - 1].elapsed_s);
}

TEST_CASE("configuration validation names the field") {
  ExperimentConfig c = quick();
  c.optimizer = Optimizer::Nap;
  c.nap_delays = {{0.1, 0.1}, {0.05, 0.05}};
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "nap.delays");
  }
  c.nap_mode = NapMode::Sequential;
  CHECK_NOTHROW(c.validate());

  ExperimentConfig d = quick();
  d.truth = RatePair(0.01, 3.0);
  try {
    d.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "truth");
  }
  CHECK_THROWS_AS(preset("fig9"), ConfigError);
  CHECK(parse_optimizer("NOB") == Optimizer::Nob);
  CHECK_THROWS_AS(parse_optimizer("grid"), DomainError);
  CHECK_THROWS_AS(run_nap(quick()), ConfigError);
}

TEST_CASE("adaptive run is deterministic and converges") {
  const ExperimentConfig c = quick(60);
  const RunRecord a = run_adaptive(c);
  const RunRecord b = run_adaptive(c);
  REQUIRE(a.iterations.size() == 60);
  for (std::size_t k = 0; k < a.iterations.size(); ++k) {
    CHECK(a.iterations[k].delays == b.iterations[k].delays);
    CHECK(a.iterations[k].posterior.mean_plus == b.iterations[k].posterior.mean_plus);
    CHECK(a.iterations[k].posterior.sigma_minus == b.iterations[k].posterior.sigma_minus);
  }
  CHECK(a.failures == 0);
  CHECK(std::abs(a.final.mean_plus - 1.0) < 4.0 * a.final.sigma_plus);
  CHECK(std::abs(a.final.mean_minus - 3.0) < 4.0 * a.final.sigma_minus);
  CHECK(a.final.sigma_plus < 0.2);

  // Settled delays sit within a decade of the optimum for the true rates.
  const DelayChoice best = nob_select_delays(c.truth, TimingModel{c.params.repetitions, 0.3, 0.0}, c.grid);
  const DelayPair last = a.iterations.back().delays;
  CHECK(std::abs(std::log10(last.tau_plus / best.delays.tau_plus)) < 1.0);
  CHECK(std::abs(std::log10(last.tau_minus / best.delays.tau_minus)) < 1.0);

  ExperimentConfig other = c;
  other.seed = c.seed + 1;
  CHECK(run_adaptive(other).final.mean_plus != a.final.mean_plus);
}

TEST_CASE("noiseless run reaches the truth within grid resolution in five iterations") {
  ExperimentConfig c = quick(5);
  c.noiseless = true;
  c.params.repetitions = 1000000;
  const RunRecord r = run_adaptive(c);
  REQUIRE(r.iterations.size() == 5);
  // Grid resolution after the final regrid: 20 sigma_eff over 199 cells.
  const double res_p = 20.0 * r.final.sigma_plus / 199.0 * 2.0;
  const double res_m = 20.0 * r.final.sigma_minus / 199.0 * 2.0;
  MESSAGE("noiseless final " << r.final.mean_plus << " +- " << r.final.sigma_plus << ", " << r.final.mean_minus
                             << " +- " << r.final.sigma_minus);
  CHECK(std::abs(r.final.mean_plus - 1.0) < std::max(res_p, 0.1 * r.final.sigma_plus));
  CHECK(std::abs(r.final.mean_minus - 3.0) < std::max(res_m, 0.1 * r.final.sigma_minus));
}

TEST_CASE("estimator failure flags the iteration and keeps the posterior") {
  ExperimentConfig c = quick(3);
  c.params.f0 = 1e-9;
  c.params.repetitions = 1;
  const RunRecord r = run_adaptive(c);
  const Moments prior = PosteriorGrid::prior(c.prior).moments();
  CHECK(r.failures == 3);
  for (const IterationRecord& it : r.iterations) {
    CHECK(it.estimator_failed);
    CHECK(it.posterior.mean_plus == doctest::Approx(prior.mean_plus).epsilon(1e-12));
  }
  CHECK(r.total_time_s > 0.0);
}

TEST_CASE("sweep replaying adaptive delays reproduces the adaptive posterior bit for bit") {
  const ExperimentConfig c = quick(25);
  const RunRecord a = run_adaptive(c);
  ExperimentConfig replay = c;
  replay.optimizer = Optimizer::Nap;
  replay.nap_mode = NapMode::Sequential;
  replay.nap_delays.clear();
  for (const IterationRecord& it : a.iterations) replay.nap_delays.push_back(it.delays);
  const RunRecord b = run_nap(replay);
  REQUIRE(b.iterations.size() == a.iterations.size());
  for (std::size_t k = 0; k < a.iterations.size(); ++k) {
    CHECK(b.iterations[k].pair.m_plus == a.iterations[k].pair.m_plus);
    CHECK(b.iterations[k].posterior.mean_plus == a.iterations[k].posterior.mean_plus);
    CHECK(b.iterations[k].posterior.mean_minus == a.iterations[k].posterior.mean_minus);
    CHECK(b.iterations[k].posterior.sigma_plus == a.iterations[k].posterior.sigma_plus);
    CHECK(b.iterations[k].posterior.sigma_minus == a.iterations[k].posterior.sigma_minus);
  }
}

TEST_CASE("accumulating sweep") {
  ExperimentConfig c = quick(10);
  c.optimizer = Optimizer::Nap;
  const RunRecord empty = run_nap(c);  // fewer acquisitions than one sweep
  const Moments prior = PosteriorGrid::prior(c.prior).moments();
  CHECK(empty.final.mean_plus == prior.mean_plus);
  CHECK(empty.final.sigma_minus == prior.sigma_minus);
  for (const IterationRecord& it : empty.iterations) CHECK_FALSE(it.posterior_refreshed);

  // Two noiseless sweeps against a direct posterior over aggregated expectations.
  c.iterations = 40;
  c.noiseless = true;
  const RunRecord r = run_nap(c);
  CHECK(r.iterations[19].posterior_refreshed);
  CHECK(r.iterations[39].posterior_refreshed);
  CHECK_FALSE(r.iterations[20].posterior_refreshed);
  std::vector<MeasurementPair> pairs;
  for (const DelayPair& d : default_nap_delays()) {
    SignalParams p2 = c.params;
    p2.repetitions = 2 * c.params.repetitions;
    const auto ep = expected_estimate(expected_signals(c.protocol.m_plus, d.tau_plus, c.truth, p2));
    const auto em = expected_estimate(expected_signals(c.protocol.m_minus, d.tau_minus, c.truth, p2));
    MeasurementPair pair{ep.m_bar, em.m_bar, ep.sigma_m, em.sigma_m, d.tau_plus, d.tau_minus};
    pair.width_plus = ModelWidth{ep.z_max * ep.sigma_a, ep.sigma_z / ep.z_max};
    pair.width_minus = ModelWidth{em.z_max * em.sigma_a, em.sigma_z / em.z_max};
    pairs.push_back(pair);
  }
  const double wp = 8.0 * r.final.sigma_plus, wm = 8.0 * r.final.sigma_minus;
  PosteriorGrid direct = PosteriorGrid::box(c.prior, 1.0 - wp, 1.0 + wp, 3.0 - wm, 3.0 + wm, 300);
  for (const MeasurementPair& p : pairs) direct.update(p);
  const Moments m = direct.moments();
  CHECK(r.final.mean_plus == doctest::Approx(m.mean_plus).epsilon(1e-3));
  CHECK(r.final.mean_minus == doctest::Approx(m.mean_minus).epsilon(1e-3));
  CHECK(r.final.sigma_plus == doctest::Approx(m.sigma_plus).epsilon(0.02));
  CHECK(r.final.sigma_minus == doctest::Approx(m.sigma_minus).epsilon(0.02));
}

TEST_CASE("sweep stops at the target sigma or the time budget") {
  ExperimentConfig c = quick(100000);
  c.optimizer = Optimizer::Nap;
  c.time_budget_s = 5e4;
  const RunRecord r = run_nap(c);
  CHECK(r.total_time_s >= 5e4);
  CHECK(r.total_time_s - r.iterations.back().time.with_cpu() < 5e4);
  c.time_budget_s = 0.0;
  c.stop_sigma_plus = 0.3;
  c.stop_sigma_minus = 0.6;
  const RunRecord s = run_nap(c);
  CHECK(s.final.sigma_plus <= 0.3);
  CHECK(s.final.sigma_minus <= 0.6);
  CHECK(s.iterations.back().posterior_refreshed);
}

TEST_CASE("trace helpers") {
  const std::vector<std::pair<double, double>> trace = {{1.0, 1.0}, {10.0, 0.5}, {100.0, 0.1}};
  CHECK(*time_to_reach(trace, 1.0) == 1.0);
  CHECK(*time_to_reach(trace, 0.5) == doctest::Approx(10.0));
  // Log-log interpolation between (10, 0.5) and (100, 0.1).
  const double f = std::log(0.5 / 0.2) / std::log(5.0);
  CHECK(*time_to_reach(trace, 0.2) == doctest::Approx(std::pow(10.0, 1.0 + f)).epsilon(1e-12));
  CHECK_FALSE(time_to_reach(trace, 0.05).has_value());

  RunRecord r;
  for (int k = 1; k <= 200; ++k) {
    IterationRecord it;
    it.elapsed_s = 10.0 * k;
    it.posterior.sigma_plus = 3.0 / std::sqrt(it.elapsed_s);
    it.posterior.sigma_minus = 2.0 * std::pow(it.elapsed_s, -0.4);
    r.iterations.push_back(it);
  }
  CHECK(decay_exponent(r, Branch::Plus) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(decay_exponent(r, Branch::Minus) == doctest::Approx(-0.4).epsilon(1e-12));
}

TEST_CASE("replicates are independent, seeded and order-stable") {
  const ExperimentConfig c = quick(15);
  const auto runs = run_replicates(c, 3, 2);
  REQUIRE(runs.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    ExperimentConfig one = c;
    one.seed = c.seed + k;
    const RunRecord r = run_adaptive(one);
    CHECK(runs[k].seed == one.seed);
    CHECK(runs[k].final.mean_plus == r.final.mean_plus);
  }
  CHECK(runs[0].final.mean_plus != runs[1].final.mean_plus);
}

TEST_CASE("particle-filter selection runs the same loop") {
  ExperimentConfig c = quick(20);
  c.optimizer = Optimizer::Pf;
  c.utility.particles = 3000;
  c.timing.cpu_fixed_s = 2.0;
  const RunRecord r = run_adaptive(c);
  CHECK(r.iterations.size() == 20);
  CHECK(r.failures == 0);
  CHECK(std::abs(r.final.mean_plus - 1.0) < 5.0 * r.final.sigma_plus);
  CHECK(std::abs(r.final.mean_minus - 3.0) < 5.0 * r.final.sigma_minus);
  CHECK(r.iterations[3].time.cpu_s == 2.0);
}

TEST_CASE("sweep versus adaptive at equal time budget") {
  ExperimentConfig ad = quick(40);
  std::vector<double> sa, sn;
  for (int k = 0; k < 5; ++k) {
    ad.seed = 300 + k;
    const RunRecord a = run_adaptive(ad);
    ExperimentConfig nap = ad;
    nap.optimizer = Optimizer::Nap;
    nap.iterations = 1000000;
    nap.time_budget_s = a.total_time_s;
    nap.seed = 900 + k;
    const RunRecord n = run_nap(nap);
    sa.push_back(a.final.sigma_plus + a.final.sigma_minus);
    sn.push_back(n.final.sigma_plus + n.final.sigma_minus);
  }
  std::sort(sa.begin(), sa.end());
  std::sort(sn.begin(), sn.end());
  CHECK(sn[2] > sa[2]);
}

TEST_CASE("speedup study plumbing and duty-cycle direction") {
  SpeedupConfig s = speedup_preset({RatePair(1.0, 1.0)});
  s.adaptive.params.repetitions = 100000;
  s.nap.params.repetitions = 100000;
  s.adaptive.iterations = 40;
  s.adaptive_replicates = 2;
  s.nap_replicates = 2;
  s.threads = 1;
  const auto pts = speedup_study(s);
  REQUIRE(pts.size() == 1);
  const SpeedupPoint& p = pts[0];
  CHECK(p.pairings == 4);
  CHECK(p.plus.mean > 1.0);
  CHECK(p.plus.delay_only_mean >= p.plus.mean);
  CHECK(p.minus.delay_only_mean >= p.minus.mean);
  CHECK(p.nap_duty == doctest::Approx(0.895).epsilon(1e-9));
  CHECK(p.adaptive_duty < 0.802);
  CHECK(p.adaptive_duty > 0.7);

  SpeedupConfig bad = s;
  bad.nap.optimizer = Optimizer::Nob;
  CHECK_THROWS_AS(speedup_study(bad), ConfigError);
}
