#include <cmath>
#include <random>

#include "doctest.h"
#include "relax/errors.hpp"
#include "relax/ratio_estimator.hpp"

using namespace relax;

namespace {

SignalParams fig2_params(std::int64_t r) {
  SignalParams p;
  p.f0 = 0.02;
  p.contrast = 0.24;
  p.alpha = 0.8;
  p.eta_plus = 0.05;
  p.eta_minus = 0.05;
  p.repetitions = r;
  return p;
}

FourSignals counts(std::int64_t a1, std::int64_t a2, std::int64_t d1, std::int64_t d2) {
  FourSignals f;
  f.s1_tau.counts = a1;
  f.s2_tau.counts = a2;
  f.s1_zero.counts = d1;
  f.s2_zero.counts = d2;
  return f;
}

}  // namespace

TEST_CASE("reciprocal mode values") {
  auto [z1, s1] = reciprocal_mode(1.0, 1.0);
  CHECK(z1 == 0.5);
  // sigma_z = z^2 sigma / sqrt(2 - z D) = 0.25 / sqrt(1.5)
  CHECK(s1 == doctest::Approx(0.25 / std::sqrt(1.5)).epsilon(1e-15));
  CHECK(reciprocal_mode(3.0, 1.0).first == doctest::Approx((std::sqrt(17.0) - 3.0) / 4.0).epsilon(1e-14));
  CHECK(reciprocal_mode(3.0, 1.0).first == doctest::Approx(0.28078).epsilon(1e-4));
  CHECK(reciprocal_mode(100.0, 1.0).first == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(reciprocal_mode(4.0, 0.0).first == 0.25);
  CHECK(reciprocal_mode(4.0, 0.0).second == 0.0);
  CHECK_THROWS_AS(reciprocal_mode(0.0, 0.0), DomainError);
  CHECK_THROWS_AS(reciprocal_mode(1.0, -1.0), DomainError);
}

TEST_CASE("reciprocal mode properties") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-100.0, 100.0);
  std::uniform_real_distribution<double> lg(-3.0, 3.0);
  for (int k = 0; k < 10000; ++k) {
    const double dm = d(rng);
    const double s = std::pow(10.0, lg(rng));
    const auto [z, sz] = reciprocal_mode(dm, s);
    CHECK(z > 0.0);
    CHECK(z * dm < 1.0);
    CHECK(sz > 0.0);
    CHECK(std::isfinite(sz));
    CHECK(reciprocal_mode(dm, s * 1.1).first < z);
  }
}

TEST_CASE("estimate from counts") {
  const RatioEstimate zero_num = measurement_estimate(counts(500, 500, 1200, 800));
  CHECK(zero_num.m_bar == 0.0);
  CHECK(zero_num.sigma_m == doctest::Approx(zero_num.z_max * std::sqrt(1000.0)).epsilon(1e-15));
  CHECK(zero_num.sigma_m > 0.0);
  CHECK_THROWS_AS(measurement_estimate(counts(0, 0, 0, 0)), EstimationError);

  const RatioEstimate neg = measurement_estimate(counts(10, 5, 3, 7));
  CHECK(neg.nonpositive_denominator);
  CHECK(std::isfinite(neg.m_bar));

  // Large counts: close to A/D with first-order propagation.
  const double a1 = 4e8, a2 = 3.9e8, d1 = 5e8, d2 = 4.7e8;
  const RatioEstimate e = measurement_estimate(counts(4e8, 3.9e8, 5e8, 4.7e8));
  const double a = a1 - a2, dd = d1 - d2;
  const double lin = (a / dd) * std::sqrt((a1 + a2) / (a * a) + (d1 + d2) / (dd * dd));
  CHECK(e.m_bar == doctest::Approx(a / dd).epsilon(1e-3));
  CHECK(e.sigma_m == doctest::Approx(lin).epsilon(1e-3));
}

TEST_CASE("linear propagation limit") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double d = 1e4 * (1.0 + u(rng));
    const double vd = std::pow(d / (150.0 + 1000.0 * u(rng)), 2.0);  // D / sigma > 100
    const double a = d * (u(rng) - 0.2);
    const double va = 1e3 + 1e5 * u(rng);
    const RatioEstimate e = ratio_estimate(a, va, d, vd);
    const double m = a / d;
    const double s = std::sqrt(va / (d * d) + m * m * vd / (d * d));
    CHECK(e.m_bar == doctest::Approx(m).epsilon(1e-3).scale(1e-3));
    CHECK(e.sigma_m == doctest::Approx(s).epsilon(1e-3));
  }
}

TEST_CASE("Monte Carlo mean of the estimate at high counts") {
  const SignalParams p = fig2_params(1000000);
  const RatePair r(1.0, 3.0);
  const auto m = ProtocolSpec::robust().m_plus;
  const double tau = 0.1;
  const double truth = model_m(tau, r, Branch::Plus);
  double s = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    Rng rng = make_stream(77, k);
    s += measurement_estimate(sample_signals(m, tau, r, p, rng)).m_bar;
  }
  CHECK(std::abs(s / n / truth - 1.0) < 0.01);
}

TEST_CASE("bias study") {
  BiasStudyConfig cfg;
  cfg.params = fig2_params(1000000);
  cfg.repetitions = {1000, 1000000};
  cfg.replicates = 10000;
  cfg.seed = 4;
  const auto rows = bias_study(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(std::abs(rows[1].mean_ratio_nonlinear - 1.0) < 0.01);
  CHECK(std::abs(rows[0].mean_ratio_nonlinear - 1.0) > 0.05);
  CHECK(rows[0].zero_denominator_count > 0);
  CHECK(std::isinf(rows[0].mean_ratio_linear));
  CHECK(rows[1].zero_denominator_count == 0);

  BiasStudyConfig exact = cfg;
  exact.repetitions = {1000000};
  exact.sigma_source = SigmaSource::Exact;
  const auto ex = bias_study(exact);
  CHECK(std::abs(ex[0].mean_ratio_nonlinear - rows[1].mean_ratio_nonlinear) < 0.01);

  cfg.replicates = 10;
  CHECK_THROWS_AS(bias_study(cfg), DomainError);

  const double zt = z_true(ProtocolSpec::robust().m_plus, RatePair(1, 3), fig2_params(1000000));
  CHECK(zt == doctest::Approx(1.0 / (0.5 * 0.24 * 0.02 * 1e6 * (3 * 0.8 - 1) * 0.95)).epsilon(1e-12));
}
