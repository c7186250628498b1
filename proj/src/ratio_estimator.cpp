#include "relax/ratio_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relax/errors.hpp"

namespace relax {

std::pair<double, double> reciprocal_mode(double delta_mean, double delta_sigma) {
  if (!std::isfinite(delta_mean) || !std::isfinite(delta_sigma) || delta_sigma < 0.0) {
    throw DomainError("reciprocal_mode needs finite inputs and sigma >= 0");
  }
  if (delta_sigma == 0.0) {
    if (delta_mean == 0.0) throw DomainError("reciprocal of an exact zero denominator");
    return {1.0 / delta_mean, 0.0};
  }
  const double var = delta_sigma * delta_sigma;
  const double root = std::sqrt(delta_mean * delta_mean + 8.0 * var);
  // Rationalized for D > 0 so that the small-noise limit keeps its digits.
  const double z = delta_mean > 0.0 ? 2.0 / (root + delta_mean) : (root - delta_mean) / (4.0 * var);
  const double sz = z * z * delta_sigma / std::sqrt(2.0 - z * delta_mean);
  return {z, sz};
}

RatioEstimate ratio_estimate(double a, double var_a, double delta, double var_delta) {
  const auto [z, sz] = reciprocal_mode(delta, std::sqrt(var_delta));
  RatioEstimate e;
  e.numerator_a = a;
  e.denominator_delta = delta;
  e.z_max = z;
  e.sigma_z = sz;
  e.sigma_a = std::sqrt(var_a);
  e.m_bar = a * z;
  e.sigma_m = std::sqrt(z * z * var_a + a * a * sz * sz);
  e.nonpositive_denominator = delta <= 0.0;
  return e;
}

RatioEstimate measurement_estimate(const FourSignals& s) {
  const std::int64_t ta = s.s1_tau.counts + s.s2_tau.counts;
  const std::int64_t td = s.s1_zero.counts + s.s2_zero.counts;
  if (ta == 0 && td == 0) throw EstimationError("all four signals have zero counts");
  const double a = static_cast<double>(s.s1_tau.counts - s.s2_tau.counts);
  const double d = static_cast<double>(s.s1_zero.counts - s.s2_zero.counts);
  const double var_a = ta > 0 ? static_cast<double>(ta) : 1.0;
  const double var_d = td > 0 ? static_cast<double>(td) : 1.0;
  return ratio_estimate(a, var_a, d, var_d);
}

RatioEstimate expected_estimate(const FourSignals& s) {
  const double a = s.s1_tau.expectation - s.s2_tau.expectation;
  const double d = s.s1_zero.expectation - s.s2_zero.expectation;
  const double var_a = s.s1_tau.expectation + s.s2_tau.expectation;
  const double var_d = s.s1_zero.expectation + s.s2_zero.expectation;
  if (!(d > 0.0)) throw EstimationError("expected denominator is not positive");
  // Noiseless value A/Delta with the shot-noise width the estimator would report.
  RatioEstimate e = ratio_estimate(a, var_a, d, var_d);
  e.m_bar = a / d;
  return e;
}

double linear_reciprocal(double delta) noexcept {
  return delta == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / delta;
}

double z_true(const MeasurementSpec& m, const RatePair& rates, const SignalParams& params) {
  return 1.0 / expected_difference(m, 0.0, rates, params);
}

std::vector<BiasRow> bias_study(const BiasStudyConfig& cfg) {
  if (cfg.replicates < 1000) throw DomainError("bias_study needs at least 1000 replicates");
  std::vector<BiasRow> rows;
  rows.reserve(cfg.repetitions.size());
  for (std::size_t r = 0; r < cfg.repetitions.size(); ++r) {
    SignalParams p = cfg.params;
    p.repetitions = cfg.repetitions[r];
    p.validate();
    const double mu1 = expected_counts(cfg.measurement.s1, 0.0, cfg.rates, p);
    const double mu2 = expected_counts(cfg.measurement.s2, 0.0, cfg.rates, p);
    const double zt = 1.0 / (mu1 - mu2);
    const double exact_sigma = std::sqrt(mu1 + mu2);

    double sn = 0.0, sn2 = 0.0, sl = 0.0, sl2 = 0.0;
    BiasRow row;
    row.repetitions = p.repetitions;
    for (std::int64_t k = 0; k < cfg.replicates; ++k) {
      Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(r) * cfg.replicates + k);
      const std::int64_t c1 = poisson(mu1, rng);
      const std::int64_t c2 = poisson(mu2, rng);
      const double d = static_cast<double>(c1 - c2);
      double sigma = cfg.sigma_source == SigmaSource::Exact ? exact_sigma
                                                            : std::sqrt(static_cast<double>(c1 + c2));
      if (sigma == 0.0) sigma = 1.0;
      const double zn = reciprocal_mode(d, sigma).first / zt;
      const double zl = linear_reciprocal(d) / zt;
      sn += zn;
      sn2 += zn * zn;
      sl += zl;
      sl2 += zl * zl;
      if (d == 0.0) ++row.zero_denominator_count;
      if (d <= 0.0) ++row.nonpositive_count;
    }
    const double n = static_cast<double>(cfg.replicates);
    row.mean_ratio_nonlinear = sn / n;
    row.std_nonlinear = std::sqrt(std::max(0.0, sn2 / n - row.mean_ratio_nonlinear * row.mean_ratio_nonlinear));
    row.mean_ratio_linear = sl / n;
    row.std_linear = row.zero_denominator_count > 0
                         ? std::numeric_limits<double>::infinity()
                         : std::sqrt(std::max(0.0, sl2 / n - row.mean_ratio_linear * row.mean_ratio_linear));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace relax
