#pragma once

// Estimate of the normalized measurement M = A / Delta from four raw signals,
// A = S1(tau) - S2(tau), Delta = S1(0) - S2(0), with the denominator replaced
// by the mode of the reciprocal distribution.

#include <cstdint>
#include <utility>
#include <vector>

#include "relax/signal_model.hpp"

namespace relax {

struct RatioEstimate {
  double m_bar = 0.0;
  double sigma_m = 0.0;
  double z_max = 0.0;
  double sigma_z = 0.0;
  double sigma_a = 0.0;
  double numerator_a = 0.0;
  double denominator_delta = 0.0;
  bool nonpositive_denominator = false;  // sampled Delta <= 0 (still evaluated)
};

/// Mode and width of P(Z) for Z = 1/Delta with Delta ~ N(delta_mean, delta_sigma^2):
///   z = (sqrt(D^2 + 8 s^2) - D) / (4 s^2),  sigma_z = z^2 s / sqrt(2 - z D).
/// delta_sigma = 0 gives (1/D, 0). Throws DomainError for negative sigma or
/// sigma = 0 with D = 0.
std::pair<double, double> reciprocal_mode(double delta_mean, double delta_sigma);

/// Core estimator on numerator/denominator moments.
RatioEstimate ratio_estimate(double a, double var_a, double delta, double var_delta);

/// Shot-noise estimate from counts: var = counts per signal. A pair of zero
/// counts uses variance 1 instead of 0. All four counts zero raises
/// EstimationError.
RatioEstimate measurement_estimate(const FourSignals& s);

/// Same propagation applied to expected counts (deterministic sigma_M).
RatioEstimate expected_estimate(const FourSignals& s);

/// Naive 1/Delta.
double linear_reciprocal(double delta) noexcept;

enum class SigmaSource { Observed, Exact };

struct BiasStudyConfig {
  SignalParams params;
  RatePair rates{1.0, 3.0};
  MeasurementSpec measurement = ProtocolSpec::robust().m_plus;
  std::vector<std::int64_t> repetitions;  // R sweep
  std::int64_t replicates = 10000;
  std::uint64_t seed = 1;
  SigmaSource sigma_source = SigmaSource::Observed;
};

struct BiasRow {
  std::int64_t repetitions = 0;
  double mean_ratio_nonlinear = 0.0;  // mean(Z) / Z_true
  double std_nonlinear = 0.0;
  double mean_ratio_linear = 0.0;     // mean(1/Delta) / Z_true; inf once a zero occurred
  double std_linear = 0.0;
  std::int64_t zero_denominator_count = 0;
  std::int64_t nonpositive_count = 0;
};

/// Z_true = 1 / expected Delta for the measurement at R.
double z_true(const MeasurementSpec& m, const RatePair& rates, const SignalParams& params);

/// Monte Carlo of the two reciprocal estimators; replicate k of row r draws
/// from stream (seed, r * replicates + k). Throws DomainError for fewer than
/// 1000 replicates.
std::vector<BiasRow> bias_study(const BiasStudyConfig& cfg);

}  // namespace relax
