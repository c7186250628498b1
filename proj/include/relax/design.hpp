#pragma once

// Delay selection: Gaussian posterior approximation, the sensitivity cost
//
//   C(tau+, tau-) = sqrt((sigma_G+/G+)^2 + (sigma_G-/G-)^2) sqrt(T),
//
// and its minimization over a logarithmic delay grid.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "relax/inference.hpp"
#include "relax/random.hpp"
#include "relax/spin_model.hpp"

namespace relax {

struct DelayPair {
  double tau_plus = 0.0;  // ms
  double tau_minus = 0.0;

  friend bool operator==(const DelayPair&, const DelayPair&) = default;
};

/// Logarithmically spaced delays, shared by both branches.
struct DelayGrid {
  double lo = 0.003;  // ms
  double hi = 5.5;    // ms
  std::size_t n = 1000;

  std::vector<double> values() const;
  /// Throws DomainError unless 0 < lo < hi and n >= 2.
  void validate() const;

  static DelayGrid experiment() { return {}; }
  static DelayGrid wide() { return {0.001, 1000.0, 1000}; }
};

/// Acquisition time of one measurement pair,
/// T = 2 R (tau+ + tau-) + T0 + R t_shot.
struct TimingModel {
  std::int64_t repetitions = 1000000;
  double overhead_s = 0.0;  // T0
  double per_shot_s = 0.0;  // fixed time per repetition

  double delay_time_s(const DelayPair& d) const noexcept;
  double total_s(const DelayPair& d) const noexcept;
};

struct SigmaM {
  double plus = 1.0;
  double minus = 1.0;
};

struct GaussianApprox {
  double a_plus = 0.0;
  double a_minus = 0.0;
  double a_zero = 0.0;
  double sigma_gamma_plus = 0.0;
  double sigma_gamma_minus = 0.0;
  double covariance = 0.0;
};

/// Curvature coefficients a+-, a0 of the chi-square surface and the implied
/// rate covariance. Throws UninformativeDesign when the two measurements do
/// not constrain both rates.
GaussianApprox gaussian_sigma(const DelayPair& delays, const RatePair& rates, SigmaM sigma_m,
                              const ModelPair& models = ModelPair::robust());

/// Same covariance through J^-1 diag(sigma_M^2) J^-T.
GaussianApprox gaussian_sigma_jacobian(const DelayPair& delays, const RatePair& rates, SigmaM sigma_m,
                                       const ModelPair& models = ModelPair::robust());

/// Infinite when the design is uninformative.
double cost(const DelayPair& delays, const RatePair& rates, SigmaM sigma_m, const TimingModel& timing,
            const ModelPair& models = ModelPair::robust());

/// Delay-dependent measurement uncertainty for the full cost.
using SigmaFn = std::function<double(double tau)>;

struct DelayChoice {
  DelayPair delays;
  double cost = 0.0;  // value of the minimized cost (or utility for the particle path)
  std::size_t index_plus = 0;
  std::size_t index_minus = 0;
  bool fallback = false;  // particle path fell back to the closed-form selector
};

/// Exhaustive minimization of the full cost with sigma_M(tau) per branch.
/// Ties resolve to the smallest tau+, then the smallest tau-.
DelayChoice minimize_cost(const RatePair& rates, const SigmaFn& sigma_plus, const SigmaFn& sigma_minus,
                          const TimingModel& timing, const DelayGrid& grid,
                          const ModelPair& models = ModelPair::robust());

/// Closed-form selector: the cost with sigma_M+ = sigma_M- = 1 at the
/// posterior means. The reported cost is C / sigma_M.
DelayChoice nob_select_delays(const Moments& posterior, const TimingModel& timing, const DelayGrid& grid,
                              const ModelPair& models = ModelPair::robust());
DelayChoice nob_select_delays(const RatePair& rates, const TimingModel& timing, const DelayGrid& grid,
                              const ModelPair& models = ModelPair::robust());

struct ParticleCloud {
  std::vector<double> gamma_plus;
  std::vector<double> gamma_minus;
  std::vector<double> weight;  // sums to 1

  std::size_t size() const noexcept { return weight.size(); }
  Moments moments() const noexcept;
  /// All particles at the same rates.
  bool degenerate() const noexcept;
};

/// n particles drawn from the grid weights, jittered uniformly inside the
/// drawn cell, equal weights.
ParticleCloud sample_cloud(const PosteriorGrid& grid, std::size_t n, Rng& rng);

struct UtilityConfig {
  std::size_t particles = 100000;
  SigmaM sigma_m{0.1, 0.1};  // expected measurement noise in the utility
  double scale = 1.0;        // positive constant multiplying the utility
};

/// Argmax over the delay grid of
///   [ ln(1 + V+(tau+)/sigma+^2) + ln(1 + V-(tau-)/sigma-^2) ] / 2 / sqrt(T),
/// with V the variance of the model over the cloud. A degenerate cloud falls
/// back to nob_select_delays at the cloud mean.
DelayChoice pf_select_delays(const ParticleCloud& cloud, const TimingModel& timing, const DelayGrid& grid,
                             const UtilityConfig& cfg, const ModelPair& models = ModelPair::robust());

}  // namespace relax
