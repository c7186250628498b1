#pragma once

// Grid posterior over (Gamma+, Gamma-) with sequential Bayes updates.

#include <cstddef>
#include <optional>
#include <vector>

#include "relax/spin_model.hpp"

namespace relax {

/// Width evaluated at the candidate prediction: sigma^2 = abs^2 + (rel M~)^2.
/// A width computed from the reading itself shrinks with low readings and
/// pulls the posterior toward them; evaluating it per candidate (with the
/// Gaussian normalization term) avoids that.
struct ModelWidth {
  double abs = 0.0;
  double rel = 0.0;
  double sigma_at(double predicted) const noexcept;
};

/// Normalized outcomes of one +/- measurement pair.
struct MeasurementPair {
  double m_plus = 0.0;
  double m_minus = 0.0;
  double sigma_plus = 1.0;
  double sigma_minus = 1.0;
  double tau_plus = 0.0;  // ms
  double tau_minus = 0.0;
  std::optional<ModelWidth> width_plus;  // unset: sigma_plus is used as is
  std::optional<ModelWidth> width_minus;

  /// Throws DomainError unless sigmas and delays are positive and values finite.
  void validate() const;
  MeasurementPair swapped() const noexcept {
    return {m_minus, m_plus, sigma_minus, sigma_plus, tau_minus, tau_plus, width_minus, width_plus};
  }
};

/// -chi+^2 - chi-^2 with chi = (M - M~)/(sqrt(2) sigma). A branch with a
/// ModelWidth uses sigma(M~) and adds -log(sigma(M~) / sigma_pair).
double log_likelihood(const MeasurementPair& pair, const RatePair& rates,
                      const ModelPair& models = ModelPair::robust());

enum class PriorMeasure { Uniform, LogUniform };

struct Bounds {
  double lo = 0.055;  // 1/ms
  double hi = 100.0;
};

struct Moments {
  double mean_plus = 0.0;
  double mean_minus = 0.0;
  double sigma_plus = 0.0;
  double sigma_minus = 0.0;
  double covariance = 0.0;
};

class PosteriorGrid {
 public:
  /// n x n evenly spaced nodes over the square [lo, hi]^2.
  static PosteriorGrid prior(Bounds bounds, std::size_t n = 200,
                             PriorMeasure measure = PriorMeasure::Uniform);
  /// Flat prior over an arbitrary box inside the hard bounds.
  static PosteriorGrid box(Bounds hard, double plus_lo, double plus_hi, double minus_lo,
                           double minus_hi, std::size_t n = 200);

  /// Explicit axes and (unnormalized, nonnegative) weights, row-major with
  /// the Gamma+ index outermost. Throws DomainError on invalid input.
  PosteriorGrid(std::vector<double> plus_axis, std::vector<double> minus_axis,
                std::vector<double> weights, Bounds hard);

  const std::vector<double>& plus_axis() const noexcept { return plus_; }
  const std::vector<double>& minus_axis() const noexcept { return minus_; }
  const std::vector<double>& weights() const noexcept { return w_; }
  Bounds hard_bounds() const noexcept { return hard_; }
  double weight(std::size_t i, std::size_t j) const noexcept { return w_[i * minus_.size() + j]; }

  /// Multiplies by exp(log_likelihood) in the log domain and renormalizes.
  /// Throws UpdateRejected, leaving the grid untouched, when the total
  /// posterior mass underflows (log mass < -745) or is not finite.
  void update(const MeasurementPair& pair, const ModelPair& models = ModelPair::robust());

  /// Applies a batch of pairs jointly and renormalizes relative to the
  /// largest posterior weight, so no absolute-mass threshold applies. Meant
  /// for recomputing a posterior from aggregated data on a fresh prior.
  /// Throws UpdateRejected only when the result is not finite.
  void update_batch(const std::vector<MeasurementPair>& pairs, const ModelPair& models = ModelPair::robust());

  Moments moments() const noexcept;

  /// Re-centres on mean +/- span_sigmas * sigma (at least min_cells old cells
  /// per side), clipped to the hard bounds, n x n nodes, bilinear transfer of
  /// the old weights.
  void regrid(std::size_t n = 200, double span_sigmas = 10.0, double min_cells = 2.0);

  /// Grid with Gamma+ and Gamma- exchanged.
  PosteriorGrid swapped() const;

 private:
  PosteriorGrid() = default;
  void rebuild_nodes();
  void normalize_from_weights();

  std::vector<double> plus_;
  std::vector<double> minus_;
  std::vector<double> w_;     // normalized
  std::vector<double> logw_;  // log of w_
  std::vector<double> node_plus_;
  std::vector<double> node_minus_;
  Bounds hard_;
};

/// Functional form of PosteriorGrid::update.
PosteriorGrid bayes_update(PosteriorGrid grid, const MeasurementPair& pair,
                           const ModelPair& models = ModelPair::robust());

/// Evenly spaced axis of n points over [lo, hi].
std::vector<double> linear_axis(double lo, double hi, std::size_t n);

}  // namespace relax
