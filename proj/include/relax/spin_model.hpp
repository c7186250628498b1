#pragma once

// Closed-form solutions of the three-level relaxation rate equations.
//
// Basis order is {|->, |0>, |+>} everywhere in this library. Rates are in
// 1/ms and delays in ms.

#include <array>
#include <utility>

namespace relax {

enum class Branch { Plus, Minus };

constexpr Branch other(Branch b) noexcept { return b == Branch::Plus ? Branch::Minus : Branch::Plus; }

/// The pair of single-quantum decay rates (Gamma+, Gamma-), in 1/ms.
class RatePair {
 public:
  /// Throws DomainError unless both rates are finite and strictly positive.
  RatePair(double gamma_plus, double gamma_minus);

  double plus() const noexcept { return plus_; }
  double minus() const noexcept { return minus_; }
  double of(Branch b) const noexcept { return b == Branch::Plus ? plus_ : minus_; }

  /// G = sqrt(G+^2 + G-^2 - G+ G-).
  double g() const noexcept;
  /// beta_{+/-} = G+ + G- +/- G, the two nonzero relaxation eigenvalues.
  double beta_fast() const noexcept { return plus_ + minus_ + g(); }
  double beta_slow() const noexcept { return plus_ + minus_ - g(); }

  RatePair swapped() const noexcept { return RatePair(minus_, plus_, Unchecked{}); }
  RatePair scaled(double k) const { return RatePair(plus_ * k, minus_ * k); }

  friend bool operator==(const RatePair&, const RatePair&) = default;

 private:
  struct Unchecked {};
  RatePair(double p, double m, Unchecked) noexcept : plus_(p), minus_(m) {}
  double plus_;
  double minus_;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// Population transfer matrix p_ij(tau): population in j at tau after preparing i.
/// Symmetric and doubly stochastic; entries()[j][i] and entries()[i][j] coincide.
struct Propagator {
  Matrix3 entries{};
  double tau = 0.0;

  double operator()(int from, int to) const noexcept { return entries[to][from]; }
};

/// The 3x3 rate matrix of the population dynamics.
Matrix3 rate_matrix(const RatePair& rates) noexcept;

/// exp(L tau) from the spectral decomposition {equilibrium, beta+, beta-}.
Propagator propagator(double tau, const RatePair& rates);

/// Derivatives of the propagator with respect to (Gamma+, Gamma-).
std::pair<Matrix3, Matrix3> propagator_gradient(double tau, const RatePair& rates);

/// Normalized drift-insensitive measurement  M~(tau) = (p00 - p_{+-}0) / (p00(0) - p_{+-}0(0)).
double model_m(double tau, const RatePair& rates, Branch branch);

/// Normalized expectation of the (++, +0) / (--, -0) measurement including pi-pulse error eta.
double model_m_optimal(double tau, const RatePair& rates, double eta, Branch branch);

struct RateGradient {
  double d_plus = 0.0;   // d/dGamma+
  double d_minus = 0.0;  // d/dGamma-
};

/// Closed-form partial derivatives of model_m with respect to both rates.
RateGradient model_gradient(double tau, const RatePair& rates, Branch branch);

/// Every normalized four-signal measurement reduces to
///
///   M(tau) = (E+ + E-)/2 + (lambda+ Gamma+ + lambda- Gamma-) g(tau),
///   E+- = exp(-beta+- tau),  g = (E- - E+) / (2G),
///
/// with two constants fixed by the chosen signals and the photophysics.
/// The robust pair is lambda = (-1, 0) for the + measurement and (0, -1) for -.
struct MeasurementModel {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;

  static MeasurementModel robust(Branch b) noexcept;
  static MeasurementModel optimal(Branch b, double eta);

  double value(double tau, const RatePair& rates) const;
  RateGradient gradient(double tau, const RatePair& rates) const;

  MeasurementModel mirrored() const noexcept { return {lambda_minus, lambda_plus}; }
  friend bool operator==(const MeasurementModel&, const MeasurementModel&) = default;
};

/// The two measurements of a protocol, used as the model for inference and design.
struct ModelPair {
  MeasurementModel plus = MeasurementModel::robust(Branch::Plus);
  MeasurementModel minus = MeasurementModel::robust(Branch::Minus);

  const MeasurementModel& of(Branch b) const noexcept { return b == Branch::Plus ? plus : minus; }
  static ModelPair robust() noexcept { return {}; }
};

}  // namespace relax
