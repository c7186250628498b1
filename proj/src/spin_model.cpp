#include "relax/spin_model.hpp"

#include <cmath>
#include <string>

#include "relax/errors.hpp"

namespace relax {

namespace {

void require_finite_tau(double tau) {
  if (!std::isfinite(tau) || tau < 0.0) {
    throw DomainError("delay must be finite and non-negative, got " + std::to_string(tau));
  }
}

// Shared exponentials of the two relaxation modes at one delay.
struct Modes {
  double g;       // G
  double e_fast;  // exp(-beta+ tau)
  double e_slow;  // exp(-beta- tau)
  double gfun;    // (E- - E+) / (2G)
};

Modes modes(double tau, const RatePair& r) {
  const double g = r.g();
  const double e_slow = std::exp(-r.beta_slow() * tau);
  const double e_fast = std::exp(-r.beta_fast() * tau);
  // E- - E+ = -E- * expm1(-2 G tau), exact for small G tau.
  const double gfun = -e_slow * std::expm1(-2.0 * g * tau) / (2.0 * g);
  return {g, e_fast, e_slow, gfun};
}

// dG/dGamma+ and dG/dGamma-.
std::pair<double, double> g_gradient(const RatePair& r, double g) {
  return {(2.0 * r.plus() - r.minus()) / (2.0 * g), (2.0 * r.minus() - r.plus()) / (2.0 * g)};
}

// Derivatives of the mode functions for one rate direction with dG = gk.
struct ModeDerivative {
  double d_mean;  // d[(E+ + E-)/2]
  double d_gfun;  // d[g]
};

ModeDerivative mode_derivative(double tau, const Modes& m, double gk) {
  const double dfast = -tau * m.e_fast * (1.0 + gk);
  const double dslow = -tau * m.e_slow * (1.0 - gk);
  return {0.5 * (dfast + dslow), (dslow - dfast) / (2.0 * m.g) - m.gfun * gk / m.g};
}

}  // namespace

RatePair::RatePair(double gamma_plus, double gamma_minus) : plus_(gamma_plus), minus_(gamma_minus) {
  if (!std::isfinite(gamma_plus) || !std::isfinite(gamma_minus) || gamma_plus <= 0.0 ||
      gamma_minus <= 0.0) {
    throw DomainError("decay rates must be finite and positive, got (" + std::to_string(gamma_plus) +
                      ", " + std::to_string(gamma_minus) + ")");
  }
}

double RatePair::g() const noexcept {
  // The radicand is >= (3/4) max^2, so the plain form keeps full precision.
  return std::sqrt(plus_ * plus_ + minus_ * minus_ - plus_ * minus_);
}

Matrix3 rate_matrix(const RatePair& r) noexcept {
  const double gp = r.plus();
  const double gm = r.minus();
  return {{{-gm, gm, 0.0}, {gm, -(gm + gp), gp}, {0.0, gp, -gp}}};
}

Propagator propagator(double tau, const RatePair& rates) {
  require_finite_tau(tau);
  // P = J/3 + K f + L g with K = I - J/3, f = (E+ + E-)/2 + S g, S = G+ + G-.
  const Modes m = modes(tau, rates);
  const double s = rates.plus() + rates.minus();
  const double f = 0.5 * (m.e_fast + m.e_slow) + s * m.gfun;
  const Matrix3 l = rate_matrix(rates);
  Propagator p;
  p.tau = tau;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double k = (i == j ? 1.0 : 0.0) - 1.0 / 3.0;
      p.entries[i][j] = 1.0 / 3.0 + k * f + l[i][j] * m.gfun;
    }
  }
  return p;
}

std::pair<Matrix3, Matrix3> propagator_gradient(double tau, const RatePair& rates) {
  require_finite_tau(tau);
  const Modes m = modes(tau, rates);
  const auto [gk_plus, gk_minus] = g_gradient(rates, m.g);
  const double s = rates.plus() + rates.minus();
  const Matrix3 l = rate_matrix(rates);
  // dL/dGamma+ and dL/dGamma-.
  const Matrix3 dl_plus = {{{0, 0, 0}, {0, -1, 1}, {0, 1, -1}}};
  const Matrix3 dl_minus = {{{-1, 1, 0}, {1, -1, 0}, {0, 0, 0}}};

  auto build = [&](double gk, const Matrix3& dl) {
    const ModeDerivative d = mode_derivative(tau, m, gk);
    const double df = d.d_mean + m.gfun + s * d.d_gfun;
    Matrix3 out{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double k = (i == j ? 1.0 : 0.0) - 1.0 / 3.0;
        out[i][j] = k * df + dl[i][j] * m.gfun + l[i][j] * d.d_gfun;
      }
    }
    return out;
  };
  return {build(gk_plus, dl_plus), build(gk_minus, dl_minus)};
}

double model_m(double tau, const RatePair& rates, Branch branch) {
  require_finite_tau(tau);
  const double g = rates.g();
  const double gb = rates.of(branch);
  return ((g + gb) * std::exp(-rates.beta_fast() * tau) +
          (g - gb) * std::exp(-rates.beta_slow() * tau)) /
         (2.0 * g);
}

double model_m_optimal(double tau, const RatePair& rates, double eta, Branch branch) {
  require_finite_tau(tau);
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw DomainError("pi-pulse error must lie in [0, 0.5), got " + std::to_string(eta));
  }
  const double g = rates.g();
  const double own = rates.of(branch);
  const double opp = rates.of(other(branch));
  const double sum = rates.plus() + rates.minus();
  return std::exp(-tau * sum) *
         (std::cosh(tau * g) +
          (own - opp + eta * (opp - 2.0 * own)) * std::sinh(tau * g) / ((2.0 * eta - 1.0) * g));
}

RateGradient model_gradient(double tau, const RatePair& rates, Branch branch) {
  return MeasurementModel::robust(branch).gradient(tau, rates);
}

MeasurementModel MeasurementModel::robust(Branch b) noexcept {
  return b == Branch::Plus ? MeasurementModel{-1.0, 0.0} : MeasurementModel{0.0, -1.0};
}

MeasurementModel MeasurementModel::optimal(Branch b, double eta) {
  if (!(eta >= 0.0 && eta < 0.5)) {
    throw DomainError("pi-pulse error must lie in [0, 0.5), got " + std::to_string(eta));
  }
  const MeasurementModel plus{-1.0, (1.0 - eta) / (1.0 - 2.0 * eta)};
  return b == Branch::Plus ? plus : plus.mirrored();
}

double MeasurementModel::value(double tau, const RatePair& rates) const {
  require_finite_tau(tau);
  const Modes m = modes(tau, rates);
  const double kappa = lambda_plus * rates.plus() + lambda_minus * rates.minus();
  return 0.5 * (m.e_fast + m.e_slow) + kappa * m.gfun;
}

RateGradient MeasurementModel::gradient(double tau, const RatePair& rates) const {
  require_finite_tau(tau);
  const Modes m = modes(tau, rates);
  const auto [gk_plus, gk_minus] = g_gradient(rates, m.g);
  const double kappa = lambda_plus * rates.plus() + lambda_minus * rates.minus();
  const ModeDerivative dp = mode_derivative(tau, m, gk_plus);
  const ModeDerivative dm = mode_derivative(tau, m, gk_minus);
  return {dp.d_mean + lambda_plus * m.gfun + kappa * dp.d_gfun,
          dm.d_mean + lambda_minus * m.gfun + kappa * dm.d_gfun};
}

}  // namespace relax
