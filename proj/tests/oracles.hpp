#pragma once

// Independent reference computations used by the tests.

#include <array>
#include <cmath>

#include "relax/signal_model.hpp"
#include "relax/spin_model.hpp"

namespace oracle {

using M3 = std::array<std::array<double, 3>, 3>;

inline M3 mul(const M3& a, const M3& b) {
  M3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline double norm1(const M3& a) {
  double best = 0.0;
  for (int j = 0; j < 3; ++j) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += std::abs(a[i][j]);
    best = std::max(best, s);
  }
  return best;
}

// exp(A) by scaling and squaring with a long Taylor series on the scaled matrix.
inline M3 expm(M3 a) {
  int squarings = 0;
  double nrm = norm1(a);
  while (nrm > 0.125) {
    nrm *= 0.5;
    ++squarings;
  }
  const double scale = std::ldexp(1.0, -squarings);
  for (auto& row : a)
    for (double& v : row) v *= scale;
  M3 result{};
  M3 term{};
  for (int i = 0; i < 3; ++i) result[i][i] = term[i][i] = 1.0;
  for (int k = 1; k <= 30; ++k) {
    term = mul(term, a);
    for (auto& row : term)
      for (double& v : row) v /= k;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) result[i][j] += term[i][j];
  }
  for (int s = 0; s < squarings; ++s) result = mul(result, result);
  return result;
}

// Rate matrix written out from the population equations
// dp-/dt = G-(p0 - p-), dp+/dt = G+(p0 - p+), dp0/dt = -(dp-/dt + dp+/dt).
inline M3 rate_matrix(double gp, double gm) {
  return {{{-gm, gm, 0.0}, {gm, -gm - gp, gp}, {0.0, gp, -gp}}};
}

inline M3 propagator(double tau, double gp, double gm) {
  M3 l = rate_matrix(gp, gm);
  for (auto& row : l)
    for (double& v : row) v *= tau;
  return expm(l);
}

// Direct form of the drift-insensitive model function.
inline double model_m(double tau, double gp, double gm, bool plus) {
  const double g = std::sqrt(gp * gp + gm * gm - gp * gm);
  const double gb = plus ? gp : gm;
  const double bp = gp + gm + g;
  const double bm = gp + gm - g;
  return ((g + gb) * std::exp(-bp * tau) + (g - gb) * std::exp(-bm * tau)) / (2.0 * g);
}

// Expected counts by multiplying out the five factors with dense matrices.
inline double expected_counts(int prep, int read, double tau, double gp, double gm,
                              const relax::SignalParams& p) {
  const double a = p.alpha;
  const double s[3] = {(1 - a) / 2, a, (1 - a) / 2};
  const double c[3] = {p.f0 * (1 - p.contrast), p.f0, p.f0 * (1 - p.contrast)};
  auto pulse = [&](int st) {
    M3 b{};
    if (st == 2) {
      const double e = p.eta_plus;
      b = {{{1, 0, 0}, {0, e, 1 - e}, {0, 1 - e, e}}};
    } else if (st == 0) {
      const double e = p.eta_minus;
      b = {{{e, 1 - e, 0}, {1 - e, e, 0}, {0, 0, 1}}};
    } else {
      b = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    }
    return b;
  };
  const M3 chain = mul(mul(pulse(read), propagator(tau, gp, gm)), pulse(prep));
  double total = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) total += c[i] * chain[i][j] * s[j];
  return static_cast<double>(p.repetitions) * (total + p.background_at(tau));
}

}  // namespace oracle
