#include <cmath>
#include <limits>

#include "kernels_impl.hpp"

namespace relax::kernels::scalar {

GridPick separable_cost_argmin(const CostRows& r, const CostCols& c) noexcept {
  const double inf = std::numeric_limits<double>::infinity();
  GridPick best;
  best.value = inf;
  for (std::size_t i = 0; i < r.n; ++i) {
    for (std::size_t j = 0; j < c.n; ++j) {
      const double num = (r.a[i] + c.b[j]) * (r.t[i] + c.s[j]);
      const double d = r.u[i] * c.q[j] - r.v[i] * c.p[j];
      const double den = r.w[i] * c.x[j] * d * d;
      const double val = num / den;
      if (den > 0.0 && val < inf && val < best.value) {
        best = {i, j, val, true};
      }
    }
  }
  return best;
}

GridPick separable_utility_argmax(const double* u, const double* t, std::size_t n,
                                  const double* v, const double* s, std::size_t m) noexcept {
  const double inf = std::numeric_limits<double>::infinity();
  GridPick best;
  best.value = -inf;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double val = (u[i] + v[j]) / std::sqrt(t[i] + s[j]);
      if (val < inf && val > best.value) {
        best = {i, j, val, true};
      }
    }
  }
  return best;
}

void model_batch(const double* gp, const double* gm, std::size_t n, double tau, double lp,
                 double lm, double* out) noexcept {
  for (std::size_t k = 0; k < n; ++k) {
    const double g = std::sqrt(gp[k] * gp[k] + gm[k] * gm[k] - gp[k] * gm[k]);
    const double sum = gp[k] + gm[k];
    const double ef = std::exp(-(sum + g) * tau);
    const double es = std::exp(-(sum - g) * tau);
    const double kappa = lp * gp[k] + lm * gm[k];
    out[k] = 0.5 * (ef + es) + kappa * (es - ef) / (2.0 * g);
  }
}

double chi2_accumulate(const double* mp, const double* mm, std::size_t n, double yp, double cp,
                       double ym, double cm, double* logw) noexcept {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double rp = yp - mp[k];
    const double rm = ym - mm[k];
    logw[k] = logw[k] - (rp * rp * cp + rm * rm * cm);
    mx = logw[k] > mx ? logw[k] : mx;
  }
  return mx;
}

double exp_shift(const double* logw, std::size_t n, double shift, double* w) noexcept {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = std::exp(logw[k] - shift);
    total += w[k];
  }
  return total;
}

void cloud_moments(const CloudView& c, double tau, double out[4]) noexcept {
  double s1p = 0.0, s2p = 0.0, s1m = 0.0, s2m = 0.0;
  for (std::size_t k = 0; k < c.n; ++k) {
    const double ef = std::exp(-c.beta_fast[k] * tau);
    const double es = std::exp(-c.beta_slow[k] * tau);
    const double mean = 0.5 * (ef + es);
    const double g = (es - ef) * c.inv_two_g[k];
    const double mp = mean + c.kappa_plus[k] * g;
    const double mm = mean + c.kappa_minus[k] * g;
    const double w = c.weight[k];
    s1p += w * mp;
    s2p += w * mp * mp;
    s1m += w * mm;
    s2m += w * mm * mm;
  }
  out[0] = s1p;
  out[1] = s2p;
  out[2] = s1m;
  out[3] = s2m;
}

}  // namespace relax::kernels::scalar
