// Compiled with -mavx2 -mfma -ffp-contract=off; only reached after a runtime
// CPU check. No FMA intrinsics are used so that the separable argmin and the
// chi-square update round exactly like the scalar code.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "kernels_impl.hpp"

namespace relax::kernels::avx2 {

namespace {

// Cephes exp: range reduction by ln2 in two parts, Pade approximant, then
// scale by 2^n through the exponent bits. Inputs below -708 flush to 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, hi, _CMP_GT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(6.93145751953125e-1)));
  x = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(1.42860682030941723212e-6)));

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878e-4);
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), _mm256_set1_pd(3.02994407707441961300e-2));
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), _mm256_set1_pd(9.99999999999999999910e-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042e-6);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.52448340349684104192e-3));
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.27265548208155028766e-1));
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.00000000000000000009e0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_add_pd(r, r));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m256i e = _mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(e));

  r = _mm256_andnot_pd(under, r);
  return _mm256_blendv_pd(r, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
}

inline double hmax(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return std::fmax(std::fmax(t[0], t[1]), std::fmax(t[2], t[3]));
}

inline double hsum(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

// Folds the per-lane winners (value, flat index) into `best`.
template <class Better>
void reduce_lanes(__m256d val, __m256d idx, std::size_t m, GridPick& best, double& best_idx,
                  Better better) {
  alignas(32) double v[4];
  alignas(32) double ix[4];
  _mm256_store_pd(v, val);
  _mm256_store_pd(ix, idx);
  for (int l = 0; l < 4; ++l) {
    if (ix[l] < 0.0) continue;
    if (!best.found || better(v[l], ix[l], best.value, best_idx)) {
      const auto flat = static_cast<std::size_t>(ix[l]);
      best = {flat / m, flat % m, v[l], true};
      best_idx = ix[l];
    }
  }
}

}  // namespace

GridPick separable_cost_argmin(const CostRows& r, const CostCols& c) noexcept {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = c.n;
  const std::size_t m4 = m & ~std::size_t{3};
  const __m256d vinf = _mm256_set1_pd(inf);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  __m256d best_v = vinf;
  __m256d best_i = _mm256_set1_pd(-1.0);
  GridPick tail;
  tail.value = inf;
  double tail_idx = -1.0;

  for (std::size_t i = 0; i < r.n; ++i) {
    const __m256d a = _mm256_set1_pd(r.a[i]);
    const __m256d t = _mm256_set1_pd(r.t[i]);
    const __m256d w = _mm256_set1_pd(r.w[i]);
    const __m256d u = _mm256_set1_pd(r.u[i]);
    const __m256d v = _mm256_set1_pd(r.v[i]);
    const double row0 = static_cast<double>(i * m);
    for (std::size_t j = 0; j < m4; j += 4) {
      const __m256d num = _mm256_mul_pd(_mm256_add_pd(a, _mm256_loadu_pd(c.b + j)),
                                        _mm256_add_pd(t, _mm256_loadu_pd(c.s + j)));
      const __m256d d = _mm256_sub_pd(_mm256_mul_pd(u, _mm256_loadu_pd(c.q + j)),
                                      _mm256_mul_pd(v, _mm256_loadu_pd(c.p + j)));
      const __m256d den =
          _mm256_mul_pd(_mm256_mul_pd(_mm256_mul_pd(w, _mm256_loadu_pd(c.x + j)), d), d);
      const __m256d val = _mm256_div_pd(num, den);
      const __m256d take = _mm256_and_pd(
          _mm256_and_pd(_mm256_cmp_pd(den, zero, _CMP_GT_OQ), _mm256_cmp_pd(val, vinf, _CMP_LT_OQ)),
          _mm256_cmp_pd(val, best_v, _CMP_LT_OQ));
      const __m256d idx = _mm256_add_pd(_mm256_set1_pd(row0 + static_cast<double>(j)), lane);
      best_v = _mm256_blendv_pd(best_v, val, take);
      best_i = _mm256_blendv_pd(best_i, idx, take);
    }
    for (std::size_t j = m4; j < m; ++j) {
      const double num = (r.a[i] + c.b[j]) * (r.t[i] + c.s[j]);
      const double d = r.u[i] * c.q[j] - r.v[i] * c.p[j];
      const double den = r.w[i] * c.x[j] * d * d;
      const double val = num / den;
      if (den > 0.0 && val < inf && val < tail.value) {
        tail = {i, j, val, true};
        tail_idx = row0 + static_cast<double>(j);
      }
    }
  }
  GridPick best = tail;
  double best_idx = tail_idx;
  reduce_lanes(best_v, best_i, m, best, best_idx, better_min);
  return best;
}

GridPick separable_utility_argmax(const double* u, const double* t, std::size_t n,
                                  const double* v, const double* s, std::size_t m) noexcept {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t m4 = m & ~std::size_t{3};
  const __m256d vinf = _mm256_set1_pd(inf);
  const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  __m256d best_v = _mm256_set1_pd(-inf);
  __m256d best_i = _mm256_set1_pd(-1.0);
  GridPick tail;
  tail.value = -inf;
  double tail_idx = -1.0;

  for (std::size_t i = 0; i < n; ++i) {
    const __m256d ui = _mm256_set1_pd(u[i]);
    const __m256d ti = _mm256_set1_pd(t[i]);
    const double row0 = static_cast<double>(i * m);
    for (std::size_t j = 0; j < m4; j += 4) {
      const __m256d val = _mm256_div_pd(_mm256_add_pd(ui, _mm256_loadu_pd(v + j)),
                                        _mm256_sqrt_pd(_mm256_add_pd(ti, _mm256_loadu_pd(s + j))));
      const __m256d take = _mm256_and_pd(_mm256_cmp_pd(val, vinf, _CMP_LT_OQ),
                                         _mm256_cmp_pd(val, best_v, _CMP_GT_OQ));
      const __m256d idx = _mm256_add_pd(_mm256_set1_pd(row0 + static_cast<double>(j)), lane);
      best_v = _mm256_blendv_pd(best_v, val, take);
      best_i = _mm256_blendv_pd(best_i, idx, take);
    }
    for (std::size_t j = m4; j < m; ++j) {
      const double val = (u[i] + v[j]) / std::sqrt(t[i] + s[j]);
      if (val < inf && val > tail.value) {
        tail = {i, j, val, true};
        tail_idx = row0 + static_cast<double>(j);
      }
    }
  }
  GridPick best = tail;
  double best_idx = tail_idx;
  reduce_lanes(best_v, best_i, m, best, best_idx, better_max);
  return best;
}

void model_batch(const double* gp, const double* gm, std::size_t n, double tau, double lp,
                 double lm, double* out) noexcept {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vtau = _mm256_set1_pd(tau);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d vlp = _mm256_set1_pd(lp);
  const __m256d vlm = _mm256_set1_pd(lm);
  const __m256d neg = _mm256_set1_pd(-0.0);
  for (std::size_t k = 0; k < n4; k += 4) {
    const __m256d p = _mm256_loadu_pd(gp + k);
    const __m256d m = _mm256_loadu_pd(gm + k);
    const __m256d g = _mm256_sqrt_pd(_mm256_sub_pd(
        _mm256_add_pd(_mm256_mul_pd(p, p), _mm256_mul_pd(m, m)), _mm256_mul_pd(p, m)));
    const __m256d sum = _mm256_add_pd(p, m);
    const __m256d ef = exp_pd(_mm256_xor_pd(_mm256_mul_pd(_mm256_add_pd(sum, g), vtau), neg));
    const __m256d es = exp_pd(_mm256_xor_pd(_mm256_mul_pd(_mm256_sub_pd(sum, g), vtau), neg));
    const __m256d kappa = _mm256_add_pd(_mm256_mul_pd(vlp, p), _mm256_mul_pd(vlm, m));
    const __m256d res =
        _mm256_add_pd(_mm256_mul_pd(half, _mm256_add_pd(ef, es)),
                      _mm256_div_pd(_mm256_mul_pd(kappa, _mm256_sub_pd(es, ef)), _mm256_mul_pd(two, g)));
    _mm256_storeu_pd(out + k, res);
  }
  if (n4 < n) scalar::model_batch(gp + n4, gm + n4, n - n4, tau, lp, lm, out + n4);
}

double chi2_accumulate(const double* mp, const double* mm, std::size_t n, double yp, double cp,
                       double ym, double cm, double* logw) noexcept {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vyp = _mm256_set1_pd(yp);
  const __m256d vym = _mm256_set1_pd(ym);
  const __m256d vcp = _mm256_set1_pd(cp);
  const __m256d vcm = _mm256_set1_pd(cm);
  __m256d mx = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < n4; k += 4) {
    const __m256d rp = _mm256_sub_pd(vyp, _mm256_loadu_pd(mp + k));
    const __m256d rm = _mm256_sub_pd(vym, _mm256_loadu_pd(mm + k));
    const __m256d chi = _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(rp, rp), vcp),
                                      _mm256_mul_pd(_mm256_mul_pd(rm, rm), vcm));
    const __m256d lw = _mm256_sub_pd(_mm256_loadu_pd(logw + k), chi);
    _mm256_storeu_pd(logw + k, lw);
    mx = _mm256_max_pd(mx, lw);
  }
  double best = hmax(mx);
  if (n4 < n) {
    const double t = scalar::chi2_accumulate(mp + n4, mm + n4, n - n4, yp, cp, ym, cm, logw + n4);
    best = std::fmax(best, t);
  }
  return best;
}

double exp_shift(const double* logw, std::size_t n, double shift, double* w) noexcept {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t k = 0; k < n4; k += 4) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(logw + k), vs));
    _mm256_storeu_pd(w + k, e);
    acc = _mm256_add_pd(acc, e);
  }
  double total = hsum(acc);
  if (n4 < n) total += scalar::exp_shift(logw + n4, n - n4, shift, w + n4);
  return total;
}

void cloud_moments(const CloudView& c, double tau, double out[4]) noexcept {
  const std::size_t n4 = c.n & ~std::size_t{3};
  const __m256d vtau = _mm256_set1_pd(-tau);
  const __m256d half = _mm256_set1_pd(0.5);
  __m256d s1p = _mm256_setzero_pd(), s2p = _mm256_setzero_pd();
  __m256d s1m = _mm256_setzero_pd(), s2m = _mm256_setzero_pd();
  for (std::size_t k = 0; k < n4; k += 4) {
    const __m256d ef = exp_pd(_mm256_mul_pd(_mm256_loadu_pd(c.beta_fast + k), vtau));
    const __m256d es = exp_pd(_mm256_mul_pd(_mm256_loadu_pd(c.beta_slow + k), vtau));
    const __m256d mean = _mm256_mul_pd(half, _mm256_add_pd(ef, es));
    const __m256d g = _mm256_mul_pd(_mm256_sub_pd(es, ef), _mm256_loadu_pd(c.inv_two_g + k));
    const __m256d mp = _mm256_add_pd(mean, _mm256_mul_pd(_mm256_loadu_pd(c.kappa_plus + k), g));
    const __m256d mm = _mm256_add_pd(mean, _mm256_mul_pd(_mm256_loadu_pd(c.kappa_minus + k), g));
    const __m256d w = _mm256_loadu_pd(c.weight + k);
    const __m256d wp = _mm256_mul_pd(w, mp);
    const __m256d wm = _mm256_mul_pd(w, mm);
    s1p = _mm256_add_pd(s1p, wp);
    s2p = _mm256_add_pd(s2p, _mm256_mul_pd(wp, mp));
    s1m = _mm256_add_pd(s1m, wm);
    s2m = _mm256_add_pd(s2m, _mm256_mul_pd(wm, mm));
  }
  double tail[4] = {0.0, 0.0, 0.0, 0.0};
  if (n4 < c.n) {
    CloudView rest = c;
    rest.beta_fast += n4;
    rest.beta_slow += n4;
    rest.inv_two_g += n4;
    rest.kappa_plus += n4;
    rest.kappa_minus += n4;
    rest.weight += n4;
    rest.n = c.n - n4;
    scalar::cloud_moments(rest, tau, tail);
  }
  out[0] = hsum(s1p) + tail[0];
  out[1] = hsum(s2p) + tail[1];
  out[2] = hsum(s1m) + tail[2];
  out[3] = hsum(s2m) + tail[3];
}

}  // namespace relax::kernels::avx2
