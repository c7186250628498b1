#pragma once

// Hot loops of the library, each with a portable scalar reference and an AVX2
// variant picked at runtime. Results of the argmin/argmax and chi-square
// kernels are bit-identical across backends; the exp-based kernels agree to a
// few ulp.

#include <cstddef>
#include <string_view>

namespace relax::kernels {

enum class Backend { Scalar, Avx2 };

bool avx2_available() noexcept;
Backend active_backend() noexcept;
/// Forces a backend (tests and benchmarks). Requesting Avx2 on a CPU without
/// it is a no-op and returns false.
bool set_backend(Backend b) noexcept;
std::string_view backend_name(Backend b) noexcept;

/// Per-row data of the separable delay cost
///
///   cost^2(i, j) = (a_i + b_j)(t_i + s_j) / (w_i x_j (u_i q_j - v_i p_j)^2).
struct CostRows {
  const double* a;
  const double* t;
  const double* w;
  const double* u;
  const double* v;
  std::size_t n;
};

struct CostCols {
  const double* b;
  const double* s;
  const double* x;
  const double* p;
  const double* q;
  std::size_t n;
};

struct GridPick {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  bool found = false;
};

/// Smallest cost^2 over all (i, j); ties go to the smallest i, then j.
/// Cells with a non-positive denominator or a non-finite value are skipped.
GridPick separable_cost_argmin(const CostRows& rows, const CostCols& cols) noexcept;

/// Largest (u_i + v_j) / sqrt(t_i + s_j); same tie rule, non-finite cells skipped.
GridPick separable_utility_argmax(const double* u, const double* t, std::size_t n,
                                  const double* v, const double* s, std::size_t m) noexcept;

/// out[k] = (E+ + E-)/2 + (lp gp[k] + lm gm[k]) (E- - E+)/(2G) at rates (gp[k], gm[k]).
void model_batch(const double* gp, const double* gm, std::size_t n, double tau, double lp,
                 double lm, double* out) noexcept;

/// logw[k] -= (yp - mp[k])^2 cp + (ym - mm[k])^2 cm; returns max(logw) afterwards.
double chi2_accumulate(const double* mp, const double* mm, std::size_t n, double yp, double cp,
                       double ym, double cm, double* logw) noexcept;

/// w[k] = exp(logw[k] - shift); returns the sum of w.
double exp_shift(const double* logw, std::size_t n, double shift, double* w) noexcept;

/// Cloud of particles prepared for repeated model evaluation.
struct CloudView {
  const double* beta_fast;
  const double* beta_slow;
  const double* inv_two_g;
  const double* kappa_plus;
  const double* kappa_minus;
  const double* weight;
  std::size_t n;
};

/// Weighted sums {sum w M+, sum w M+^2, sum w M-, sum w M-^2} at one delay.
void cloud_moments(const CloudView& cloud, double tau, double out[4]) noexcept;

}  // namespace relax::kernels
