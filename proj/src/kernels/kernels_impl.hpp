#pragma once

#include "relax/kernels/kernels.hpp"

namespace relax::kernels {

#define RELAX_KERNEL_DECLS                                                                       \
  GridPick separable_cost_argmin(const CostRows& rows, const CostCols& cols) noexcept;          \
  GridPick separable_utility_argmax(const double* u, const double* t, std::size_t n,            \
                                    const double* v, const double* s, std::size_t m) noexcept;  \
  void model_batch(const double* gp, const double* gm, std::size_t n, double tau, double lp,    \
                   double lm, double* out) noexcept;                                            \
  double chi2_accumulate(const double* mp, const double* mm, std::size_t n, double yp,          \
                         double cp, double ym, double cm, double* logw) noexcept;               \
  double exp_shift(const double* logw, std::size_t n, double shift, double* w) noexcept;        \
  void cloud_moments(const CloudView& cloud, double tau, double out[4]) noexcept;

namespace scalar {
RELAX_KERNEL_DECLS
}

#if defined(RELAX_HAVE_AVX2)
namespace avx2 {
RELAX_KERNEL_DECLS
}
#endif

#undef RELAX_KERNEL_DECLS

// Lexicographic (value, flat index) comparison shared by the reductions.
inline bool better_min(double v, double idx, double best_v, double best_idx) noexcept {
  return v < best_v || (v == best_v && idx < best_idx);
}
inline bool better_max(double v, double idx, double best_v, double best_idx) noexcept {
  return v > best_v || (v == best_v && idx < best_idx);
}

}  // namespace relax::kernels
