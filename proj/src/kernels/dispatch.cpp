#include <atomic>

#include "kernels_impl.hpp"

namespace relax::kernels {

namespace {

Backend detect() noexcept { return avx2_available() ? Backend::Avx2 : Backend::Scalar; }

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

bool avx2_available() noexcept {
#if defined(RELAX_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

bool set_backend(Backend b) noexcept {
  if (b == Backend::Avx2 && !avx2_available()) return false;
  current().store(b, std::memory_order_relaxed);
  return true;
}

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

#if defined(RELAX_HAVE_AVX2)
#define RELAX_DISPATCH(fn, ...) \
  (active_backend() == Backend::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define RELAX_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

GridPick separable_cost_argmin(const CostRows& rows, const CostCols& cols) noexcept {
  return RELAX_DISPATCH(separable_cost_argmin, rows, cols);
}

GridPick separable_utility_argmax(const double* u, const double* t, std::size_t n,
                                  const double* v, const double* s, std::size_t m) noexcept {
  return RELAX_DISPATCH(separable_utility_argmax, u, t, n, v, s, m);
}

void model_batch(const double* gp, const double* gm, std::size_t n, double tau, double lp,
                 double lm, double* out) noexcept {
  RELAX_DISPATCH(model_batch, gp, gm, n, tau, lp, lm, out);
}

double chi2_accumulate(const double* mp, const double* mm, std::size_t n, double yp, double cp,
                       double ym, double cm, double* logw) noexcept {
  return RELAX_DISPATCH(chi2_accumulate, mp, mm, n, yp, cp, ym, cm, logw);
}

double exp_shift(const double* logw, std::size_t n, double shift, double* w) noexcept {
  return RELAX_DISPATCH(exp_shift, logw, n, shift, w);
}

void cloud_moments(const CloudView& cloud, double tau, double out[4]) noexcept {
  RELAX_DISPATCH(cloud_moments, cloud, tau, out);
}

#undef RELAX_DISPATCH

}  // namespace relax::kernels
