#include "relax/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "relax/errors.hpp"
#include "relax/kernels/kernels.hpp"

namespace relax {

namespace {

struct Slopes {
  double u, v;  // dM+/dG+, dM+/dG- at tau+
  double p, q;  // dM-/dG+, dM-/dG- at tau-
};

Slopes slopes(const DelayPair& d, const RatePair& r, const ModelPair& models) {
  const RateGradient gp = models.plus.gradient(d.tau_plus, r);
  const RateGradient gm = models.minus.gradient(d.tau_minus, r);
  return {gp.d_plus, gp.d_minus, gm.d_plus, gm.d_minus};
}

double checked_determinant(const Slopes& s) {
  const double d = s.u * s.q - s.v * s.p;
  const double scale = std::abs(s.u * s.q) + std::abs(s.v * s.p);
  if (!std::isfinite(d) || !(std::abs(d) > 1e-12 * scale) || d == 0.0) {
    throw UninformativeDesign("measurement pair does not constrain both rates");
  }
  return d;
}

// Separable cost axes for one delay grid.
struct Axes {
  std::vector<double> a, t, w, u, v;
};

}  // namespace

std::vector<double> DelayGrid::values() const {
  validate();
  std::vector<double> out(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = lo * std::exp(step * static_cast<double>(k));
  out.front() = lo;
  out.back() = hi;
  return out;
}

void DelayGrid::validate() const {
  if (!(lo > 0.0 && hi > lo && std::isfinite(hi)) || n < 2) {
    throw DomainError("delay grid needs 0 < lo < hi and at least 2 points");
  }
}

double TimingModel::delay_time_s(const DelayPair& d) const noexcept {
  return 2.0 * static_cast<double>(repetitions) * (d.tau_plus + d.tau_minus) * 1e-3;
}

double TimingModel::total_s(const DelayPair& d) const noexcept {
  return delay_time_s(d) + overhead_s + static_cast<double>(repetitions) * per_shot_s;
}

GaussianApprox gaussian_sigma(const DelayPair& delays, const RatePair& rates, SigmaM sm,
                              const ModelPair& models) {
  if (!(sm.plus > 0.0) || !(sm.minus > 0.0)) throw DomainError("sigma_M must be positive");
  const Slopes s = slopes(delays, rates, models);
  const double d = checked_determinant(s);
  const double wp = 1.0 / (sm.plus * sm.plus);
  const double wm = 1.0 / (sm.minus * sm.minus);
  GaussianApprox g;
  g.a_plus = wp * s.u * s.u + wm * s.p * s.p;
  g.a_minus = wp * s.v * s.v + wm * s.q * s.q;
  g.a_zero = wp * s.u * s.v + wm * s.p * s.q;
  // a+ a- - a0^2 = (uq - vp)^2 / (sigma+ sigma-)^2, used in factored form.
  const double r = d / (sm.plus * sm.minus);
  const double det = r * r;
  g.sigma_gamma_plus = std::sqrt(g.a_minus / det);
  g.sigma_gamma_minus = std::sqrt(g.a_plus / det);
  g.covariance = -g.a_zero / det;
  return g;
}

GaussianApprox gaussian_sigma_jacobian(const DelayPair& delays, const RatePair& rates, SigmaM sm,
                                       const ModelPair& models) {
  if (!(sm.plus > 0.0) || !(sm.minus > 0.0)) throw DomainError("sigma_M must be positive");
  const Slopes s = slopes(delays, rates, models);
  checked_determinant(s);
  // Rows: (M-, M+); columns: (G-, G+).
  const double j00 = s.q, j01 = s.p, j10 = s.v, j11 = s.u;
  const double det = j00 * j11 - j01 * j10;
  const double i00 = j11 / det, i01 = -j01 / det, i10 = -j10 / det, i11 = j00 / det;
  const double vm = sm.minus * sm.minus;
  const double vp = sm.plus * sm.plus;
  // cov = Jinv diag(vm, vp) Jinv^T
  const double c00 = i00 * i00 * vm + i01 * i01 * vp;
  const double c01 = i00 * i10 * vm + i01 * i11 * vp;
  const double c11 = i10 * i10 * vm + i11 * i11 * vp;
  GaussianApprox g;
  g.a_plus = s.u * s.u / vp + s.p * s.p / vm;
  g.a_minus = s.v * s.v / vp + s.q * s.q / vm;
  g.a_zero = s.u * s.v / vp + s.p * s.q / vm;
  g.sigma_gamma_minus = std::sqrt(c00);
  g.sigma_gamma_plus = std::sqrt(c11);
  g.covariance = c01;
  return g;
}

double cost(const DelayPair& delays, const RatePair& rates, SigmaM sigma_m, const TimingModel& timing,
            const ModelPair& models) {
  GaussianApprox g;
  try {
    g = gaussian_sigma(delays, rates, sigma_m, models);
  } catch (const UninformativeDesign&) {
    return std::numeric_limits<double>::infinity();
  }
  const double fp = g.sigma_gamma_plus / rates.plus();
  const double fm = g.sigma_gamma_minus / rates.minus();
  return std::sqrt(fp * fp + fm * fm) * std::sqrt(timing.total_s(delays));
}

DelayChoice minimize_cost(const RatePair& rates, const SigmaFn& sigma_plus, const SigmaFn& sigma_minus,
                          const TimingModel& timing, const DelayGrid& grid, const ModelPair& models) {
  const std::vector<double> taus = grid.values();
  const std::size_t n = taus.size();
  const double gp2 = rates.plus() * rates.plus();
  const double gm2 = rates.minus() * rates.minus();
  // Fixed time split evenly so that swapping the axes swaps the sums exactly.
  const double fixed = 0.5 * (timing.overhead_s + static_cast<double>(timing.repetitions) * timing.per_shot_s);
  const double per_ms = 2.0 * static_cast<double>(timing.repetitions) * 1e-3;

  Axes row, col;
  for (Axes* ax : {&row, &col}) {
    ax->a.resize(n);
    ax->t.resize(n);
    ax->w.resize(n);
    ax->u.resize(n);
    ax->v.resize(n);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = taus[k];
    const RateGradient gplus = models.plus.gradient(tau, rates);
    const RateGradient gminus = models.minus.gradient(tau, rates);
    const double sp = sigma_plus(tau);
    const double sm = sigma_minus(tau);
    row.w[k] = 1.0 / (sp * sp);
    row.u[k] = gplus.d_plus;
    row.v[k] = gplus.d_minus;
    row.a[k] = row.w[k] * (row.v[k] * row.v[k] / gp2 + row.u[k] * row.u[k] / gm2);
    row.t[k] = fixed + per_ms * tau;
    // Column roles: x = w, p = u, q = v.
    col.w[k] = 1.0 / (sm * sm);
    col.u[k] = gminus.d_plus;
    col.v[k] = gminus.d_minus;
    col.a[k] = col.w[k] * (col.v[k] * col.v[k] / gp2 + col.u[k] * col.u[k] / gm2);
    col.t[k] = fixed + per_ms * tau;
  }
  const kernels::CostRows rows{row.a.data(), row.t.data(), row.w.data(), row.u.data(), row.v.data(), n};
  const kernels::CostCols cols{col.a.data(), col.t.data(), col.w.data(), col.u.data(), col.v.data(), n};
  const kernels::GridPick pick = kernels::separable_cost_argmin(rows, cols);
  if (!pick.found) throw UninformativeDesign("no informative delay pair on the grid");
  DelayChoice c;
  c.delays = {taus[pick.row], taus[pick.col]};
  c.index_plus = pick.row;
  c.index_minus = pick.col;
  c.cost = std::sqrt(pick.value);
  return c;
}

DelayChoice nob_select_delays(const RatePair& rates, const TimingModel& timing, const DelayGrid& grid,
                              const ModelPair& models) {
  const SigmaFn unit = [](double) { return 1.0; };
  return minimize_cost(rates, unit, unit, timing, grid, models);
}

DelayChoice nob_select_delays(const Moments& posterior, const TimingModel& timing, const DelayGrid& grid,
                              const ModelPair& models) {
  return nob_select_delays(RatePair(posterior.mean_plus, posterior.mean_minus), timing, grid, models);
}

Moments ParticleCloud::moments() const noexcept {
  Moments m;
  for (std::size_t k = 0; k < size(); ++k) {
    m.mean_plus += weight[k] * gamma_plus[k];
    m.mean_minus += weight[k] * gamma_minus[k];
  }
  double vp = 0.0, vm = 0.0, c = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    const double dp = gamma_plus[k] - m.mean_plus;
    const double dm = gamma_minus[k] - m.mean_minus;
    vp += weight[k] * dp * dp;
    vm += weight[k] * dm * dm;
    c += weight[k] * dp * dm;
  }
  m.sigma_plus = std::sqrt(vp);
  m.sigma_minus = std::sqrt(vm);
  m.covariance = c;
  return m;
}

bool ParticleCloud::degenerate() const noexcept {
  for (std::size_t k = 1; k < size(); ++k) {
    if (gamma_plus[k] != gamma_plus[0] || gamma_minus[k] != gamma_minus[0]) return false;
  }
  return true;
}

ParticleCloud sample_cloud(const PosteriorGrid& grid, std::size_t n, Rng& rng) {
  const auto& ap = grid.plus_axis();
  const auto& am = grid.minus_axis();
  const auto& w = grid.weights();
  const double hp = (ap.back() - ap.front()) / static_cast<double>(ap.size() - 1);
  const double hm = (am.back() - am.front()) / static_cast<double>(am.size() - 1);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  ParticleCloud c;
  c.gamma_plus.resize(n);
  c.gamma_minus.resize(n);
  c.weight.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cell = pick(rng);
    const std::size_t i = cell / am.size();
    const std::size_t j = cell % am.size();
    c.gamma_plus[k] = std::clamp(ap[i] + hp * jitter(rng), ap.front(), ap.back());
    c.gamma_minus[k] = std::clamp(am[j] + hm * jitter(rng), am.front(), am.back());
  }
  return c;
}

DelayChoice pf_select_delays(const ParticleCloud& cloud, const TimingModel& timing, const DelayGrid& grid,
                             const UtilityConfig& cfg, const ModelPair& models) {
  if (cloud.size() == 0) throw DomainError("empty particle cloud");
  if (!(cfg.scale > 0.0)) throw DomainError("utility scale must be positive");
  auto fallback = [&] {
    DelayChoice c = nob_select_delays(cloud.moments(), timing, grid, models);
    c.fallback = true;
    return c;
  };
  if (cloud.degenerate()) return fallback();

  const std::size_t np = cloud.size();
  std::vector<double> bf(np), bs(np), inv2g(np), kp(np), km(np);
  for (std::size_t k = 0; k < np; ++k) {
    const RatePair r(cloud.gamma_plus[k], cloud.gamma_minus[k]);
    const double g = r.g();
    bf[k] = r.plus() + r.minus() + g;
    bs[k] = r.plus() + r.minus() - g;
    inv2g[k] = 1.0 / (2.0 * g);
    kp[k] = models.plus.lambda_plus * r.plus() + models.plus.lambda_minus * r.minus();
    km[k] = models.minus.lambda_plus * r.plus() + models.minus.lambda_minus * r.minus();
  }
  const kernels::CloudView view{bf.data(), bs.data(), inv2g.data(), kp.data(), km.data(),
                                cloud.weight.data(), np};

  const std::vector<double> taus = grid.values();
  const std::size_t n = taus.size();
  const double wsum = [&] {
    double s = 0.0;
    for (double w : cloud.weight) s += w;
    return s;
  }();
  const double fixed = 0.5 * (timing.overhead_s + static_cast<double>(timing.repetitions) * timing.per_shot_s);
  const double per_ms = 2.0 * static_cast<double>(timing.repetitions) * 1e-3;
  const double vp0 = cfg.sigma_m.plus * cfg.sigma_m.plus;
  const double vm0 = cfg.sigma_m.minus * cfg.sigma_m.minus;
  std::vector<double> up(n), um(n), t(n);
  double info = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double mom[4];
    kernels::cloud_moments(view, taus[k], mom);
    const double mp = mom[0] / wsum;
    const double mm = mom[2] / wsum;
    const double varp = std::max(0.0, mom[1] / wsum - mp * mp);
    const double varm = std::max(0.0, mom[3] / wsum - mm * mm);
    up[k] = cfg.scale * 0.5 * std::log1p(varp / vp0);
    um[k] = cfg.scale * 0.5 * std::log1p(varm / vm0);
    t[k] = fixed + per_ms * taus[k];
    info = std::max({info, up[k], um[k]});
  }
  if (!(info > 0.0)) return fallback();
  const kernels::GridPick pick = kernels::separable_utility_argmax(up.data(), t.data(), n, um.data(), t.data(), n);
  if (!pick.found) return fallback();
  DelayChoice c;
  c.delays = {taus[pick.row], taus[pick.col]};
  c.index_plus = pick.row;
  c.index_minus = pick.col;
  c.cost = pick.value;
  return c;
}

}  // namespace relax
