#include "relax/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "relax/errors.hpp"
#include "relax/kernels/kernels.hpp"

namespace relax {

namespace {

constexpr double kMinLogMass = -745.0;

// Compensated sum; plain accumulation over 4e4 cells drifts past 1e-12.
double accurate_sum(const std::vector<double>& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

// Bilinear weight of the old grid at (x, y); zero outside its support.
double interpolate(const std::vector<double>& xa, const std::vector<double>& ya,
                   const std::vector<double>& w, double x, double y) {
  if (x < xa.front() || x > xa.back() || y < ya.front() || y > ya.back()) return 0.0;
  const auto locate = [](const std::vector<double>& a, double v) {
    auto it = std::upper_bound(a.begin(), a.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - a.begin());
    if (hi >= a.size()) hi = a.size() - 1;
    if (hi == 0) hi = 1;
    const std::size_t lo = hi - 1;
    const double t = (v - a[lo]) / (a[hi] - a[lo]);
    return std::pair{lo, std::clamp(t, 0.0, 1.0)};
  };
  const auto [i, tx] = locate(xa, x);
  const auto [j, ty] = locate(ya, y);
  const std::size_t m = ya.size();
  const double w00 = w[i * m + j];
  const double w01 = w[i * m + j + 1];
  const double w10 = w[(i + 1) * m + j];
  const double w11 = w[(i + 1) * m + j + 1];
  return (1.0 - tx) * ((1.0 - ty) * w00 + ty * w01) + tx * ((1.0 - ty) * w10 + ty * w11);
}

double branch_term(double y, double predicted, double sigma, const std::optional<ModelWidth>& width) {
  if (!width) {
    const double r = y - predicted;
    return -r * r / (2.0 * sigma * sigma);
  }
  const double s = width->sigma_at(predicted);
  const double r = y - predicted;
  return -r * r / (2.0 * s * s) - std::log(s / sigma);
}

// logw += log-likelihood of one pair given the model values per cell; returns max(logw).
double accumulate_pair(const MeasurementPair& pair, const std::vector<double>& mp,
                       const std::vector<double>& mm, std::vector<double>& lw) {
  const std::size_t n = lw.size();
  if (!pair.width_plus && !pair.width_minus) {
    const double cp = 1.0 / (2.0 * pair.sigma_plus * pair.sigma_plus);
    const double cm = 1.0 / (2.0 * pair.sigma_minus * pair.sigma_minus);
    return kernels::chi2_accumulate(mp.data(), mm.data(), n, pair.m_plus, cp, pair.m_minus, cm, lw.data());
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    lw[k] += branch_term(pair.m_plus, mp[k], pair.sigma_plus, pair.width_plus) +
             branch_term(pair.m_minus, mm[k], pair.sigma_minus, pair.width_minus);
    if (lw[k] > mx) mx = lw[k];
  }
  return mx;
}

}  // namespace

double ModelWidth::sigma_at(double predicted) const noexcept {
  return std::sqrt(abs * abs + rel * rel * predicted * predicted);
}

void MeasurementPair::validate() const {
  if (!std::isfinite(m_plus) || !std::isfinite(m_minus)) {
    throw DomainError("measurement values must be finite");
  }
  if (!(sigma_plus > 0.0) || !(sigma_minus > 0.0)) {
    throw DomainError("measurement sigmas must be positive");
  }
  if (!(tau_plus > 0.0) || !(tau_minus > 0.0)) throw DomainError("delays must be positive");
  for (const auto& w : {width_plus, width_minus}) {
    if (w && (!(w->abs > 0.0) || !(w->rel >= 0.0) || !std::isfinite(w->abs) || !std::isfinite(w->rel))) {
      throw DomainError("model width needs abs > 0 and finite rel >= 0");
    }
  }
}

double log_likelihood(const MeasurementPair& pair, const RatePair& rates, const ModelPair& models) {
  return branch_term(pair.m_plus, models.plus.value(pair.tau_plus, rates), pair.sigma_plus, pair.width_plus) +
         branch_term(pair.m_minus, models.minus.value(pair.tau_minus, rates), pair.sigma_minus, pair.width_minus);
}

std::vector<double> linear_axis(double lo, double hi, std::size_t n) {
  std::vector<double> a(n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = k + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return a;
}

PosteriorGrid::PosteriorGrid(std::vector<double> plus_axis, std::vector<double> minus_axis,
                             std::vector<double> weights, Bounds hard)
    : plus_(std::move(plus_axis)), minus_(std::move(minus_axis)), w_(std::move(weights)), hard_(hard) {
  if (!(hard_.lo > 0.0 && hard_.hi > hard_.lo)) throw DomainError("invalid hard bounds");
  auto check_axis = [&](const std::vector<double>& a, const char* name) {
    if (a.size() < 2) throw DomainError(std::string(name) + " axis needs at least 2 points");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!(a[k] >= hard_.lo && a[k] <= hard_.hi)) {
        throw DomainError(std::string(name) + " axis leaves the hard bounds");
      }
      if (k > 0 && !(a[k] > a[k - 1])) {
        throw DomainError(std::string(name) + " axis must be strictly increasing");
      }
    }
  };
  check_axis(plus_, "gamma_plus");
  check_axis(minus_, "gamma_minus");
  if (w_.size() != plus_.size() * minus_.size()) throw DomainError("weight array has the wrong size");
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("weights must be finite and nonnegative");
  }
  rebuild_nodes();
  normalize_from_weights();
}

PosteriorGrid PosteriorGrid::prior(Bounds bounds, std::size_t n, PriorMeasure measure) {
  std::vector<double> ax = linear_axis(bounds.lo, bounds.hi, n);
  std::vector<double> w(n * n, 1.0);
  if (measure == PriorMeasure::LogUniform) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) w[i * n + j] = 1.0 / (ax[i] * ax[j]);
    }
  }
  return PosteriorGrid(ax, ax, std::move(w), bounds);
}

PosteriorGrid PosteriorGrid::box(Bounds hard, double plus_lo, double plus_hi, double minus_lo,
                                 double minus_hi, std::size_t n) {
  plus_lo = std::max(plus_lo, hard.lo);
  minus_lo = std::max(minus_lo, hard.lo);
  plus_hi = std::min(plus_hi, hard.hi);
  minus_hi = std::min(minus_hi, hard.hi);
  return PosteriorGrid(linear_axis(plus_lo, plus_hi, n), linear_axis(minus_lo, minus_hi, n),
                       std::vector<double>(n * n, 1.0), hard);
}

void PosteriorGrid::rebuild_nodes() {
  const std::size_t n = plus_.size();
  const std::size_t m = minus_.size();
  node_plus_.resize(n * m);
  node_minus_.resize(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      node_plus_[i * m + j] = plus_[i];
      node_minus_[i * m + j] = minus_[j];
    }
  }
}

void PosteriorGrid::normalize_from_weights() {
  const double total = accurate_sum(w_);
  if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("weights have no mass");
  logw_.resize(w_.size());
  for (std::size_t k = 0; k < w_.size(); ++k) {
    w_[k] /= total;
    logw_[k] = w_[k] > 0.0 ? std::log(w_[k]) : -std::numeric_limits<double>::infinity();
  }
}

void PosteriorGrid::update(const MeasurementPair& pair, const ModelPair& models) {
  pair.validate();
  const std::size_t n = w_.size();
  std::vector<double> mp(n), mm(n);
  kernels::model_batch(node_plus_.data(), node_minus_.data(), n, pair.tau_plus,
                       models.plus.lambda_plus, models.plus.lambda_minus, mp.data());
  kernels::model_batch(node_plus_.data(), node_minus_.data(), n, pair.tau_minus,
                       models.minus.lambda_plus, models.minus.lambda_minus, mm.data());
  std::vector<double> lw = logw_;
  const double mx = accumulate_pair(pair, mp, mm, lw);
  if (!std::isfinite(mx)) throw UpdateRejected("likelihood is not finite on the grid support");
  std::vector<double> w(n);
  kernels::exp_shift(lw.data(), n, mx, w.data());
  const double total = accurate_sum(w);
  const double log_mass = mx + std::log(total);
  if (!(log_mass >= kMinLogMass)) {
    throw UpdateRejected("posterior mass underflows (log mass " + std::to_string(log_mass) +
                         "); measurement inconsistent with the grid support");
  }
  const double shift = std::log(total);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] /= total;
    lw[k] -= mx + shift;
  }
  w_ = std::move(w);
  logw_ = std::move(lw);
}

void PosteriorGrid::update_batch(const std::vector<MeasurementPair>& pairs, const ModelPair& models) {
  for (const MeasurementPair& pair : pairs) pair.validate();
  if (pairs.empty()) return;
  const std::size_t n = w_.size();
  std::vector<double> mp(n), mm(n);
  std::vector<double> lw = logw_;
  double mx = -std::numeric_limits<double>::infinity();
  for (const MeasurementPair& pair : pairs) {
    kernels::model_batch(node_plus_.data(), node_minus_.data(), n, pair.tau_plus,
                         models.plus.lambda_plus, models.plus.lambda_minus, mp.data());
    kernels::model_batch(node_plus_.data(), node_minus_.data(), n, pair.tau_minus,
                         models.minus.lambda_plus, models.minus.lambda_minus, mm.data());
    mx = accumulate_pair(pair, mp, mm, lw);
  }
  if (!std::isfinite(mx)) throw UpdateRejected("batch likelihood is not finite on the grid support");
  std::vector<double> w(n);
  kernels::exp_shift(lw.data(), n, mx, w.data());
  const double total = accurate_sum(w);
  const double shift = std::log(total);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] /= total;
    lw[k] -= mx + shift;
  }
  w_ = std::move(w);
  logw_ = std::move(lw);
}

Moments PosteriorGrid::moments() const noexcept {
  const std::size_t n = plus_.size();
  const std::size_t m = minus_.size();
  std::vector<double> mp(n, 0.0), mm(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      mp[i] += w_[i * m + j];
      mm[j] += w_[i * m + j];
    }
  }
  Moments r;
  for (std::size_t i = 0; i < n; ++i) r.mean_plus += mp[i] * plus_[i];
  for (std::size_t j = 0; j < m; ++j) r.mean_minus += mm[j] * minus_[j];
  double vp = 0.0, vm = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = plus_[i] - r.mean_plus;
    vp += mp[i] * d * d;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double d = minus_[j] - r.mean_minus;
    vm += mm[j] * d * d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = plus_[i] - r.mean_plus;
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += w_[i * m + j] * (minus_[j] - r.mean_minus);
    cov += dp * row;
  }
  r.sigma_plus = std::sqrt(vp);
  r.sigma_minus = std::sqrt(vm);
  r.covariance = cov;
  return r;
}

void PosteriorGrid::regrid(std::size_t n, double span_sigmas, double min_cells) {
  const Moments mo = moments();
  const double cell_p = (plus_.back() - plus_.front()) / static_cast<double>(plus_.size() - 1);
  const double cell_m = (minus_.back() - minus_.front()) / static_cast<double>(minus_.size() - 1);

  auto span = [&](double mean, double sigma, double cell) {
    // A posterior narrower than one old cell is unresolved; its width is at least
    // the quantization spread cell/sqrt(12), otherwise the new box can clip real mass.
    const double resolved = std::sqrt(sigma * sigma + cell * cell / 12.0);
    const double half = std::max(span_sigmas * resolved, min_cells * cell);
    double lo = std::max(mean - half, hard_.lo);
    double hi = std::min(mean + half, hard_.hi);
    if (!(hi > lo)) {
      lo = std::max(hard_.lo, std::min(lo, hi) - cell);
      hi = std::min(hard_.hi, lo + 2.0 * cell);
    }
    return std::pair{lo, hi};
  };
  const auto [plo, phi] = span(mo.mean_plus, mo.sigma_plus, cell_p);
  const auto [mlo, mhi] = span(mo.mean_minus, mo.sigma_minus, cell_m);

  std::vector<double> np = linear_axis(plo, phi, n);
  std::vector<double> nm = linear_axis(mlo, mhi, n);
  std::vector<double> nw(n * n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      nw[i * n + j] = interpolate(plus_, minus_, w_, np[i], nm[j]);
      total += nw[i * n + j];
    }
  }
  if (!(total > 0.0)) return;  // nothing to transfer; keep the current grid
  plus_ = std::move(np);
  minus_ = std::move(nm);
  w_ = std::move(nw);
  rebuild_nodes();
  normalize_from_weights();
}

PosteriorGrid PosteriorGrid::swapped() const {
  const std::size_t n = plus_.size();
  const std::size_t m = minus_.size();
  std::vector<double> w(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) w[j * n + i] = w_[i * m + j];
  }
  return PosteriorGrid(minus_, plus_, std::move(w), hard_);
}

PosteriorGrid bayes_update(PosteriorGrid grid, const MeasurementPair& pair, const ModelPair& models) {
  grid.update(pair, models);
  return grid;
}

}  // namespace relax
