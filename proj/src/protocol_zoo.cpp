#include "relax/protocol_zoo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "relax/errors.hpp"
#include "relax/ratio_estimator.hpp"

namespace relax {

namespace {

constexpr double kProbeTol = 1e-12;

// Expected counts of one signal on a 5x5x5 (tau, G+, G-) lattice, R = 1.
using Fingerprint = std::array<double, 125>;

Fingerprint fingerprint(Signal s) {
  static constexpr double taus[5] = {0.0, 0.07, 0.3, 1.1, 4.0};
  static constexpr double plus[5] = {0.3, 0.9, 2.1, 5.0, 13.0};
  static constexpr double minus[5] = {0.2, 0.7, 1.7, 4.3, 11.0};
  const SignalParams p = SignalParams::ideal(0.02, 0.24, 1);
  Fingerprint f{};
  std::size_t k = 0;
  for (double t : taus)
    for (double gp : plus)
      for (double gm : minus) f[k++] = expected_counts(s, t, RatePair(gp, gm), p);
  return f;
}

bool same_function(const Fingerprint& a, const Fingerprint& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double scale = std::max({std::abs(a[k]), std::abs(b[k]), 0.02});
    if (std::abs(a[k] - b[k]) > kProbeTol * scale) return false;
  }
  return true;
}

double zero_delay_counts(Signal s) {
  return expected_counts(s, 0.0, RatePair(1.0, 1.0), SignalParams::ideal(0.02, 0.24, 1));
}

bool nonzero_difference(Signal a, Signal b) {
  return std::abs(zero_delay_counts(a) - zero_delay_counts(b)) > kProbeTol * 0.02;
}

bool signal_before(Signal a, Signal b) {
  auto key = [](Signal s) {
    return std::tuple{s.read != State::Zero, s.prep != s.read, s.label()};
  };
  return key(a) < key(b);
}

// Bright signal first.
MeasurementSpec oriented(Signal a, Signal b) {
  return zero_delay_counts(a) > zero_delay_counts(b) ? MeasurementSpec{a, b} : MeasurementSpec{b, a};
}

bool same_model(const MeasurementModel& a, const MeasurementModel& b) {
  return std::abs(a.lambda_plus - b.lambda_plus) <= kProbeTol && std::abs(a.lambda_minus - b.lambda_minus) <= kProbeTol;
}

// Branch assignment: the measurement leaning harder on G+ serves the + branch.
ProtocolSpec assign_branches(const MeasurementSpec& x, const MeasurementSpec& y) {
  const SignalParams ideal = SignalParams::ideal();
  const MeasurementModel mx = measurement_model(x, ideal);
  const MeasurementModel my = measurement_model(y, ideal);
  const double dx = mx.lambda_plus - mx.lambda_minus;
  const double dy = my.lambda_plus - my.lambda_minus;
  if (std::abs(dx - dy) > kProbeTol) return dx < dy ? ProtocolSpec{x, y} : ProtocolSpec{y, x};
  return x < y ? ProtocolSpec{x, y} : ProtocolSpec{y, x};
}

}  // namespace

std::vector<Signal> all_signals() {
  std::vector<Signal> out;
  for (State p : {State::Minus, State::Zero, State::Plus})
    for (State r : {State::Minus, State::Zero, State::Plus}) out.push_back({p, r});
  return out;
}

Signal canonical_signal(Signal s) {
  const Fingerprint f = fingerprint(s);
  Signal best = s;
  for (Signal t : all_signals()) {
    if (signal_before(t, best) && same_function(f, fingerprint(t))) best = t;
  }
  return best;
}

Enumeration enumerate_protocols(const std::vector<std::size_t>& order) {
  const std::vector<Signal> sig = all_signals();
  std::array<Signal, 9> canon;
  std::set<std::string> classes;
  for (std::size_t k = 0; k < 9; ++k) {
    canon[k] = canonical_signal(sig[k]);
    classes.insert(canon[k].label());
  }

  constexpr std::size_t raw = 9 * 9 * 9 * 9;
  std::vector<std::size_t> idx = order;
  if (idx.empty()) {
    idx.resize(raw);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  }
  if (idx.size() != raw) throw DomainError("enumeration order must be a permutation of 6561 indices");

  Enumeration e;
  e.raw = raw;
  e.signal_classes = classes.size();
  std::set<MeasurementSpec> measurements;
  std::set<ProtocolSpec> protocols;
  for (std::size_t n : idx) {
    const std::size_t a = n % 9, b = (n / 9) % 9, c = (n / 81) % 9, d = n / 729;
    if (!nonzero_difference(sig[a], sig[b]) || !nonzero_difference(sig[c], sig[d])) continue;
    ++e.nonzero_denominator;
    const MeasurementSpec m1 = oriented(canon[a], canon[b]);
    const MeasurementSpec m2 = oriented(canon[c], canon[d]);
    measurements.insert(m1);
    measurements.insert(m2);
    if (m1 == m2) continue;
    protocols.insert(assign_branches(m1, m2));
  }
  e.measurement_classes = measurements.size();
  e.protocols.assign(protocols.begin(), protocols.end());
  return e;
}

bool eta_insensitive(const MeasurementSpec& m) {
  SignalParams lo = SignalParams::ideal();
  SignalParams hi = lo;
  hi.eta_plus = 0.1;
  hi.eta_minus = 0.1;
  return same_model(measurement_model(m, lo), measurement_model(m, hi));
}

RankEntry evaluate_protocol(const ProtocolSpec& protocol, const RatePair& rates, const RankConfig& cfg) {
  RankEntry e;
  e.protocol = protocol;
  e.eta_insensitive_plus = eta_insensitive(protocol.m_plus);
  e.eta_insensitive_minus = eta_insensitive(protocol.m_minus);
  e.cost = std::numeric_limits<double>::infinity();

  const ModelPair models = model_pair(protocol, cfg.params);
  if (same_model(models.plus, models.minus)) return e;  // one function, two unknowns

  const SignalParams& p = cfg.params;
  auto sigma_of = [&](const MeasurementSpec& m) {
    return [&, m](double tau) { return expected_estimate(expected_signals(m, tau, rates, p)).sigma_m; };
  };
  try {
    const DelayChoice c =
        minimize_cost(rates, sigma_of(protocol.m_plus), sigma_of(protocol.m_minus), cfg.timing, cfg.grid, models);
    e.delays = c.delays;
    e.cost = c.cost;
  } catch (const UninformativeDesign&) {
  }
  return e;
}

ProtocolRanking rank_protocols(const RatePair& rates, const RankConfig& cfg,
                               const std::vector<ProtocolSpec>& protocols) {
  const std::vector<ProtocolSpec> list = protocols.empty() ? enumerate_protocols().protocols : protocols;
  ProtocolRanking r;
  r.reference = cfg.reference;
  double ref_cost = std::numeric_limits<double>::quiet_NaN();
  for (const ProtocolSpec& p : list) {
    r.entries.push_back(evaluate_protocol(p, rates, cfg));
    if (p == cfg.reference) ref_cost = r.entries.back().cost;
  }
  if (std::isnan(ref_cost)) ref_cost = evaluate_protocol(cfg.reference, rates, cfg).cost;
  for (RankEntry& e : r.entries) e.ratio = e.cost / ref_cost;
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const RankEntry& a, const RankEntry& b) { return a.cost < b.cost; });
  return r;
}

std::vector<RatioRow> sensitivity_ratio_curve(const std::vector<double>& ratios, const RankConfig& cfg,
                                              double scale) {
  std::vector<RatioRow> rows;
  for (double q : ratios) {
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("rate ratio must be positive and finite");
    const double s = std::sqrt(q);
    const RatePair rates(scale * s, scale / s);
    const RankEntry robust = evaluate_protocol(ProtocolSpec::robust(), rates, cfg);
    const RankEntry optimal = evaluate_protocol(ProtocolSpec::optimal(), rates, cfg);
    rows.push_back({q, robust.cost, optimal.cost, robust.cost / optimal.cost, robust.delays, optimal.delays});
  }
  return rows;
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw DomainError("log_space needs 0 < lo <= hi and n > 0");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < n; ++k) v[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

}  // namespace relax
