#include "relax/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relax/errors.hpp"

namespace relax {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 mat_vec(const Matrix3& m, const Vec3& v) {
  Vec3 out{};
  for (int i = 0; i < 3; ++i) out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return out;
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

std::string fmt_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// c . B[read] X B[prep] s for an arbitrary middle matrix X.
double sandwich(Signal sig, const Matrix3& x, const SignalParams& p) {
  const Vec3 prepared = mat_vec(pulse_operator(sig.prep, p), pump_state(p));
  const Vec3 evolved = mat_vec(x, prepared);
  return dot(readout_vector(p), mat_vec(pulse_operator(sig.read, p), evolved));
}

}  // namespace

char state_char(State s) noexcept {
  switch (s) {
    case State::Minus: return '-';
    case State::Zero: return '0';
    case State::Plus: return '+';
  }
  return '?';
}

State parse_state(char c) {
  switch (c) {
    case '-': return State::Minus;
    case '0': return State::Zero;
    case '+': return State::Plus;
    default: throw DomainError(std::string("invalid state label '") + c + "'");
  }
}

void SignalParams::validate() const {
  if (!(f0 > 0.0) || !std::isfinite(f0)) throw DomainError("f0 must be positive, got " + fmt_value(f0));
  if (!(contrast >= 0.0 && contrast < 1.0)) {
    throw DomainError("contrast must lie in [0, 1), got " + fmt_value(contrast));
  }
  if (!(alpha > 1.0 / 3.0 && alpha <= 1.0)) {
    throw DomainError("alpha must lie in (1/3, 1], got " + fmt_value(alpha));
  }
  if (!(eta_plus >= 0.0 && eta_plus < 0.5)) {
    throw DomainError("eta_plus must lie in [0, 0.5), got " + fmt_value(eta_plus));
  }
  if (!(eta_minus >= 0.0 && eta_minus < 0.5)) {
    throw DomainError("eta_minus must lie in [0, 0.5), got " + fmt_value(eta_minus));
  }
  if (repetitions <= 0) throw DomainError("repetitions must be positive");
}

SignalParams SignalParams::ideal(double f0, double contrast, std::int64_t r) {
  SignalParams p;
  p.f0 = f0;
  p.contrast = contrast;
  p.alpha = 1.0;
  p.eta_plus = 0.0;
  p.eta_minus = 0.0;
  p.repetitions = r;
  return p;
}

std::string Signal::label() const { return {state_char(prep), state_char(read)}; }

ProtocolSpec ProtocolSpec::robust() {
  return {{{State::Zero, State::Zero}, {State::Plus, State::Zero}},
          {{State::Zero, State::Zero}, {State::Minus, State::Zero}}};
}

ProtocolSpec ProtocolSpec::optimal() {
  return {{{State::Plus, State::Plus}, {State::Plus, State::Zero}},
          {{State::Minus, State::Minus}, {State::Minus, State::Zero}}};
}

std::string ProtocolSpec::label() const {
  return "(" + m_plus.s2.label() + "," + m_plus.s1.label() + "),(" + m_minus.s2.label() + "," +
         m_minus.s1.label() + ")";
}

ProtocolSpec ProtocolSpec::parse(std::string_view text) {
  // "(ab,cd),(ef,gh)" with the dark signal first.
  std::string t;
  for (char c : text) {
    if (c != ' ') t.push_back(c);
  }
  if (t.size() != 15 || t[0] != '(' || t[3] != ',' || t[6] != ')' || t[7] != ',' || t[8] != '(' ||
      t[11] != ',' || t[14] != ')') {
    throw DomainError("malformed protocol label '" + std::string(text) + "'");
  }
  auto sig = [&](std::size_t at) { return Signal{parse_state(t[at]), parse_state(t[at + 1])}; };
  return {{sig(4), sig(1)}, {sig(12), sig(9)}};
}

std::array<double, 3> pump_state(const SignalParams& p) {
  const double side = 0.5 * (1.0 - p.alpha);
  return {side, p.alpha, side};
}

std::array<double, 3> readout_vector(const SignalParams& p) {
  const double dark = p.f0 * (1.0 - p.contrast);
  return {dark, p.f0, dark};
}

Matrix3 pulse_operator(State s, const SignalParams& p) {
  switch (s) {
    case State::Plus: {
      const double e = p.eta_plus;
      return {{{1.0, 0.0, 0.0}, {0.0, e, 1.0 - e}, {0.0, 1.0 - e, e}}};
    }
    case State::Minus: {
      const double e = p.eta_minus;
      return {{{e, 1.0 - e, 0.0}, {1.0 - e, e, 0.0}, {0.0, 0.0, 1.0}}};
    }
    case State::Zero: break;
  }
  return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

double expected_counts(Signal sig, double tau, const RatePair& rates, const SignalParams& params) {
  const Propagator prop = propagator(tau, rates);
  const double r = static_cast<double>(params.repetitions);
  return r * (sandwich(sig, prop.entries, params) + params.background_at(tau));
}

double expected_difference(const MeasurementSpec& m, double tau, const RatePair& rates,
                           const SignalParams& params) {
  return expected_counts(m.s1, tau, rates, params) - expected_counts(m.s2, tau, rates, params);
}

double robust_difference(Branch b, double tau, const RatePair& rates, const SignalParams& params) {
  const Propagator prop = propagator(tau, rates);
  const int side = b == Branch::Plus ? 2 : 0;
  const double r = static_cast<double>(params.repetitions);
  return r * params.contrast * params.f0 * (3.0 * params.alpha - 1.0) / 2.0 *
         (1.0 - params.eta(b)) * (prop(1, 1) - prop(side, 1));
}

double normalized_expectation(const MeasurementSpec& m, double tau, const RatePair& rates,
                              const SignalParams& params) {
  return expected_difference(m, tau, rates, params) / expected_difference(m, 0.0, rates, params);
}

MeasurementModel measurement_model(const MeasurementSpec& m, const SignalParams& params) {
  // P = J/3 + K f + L g; the J part is common to every signal, K gives the
  // tau = 0 difference, and L is linear in the rates.
  Matrix3 k{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) k[i][j] = (i == j ? 1.0 : 0.0) - 1.0 / 3.0;
  }
  const Matrix3 dl_plus = {{{0, 0, 0}, {0, -1, 1}, {0, 1, -1}}};
  const Matrix3 dl_minus = {{{-1, 1, 0}, {1, -1, 0}, {0, 0, 0}}};
  auto diff = [&](const Matrix3& x) { return sandwich(m.s1, x, params) - sandwich(m.s2, x, params); };

  const double dk = diff(k);
  const double scale = params.f0;
  if (!(std::abs(dk) > 1e-12 * scale)) {
    throw DomainError("measurement " + m.s2.label() + "/" + m.s1.label() +
                      " has a vanishing tau = 0 difference");
  }
  return {1.0 + diff(dl_plus) / dk, 1.0 + diff(dl_minus) / dk};
}

ModelPair model_pair(const ProtocolSpec& p, const SignalParams& params) {
  return {measurement_model(p.m_plus, params), measurement_model(p.m_minus, params)};
}

SignalParams DriftSchedule::at(const SignalParams& base, double t) const {
  SignalParams p = base;
  if (f0_) p.f0 = f0_(t, base.f0);
  if (contrast_) p.contrast = contrast_(t, base.contrast);
  if (alpha_) p.alpha = alpha_(t, base.alpha);
  if (eta_plus_) p.eta_plus = eta_plus_(t, base.eta_plus);
  if (eta_minus_) p.eta_minus = eta_minus_(t, base.eta_minus);
  p.validate();
  return p;
}

DriftSchedule::Fn DriftSchedule::linear_ramp(double from, double to, double duration_s) {
  return [=](double t, double) {
    if (duration_s <= 0.0 || t >= duration_s) return to;
    if (t <= 0.0) return from;
    return from + (to - from) * (t / duration_s);
  };
}

DriftSchedule::Fn DriftSchedule::scale(double k) {
  return [=](double, double base) { return base * k; };
}

std::int64_t poisson(double mean, Rng& rng) {
  if (!std::isfinite(mean) || mean < 0.0) {
    throw DomainError("Poisson mean must be finite and non-negative, got " + fmt_value(mean));
  }
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

FourSignals expected_signals(const MeasurementSpec& m, double tau, const RatePair& rates,
                             const SignalParams& params) {
  params.validate();
  FourSignals out;
  out.s1_tau = {0, expected_counts(m.s1, tau, rates, params), tau, m.s1};
  out.s2_tau = {0, expected_counts(m.s2, tau, rates, params), tau, m.s2};
  out.s1_zero = {0, expected_counts(m.s1, 0.0, rates, params), 0.0, m.s1};
  out.s2_zero = {0, expected_counts(m.s2, 0.0, rates, params), 0.0, m.s2};
  return out;
}

FourSignals sample_signals(const MeasurementSpec& m, double tau, const RatePair& rates,
                           const SignalParams& params, Rng& rng, const DriftSchedule* drift,
                           AcquisitionClock clock) {
  FourSignals out;
  out.s1_tau = {0, 0.0, tau, m.s1};
  out.s2_tau = {0, 0.0, tau, m.s2};
  out.s1_zero = {0, 0.0, 0.0, m.s1};
  out.s2_zero = {0, 0.0, 0.0, m.s2};
  SignalSample* slots[4] = {&out.s1_tau, &out.s2_tau, &out.s1_zero, &out.s2_zero};

  if (drift == nullptr || drift->is_static()) {
    params.validate();
    for (SignalSample* s : slots) {
      s->expectation = expected_counts(s->signal, s->tau, rates, params);
      s->counts = poisson(s->expectation, rng);
    }
    return out;
  }

  const std::int64_t block = clock.block_size > 0 ? clock.block_size : 1000;
  std::int64_t done = 0;
  while (done < params.repetitions) {
    const std::int64_t n = std::min(block, params.repetitions - done);
    const double mid = clock.t_start + clock.rep_duration * (static_cast<double>(done) + 0.5 * n);
    SignalParams local = drift->at(params, mid);
    local.repetitions = n;
    for (SignalSample* s : slots) {
      const double mu = expected_counts(s->signal, s->tau, rates, local);
      s->expectation += mu;
      s->counts += poisson(mu, rng);
    }
    done += n;
  }
  return out;
}

}  // namespace relax
