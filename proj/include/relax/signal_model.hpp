#pragma once

// Expected photon counts of (prepare, read) signals and a Poisson sampler.
//
// A signal S_ij prepares |i>, waits tau, then reads |j> (read |+-> means a pi
// pulse before the optical readout):
//
//   S_ij = R [ c . B[j] P(tau) B[i] s + b(tau) ].

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "relax/random.hpp"
#include "relax/spin_model.hpp"

namespace relax {

/// Spin sublevel labels; the integer value is the basis index.
enum class State : int { Minus = 0, Zero = 1, Plus = 2 };

char state_char(State s) noexcept;
/// Accepts '-', '0', '+'. Throws DomainError otherwise.
State parse_state(char c);

struct SignalParams {
  double f0 = 0.02;        // photons per readout from |0>
  double contrast = 0.24;  // C
  double alpha = 0.8;      // pump fidelity
  double eta_plus = 0.05;
  double eta_minus = 0.05;
  std::function<double(double)> background;  // b(tau), counts per readout; empty means 0
  std::int64_t repetitions = 1000000;        // R

  double eta(Branch b) const noexcept { return b == Branch::Plus ? eta_plus : eta_minus; }
  double background_at(double tau) const { return background ? background(tau) : 0.0; }
  /// Throws DomainError naming the first violated invariant.
  void validate() const;

  /// Photophysics of an ideal sensor: alpha = 1, eta = 0, b = 0.
  static SignalParams ideal(double f0 = 0.02, double contrast = 0.24, std::int64_t r = 1000000);
};

struct Signal {
  State prep = State::Zero;
  State read = State::Zero;

  std::string label() const;  // e.g. "+0"
  friend auto operator<=>(const Signal&, const Signal&) = default;
};

/// One normalized measurement: (S1(tau) - S2(tau)) / (S1(0) - S2(0)).
/// S1 is the bright signal, so the tau = 0 difference is positive.
struct MeasurementSpec {
  Signal s1;
  Signal s2;

  friend auto operator<=>(const MeasurementSpec&, const MeasurementSpec&) = default;
};

struct ProtocolSpec {
  MeasurementSpec m_plus;
  MeasurementSpec m_minus;

  /// (+0,00),(-0,00): cancels f0, C, alpha, eta and b.
  static ProtocolSpec robust();
  /// (+0,++),(-0,--): most sensitive, eta-dependent.
  static ProtocolSpec optimal();

  const MeasurementSpec& of(Branch b) const noexcept { return b == Branch::Plus ? m_plus : m_minus; }
  /// Dark signal first, as "(+0,00),(-0,00)".
  std::string label() const;
  /// Inverse of label(); throws DomainError on malformed text.
  static ProtocolSpec parse(std::string_view text);

  friend auto operator<=>(const ProtocolSpec&, const ProtocolSpec&) = default;
};

/// Pump state s, readout vector c and pi-pulse operator B[state].
std::array<double, 3> pump_state(const SignalParams& p);
std::array<double, 3> readout_vector(const SignalParams& p);
Matrix3 pulse_operator(State s, const SignalParams& p);

double expected_counts(Signal sig, double tau, const RatePair& rates, const SignalParams& params);

/// S1 - S2 by two evaluations of expected_counts.
double expected_difference(const MeasurementSpec& m, double tau, const RatePair& rates,
                           const SignalParams& params);

/// Closed form  R C f0 (3 alpha - 1)/2 (1 - eta) (p00 - p_{+-}0)  of S00 - S_{+-}0.
double robust_difference(Branch b, double tau, const RatePair& rates, const SignalParams& params);

/// Difference at tau normalized by the difference at 0.
double normalized_expectation(const MeasurementSpec& m, double tau, const RatePair& rates,
                              const SignalParams& params);

/// The (lambda+, lambda-) of this measurement. Throws DomainError when the
/// tau = 0 difference vanishes.
MeasurementModel measurement_model(const MeasurementSpec& m, const SignalParams& params);
ModelPair model_pair(const ProtocolSpec& p, const SignalParams& params);

struct SignalSample {
  std::int64_t counts = 0;
  double expectation = 0.0;
  double tau = 0.0;
  Signal signal;
};

/// S1(tau), S2(tau), S1(0), S2(0) of one measurement.
struct FourSignals {
  SignalSample s1_tau;
  SignalSample s2_tau;
  SignalSample s1_zero;
  SignalSample s2_zero;
};

/// Slow drift of the signal parameters over wall-clock time t (seconds).
/// Each entry maps (t, base value) to the instantaneous value.
class DriftSchedule {
 public:
  using Fn = std::function<double(double t, double base)>;

  DriftSchedule() = default;

  DriftSchedule& f0(Fn fn) { f0_ = std::move(fn); return *this; }
  DriftSchedule& contrast(Fn fn) { contrast_ = std::move(fn); return *this; }
  DriftSchedule& alpha(Fn fn) { alpha_ = std::move(fn); return *this; }
  DriftSchedule& eta_plus(Fn fn) { eta_plus_ = std::move(fn); return *this; }
  DriftSchedule& eta_minus(Fn fn) { eta_minus_ = std::move(fn); return *this; }

  bool is_static() const noexcept { return !(f0_ || contrast_ || alpha_ || eta_plus_ || eta_minus_); }

  /// Instantaneous parameters; throws DomainError if they leave the valid range.
  SignalParams at(const SignalParams& base, double t) const;

  /// Linear change from `from` to `to` over [0, duration], constant afterwards.
  static Fn linear_ramp(double from, double to, double duration_s);
  static Fn scale(double k);

 private:
  Fn f0_, contrast_, alpha_, eta_plus_, eta_minus_;
};

/// Wall-clock position of an acquisition for drift evaluation.
struct AcquisitionClock {
  double t_start = 0.0;         // s
  double rep_duration = 0.0;    // s per repetition of the interleaved sequence
  std::int64_t block_size = 1000;
};

/// Independent Poisson draws of the four signals, each summed over R
/// repetitions. With a static schedule this is one draw per signal at the
/// summed mean; otherwise the four signals are drawn per block of repetitions
/// with the parameters at the block midpoint.
FourSignals sample_signals(const MeasurementSpec& m, double tau, const RatePair& rates,
                           const SignalParams& params, Rng& rng,
                           const DriftSchedule* drift = nullptr, AcquisitionClock clock = {});

/// The four signals with expectations only (counts left at zero).
FourSignals expected_signals(const MeasurementSpec& m, double tau, const RatePair& rates,
                             const SignalParams& params);

/// Poisson draw with the given mean (0 for mean 0); throws DomainError on a
/// negative or non-finite mean.
std::int64_t poisson(double mean, Rng& rng);

}  // namespace relax
