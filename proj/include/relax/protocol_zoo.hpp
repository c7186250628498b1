#pragma once

// The family of four-signal measurement pairs: enumeration, deduplication,
// and ranking by the minimal sensitivity cost.

#include <cstddef>
#include <string>
#include <vector>

#include "relax/design.hpp"
#include "relax/signal_model.hpp"

namespace relax {

/// All nine (prepare, read) signals in basis order.
std::vector<Signal> all_signals();

struct Enumeration {
  std::size_t raw = 0;                   // 9^4 assignments of (S1, S2) x (S3, S4)
  std::size_t nonzero_denominator = 0;   // both tau = 0 differences nonzero
  std::size_t signal_classes = 0;        // distinct expected-count functions
  std::size_t measurement_classes = 0;   // bright/dark pairs of signal classes
  std::vector<ProtocolSpec> protocols;   // independent set, canonical order
};

/// Enumerates every assignment and reduces it to independent protocols.
/// Signals are identified by their expected counts on a probe lattice at
/// ideal parameters; a measurement is an unordered pair of signal classes
/// with a nonzero tau = 0 difference; a protocol is an unordered pair of
/// distinct measurement classes. `order` permutes the raw enumeration (for
/// testing order independence); empty means natural order.
Enumeration enumerate_protocols(const std::vector<std::size_t>& order = {});

/// Representative signal of a class: read |0> preferred, then prep == read,
/// then the smallest label.
Signal canonical_signal(Signal s);

/// True when the normalized expectation does not change between eta = 0 and
/// eta = 0.1 (both branches), at ideal pump and readout otherwise.
bool eta_insensitive(const MeasurementSpec& m);

struct RankEntry {
  ProtocolSpec protocol;
  DelayPair delays;
  double cost = 0.0;   // minimal cost, s^1/2
  double ratio = 0.0;  // cost / reference cost
  bool eta_insensitive_plus = false;
  bool eta_insensitive_minus = false;
};

struct ProtocolRanking {
  std::vector<RankEntry> entries;  // ascending cost; infinite costs last
  ProtocolSpec reference;
};

struct RankConfig {
  SignalParams params = SignalParams::ideal();
  TimingModel timing{1000000, 0.0, 0.0};
  DelayGrid grid{};
  ProtocolSpec reference = ProtocolSpec::optimal();
};

/// Minimal cost of one protocol: sigma_M(tau) from the estimator applied to
/// expected counts, full cost minimized over the delay grid. Infinite when
/// no delay pair constrains both rates.
RankEntry evaluate_protocol(const ProtocolSpec& protocol, const RatePair& rates, const RankConfig& cfg);

ProtocolRanking rank_protocols(const RatePair& rates, const RankConfig& cfg = {},
                               const std::vector<ProtocolSpec>& protocols = {});

struct RatioRow {
  double rate_ratio = 0.0;  // Gamma+ / Gamma-
  double cost_robust = 0.0;
  double cost_optimal = 0.0;
  double ratio = 0.0;  // robust / optimal
  DelayPair robust_delays;
  DelayPair optimal_delays;
};

/// Robust vs optimal protocol over Gamma+/Gamma- = ratios, at rates
/// (sqrt(r), 1/sqrt(r)) times `scale` ms^-1.
std::vector<RatioRow> sensitivity_ratio_curve(const std::vector<double>& ratios, const RankConfig& cfg = {},
                                              double scale = 1.0);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

}  // namespace relax
