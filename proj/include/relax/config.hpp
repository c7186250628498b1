#pragma once

// Run configuration files. YAML or JSON in, one canonical JSON form out; the
// SHA-256 of the canonical text identifies the run.
//
// Quantities accept a unit suffix ("5.5 ms", "55 s^-1", "1 h"); a bare number
// is read in the field's canonical unit (delays ms, rates ms^-1, durations s).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "relax/harness.hpp"

namespace relax {

enum class Unit { Millisecond, Second, PerMillisecond, None };

/// "3 us" -> 0.003 for Unit::Millisecond. Throws ConfigError(field) on a bad
/// number or a suffix of the wrong dimension.
double parse_quantity(std::string_view text, Unit canonical, const std::string& field);

/// Linear ramp of one photophysical parameter.
struct Ramp {
  double from = 0.0;
  double to = 0.0;
  double duration_s = 0.0;
};

struct DriftSpec {
  std::optional<Ramp> f0, contrast, alpha, eta_plus, eta_minus;

  bool empty() const noexcept { return !(f0 || contrast || alpha || eta_plus || eta_minus); }
  DriftSchedule schedule() const;
};

struct RunConfig {
  std::string preset = "fig2";
  ExperimentConfig experiment;  // resolved: preset defaults overlaid with the file
  DriftSpec drift;
  double background = 0.0;      // counts per readout, constant in tau
  std::size_t replicates = 1;
  unsigned threads = 0;

  /// experiment with drift and background applied.
  ExperimentConfig resolved() const;
};

/// Preset defaults only.
RunConfig default_run_config(std::string_view preset = "fig2");

/// Overlays a parsed document on the preset it names (default fig2). A
/// document must give truth.gamma_plus and truth.gamma_minus; unknown keys are
/// errors. Throws ConfigError naming the field.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// YAML converted to the same JSON tree (scalars typed as number, bool or string).
nlohmann::json yaml_to_json(std::string_view text);

/// Reads .json as JSON and anything else as YAML.
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical form: every field present, canonical units, sorted keys.
nlohmann::json to_json(const RunConfig& cfg);
std::string canonical_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::string sha256_hex(std::string_view data);

}  // namespace relax
