#pragma once

// Artifacts written by the command-line tool: JSON-lines run records, run
// summaries, manifests, posterior snapshots and CSV tables. Every CSV column
// that carries a dimension names its unit in the header.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "relax/config.hpp"
#include "relax/harness.hpp"
#include "relax/protocol_zoo.hpp"
#include "relax/ratio_estimator.hpp"

namespace relax {

/// One line of the run-record stream.
nlohmann::json iteration_json(const IterationRecord& it, std::size_t replicate);

/// All iterations of all replicates, one JSON object per line.
void write_records(std::ostream& out, const std::vector<RunRecord>& runs);

/// Final moments, times, failure counts and decay exponents per replicate,
/// plus coverage of the truth at 3 sigma.
nlohmann::json summary_json(const std::vector<RunRecord>& runs, const RunConfig& cfg);

/// Axes, weights and moments of a grid. Weights are listed row-major with the
/// Gamma+ index outermost.
nlohmann::json posterior_json(const PosteriorGrid& g);
PosteriorGrid posterior_from_json(const nlohmann::json& j);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::string> outputs;  // file names relative to the output directory

  nlohmann::json to_json() const;
};

std::string tool_version();
std::string utc_now();

/// A table with a fixed header; cells are written with 12 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add(std::vector<std::string> row);
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  void write(std::ostream& out) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string csv_number(double v);

CsvTable trace_table(const std::vector<RunRecord>& runs);
CsvTable ranking_table(const ProtocolRanking& r);
CsvTable ratio_sweep_table(const std::vector<RatioRow>& rows);
CsvTable bias_table(const std::vector<BiasRow>& rows, double z_true_per_readout);
CsvTable speedup_table(const std::vector<SpeedupPoint>& points);

/// Writes text to dir/name (creating dir), throwing std::runtime_error on failure.
void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text);

}  // namespace relax
