#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "relax/config.hpp"
#include "relax/errors.hpp"
#include "relax/io.hpp"

using namespace relax;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" RELAX_CLI_PATH "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string cell; std::getline(is, cell, ',');) out.push_back(cell);
  return out;
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("relax_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kMinimal = R"({"truth": {"gamma_plus": 1.0, "gamma_minus": 3.0}})";

}  // namespace

TEST_CASE("quantities with units") {
  CHECK(parse_quantity("5.5 ms", Unit::Millisecond, "x") == 5.5);
  CHECK(parse_quantity("3 us", Unit::Millisecond, "x") == doctest::Approx(0.003).epsilon(1e-15));
  CHECK(parse_quantity("3us", Unit::Millisecond, "x") == doctest::Approx(0.003).epsilon(1e-15));
  CHECK(parse_quantity("1 h", Unit::Second, "x") == 3600.0);
  CHECK(parse_quantity("250 ms", Unit::Second, "x") == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(parse_quantity("55 s^-1", Unit::PerMillisecond, "x") == doctest::Approx(0.055).epsilon(1e-15));
  CHECK(parse_quantity("2 kHz", Unit::PerMillisecond, "x") == 2.0);
  CHECK(parse_quantity("1.5", Unit::PerMillisecond, "x") == 1.5);
  CHECK(parse_quantity("1e6", Unit::None, "x") == 1e6);

  try {
    parse_quantity("3 ms", Unit::PerMillisecond, "truth.gamma_plus");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "truth.gamma_plus");
  }
  CHECK_THROWS_AS(parse_quantity("abc", Unit::None, "x"), ConfigError);
  CHECK_THROWS_AS(parse_quantity("5 parsecs", Unit::Millisecond, "x"), ConfigError);
  CHECK_THROWS_AS(parse_quantity("", Unit::Millisecond, "x"), ConfigError);
}

TEST_CASE("YAML and JSON give the same configuration") {
  const std::string yaml = R"(
preset: fig2
seed: 11
truth:
  gamma_plus: 1000 s^-1
  gamma_minus: 3
signal:
  repetitions: 1e5
  alpha: 0.7
delay_grid:
  lo: 3 us
  hi: 5.5 ms
timing:
  cpu_fixed: 300 ms
drift:
  alpha: {from: 0.8, to: 0.6, duration: 1 h}
)";
  const json doc = json::parse(R"({
    "preset": "fig2", "seed": 11,
    "truth": {"gamma_plus": 1.0, "gamma_minus": 3.0},
    "signal": {"repetitions": 100000, "alpha": 0.7},
    "delay_grid": {"lo": 0.003, "hi": 5.5},
    "timing": {"cpu_fixed": 0.3},
    "drift": {"alpha": {"from": 0.8, "to": 0.6, "duration": 3600}}
  })");
  const RunConfig a = run_config_from_json(yaml_to_json(yaml));
  const RunConfig b = run_config_from_json(doc);
  CHECK(canonical_text(a) == canonical_text(b));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(a.experiment.params.repetitions == 100000);
  CHECK(a.experiment.grid.lo == doctest::Approx(0.003).epsilon(1e-15));
  REQUIRE(a.drift.alpha.has_value());
  CHECK(a.drift.alpha->duration_s == 3600.0);
  CHECK(a.resolved().drift.has_value());
}

TEST_CASE("canonical form round-trips and the hash is stable") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  const RunConfig a = run_config_from_json(json::parse(kMinimal));
  const RunConfig b = run_config_from_json(to_json(a));
  CHECK(canonical_text(a) == canonical_text(b));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 64);

  RunConfig c = a;
  c.experiment.seed = a.experiment.seed + 1;
  CHECK(config_hash(c) != config_hash(a));
  c = a;
  c.threads = 7;  // execution detail, not part of the run identity
  CHECK(config_hash(c) == config_hash(a));
}

TEST_CASE("configuration errors name the field") {
  auto field_of = [](const char* text) {
    try {
      run_config_from_json(json::parse(text));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"truth": {"gamma_plus": 1.0}})") == "truth.gamma_minus");
  CHECK(field_of(R"({"seed": 3})") == "truth");
  CHECK(field_of(R"({"truth": {"gamma_plus": 1, "gamma_minus": 3}, "signal": {"alfa": 0.8}})") == "signal.alfa");
  CHECK(field_of(R"({"truth": {"gamma_plus": 1, "gamma_minus": 3}, "optimizer": "sgd"})") == "optimizer");
  CHECK(field_of(R"({"truth": {"gamma_plus": "1 ms", "gamma_minus": 3}})") == "truth.gamma_plus");
  CHECK(field_of(R"({"truth": {"gamma_plus": 1, "gamma_minus": 3}, "preset": "fig9"})") == "preset");

  const fs::path d = scratch("errors");
  write_text(d / "bad.json", R"({"truth": {"gamma_plus": 1.0}})");
  Result r = run("simulate --config '" + (d / "bad.json").string() + "' --out '" + (d / "o").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.output.find("truth.gamma_minus") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "o" / "records.jsonl"));

  write_text(d / "unknown.yaml", "truth: {gamma_plus: 1, gamma_minus: 3}\nsignal: {alfa: 0.8}\n");
  r = run("simulate --config '" + (d / "unknown.yaml").string() + "' --out '" + (d / "o").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.output.find("signal.alfa") != std::string::npos);

  CHECK(run("simulate --optimizer sgd --out '" + (d / "o").string() + "'").code == 2);
  CHECK(run("simulate --no-such-flag").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("simulate is reproducible and re-ingestable") {
  const fs::path d = scratch("repro");
  const std::string base = "simulate --preset fig2 --iterations 25 --seed 7 --replicates 2 --out ";
  REQUIRE(run(base + "'" + (d / "a").string() + "'").code == 0);
  REQUIRE(run(base + "'" + (d / "b").string() + "'").code == 0);
  const std::string rec = slurp(d / "a" / "records.jsonl");
  CHECK_FALSE(rec.empty());
  CHECK(rec == slurp(d / "b" / "records.jsonl"));
  CHECK(slurp(d / "a" / "config.json") == slurp(d / "b" / "config.json"));
  CHECK(lines(rec).size() == 50);

  // The written configuration reproduces the run.
  REQUIRE(run("simulate --config '" + (d / "a" / "config.json").string() + "' --out '" + (d / "c").string() + "'").code == 0);
  CHECK(slurp(d / "c" / "records.jsonl") == rec);
  CHECK(slurp(d / "c" / "config.json") == slurp(d / "a" / "config.json"));

  const json manifest = json::parse(slurp(d / "a" / "manifest.json"));
  const RunConfig cfg = load_run_config(d / "a" / "config.json");
  CHECK(manifest.at("config_hash") == config_hash(cfg));
  CHECK(manifest.at("seed") == 7);
  CHECK(manifest.at("tool_version") == tool_version());
  CHECK(manifest.at("command") == "simulate");
  for (const auto& name : manifest.at("outputs")) CHECK(fs::exists(d / "a" / name.get<std::string>()));

  const json first = json::parse(lines(rec).front());
  for (const char* key : {"replicate", "iteration", "tau_plus_ms", "tau_minus_ms", "m_plus", "sigma_m_plus", "posterior",
                          "elapsed_s", "flags"})
    CHECK(first.contains(key));
  CHECK(first.at("posterior").contains("covariance"));
}

TEST_CASE("fig2 simulate lands within 3 sigma of the truth") {
  const fs::path d = scratch("fig2");
  REQUIRE(run("simulate --optimizer nob --preset fig2 --out '" + d.string() + "'").code == 0);
  const json s = json::parse(slurp(d / "summary.json"));
  const json& f = s.at("replicates").at(0).at("final");
  CHECK(std::abs(f.at("gamma_plus").get<double>() - 1.0) <= 3.0 * f.at("sigma_plus").get<double>());
  CHECK(std::abs(f.at("gamma_minus").get<double>() - 3.0) <= 3.0 * f.at("sigma_minus").get<double>());
  CHECK(s.at("coverage_3_sigma") == 1.0);
  CHECK(s.at("optimizer") == "nob");

  const auto trace = lines(slurp(d / "trace.csv"));
  REQUIRE(trace.size() == 201);
  const auto header = split(trace.front());
  CHECK(header.at(2) == "tau_plus_ms");
  CHECK(header.at(4) == "gamma_plus_ms^-1");
  CHECK(header.at(8) == "elapsed_s");
  for (const std::string& l : trace) CHECK(split(l).size() == header.size());
}

TEST_CASE("posterior snapshot round-trips") {
  const fs::path d = scratch("snapshot");
  REQUIRE(run("simulate --iterations 15 --snapshot --out '" + d.string() + "'").code == 0);
  const PosteriorGrid g = posterior_from_json(json::parse(slurp(d / "posterior.json")));
  const json s = json::parse(slurp(d / "summary.json"));
  const json& f = s.at("replicates").at(0).at("final");
  const Moments m = g.moments();
  CHECK(m.mean_plus == doctest::Approx(f.at("gamma_plus").get<double>()).epsilon(1e-12));
  CHECK(m.sigma_minus == doctest::Approx(f.at("sigma_minus").get<double>()).epsilon(1e-12));

  const PosteriorGrid back = posterior_from_json(posterior_json(g));
  CHECK(back.weights() == g.weights());
  CHECK(back.plus_axis() == g.plus_axis());
  CHECK(back.minus_axis() == g.minus_axis());
  CHECK_THROWS_AS(posterior_from_json(json::parse(R"({"weights": [1]})")), ConfigError);
}

TEST_CASE("output directory from the environment") {
  const fs::path d = scratch("env");
  const Result r = run("simulate --iterations 5", "cd '" + d.string() + "' && RELAX_OUT_DIR='" + (d / "env_out").string() + "'");
  CHECK(r.code == 0);
  CHECK(fs::exists(d / "env_out" / "summary.json"));
  CHECK_FALSE(fs::exists(d / "relax-out"));
}

TEST_CASE("rank-protocols writes the ranking and the ratio sweep") {
  const fs::path d = scratch("rank");
  const Result r = run("rank-protocols --gamma-plus 1 --gamma-minus 3 --ratio-sweep 0.125:8:9 --out '" + d.string() + "'");
  REQUIRE(r.code == 0);
  const auto rank = lines(slurp(d / "protocols.csv"));
  CHECK(rank.size() == 37);
  CHECK(split(rank.front()).at(4) == "cost_s^0.5");
  CHECK(rank.at(1).find("(+0,++),(-0,--)") != std::string::npos);  // the reference is the most sensitive

  const auto sweep = lines(slurp(d / "ratio_sweep.csv"));
  REQUIRE(sweep.size() == 10);
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    const double ratio = std::stod(split(sweep[k]).at(3));
    CHECK(ratio >= 1.2);
    CHECK(ratio <= 1.6);
  }
}

TEST_CASE("bias-study table") {
  const fs::path d = scratch("bias");
  REQUIRE(run("bias-study --R 1e4:1e6:3 --replicates 2000 --out '" + d.string() + "'").code == 0);
  const auto t = lines(slurp(d / "bias.csv"));
  REQUIRE(t.size() == 4);
  CHECK(split(t[0]).at(0) == "repetitions");
  CHECK(split(t[1]).at(0) == "10000");
  CHECK(split(t[3]).at(0) == "1000000");
  const double low = std::stod(split(t[1]).at(2));
  const double high = std::stod(split(t[3]).at(2));
  CHECK(std::abs(high - 1.0) < 0.02);
  CHECK(std::abs(low - 1.0) > std::abs(high - 1.0));
  CHECK(run("bias-study --replicates 10 --out '" + d.string() + "'").code == 2);
}

TEST_CASE("small speedup run") {
  const fs::path d = scratch("speedup");
  const Result r = run("speedup --rates 1:10:2 --replicates 2 --R 1e5 --iterations 30 --out '" + d.string() + "'");
  REQUIRE(r.code == 0);
  const auto t = lines(slurp(d / "speedup.csv"));
  REQUIRE(t.size() == 3);
  CHECK(split(t[0]).at(0) == "gamma_plus_ms^-1");
  for (std::size_t k = 1; k < t.size(); ++k) {
    const auto row = split(t[k]);
    CHECK(std::stod(row.at(2)) > 0.0);
    CHECK(row.at(10) == "4");  // 2 x 2 pairings
  }
}

TEST_CASE("show and runtime errors") {
  const fs::path d = scratch("show");
  REQUIRE(run("simulate --iterations 6 --replicates 2 --out '" + d.string() + "'").code == 0);
  Result r = run("show '" + (d / "summary.json").string() + "'");
  CHECK(r.code == 0);
  CHECK(r.output.find("coverage within 3 sigma") != std::string::npos);
  r = run("show '" + (d / "records.jsonl").string() + "' --limit 3");
  CHECK(r.code == 0);
  CHECK(lines(r.output).size() == 4);
  r = run("show '" + (d / "manifest.json").string() + "'");
  CHECK(r.output.find("config_hash") != std::string::npos);

  CHECK(run("show '" + (d / "missing.json").string() + "'").code == 3);
  // Output directory below a regular file cannot be created.
  CHECK(run("simulate --iterations 3 --out '" + (d / "summary.json" / "x").string() + "'").code == 3);
}

TEST_CASE("CSV numbers") {
  CHECK(csv_number(0.1) == "0.1");
  CHECK(csv_number(1.0 / 3.0) == "0.333333333333");
  CHECK(csv_number(INFINITY) == "inf");
  CsvTable t({"a_ms", "b"});
  t.add({"1", "2"});
  CHECK_THROWS_AS(t.add({"1"}), std::logic_error);
  std::ostringstream os;
  t.write(os);
  CHECK(os.str() == "a_ms,b\n1,2\n");
}
