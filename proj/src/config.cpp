#include "relax/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "relax/errors.hpp"

namespace relax {

using nlohmann::json;

namespace {

struct Suffix {
  std::string_view text;
  Unit unit;
  double factor;  // canonical units per one of these
};

constexpr std::array<Suffix, 31> kSuffixes{{
    {"ns", Unit::Millisecond, 1e-6},   {"us", Unit::Millisecond, 1e-3},
    {"µs", Unit::Millisecond, 1e-3},   {"μs", Unit::Millisecond, 1e-3},
    {"ms", Unit::Millisecond, 1.0},    {"s", Unit::Millisecond, 1e3},
    {"min", Unit::Millisecond, 6e4},   {"h", Unit::Millisecond, 3.6e6},
    {"ns", Unit::Second, 1e-9},        {"us", Unit::Second, 1e-6},
    {"µs", Unit::Second, 1e-6},        {"μs", Unit::Second, 1e-6},
    {"ms", Unit::Second, 1e-3},        {"s", Unit::Second, 1.0},
    {"min", Unit::Second, 60.0},       {"h", Unit::Second, 3600.0},
    {"ms^-1", Unit::PerMillisecond, 1.0}, {"/ms", Unit::PerMillisecond, 1.0},
    {"1/ms", Unit::PerMillisecond, 1.0},  {"kHz", Unit::PerMillisecond, 1.0},
    {"s^-1", Unit::PerMillisecond, 1e-3}, {"/s", Unit::PerMillisecond, 1e-3},
    {"1/s", Unit::PerMillisecond, 1e-3},  {"Hz", Unit::PerMillisecond, 1e-3},
    {"us^-1", Unit::PerMillisecond, 1e3}, {"/us", Unit::PerMillisecond, 1e3},
    {"1/us", Unit::PerMillisecond, 1e3},  {"MHz", Unit::PerMillisecond, 1e3},
    {"µs^-1", Unit::PerMillisecond, 1e3}, {"μs^-1", Unit::PerMillisecond, 1e3},
    {"min^-1", Unit::PerMillisecond, 1.0 / 6e4},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

const char* unit_name(Unit u) {
  switch (u) {
    case Unit::Millisecond: return "a time (ns, us, ms, s, min, h)";
    case Unit::Second: return "a duration (ms, s, min, h)";
    case Unit::PerMillisecond: return "a rate (ms^-1, s^-1, Hz, kHz)";
    case Unit::None: return "a plain number";
  }
  return "";
}

// Reads one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected a mapping");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) throw ConfigError(field(key), "required field is missing");
    return *v;
  }

  void number(const std::string& key, double& out, Unit unit = Unit::None) {
    if (const json* v = get(key)) out = quantity(*v, unit, field(key));
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    const json* v = get(key);
    if (!v) return;
    if (v->is_number_unsigned()) {
      out = static_cast<Int>(v->get<std::uint64_t>());
      return;
    }
    const double x = quantity(*v, Unit::None, field(key));
    if (!(x >= 0.0) || x != std::floor(x) || x > 9.0e15) throw ConfigError(field(key), "expected a non-negative integer");
    out = static_cast<Int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
    out = v->get<bool>();
  }

  std::optional<std::string> text(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(field(key), "expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

  static double quantity(const json& v, Unit unit, const std::string& field) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_quantity(v.get<std::string>(), unit, field);
    throw ConfigError(field, "expected a number");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

template <class E>
E choose(const std::string& value, std::initializer_list<std::pair<const char*, E>> options, const std::string& field) {
  std::string allowed;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(field, "'" + value + "' is not one of " + allowed);
}

std::optional<Ramp> read_ramp(Section& parent, const std::string& key) {
  const json* v = parent.get(key);
  if (!v) return std::nullopt;
  Section s(*v, parent.field(key));
  Ramp r;
  r.from = Section::quantity(s.require("from"), Unit::None, s.field("from"));
  r.to = Section::quantity(s.require("to"), Unit::None, s.field("to"));
  r.duration_s = Section::quantity(s.require("duration"), Unit::Second, s.field("duration"));
  s.finish();
  if (!(r.duration_s > 0.0)) throw ConfigError(s.field("duration"), "must be positive");
  return r;
}

json ramp_json(const Ramp& r) { return {{"from", r.from}, {"to", r.to}, {"duration", r.duration_s}}; }

std::string measure_name(PriorMeasure m) { return m == PriorMeasure::LogUniform ? "log-uniform" : "uniform"; }

json yaml_node(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& item : n) a.push_back(yaml_node(item));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_node(kv.second);
      return o;
    }
    case YAML::NodeType::Scalar: {
      const std::string s = n.Scalar();
      if (n.Tag() == "!") return s;  // quoted
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      if (s == "~" || s == "null") return nullptr;
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
      if (ec == std::errc() && p == s.data() + s.size()) return i;
      errno = 0;
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (!s.empty() && end == s.c_str() + s.size() && errno == 0) return d;
      return s;
    }
  }
  return nullptr;
}

}  // namespace

double parse_quantity(std::string_view text, Unit canonical, const std::string& field) {
  const std::string s(trim(text));
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || errno != 0 || !std::isfinite(value)) {
    throw ConfigError(field, "cannot read a number from '" + s + "'");
  }
  const std::string_view suffix = trim(std::string_view(s).substr(static_cast<std::size_t>(end - s.c_str())));
  if (suffix.empty()) return value;
  for (const Suffix& u : kSuffixes) {
    if (u.unit == canonical && u.text == suffix) return value * u.factor;
  }
  throw ConfigError(field, "unit '" + std::string(suffix) + "' is not " + unit_name(canonical));
}

DriftSchedule DriftSpec::schedule() const {
  DriftSchedule d;
  auto ramp = [](const Ramp& r) { return DriftSchedule::linear_ramp(r.from, r.to, r.duration_s); };
  if (f0) d.f0(ramp(*f0));
  if (contrast) d.contrast(ramp(*contrast));
  if (alpha) d.alpha(ramp(*alpha));
  if (eta_plus) d.eta_plus(ramp(*eta_plus));
  if (eta_minus) d.eta_minus(ramp(*eta_minus));
  return d;
}

ExperimentConfig RunConfig::resolved() const {
  ExperimentConfig e = experiment;
  if (background > 0.0) {
    const double b = background;
    e.params.background = [b](double) { return b; };
  }
  if (!drift.empty()) e.drift = drift.schedule();
  return e;
}

RunConfig default_run_config(std::string_view preset_name) {
  RunConfig c;
  c.preset = std::string(preset_name);
  c.experiment = preset(preset_name);
  return c;
}

RunConfig run_config_from_json(const json& doc) {
  Section top(doc, "");
  RunConfig c = default_run_config(top.text("preset").value_or("fig2"));
  ExperimentConfig& e = c.experiment;

  top.integer("seed", e.seed);
  if (auto o = top.text("optimizer")) {
    try {
      e.optimizer = parse_optimizer(*o);
    } catch (const DomainError& err) {
      throw ConfigError("optimizer", err.what());
    }
  }
  top.integer("iterations", e.iterations);
  top.integer("replicates", c.replicates);
  top.integer("threads", c.threads);
  if (c.replicates < 1) throw ConfigError("replicates", "must be >= 1");

  {
    Section t(top.require("truth"), "truth");
    const double gp = Section::quantity(t.require("gamma_plus"), Unit::PerMillisecond, "truth.gamma_plus");
    const double gm = Section::quantity(t.require("gamma_minus"), Unit::PerMillisecond, "truth.gamma_minus");
    t.finish();
    try {
      e.truth = RatePair(gp, gm);
    } catch (const DomainError& err) {
      throw ConfigError("truth", err.what());
    }
  }
  if (auto p = top.text("protocol")) {
    if (*p == "robust") {
      e.protocol = ProtocolSpec::robust();
    } else if (*p == "optimal") {
      e.protocol = ProtocolSpec::optimal();
    } else {
      try {
        e.protocol = ProtocolSpec::parse(*p);
      } catch (const DomainError& err) {
        throw ConfigError("protocol", err.what());
      }
    }
  }
  if (const json* v = top.get("signal")) {
    Section s(*v, "signal");
    s.number("f0", e.params.f0);
    s.number("contrast", e.params.contrast);
    s.number("alpha", e.params.alpha);
    s.number("eta_plus", e.params.eta_plus);
    s.number("eta_minus", e.params.eta_minus);
    s.integer("repetitions", e.params.repetitions);
    s.number("background", c.background);
    s.finish();
    if (!(c.background >= 0.0)) throw ConfigError("signal.background", "must be >= 0");
  }
  if (const json* v = top.get("prior")) {
    Section s(*v, "prior");
    s.number("lo", e.prior.lo, Unit::PerMillisecond);
    s.number("hi", e.prior.hi, Unit::PerMillisecond);
    if (auto m = s.text("measure")) {
      e.prior_measure = choose<PriorMeasure>(*m, {{"uniform", PriorMeasure::Uniform}, {"log-uniform", PriorMeasure::LogUniform}},
                                             s.field("measure"));
    }
    s.integer("points", e.grid_points);
    s.finish();
  }
  if (const json* v = top.get("delay_grid")) {
    Section s(*v, "delay_grid");
    s.number("lo", e.grid.lo, Unit::Millisecond);
    s.number("hi", e.grid.hi, Unit::Millisecond);
    s.integer("points", e.grid.n);
    s.finish();
  }
  if (const json* v = top.get("timing")) {
    Section s(*v, "timing");
    s.number("overhead", e.timing.overhead_s, Unit::Second);
    s.number("per_shot", e.timing.per_shot_s, Unit::Second);
    s.number("duty_cycle", e.timing.duty_cycle);
    if (auto m = s.text("cpu")) {
      e.timing.cpu = choose<CpuOverhead>(*m, {{"fixed", CpuOverhead::Fixed}, {"measured", CpuOverhead::Measured}}, s.field("cpu"));
    }
    s.number("cpu_fixed", e.timing.cpu_fixed_s, Unit::Second);
    s.finish();
  }
  if (const json* v = top.get("nap")) {
    Section s(*v, "nap");
    if (auto m = s.text("mode")) {
      e.nap_mode = choose<NapMode>(*m, {{"accumulate", NapMode::Accumulate}, {"sequential", NapMode::Sequential}}, s.field("mode"));
    }
    const json* delays = s.get("delays");
    const json* sweep = s.get("sweep");
    if (delays && sweep) throw ConfigError("nap", "give either delays or sweep, not both");
    if (delays) {
      if (!delays->is_array()) throw ConfigError("nap.delays", "expected a list");
      e.nap_delays.clear();
      for (std::size_t k = 0; k < delays->size(); ++k) {
        const json& d = (*delays)[k];
        const std::string f = "nap.delays[" + std::to_string(k) + "]";
        if (d.is_array()) {
          if (d.size() != 2) throw ConfigError(f, "expected [tau_plus, tau_minus]");
          e.nap_delays.push_back({Section::quantity(d[0], Unit::Millisecond, f), Section::quantity(d[1], Unit::Millisecond, f)});
        } else {
          const double t = Section::quantity(d, Unit::Millisecond, f);
          e.nap_delays.push_back({t, t});
        }
      }
    }
    if (sweep) {
      Section w(*sweep, "nap.sweep");
      double lo = 0.003, hi = 5.5;
      std::size_t n = 20;
      w.number("lo", lo, Unit::Millisecond);
      w.number("hi", hi, Unit::Millisecond);
      w.integer("points", n);
      w.finish();
      if (!(lo > 0.0 && hi > lo && n >= 2)) throw ConfigError("nap.sweep", "need 0 < lo < hi and points >= 2");
      e.nap_delays = default_nap_delays(lo, hi, n);
    }
    s.finish();
  }
  if (const json* v = top.get("pf")) {
    Section s(*v, "pf");
    s.integer("particles", e.utility.particles);
    s.number("sigma_plus", e.utility.sigma_m.plus);
    s.number("sigma_minus", e.utility.sigma_m.minus);
    s.number("scale", e.utility.scale);
    s.finish();
  }
  if (auto w = top.text("likelihood_width")) {
    e.width = choose<WidthMode>(*w, {{"predicted", WidthMode::Predicted}, {"reported", WidthMode::Reported}}, "likelihood_width");
  }
  top.boolean("noiseless", e.noiseless);
  if (const json* v = top.get("stop")) {
    Section s(*v, "stop");
    s.number("time_budget", e.time_budget_s, Unit::Second);
    if (const json* x = s.get("sigma_plus")) e.stop_sigma_plus = Section::quantity(*x, Unit::PerMillisecond, "stop.sigma_plus");
    if (const json* x = s.get("sigma_minus")) e.stop_sigma_minus = Section::quantity(*x, Unit::PerMillisecond, "stop.sigma_minus");
    s.finish();
  }
  if (const json* v = top.get("drift")) {
    Section s(*v, "drift");
    c.drift.f0 = read_ramp(s, "f0");
    c.drift.contrast = read_ramp(s, "contrast");
    c.drift.alpha = read_ramp(s, "alpha");
    c.drift.eta_plus = read_ramp(s, "eta_plus");
    c.drift.eta_minus = read_ramp(s, "eta_minus");
    s.finish();
  }
  top.finish();

  c.resolved().validate();
  return c;
}

json yaml_to_json(std::string_view text) {
  try {
    return yaml_node(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& err) {
    throw ConfigError("", std::string("YAML parse error: ") + err.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  if (path.extension() == ".json") {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& err) {
      throw ConfigError("", std::string("JSON parse error: ") + err.what());
    }
  } else {
    doc = yaml_to_json(text);
  }
  return run_config_from_json(doc);
}

json to_json(const RunConfig& c) {
  const ExperimentConfig& e = c.experiment;
  json delays = json::array();
  for (const DelayPair& d : e.nap_list()) delays.push_back({d.tau_plus, d.tau_minus});
  json j = {
      {"preset", c.preset},
      {"seed", e.seed},
      {"optimizer", optimizer_name(e.optimizer)},
      {"iterations", e.iterations},
      {"replicates", c.replicates},
      {"truth", {{"gamma_plus", e.truth.plus()}, {"gamma_minus", e.truth.minus()}}},
      {"protocol", e.protocol.label()},
      {"signal",
       {{"f0", e.params.f0},
        {"contrast", e.params.contrast},
        {"alpha", e.params.alpha},
        {"eta_plus", e.params.eta_plus},
        {"eta_minus", e.params.eta_minus},
        {"repetitions", e.params.repetitions},
        {"background", c.background}}},
      {"prior", {{"lo", e.prior.lo}, {"hi", e.prior.hi}, {"measure", measure_name(e.prior_measure)}, {"points", e.grid_points}}},
      {"delay_grid", {{"lo", e.grid.lo}, {"hi", e.grid.hi}, {"points", e.grid.n}}},
      {"timing",
       {{"overhead", e.timing.overhead_s},
        {"per_shot", e.timing.per_shot_s},
        {"duty_cycle", e.timing.duty_cycle},
        {"cpu", e.timing.cpu == CpuOverhead::Fixed ? "fixed" : "measured"},
        {"cpu_fixed", e.timing.cpu_fixed_s}}},
      {"nap", {{"mode", e.nap_mode == NapMode::Accumulate ? "accumulate" : "sequential"}, {"delays", delays}}},
      {"pf",
       {{"particles", e.utility.particles},
        {"sigma_plus", e.utility.sigma_m.plus},
        {"sigma_minus", e.utility.sigma_m.minus},
        {"scale", e.utility.scale}}},
      {"likelihood_width", e.width == WidthMode::Predicted ? "predicted" : "reported"},
      {"noiseless", e.noiseless},
      {"stop",
       {{"time_budget", e.time_budget_s},
        {"sigma_plus", e.stop_sigma_plus ? json(*e.stop_sigma_plus) : json(nullptr)},
        {"sigma_minus", e.stop_sigma_minus ? json(*e.stop_sigma_minus) : json(nullptr)}}},
  };
  json drift = json::object();
  if (c.drift.f0) drift["f0"] = ramp_json(*c.drift.f0);
  if (c.drift.contrast) drift["contrast"] = ramp_json(*c.drift.contrast);
  if (c.drift.alpha) drift["alpha"] = ramp_json(*c.drift.alpha);
  if (c.drift.eta_plus) drift["eta_plus"] = ramp_json(*c.drift.eta_plus);
  if (c.drift.eta_minus) drift["eta_minus"] = ramp_json(*c.drift.eta_minus);
  j["drift"] = drift;
  return j;
}

std::string canonical_text(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 0xF];
  }
  return out;
}

}  // namespace relax
