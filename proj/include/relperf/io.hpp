#pragma once

// JSON configuration ingestion and report/CSV emission. Numeric fields are
// 64-bit floats; seeds are decimal strings so that values above 2^53 survive
// the JSON round trip. CSV output is comma-separated with a header row, LF
// line endings, and floats printed with 17 significant digits.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relperf/convergence.hpp"
#include "relperf/core.hpp"
#include "relperf/equilibrium.hpp"
#include "relperf/simulation.hpp"

namespace relperf {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  void field(const std::string& v) {
    if (!first_) out_ << ',';
    out_ << v;
    first_ = false;
  }
  void field(double v) { field(format_double(v)); }
  void field(std::int64_t v) { field(std::to_string(v)); }
  void empty_field() { field(std::string()); }
  void end_row() {
    out_ << '\n';
    first_ = true;
    ++rows_;
  }
  std::string str() const { return out_.str(); }
  std::size_t rows() const { return rows_; }

 private:
  std::ostringstream out_;
  bool first_ = true;
  std::size_t rows_ = 0;
};

inline void write_file(const std::filesystem::path& path,
                       const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path.string());
  out << contents;
  if (!out) throw ConfigError("failed to write: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline double require_number(const json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError("missing or non-numeric field: " + key);
  return j.at(key).get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw ConfigError("non-numeric field: " + key);
  return j.at(key).get<double>();
}

inline std::uint64_t parse_seed(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(s, &used, 10);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("seed must be a decimal string: " + s);
    }
  }
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError("seed must be a decimal string or nonnegative integer");
}

}  // namespace detail

inline AgentType parse_agent(const json& j) {
  AgentType a;
  a.x0 = detail::number_or(j, "x0", 0.0);
  a.delta = detail::require_number(j, "delta");
  a.theta = detail::require_number(j, "theta");
  a.mu = detail::require_number(j, "mu");
  a.nu = detail::number_or(j, "nu", 0.0);
  a.sigma = detail::number_or(j, "sigma", 0.0);
  return a;
}

inline json to_json(const AgentType& a) {
  return json{{"x0", a.x0},   {"delta", a.delta}, {"theta", a.theta},
              {"mu", a.mu},   {"nu", a.nu},       {"sigma", a.sigma}};
}

inline Population parse_population(const json& j) {
  if (!j.contains("agents") || !j.at("agents").is_array())
    throw ConfigError("population requires an \"agents\" array");
  Population p;
  for (const json& item : j.at("agents")) p.agents.push_back(parse_agent(item));
  return p;
}

inline TypeDistribution parse_distribution(const json& j) {
  if (!j.contains("atoms") || !j.at("atoms").is_array())
    throw ConfigError("distribution requires an \"atoms\" array");
  TypeDistribution d;
  for (const json& item : j.at("atoms")) {
    WeightedType w;
    w.type = parse_agent(item);
    w.weight = detail::require_number(item, "weight");
    d.atoms.push_back(w);
  }
  return d;
}

struct SweepAxis {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  std::int64_t count = 0;
};

struct SweepSpec {
  std::optional<std::string> preset;  // fig1 | fig2 | fig3
  std::vector<SweepAxis> axes;        // custom sweep over atom fields
};

struct ConvergeSpec {
  ConvergenceMode mode = ConvergenceMode::ReplicatedType;
  std::vector<std::int64_t> n_list;
  std::int64_t replications = 1;
};

struct RunConfig {
  ModelKind kind = ModelKind::Cara;
  Setting setting = Setting::NAgent;
  std::optional<Population> population;
  std::optional<TypeDistribution> distribution;
  double horizon_t = 1.0;
  SimConfig sim;
  std::optional<SweepSpec> sweep;
  std::optional<ConvergeSpec> converge;
  std::optional<std::vector<double>> strategies;  // candidate override
};

inline RunConfig parse_run_config(const json& j,
                                  const std::filesystem::path& base_dir) {
  RunConfig cfg;

  const std::string model = j.value("model", std::string());
  if (model == "cara")
    cfg.kind = ModelKind::Cara;
  else if (model == "crra")
    cfg.kind = ModelKind::Crra;
  else
    throw ConfigError("\"model\" must be \"cara\" or \"crra\"");

  const std::string setting = j.value("setting", std::string());
  if (setting == "n_agent")
    cfg.setting = Setting::NAgent;
  else if (setting == "mean_field")
    cfg.setting = Setting::MeanField;
  else
    throw ConfigError("\"setting\" must be \"n_agent\" or \"mean_field\"");

  int sources = 0;
  if (j.contains("population")) {
    cfg.population = parse_population(j.at("population"));
    ++sources;
  }
  if (j.contains("population_file")) {
    cfg.population = parse_population(
        json::parse(read_file(base_dir / j.at("population_file").get<std::string>())));
    ++sources;
  }
  if (j.contains("distribution")) {
    cfg.distribution = parse_distribution(j.at("distribution"));
    ++sources;
  }
  if (j.contains("distribution_file")) {
    cfg.distribution = parse_distribution(
        json::parse(read_file(base_dir / j.at("distribution_file").get<std::string>())));
    ++sources;
  }
  if (sources != 1)
    throw ConfigError("exactly one of population/distribution must be given");
  if (cfg.setting == Setting::NAgent && !cfg.population)
    throw ConfigError("the n_agent setting requires a population");
  if (cfg.setting == Setting::MeanField && !cfg.distribution)
    throw ConfigError("the mean_field setting requires a distribution");

  cfg.horizon_t = detail::number_or(j, "horizon", 1.0);
  cfg.sim.horizon_t = cfg.horizon_t;

  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    cfg.sim.num_paths = static_cast<std::int64_t>(
        detail::number_or(s, "num_paths", 1.0));
    cfg.sim.num_agents_sampled = static_cast<std::int64_t>(
        detail::number_or(s, "num_agents_sampled", 1000.0));
    cfg.sim.time_steps = static_cast<std::int64_t>(
        detail::number_or(s, "time_steps", 1.0));
    if (s.contains("seed")) cfg.sim.seed = detail::parse_seed(s.at("seed"));
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    SweepSpec spec;
    if (s.contains("preset")) spec.preset = s.at("preset").get<std::string>();
    if (s.contains("params")) {
      for (const json& a : s.at("params")) {
        SweepAxis axis;
        axis.name = a.value("name", std::string());
        axis.min = detail::require_number(a, "min");
        axis.max = detail::require_number(a, "max");
        axis.count = static_cast<std::int64_t>(detail::require_number(a, "count"));
        spec.axes.push_back(axis);
      }
    }
    cfg.sweep = spec;
  }

  if (j.contains("converge")) {
    const json& c = j.at("converge");
    ConvergeSpec spec;
    const std::string mode = c.value("mode", std::string("replicated_type"));
    if (mode == "replicated_type")
      spec.mode = ConvergenceMode::ReplicatedType;
    else if (mode == "iid_sampled")
      spec.mode = ConvergenceMode::IidSampled;
    else
      throw ConfigError("converge mode must be replicated_type or iid_sampled");
    if (!c.contains("n_list") || !c.at("n_list").is_array())
      throw ConfigError("converge requires an n_list array");
    for (const json& v : c.at("n_list"))
      spec.n_list.push_back(v.get<std::int64_t>());
    spec.replications = static_cast<std::int64_t>(
        detail::number_or(c, "replications", 1.0));
    cfg.converge = spec;
  }

  if (j.contains("strategies")) {
    std::vector<double> s;
    for (const json& v : j.at("strategies")) s.push_back(v.get<double>());
    cfg.strategies = s;
  }

  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline json to_json(const Aggregates& a) {
  json j{{"phi", a.phi}, {"psi", a.psi}};
  if (a.aggregate_vol)
    j["aggregate_vol"] = *a.aggregate_vol;
  else
    j["aggregate_vol"] = nullptr;
  return j;
}

inline json to_json(const ValueExponent& v) {
  return json{{"rho", v.rho}, {"branch", to_string(v.setting)}};
}

inline json to_json(const HatQuantities& h) {
  return json{{"mu_alpha", h.mu_alpha},
              {"sigma_alpha", h.sigma_alpha},
              {"nu_alpha_sq", h.nu_alpha_sq},
              {"total_var_alpha_sq", h.total_var_alpha_sq},
              {"eta", h.eta}};
}

inline json to_json(const AggregateLaw& law) {
  return json{{"intercept", law.intercept},
              {"drift", law.drift},
              {"vol", law.vol},
              {"eta", law.eta}};
}

inline json to_json(const PayoffEstimate& e) {
  return json{{"mean", e.mean},
              {"std_error", e.std_error},
              {"num_paths", e.num_paths},
              {"certainty_equivalent", e.certainty_equivalent}};
}

inline json to_json(const ConsistencyReport& r) {
  return json{{"law", to_json(r.law)},
              {"common_draw", r.common_draw},
              {"closed_form_aggregate", r.closed_form_aggregate},
              {"simulated_aggregate", r.simulated_aggregate},
              {"cross_agent_std_error", r.cross_agent_std_error},
              {"empirical_max_discrepancy", r.empirical_max_discrepancy},
              {"num_agents", r.num_agents},
              {"passed", r.passed}};
}

inline std::string converge_csv(const ConvergenceTable& table) {
  CsvWriter csv;
  csv.field(std::string("mode"));
  csv.field(std::string("n"));
  csv.field(std::string("replication_count"));
  csv.field(std::string("failures"));
  csv.field(std::string("max_abs_error"));
  csv.field(std::string("mean_abs_error"));
  csv.end_row();
  for (const ConvergenceRow& row : table.rows) {
    csv.field(std::string(to_string(table.mode)));
    csv.field(row.n);
    csv.field(row.replications);
    csv.field(row.failures);
    csv.field(row.max_abs_error);
    csv.field(row.mean_abs_error);
    csv.end_row();
  }
  return csv.str();
}

inline std::string wealth_csv(const WealthMatrix& m) {
  CsvWriter csv;
  csv.field(std::string("path"));
  for (std::size_t a = 0; a < m.num_agents; ++a)
    csv.field("agent_" + std::to_string(a));
  csv.end_row();
  for (std::size_t p = 0; p < m.num_paths; ++p) {
    csv.field(static_cast<std::int64_t>(p));
    for (std::size_t a = 0; a < m.num_agents; ++a) csv.field(m.at(p, a));
    csv.end_row();
  }
  return csv.str();
}

inline std::string paths_csv(const PathMatrix& m, double horizon_t) {
  CsvWriter csv;
  csv.field(std::string("path"));
  csv.field(std::string("step"));
  csv.field(std::string("time"));
  for (std::size_t a = 0; a < m.num_agents; ++a)
    csv.field("agent_" + std::to_string(a));
  csv.end_row();
  const double dt = horizon_t / static_cast<double>(m.num_steps);
  for (std::size_t p = 0; p < m.num_paths; ++p) {
    for (std::size_t j = 0; j < m.num_steps; ++j) {
      csv.field(static_cast<std::int64_t>(p));
      csv.field(static_cast<std::int64_t>(j + 1));
      csv.field(dt * static_cast<double>(j + 1));
      for (std::size_t a = 0; a < m.num_agents; ++a) csv.field(m.at(p, j, a));
      csv.end_row();
    }
  }
  return csv.str();
}

}  // namespace relperf
