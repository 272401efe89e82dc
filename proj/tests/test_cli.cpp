#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "relperf/io.hpp"
#include "relperf/runner.hpp"

using namespace relperf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("relperf_" + tag + "_" + std::to_string(::getpid()) +
                        "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + (env.empty() ? "" : " ") + RELPERF_CLI_PATH + " " + args +
      " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

fs::path write_config(const fs::path& dir, const json& j,
                      const std::string& name = "config.json") {
  const fs::path path = dir / name;
  write_file(path, j.dump(2));
  return path;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    rows.push_back(fields);
  }
  return rows;
}

json two_agent_cara_config() {
  return json{
      {"model", "cara"},
      {"setting", "n_agent"},
      {"horizon", 1.0},
      {"population",
       {{"agents",
         json::array({json{{"x0", 0.0}, {"delta", 5.0}, {"theta", 0.5},
                           {"mu", 1.0}, {"sigma", 1.0}},
                      json{{"x0", 0.0}, {"delta", 7.0}, {"theta", 0.5},
                           {"mu", 1.0}, {"sigma", 1.0}}})}}},
      {"simulation", {{"num_paths", 200}, {"seed", "12345"}}}};
}

}  // namespace

TEST_CASE("solve subcommand") {
  SECTION("crra configs always solve") {
    const fs::path dir = fresh_dir("solve_crra");
    json cfg{{"model", "crra"},
             {"setting", "mean_field"},
             {"distribution",
              {{"atoms", json::array({json{{"x0", 1.0}, {"delta", 2.0},
                                           {"theta", 0.6}, {"mu", 1.0},
                                           {"sigma", 1.0}, {"weight", 1.0}}})}}}};
    const fs::path config = write_config(dir, cfg);
    CHECK(run_cli("solve --config " + config.string() + " --out " +
                  dir.string()) == 0);
    const json report = json::parse(read_file(dir / "equilibrium.json"));
    CHECK(report.at("status") == "ok");
    CHECK(report.at("strategies").size() == 1);
    CHECK(report.at("value_exponents").size() == 1);
  }

  SECTION("cara mean field with theta 1 and no idiosyncratic noise exits 2") {
    const fs::path dir = fresh_dir("solve_noeq");
    json cfg{{"model", "cara"},
             {"setting", "mean_field"},
             {"distribution",
              {{"atoms", json::array({json{{"x0", 0.0}, {"delta", 1.0},
                                           {"theta", 1.0}, {"mu", 1.0},
                                           {"sigma", 1.0}, {"weight", 1.0}}})}}}};
    const fs::path config = write_config(dir, cfg);
    CHECK(run_cli("solve --config " + config.string() + " --out " +
                  dir.string()) == 2);
    const json report = json::parse(read_file(dir / "equilibrium.json"));
    CHECK(report.at("status") == "no_equilibrium");
    CHECK(report.at("psi").get<double>() == 1.0);
  }

  SECTION("malformed json exits 1") {
    const fs::path dir = fresh_dir("solve_bad");
    write_file(dir / "bad.json", "{ not json");
    CHECK(run_cli("solve --config " + (dir / "bad.json").string()) == 1);
  }

  SECTION("domain violations exit 1") {
    const fs::path dir = fresh_dir("solve_domain");
    json cfg = two_agent_cara_config();
    cfg["population"]["agents"][0]["delta"] = -1.0;
    const fs::path config = write_config(dir, cfg);
    CHECK(run_cli("solve --config " + config.string() + " --out " +
                  dir.string()) == 1);
  }

  SECTION("n-agent report carries strategies, exponents, hats") {
    const fs::path dir = fresh_dir("solve_nagent");
    const fs::path config = write_config(dir, two_agent_cara_config());
    CHECK(run_cli("solve --config " + config.string() + " --out " +
                  dir.string()) == 0);
    const json report = json::parse(read_file(dir / "equilibrium.json"));
    CHECK(report.at("strategies")[0].get<double>() == Catch::Approx(11.0));
    CHECK(report.at("strategies")[1].get<double>() == Catch::Approx(13.0));
    CHECK(report.at("hat_quantities").size() == 2);
    CHECK(report.at("aggregates").at("aggregate_vol").get<double>() ==
          Catch::Approx(12.0));
  }
}

TEST_CASE("verify subcommand") {
  SECTION("equilibrium candidates pass") {
    const fs::path dir = fresh_dir("verify_ok");
    const fs::path config = write_config(dir, two_agent_cara_config());
    CHECK(run_cli("verify --config " + config.string() + " --out " +
                  dir.string()) == 0);
    const json report = json::parse(read_file(dir / "verify.json"));
    CHECK(report.at("status") == "ok");
    for (const json& check : report.at("best_response"))
      CHECK(check.at("abs_diff").get<double>() < 1e-6);
  }

  SECTION("perturbed candidate strategies exit 3") {
    const fs::path dir = fresh_dir("verify_perturbed");
    json cfg = two_agent_cara_config();
    cfg["strategies"] = json::array({11.1, 13.0});
    const fs::path config = write_config(dir, cfg);
    CHECK(run_cli("verify --config " + config.string() + " --out " +
                  dir.string()) == 3);
    const json report = json::parse(read_file(dir / "verify.json"));
    CHECK(report.at("status") == "failed");
  }

  SECTION("merton population verifies") {
    const fs::path dir = fresh_dir("verify_merton");
    json cfg = two_agent_cara_config();
    cfg["population"]["agents"][0]["theta"] = 0.0;
    cfg["population"]["agents"][1]["theta"] = 0.0;
    const fs::path config = write_config(dir, cfg);
    CHECK(run_cli("verify --config " + config.string() + " --out " +
                  dir.string()) == 0);
  }

  SECTION("mean-field verify runs the consistency check") {
    const fs::path dir = fresh_dir("verify_mf");
    json cfg{{"model", "crra"},
             {"setting", "mean_field"},
             {"distribution",
              {{"atoms",
                json::array(
                    {json{{"x0", 1.0}, {"delta", 2.0}, {"theta", 0.5},
                          {"mu", 1.0}, {"nu", 0.5}, {"sigma", 0.8},
                          {"weight", 0.5}},
                     json{{"x0", 2.0}, {"delta", 0.8}, {"theta", 0.3},
                          {"mu", 1.2}, {"nu", 0.6}, {"sigma", 0.7},
                          {"weight", 0.5}}})}}},
             {"simulation", {{"num_agents_sampled", 20000}, {"seed", "99"}}}};
    const fs::path config = write_config(dir, cfg);
    CHECK(run_cli("verify --config " + config.string() + " --out " +
                  dir.string()) == 0);
    const json report = json::parse(read_file(dir / "verify.json"));
    CHECK(report.at("consistency").at("passed").get<bool>());
  }
}

TEST_CASE("sweep subcommand") {
  const fs::path dir = fresh_dir("sweep_fig1");
  REQUIRE(run_cli("sweep --preset fig1 --out " + dir.string()) == 0);
  const auto rows = read_csv(dir / "sweep.csv");
  REQUIRE(rows.size() == 1 + 21 * 20);  // header + full grid, no dropped cells
  CHECK(rows[0] == std::vector<std::string>{"theta", "theta_bar", "pi_star",
                                            "no_equilibrium"});

  SECTION("caption point and merton row") {
    bool found = false;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const double theta = std::stod(rows[r][0]);
      const double theta_bar = std::stod(rows[r][1]);
      const double pi = std::stod(rows[r][2]);
      CHECK(rows[r][3] == "0");
      if (theta == 0.5 && theta_bar == 0.5) {
        CHECK(pi == Catch::Approx(11.0).margin(1e-12));
        found = true;
      }
      if (theta == 0.0) CHECK(pi == Catch::Approx(5.0).margin(1e-12));
    }
    CHECK(found);
  }

  SECTION("monotone in both axes") {
    // grid order: theta outermost, theta_bar innermost
    auto pi_at = [&](std::size_t i, std::size_t j) {
      return std::stod(rows[1 + i * 20 + j][2]);
    };
    for (std::size_t i = 0; i < 21; ++i)
      for (std::size_t j = 0; j + 1 < 20; ++j)
        CHECK(pi_at(i, j) <= pi_at(i, j + 1));
    for (std::size_t j = 0; j < 20; ++j)
      for (std::size_t i = 0; i + 1 < 21; ++i)
        CHECK(pi_at(i, j) <= pi_at(i + 1, j));
  }

  SECTION("byte-identical across reruns and thread counts") {
    const fs::path rerun = fresh_dir("sweep_rerun");
    REQUIRE(run_cli("sweep --preset fig1 --out " + rerun.string(),
                    "RELPERF_THREADS=1") == 0);
    const fs::path threaded = fresh_dir("sweep_threads");
    REQUIRE(run_cli("sweep --preset fig1 --out " + threaded.string(),
                    "RELPERF_THREADS=8") == 0);
    CHECK(read_file(dir / "sweep.csv") == read_file(rerun / "sweep.csv"));
    CHECK(read_file(dir / "sweep.csv") == read_file(threaded / "sweep.csv"));
  }

  SECTION("line endings are LF and floats carry full precision") {
    const std::string text = read_file(dir / "sweep.csv");
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.back() == '\n');
    // the double nearest 1/20 needs all 17 significant digits
    CHECK(text.find("0.050000000000000003") != std::string::npos);
  }

  SECTION("custom sweep over a point-mass distribution") {
    const fs::path cdir = fresh_dir("sweep_custom");
    json cfg{{"model", "cara"},
             {"setting", "mean_field"},
             {"distribution",
              {{"atoms", json::array({json{{"x0", 0.0}, {"delta", 2.0},
                                           {"theta", 0.5}, {"mu", 1.0},
                                           {"nu", 0.5}, {"sigma", 1.0},
                                           {"weight", 1.0}}})}}},
             {"sweep",
              {{"params", json::array({json{{"name", "theta"},
                                            {"min", 0.0},
                                            {"max", 0.8},
                                            {"count", 5}}})}}}};
    const fs::path config = write_config(cdir, cfg);
    REQUIRE(run_cli("sweep --config " + config.string() + " --out " +
                    cdir.string()) == 0);
    const auto custom = read_csv(cdir / "sweep.csv");
    REQUIRE(custom.size() == 6);
    CHECK(custom[0][0] == "theta");
  }
}

TEST_CASE("converge subcommand") {
  const fs::path dir = fresh_dir("converge");
  json cfg{{"model", "crra"},
           {"setting", "mean_field"},
           {"distribution",
            {{"atoms", json::array({json{{"x0", 1.0}, {"delta", 2.0},
                                         {"theta", 0.6}, {"mu", 1.0},
                                         {"nu", 0.8}, {"sigma", 1.0},
                                         {"weight", 1.0}}})}}},
           {"converge",
            {{"mode", "replicated_type"},
             {"n_list", json::array({8, 16, 32})},
             {"replications", 2}}},
           {"simulation", {{"seed", "5"}}}};
  const fs::path config = write_config(dir, cfg);
  REQUIRE(run_cli("converge --config " + config.string() + " --out " +
                  dir.string()) == 0);
  const auto rows = read_csv(dir / "converge.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == "mode");
  CHECK(rows[1][0] == "replicated_type");
  CHECK(std::stod(rows[1][4]) > std::stod(rows[2][4]));
}

TEST_CASE("simulate subcommand") {
  const fs::path dir = fresh_dir("simulate");
  json cfg = two_agent_cara_config();
  cfg["simulation"]["num_paths"] = 128;
  const fs::path config = write_config(dir, cfg);
  REQUIRE(run_cli("simulate --config " + config.string() + " --out " +
                  dir.string()) == 0);

  const auto rows = read_csv(dir / "wealth.csv");
  REQUIRE(rows.size() == 129);
  CHECK(rows[0] == std::vector<std::string>{"path", "agent_0", "agent_1"});

  const json payoffs = json::parse(read_file(dir / "payoffs.json"));
  REQUIRE(payoffs.at("payoffs").size() == 2);
  for (const json& entry : payoffs.at("payoffs")) {
    const double exact = entry.at("exact").get<double>();
    const double mean = entry.at("estimate").at("mean").get<double>();
    const double se = entry.at("estimate").at("std_error").get<double>();
    CHECK(std::abs(mean - exact) < 5.0 * se);
  }

  SECTION("identical config and seed give byte-identical outputs") {
    const fs::path rerun = fresh_dir("simulate_rerun");
    REQUIRE(run_cli("simulate --config " + config.string() + " --out " +
                    rerun.string(), "RELPERF_THREADS=4") == 0);
    CHECK(read_file(dir / "wealth.csv") == read_file(rerun / "wealth.csv"));
    CHECK(read_file(dir / "payoffs.json") == read_file(rerun / "payoffs.json"));
  }

  SECTION("seed override changes the draws") {
    const fs::path other = fresh_dir("simulate_seed");
    REQUIRE(run_cli("simulate --config " + config.string() + " --out " +
                    other.string() + " --seed 777") == 0);
    CHECK(read_file(dir / "wealth.csv") != read_file(other / "wealth.csv"));
  }

  SECTION("mean-field simulate writes the consistency report") {
    const fs::path mdir = fresh_dir("simulate_mf");
    json mcfg{{"model", "cara"},
              {"setting", "mean_field"},
              {"distribution",
               {{"atoms", json::array({json{{"x0", 1.0}, {"delta", 2.0},
                                            {"theta", 0.4}, {"mu", 1.0},
                                            {"nu", 0.5}, {"sigma", 0.8},
                                            {"weight", 1.0}}})}}},
              {"simulation", {{"num_agents_sampled", 5000}, {"seed", "8"}}}};
    const fs::path mconfig = write_config(mdir, mcfg);
    REQUIRE(run_cli("simulate --config " + mconfig.string() + " --out " +
                    mdir.string()) == 0);
    const json rep = json::parse(read_file(mdir / "consistency.json"));
    CHECK(rep.at("passed").get<bool>());
  }
}
