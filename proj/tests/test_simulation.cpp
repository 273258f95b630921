#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "corrbath/simulation.hpp"

using namespace corrbath;
namespace fs = std::filesystem;

namespace {

json base_config() {
  return json::parse(R"({
    "model": {"positions": [0.0, 3.0]},
    "bath": {"alpha": 0.12},
    "numerics": {"chain_length": 8, "chain_length_d": 8, "d_env": 3, "max_bond": 8, "dt": 0.1, "t_max": 2.0}
  })");
}

std::string error_path(const json &j) {
  try {
    parse_config(j);
  } catch (const ConfigError &e) {
    return e.path();
  }
  return "";
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("corrbath_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string &args) {
  const std::string cmd = std::string(CORRBATH_CLI) + " -q " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

} // namespace

TEST(Config, DefaultsResolved) {
  const RunConfig cfg = parse_config(json::parse(R"({"model": {"positions": [0, 40]}})"));
  EXPECT_EQ(cfg.model.n_sites, 2);
  EXPECT_FALSE(cfg.thermal());
  const json j = to_json(cfg);
  EXPECT_EQ(j["numerics"]["chain_length"], 6 + 40 + 20);
  EXPECT_EQ(j["numerics"]["d_env"], 6);
  EXPECT_EQ(j["numerics"]["max_bond"], 24);
  EXPECT_TRUE(j["bath"]["beta"].is_null());
  EXPECT_EQ(j["model"]["initial_state"], "upper");
  // round trip: the explicit form parses to the same resolved config
  EXPECT_EQ(to_json(parse_config(j)), j);
}

TEST(Config, ThermalDefaults) {
  json j = base_config();
  j["bath"]["beta"] = 2.0;
  j["numerics"].erase("d_env");
  j["numerics"].erase("chain_length");
  j["numerics"].erase("chain_length_d");
  const RunConfig cfg = parse_config(j);
  ASSERT_TRUE(cfg.thermal());
  const auto r = resolve(cfg);
  EXPECT_EQ(r.d_env, 10);
  EXPECT_EQ(r.chain_length, static_cast<int>(std::ceil(0.6 * 2 * 2.0)) + 3 + 20);
  EXPECT_EQ(r.chain_length_d, r.chain_length);
}

TEST(Config, ErrorsNameTheField) {
  json j = base_config();
  j["numerics"]["dt"] = -0.1;
  EXPECT_EQ(error_path(j), "config.numerics.dt");
  j = base_config();
  j["numerics"]["dt"] = 0.3;  // 2.0 / 0.3 is not an integer
  EXPECT_EQ(error_path(j), "config.numerics.t_max");
  j = base_config();
  j["numerics"]["record_every"] = 3;
  EXPECT_EQ(error_path(j), "config.numerics.record_every");
  j = base_config();
  j["bath"]["alpha"] = 0;
  EXPECT_EQ(error_path(j), "config.bath.alpha");
  j = base_config();
  j["bath"]["beta"] = -1;
  EXPECT_EQ(error_path(j), "config.bath.beta");
  j = base_config();
  j["bath"]["colour"] = "blue";
  EXPECT_EQ(error_path(j), "config.bath.colour");
  j = base_config();
  j["model"]["positions"] = json::array({0.0, "x"});
  EXPECT_EQ(error_path(j), "config.model.positions[1]");
  j = base_config();
  j["model"]["energies"] = json::array({0.0});
  EXPECT_EQ(error_path(j), "config.model.energies");
  j = base_config();
  j["numerics"]["d_env"] = 1;
  EXPECT_EQ(error_path(j), "config.numerics.d_env");
  j = base_config();
  j["numerics"]["max_bond"] = 2.5;
  EXPECT_EQ(error_path(j), "config.numerics.max_bond");
  j = base_config();
  j.erase("model");
  EXPECT_EQ(error_path(j), "config.model");
  EXPECT_EQ(error_path(json::array()), "config");
}

TEST(Config, InitialStates) {
  json j = base_config();
  RunConfig cfg = parse_config(j);
  VectorXc up = initial_system_state(cfg);
  EXPECT_NEAR(std::abs(up(0) - up(1)), 0.0, 1e-15);
  cfg.initial_state = "lower";
  VectorXc low = initial_system_state(cfg);
  EXPECT_NEAR(std::abs(low(0) + low(1)), 0.0, 1e-15);
  cfg.initial_state = "site:2";
  EXPECT_EQ(initial_system_state(cfg)(1), cplx(1.0));
  cfg.initial_state = json::array({0.6, json::array({0.0, 0.8})});
  EXPECT_EQ(initial_system_state(cfg)(1), cplx(0.0, 0.8));
  for (const json &bad : {json("site:3"), json("middle"), json::array({1.0, 1.0}), json(3)}) {
    cfg.initial_state = bad;
    EXPECT_THROW(initial_system_state(cfg), ConfigError) << bad.dump();
  }
}

TEST(Simulate, ZeroDurationGivesOneRow) {
  json j = base_config();
  j["numerics"]["t_max"] = 0.0;
  const RunResult res = simulate(parse_config(j));
  ASSERT_EQ(res.record.size(), 1u);
  EXPECT_EQ(res.record.times[0], 0.0);
  EXPECT_NEAR(res.record.upper_pop[0], 1.0, 1e-12);
}

TEST(Simulate, DiagnosticsAndLightCone) {
  json j = base_config();
  j["numerics"]["chain_length"] = 20;
  j["numerics"]["chain_length_d"] = 20;
  j["numerics"]["t_max"] = 4.0;
  const RunResult res = simulate(parse_config(j));
  EXPECT_LT(res.diagnostics.norm_drift, 1e-6);
  EXPECT_LT(res.diagnostics.energy_drift, 1e-5);
  EXPECT_LT(res.diagnostics.light_cone_occ, 1e-8);
  EXPECT_EQ(res.record.signed_modes.size(), 40u);
}

TEST(Simulate, SameSeedSameBytes) {
  const RunConfig cfg = parse_config(base_config());
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  write_outputs(a, cfg, simulate(cfg));
  write_outputs(b, cfg, simulate(cfg));
  for (const char *f : {"timeseries.csv", "heatmap.csv", "chain_coefficients.csv", "couplings.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const json man = json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(man["config"]["numerics"]["chain_length"], 8);
  EXPECT_EQ(man["records"], 21);
}

TEST(Outputs, CsvShapes) {
  const RunConfig cfg = parse_config(base_config());
  const fs::path dir = scratch("shapes");
  write_outputs(dir, cfg, simulate(cfg));
  auto lines = [&](const char *f) {
    std::istringstream in(slurp(dir / f));
    std::string l;
    std::vector<std::string> out;
    while (std::getline(in, l)) out.push_back(l);
    return out;
  };
  const auto ts = lines("timeseries.csv");
  EXPECT_EQ(ts.front(), "t,upper_pop,lower_pop,re_coh,im_coh,purity,norm,energy");
  EXPECT_EQ(ts.size(), 22u);
  EXPECT_EQ(lines("heatmap.csv").size(), 1u + 21u * 16u);
  EXPECT_EQ(lines("couplings.csv").front(), "n,site,r,re_gamma,im_gamma,abs_gamma");
  EXPECT_EQ(lines("couplings.csv").size(), 1u + 2u * 8u);
  EXPECT_EQ(lines("chain_coefficients.csv").size(), 1u + 8u);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  EXPECT_EQ(cli("--out " + (dir / "smoke").string() + " run " + std::string(CORRBATH_CONFIG_DIR) + "/smoke.json"), 0);
  EXPECT_TRUE(fs::exists(dir / "smoke" / "timeseries.csv"));

  std::ofstream(dir / "bad.json") << R"({"model": {"positions": [0, 1]}, "numerics": {"dt": -1}})";
  EXPECT_EQ(cli("run " + (dir / "bad.json").string()), 1);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_EQ(cli("run " + (dir / "broken.json").string()), 1);
  EXPECT_EQ(cli("run " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(cli("check no-such-check"), 1);
  EXPECT_EQ(cli("--out " + dir.string() + " check mpo-dense"), 0);
  EXPECT_TRUE(fs::exists(dir / "check_report.json"));
}

TEST(Cli, Sweep) {
  const fs::path dir = scratch("sweep");
  const std::string cfg = std::string(CORRBATH_CONFIG_DIR) + "/smoke.json";
  EXPECT_EQ(cli("--out " + dir.string() + " sweep " + cfg + " --axis bath.alpha"), 0);
  EXPECT_FALSE(fs::exists(dir / "sweep_index.json"));
  EXPECT_EQ(cli("--out " + dir.string() + " sweep " + cfg + " --axis bath.alpha --values 0.06,0.24"), 0);
  EXPECT_TRUE(fs::exists(dir / "bath.alpha=0.06" / "timeseries.csv"));
  EXPECT_TRUE(fs::exists(dir / "bath.alpha=0.24" / "timeseries.csv"));
  const json index = json::parse(slurp(dir / "sweep_index.json"));
  EXPECT_EQ(index["runs"].size(), 2u);
  // one invalid member rejects the whole sweep before anything runs
  const fs::path bad = scratch("sweep_bad");
  EXPECT_EQ(cli("--out " + bad.string() + " sweep " + cfg + " --axis bath.alpha --values 0.1,-1"), 1);
  EXPECT_FALSE(fs::exists(bad / "bath.alpha=0.1"));
  EXPECT_EQ(cli("--out " + bad.string() + " sweep " + cfg + " --axis model --values 1"), 1);
}
