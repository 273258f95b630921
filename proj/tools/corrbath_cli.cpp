// Command-line front end: run, sweep, check.
//
// Exit codes: 0 success, 1 configuration error, 2 convergence failure,
// 3 check failure.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "corrbath/oracles.hpp"
#include "corrbath/simulation.hpp"

namespace fs = std::filesystem;
using namespace corrbath;

namespace {

enum Exit { ok = 0, config_error = 1, convergence_failure = 2, check_failure = 3 };

// Set a dotted path ("bath.alpha") inside a raw config object.
void set_path(json &j, const std::string &path, const json &value) {
  json *node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("--axis", "empty parameter name");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
    if (!node->is_object()) throw ConfigError("--axis", "'" + path + "' does not name a config field");
  }
  if (node->contains(parts.back()) && !(*node)[parts.back()].is_null() && !(*node)[parts.back()].is_primitive())
    throw ConfigError("--axis", "'" + path + "' is not a scalar field");
  (*node)[parts.back()] = value;
}

json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
}

int run_one(const RunConfig &cfg, const fs::path &dir, bool verbose) {
  auto progress = [&](const TrajectoryRecord &rec) {
    if (verbose && rec.size() % 50 == 1)
      std::fprintf(stderr, "  t = %.2f  upper = %.6f\n", rec.times.back(), rec.upper_pop.back());
  };
  const RunResult res = simulate(cfg, progress);
  write_outputs(dir, cfg, res);
  if (verbose)
    std::fprintf(stderr, "wrote %s (%.1f s, norm drift %.2e, light cone %.2e)\n", dir.string().c_str(),
                 res.diagnostics.wall_seconds, res.diagnostics.norm_drift, res.diagnostics.light_cone_occ);
  return ok;
}

std::string value_label(const json &v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char &c : s)
    if (c == '/' || c == ' ') c = '_';
  return s;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Correlated-bath chain-mapping / TDVP simulator"};
  app.require_subcommand(1);
  std::string out_dir;
  int workers = 1;
  bool quiet = false;
  app.add_option("--out", out_dir, "Output directory (overrides outputs.directory)");
  app.add_option("--workers", workers, "Parallel workers for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", quiet, "No progress output");

  std::string config_path;
  auto *run = app.add_subcommand("run", "Run one simulation");
  run->add_option("config", config_path, "JSON config")->required();

  std::string sweep_config, axis;
  std::vector<std::string> values;
  auto *sweep = app.add_subcommand("sweep", "Run a one-parameter family");
  sweep->add_option("config", sweep_config, "JSON config")->required();
  sweep->add_option("--axis", axis, "Dotted config field, e.g. bath.alpha")->required();
  sweep->add_option("--values", values, "Values (JSON literals)")->delimiter(',');

  std::string check_name;
  auto *check = app.add_subcommand("check", "Run validation checks");
  check->add_option("name", check_name, "Check name or 'all'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? ok : config_error;
  }

  try {
    if (*run) {
      RunConfig cfg = load_config(config_path);
      const fs::path dir = out_dir.empty() ? fs::path(cfg.out_dir) : fs::path(out_dir);
      return run_one(cfg, dir, !quiet);
    }

    if (*sweep) {
      const json base = read_json(sweep_config);
      std::vector<json> parsed;
      for (const auto &v : values) {
        try {
          parsed.push_back(json::parse(v));
        } catch (const json::parse_error &) {
          parsed.emplace_back(v);
        }
      }
      // validate every member before starting any
      std::vector<RunConfig> cfgs;
      for (const auto &v : parsed) {
        json j = base;
        set_path(j, axis, v);
        cfgs.push_back(parse_config(j));
      }
      const fs::path root = out_dir.empty() ? fs::path(cfgs.empty() ? "out" : cfgs.front().out_dir) : fs::path(out_dir);
      std::vector<fs::path> dirs;
      for (const auto &v : parsed) dirs.push_back(root / (axis + "=" + value_label(v)));
      std::vector<int> status(cfgs.size(), ok);
      std::vector<std::string> errors(cfgs.size());
      std::atomic<std::size_t> next{0};
      std::mutex log;
      auto worker = [&] {
        for (std::size_t i = next++; i < cfgs.size(); i = next++) {
          try {
            status[i] = run_one(cfgs[i], dirs[i], false);
          } catch (const ConvergenceError &e) {
            status[i] = convergence_failure;
            errors[i] = e.what();
          } catch (const std::exception &e) {
            status[i] = config_error;
            errors[i] = e.what();
          }
          if (!quiet) {
            std::lock_guard lock(log);
            std::fprintf(stderr, "[%zu/%zu] %s %s\n", i + 1, cfgs.size(), dirs[i].string().c_str(),
                         status[i] == ok ? "done" : errors[i].c_str());
          }
        }
      };
      std::vector<std::thread> pool;
      for (int w = 0; w < std::min<int>(workers, static_cast<int>(cfgs.size())); ++w) pool.emplace_back(worker);
      for (auto &t : pool) t.join();
      if (!cfgs.empty()) {
        json index = json::array();
        for (std::size_t i = 0; i < cfgs.size(); ++i)
          index.push_back({{"value", parsed[i]}, {"directory", dirs[i].string()}, {"status", status[i]},
                           {"error", errors[i]}});
        fs::create_directories(root);
        std::ofstream(root / "sweep_index.json") << json{{"axis", axis}, {"runs", index}}.dump(2) << '\n';
      }
      int worst = ok;
      for (int s : status) worst = std::max(worst, s);
      return worst;
    }

    if (*check) {
      std::vector<std::string> names;
      if (check_name == "all") names = check_names();
      else if (std::find(check_names().begin(), check_names().end(), check_name) != check_names().end())
        names = {check_name};
      else {
        std::cerr << "unknown check '" << check_name << "'; available: all";
        for (const auto &n : check_names()) std::cerr << ", " << n;
        std::cerr << '\n';
        return config_error;
      }
      json report = json::array();
      bool all_pass = true;
      for (const auto &n : names) {
        const CheckResult r = run_check(n);
        std::printf("%s %s deviation=%.3e tolerance=%.1e\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.value,
                    r.tolerance);
        std::fflush(stdout);
        report.push_back(r.to_json());
        all_pass = all_pass && r.passed;
      }
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "check_report.json") << report.dump(2) << '\n';
      } else {
        std::cout << report.dump(2) << '\n';
      }
      return all_pass ? ok : check_failure;
    }
  } catch (const ConvergenceError &e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return convergence_failure;
  } catch (const InputError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return config_error;
  }
  return ok;
}
