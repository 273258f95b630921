#pragma once

// Declarative run configuration and the end-to-end pipeline
//   config -> spectral density -> chain mapping -> MPO -> MPS -> TDVP -> outputs.
//
// Config schema (JSON; every key optional unless marked):
//   model:    n_sites, energies[], hopping, positions[] (required),
//             initial_state: "upper" | "lower" | "site:<k>" | [[re, im], ...]
//   bath:     alpha, omega_c, sound_speed, beta (null = zero temperature)
//   numerics: chain_length, chain_length_d (null = automatic), d_env (null =
//             6 at T = 0, 10 otherwise), max_bond, dt, t_max, record_every,
//             krylov_dim, krylov_tol, quadrature_points (null = automatic),
//             padding_noise
//   outputs:  directory, prefix
//   seed

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrbath/chain_mapping.hpp"
#include "corrbath/evolve.hpp"
#include "corrbath/mpo.hpp"
#include "corrbath/spectral_density.hpp"

namespace corrbath {

using json = nlohmann::json;

/// Schema violation, reported with the offending field path.
class ConfigError : public InputError {
public:
  ConfigError(const std::string &path, const std::string &what)
      : InputError(path + ": " + what), path_(path) {}
  const std::string &path() const { return path_; }

private:
  std::string path_;
};

struct Numerics {
  std::optional<int> chain_length;    ///< c-chain N_m
  std::optional<int> chain_length_d;  ///< d-chain N_m'
  std::optional<int> d_env;
  int max_bond = 24;
  double dt = 0.1;
  double t_max = 10.0;
  int record_every = 1;
  int krylov_dim = 24;
  double krylov_tol = 1e-10;
  std::optional<int> quadrature_points;
  double padding_noise = 1e-12;
};

struct RunConfig {
  SystemSpec model;
  json initial_state = "upper";
  OhmicSpec bath;
  std::optional<double> beta;
  Numerics numerics;
  std::string out_dir = "out";
  std::string prefix;
  std::uint64_t seed = 1;

  bool thermal() const { return beta.has_value(); }
};

namespace detail {

class Reader {
public:
  Reader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  void allow(std::initializer_list<const char *> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char *k : keys) ok = ok || it.key() == k;
      if (!ok) throw ConfigError(sub(it.key()), "unknown field");
    }
  }

  bool has(const char *key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json &at(const char *key) const { return j_.at(key); }
  std::string sub(const std::string &key) const { return path_ + "." + key; }

  double number(const char *key, double fallback) const {
    if (!has(key)) return fallback;
    const json &v = j_.at(key);
    if (!v.is_number()) throw ConfigError(sub(key), "expected a number");
    return v.get<double>();
  }

  int integer(const char *key, int fallback) const {
    if (!has(key)) return fallback;
    const json &v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(sub(key), "expected an integer");
    return v.get<int>();
  }

  std::optional<int> optional_integer(const char *key) const {
    if (!has(key)) return std::nullopt;
    return integer(key, 0);
  }

  std::string string(const char *key, const std::string &fallback) const {
    if (!has(key)) return fallback;
    const json &v = j_.at(key);
    if (!v.is_string()) throw ConfigError(sub(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char *key) const {
    const json &v = j_.at(key);
    if (!v.is_array()) throw ConfigError(sub(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(sub(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

private:
  const json &j_;
  std::string path_;
};

inline void positive(double v, const std::string &path) {
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError(path, "must be a finite number > 0");
}

} // namespace detail

/// Parse and validate; throws ConfigError naming the field.
inline RunConfig parse_config(const json &j) {
  using detail::positive;
  detail::Reader root(j, "config");
  root.allow({"model", "bath", "numerics", "outputs", "seed"});
  RunConfig cfg;

  if (!root.has("model")) throw ConfigError("config.model", "required");
  detail::Reader m(root.at("model"), "config.model");
  m.allow({"n_sites", "energies", "hopping", "positions", "initial_state"});
  if (!m.has("positions")) throw ConfigError("config.model.positions", "required");
  cfg.model.positions = m.numbers("positions");
  cfg.model.n_sites = m.integer("n_sites", static_cast<int>(cfg.model.positions.size()));
  if (cfg.model.n_sites < 1) throw ConfigError("config.model.n_sites", "must be >= 1");
  if (static_cast<int>(cfg.model.positions.size()) != cfg.model.n_sites)
    throw ConfigError("config.model.positions", "must have n_sites entries");
  cfg.model.energies = m.has("energies") ? m.numbers("energies")
                                         : std::vector<double>(static_cast<std::size_t>(cfg.model.n_sites), 0.0);
  if (static_cast<int>(cfg.model.energies.size()) != cfg.model.n_sites)
    throw ConfigError("config.model.energies", "must have n_sites entries");
  cfg.model.hopping = m.number("hopping", 0.25);
  if (m.has("initial_state")) cfg.initial_state = m.at("initial_state");

  if (root.has("bath")) {
    detail::Reader b(root.at("bath"), "config.bath");
    b.allow({"alpha", "omega_c", "sound_speed", "beta"});
    cfg.bath.alpha = b.number("alpha", cfg.bath.alpha);
    cfg.bath.cutoff = b.number("omega_c", cfg.bath.cutoff);
    cfg.bath.sound_speed = b.number("sound_speed", cfg.bath.sound_speed);
    if (b.has("beta")) {
      cfg.beta = b.number("beta", 0);
      positive(*cfg.beta, "config.bath.beta");
    }
  }
  positive(cfg.bath.alpha, "config.bath.alpha");
  positive(cfg.bath.cutoff, "config.bath.omega_c");
  positive(cfg.bath.sound_speed, "config.bath.sound_speed");

  if (root.has("numerics")) {
    detail::Reader n(root.at("numerics"), "config.numerics");
    n.allow({"chain_length", "chain_length_d", "d_env", "max_bond", "dt", "t_max", "record_every", "krylov_dim",
             "krylov_tol", "quadrature_points", "padding_noise"});
    auto &nu = cfg.numerics;
    nu.chain_length = n.optional_integer("chain_length");
    nu.chain_length_d = n.optional_integer("chain_length_d");
    nu.d_env = n.optional_integer("d_env");
    nu.max_bond = n.integer("max_bond", nu.max_bond);
    nu.dt = n.number("dt", nu.dt);
    nu.t_max = n.number("t_max", nu.t_max);
    nu.record_every = n.integer("record_every", nu.record_every);
    nu.krylov_dim = n.integer("krylov_dim", nu.krylov_dim);
    nu.krylov_tol = n.number("krylov_tol", nu.krylov_tol);
    nu.quadrature_points = n.optional_integer("quadrature_points");
    nu.padding_noise = n.number("padding_noise", nu.padding_noise);
  }
  const auto &nu = cfg.numerics;
  if (nu.chain_length && *nu.chain_length < 0) throw ConfigError("config.numerics.chain_length", "must be >= 0");
  if (nu.chain_length_d && *nu.chain_length_d < 0) throw ConfigError("config.numerics.chain_length_d", "must be >= 0");
  if (nu.d_env && *nu.d_env < 2) throw ConfigError("config.numerics.d_env", "must be >= 2");
  if (nu.max_bond < 2) throw ConfigError("config.numerics.max_bond", "must be >= 2");
  positive(nu.dt, "config.numerics.dt");
  if (!(nu.t_max >= 0)) throw ConfigError("config.numerics.t_max", "must be >= 0");
  if (nu.record_every < 1) throw ConfigError("config.numerics.record_every", "must be >= 1");
  if (nu.krylov_dim < 3) throw ConfigError("config.numerics.krylov_dim", "must be >= 3");
  positive(nu.krylov_tol, "config.numerics.krylov_tol");
  if (nu.quadrature_points && *nu.quadrature_points < kPanelOrder)
    throw ConfigError("config.numerics.quadrature_points", "must be >= " + std::to_string(kPanelOrder));
  if (!(nu.padding_noise >= 0)) throw ConfigError("config.numerics.padding_noise", "must be >= 0");
  try {
    step_count({nu.dt, nu.t_max, nu.krylov_dim, nu.krylov_tol});
  } catch (const InputError &e) {
    throw ConfigError("config.numerics.t_max", e.what());
  }
  if (step_count({nu.dt, nu.t_max, nu.krylov_dim, nu.krylov_tol}) % nu.record_every != 0)
    throw ConfigError("config.numerics.record_every", "must divide the number of steps t_max / dt");

  if (root.has("outputs")) {
    detail::Reader o(root.at("outputs"), "config.outputs");
    o.allow({"directory", "prefix"});
    cfg.out_dir = o.string("directory", cfg.out_dir);
    cfg.prefix = o.string("prefix", cfg.prefix);
  }
  if (root.has("seed")) {
    if (!root.at("seed").is_number_unsigned()) throw ConfigError("config.seed", "expected a nonnegative integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Initial system vector from the config's `initial_state`.
inline VectorXc initial_system_state(const RunConfig &cfg) {
  const int n = cfg.model.n_sites;
  const json &s = cfg.initial_state;
  const std::string path = "config.model.initial_state";
  VectorXc v = VectorXc::Zero(n);
  if (s.is_string()) {
    const std::string name = s.get<std::string>();
    if (name == "upper" || name == "lower") {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cfg.model.hamiltonian());
      Eigen::VectorXd e = es.eigenvectors().col(name == "upper" ? n - 1 : 0);
      Eigen::Index k = 0;
      e.cwiseAbs().maxCoeff(&k);
      for (Eigen::Index i = 0; i < e.size(); ++i)  // first non-negligible entry positive
        if (std::abs(e(i)) > 1e-12) {
          k = i;
          break;
        }
      if (e(k) < 0) e = -e;
      v = e.cast<cplx>();
    } else if (name.rfind("site:", 0) == 0) {
      int k = 0;
      try {
        k = std::stoi(name.substr(5));
      } catch (...) {
        throw ConfigError(path, "site index must be an integer");
      }
      if (k < 1 || k > n) throw ConfigError(path, "site index out of range 1.." + std::to_string(n));
      v(k - 1) = 1.0;
    } else {
      throw ConfigError(path, "expected \"upper\", \"lower\", \"site:<k>\" or an amplitude list");
    }
  } else if (s.is_array()) {
    if (static_cast<int>(s.size()) != n) throw ConfigError(path, "must have n_sites amplitudes");
    for (int i = 0; i < n; ++i) {
      const json &a = s[static_cast<std::size_t>(i)];
      if (a.is_number()) v(i) = a.get<double>();
      else if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number())
        v(i) = cplx(a[0].get<double>(), a[1].get<double>());
      else throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number or [re, im]");
    }
    if (std::abs(v.norm() - 1.0) > 1e-10) throw ConfigError(path, "amplitudes are not normalized");
  } else {
    throw ConfigError(path, "expected a string or an array");
  }
  return v;
}

/// Every default made explicit.
struct ResolvedNumerics {
  int chain_length = 0, chain_length_d = 0, d_env = 0, quadrature_points = 0;
};

inline ResolvedNumerics resolve(const RunConfig &cfg) {
  ResolvedNumerics r;
  double max_sep = 0;
  for (double a : cfg.model.positions)
    for (double b : cfg.model.positions) max_sep = std::max(max_sep, std::abs(a - b));
  const double bandwidth = cfg.thermal() ? 2 * cfg.bath.cutoff : cfg.bath.cutoff;
  const auto automatic = static_cast<int>(
      default_chain_length(bandwidth, cfg.numerics.t_max, max_sep, cfg.bath.sound_speed));
  r.chain_length = cfg.numerics.chain_length.value_or(automatic);
  r.chain_length_d = cfg.numerics.chain_length_d.value_or(automatic);
  r.d_env = cfg.numerics.d_env.value_or(cfg.thermal() ? 10 : 6);
  const int modes = std::max({r.chain_length, r.chain_length_d, 1});
  r.quadrature_points = cfg.numerics.quadrature_points.value_or(
      static_cast<int>(default_quadrature_points(static_cast<std::size_t>(modes))));
  return r;
}

inline json to_json(const RunConfig &cfg) {
  const ResolvedNumerics r = resolve(cfg);
  json j;
  j["model"] = {{"n_sites", cfg.model.n_sites},
                {"energies", cfg.model.energies},
                {"hopping", cfg.model.hopping},
                {"positions", cfg.model.positions},
                {"initial_state", cfg.initial_state}};
  j["bath"] = {{"alpha", cfg.bath.alpha}, {"omega_c", cfg.bath.cutoff}, {"sound_speed", cfg.bath.sound_speed}};
  j["bath"]["beta"] = cfg.beta ? json(*cfg.beta) : json(nullptr);
  const auto &n = cfg.numerics;
  j["numerics"] = {{"chain_length", r.chain_length},
                   {"chain_length_d", r.chain_length_d},
                   {"d_env", r.d_env},
                   {"max_bond", n.max_bond},
                   {"dt", n.dt},
                   {"t_max", n.t_max},
                   {"record_every", n.record_every},
                   {"krylov_dim", n.krylov_dim},
                   {"krylov_tol", n.krylov_tol},
                   {"quadrature_points", r.quadrature_points},
                   {"padding_noise", n.padding_noise}};
  j["outputs"] = {{"directory", cfg.out_dir}, {"prefix", cfg.prefix}};
  j["seed"] = cfg.seed;
  return j;
}

/// Mapping and operator for a config, shared by `run` and the checks.
struct PreparedModel {
  ResolvedNumerics numerics;
  ChainMapping mapping;
  ChainGeometry c_chain, d_chain;
  MPOHamiltonian mpo;
  VectorXc system_state;
};

inline DiscretizedMeasure bath_measure(const RunConfig &cfg, std::size_t points) {
  if (cfg.thermal()) return build_measure(ThermalSpec{cfg.bath, *cfg.beta}, points);
  return build_measure(cfg.bath, points);
}

inline PreparedModel prepare(const RunConfig &cfg) {
  PreparedModel p;
  p.numerics = resolve(cfg);
  const auto modes = static_cast<std::size_t>(std::max({p.numerics.chain_length, p.numerics.chain_length_d, 1}));
  p.mapping = map_bath(bath_measure(cfg, static_cast<std::size_t>(p.numerics.quadrature_points)),
                       cfg.model.positions, cfg.bath.sound_speed, modes);
  p.c_chain = p.mapping.geometry.truncated(static_cast<std::size_t>(p.numerics.chain_length));
  p.d_chain = p.mapping.geometry.truncated(static_cast<std::size_t>(p.numerics.chain_length_d));
  p.mpo = build_mpo(cfg.model, p.c_chain, p.d_chain, p.mapping.table, p.numerics.d_env);
  p.system_state = initial_system_state(cfg);
  return p;
}

struct RunDiagnostics {
  double norm_drift = 0;        ///< max |norm - 1|
  double energy_drift = 0;      ///< max |E - E0| / max(|E0|, 1e-12)
  double light_cone_occ = 0;    ///< max occupation of the last 5 sites of either chain
  double wall_seconds = 0;
};

inline RunDiagnostics diagnose(const TrajectoryRecord &rec, const MPOHamiltonian &mpo) {
  RunDiagnostics d;
  if (rec.size() == 0) return d;
  const double e0 = rec.energy.front();
  for (std::size_t k = 0; k < rec.size(); ++k) {
    d.norm_drift = std::max(d.norm_drift, std::abs(rec.norm[k] - 1.0));
    d.energy_drift = std::max(d.energy_drift, std::abs(rec.energy[k] - e0) / std::max(std::abs(e0), 1e-12));
  }
  for (const auto &occ : rec.chain_occ)
    for (std::size_t m = 0; m < occ.size(); ++m) {
      const int label = rec.signed_modes[m];
      const int len = label > 0 ? mpo.n_c : mpo.n_d;
      if (std::abs(label) > len - 5) d.light_cone_occ = std::max(d.light_cone_occ, occ[m]);
    }
  return d;
}

struct RunResult {
  PreparedModel model;
  TrajectoryRecord record;
  RunDiagnostics diagnostics;
};

inline RunResult simulate(const RunConfig &cfg, const std::function<void(const TrajectoryRecord &)> &progress = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.model = prepare(cfg);
  MPSState psi = init_product_state(res.model.system_state, res.model.mpo, cfg.numerics.max_bond, cfg.seed,
                                    cfg.numerics.padding_noise);
  TDVPConfig tc{cfg.numerics.dt, cfg.numerics.t_max, cfg.numerics.krylov_dim, cfg.numerics.krylov_tol};
  res.record = evolve(psi, res.model.mpo, cfg.model, tc, {cfg.numerics.record_every, true}, progress);
  res.diagnostics = diagnose(res.record, res.model.mpo);
  res.diagnostics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// CSV (long form): n, site, r, re_gamma, im_gamma, abs_gamma
inline void write_couplings_csv(std::ostream &os, const CouplingTable &table, std::size_t n_modes) {
  os << "n,site,r,re_gamma,im_gamma,abs_gamma\n";
  const auto modes = std::min<Eigen::Index>(table.modes(), static_cast<Eigen::Index>(n_modes));
  for (Eigen::Index s = 0; s < table.sites(); ++s)
    for (Eigen::Index n = 0; n < modes; ++n) {
      const cplx g = table.gamma(n, s);
      csv::row(os, static_cast<long>(n), static_cast<long>(s + 1), table.positions[static_cast<std::size_t>(s)],
               g.real(), g.imag(), std::abs(g));
    }
}

/// Writes timeseries.csv, heatmap.csv, chain_coefficients.csv, couplings.csv
/// and manifest.json into `dir`.
inline void write_outputs(const std::filesystem::path &dir, const RunConfig &cfg, const RunResult &res) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string &name) {
    std::ofstream f(dir / (cfg.prefix + name));
    if (!f) throw InputError("cannot write " + (dir / (cfg.prefix + name)).string());
    return f;
  };
  {
    auto f = open("timeseries.csv");
    write_timeseries_csv(f, res.record);
  }
  {
    auto f = open("heatmap.csv");
    write_heatmap_csv(f, res.record);
  }
  const std::size_t modes = std::max(res.model.c_chain.length(), res.model.d_chain.length());
  {
    auto f = open("chain_coefficients.csv");
    write_chain_coefficients_csv(f, res.model.mapping.geometry.truncated(modes), res.model.mapping.table);
  }
  {
    auto f = open("couplings.csv");
    write_couplings_csv(f, res.model.mapping.table, modes);
  }
  json man;
  man["config"] = to_json(cfg);
  man["config"]["outputs"]["directory"] = dir.string();
  man["wall_seconds"] = res.diagnostics.wall_seconds;
  man["diagnostics"] = {{"norm_drift", res.diagnostics.norm_drift},
                        {"energy_drift", res.diagnostics.energy_drift},
                        {"light_cone_occupation", res.diagnostics.light_cone_occ}};
  man["mpo"] = {{"sites", res.model.mpo.size()}, {"bond_dimensions", bond_dimension_profile(res.model.mpo)}};
  man["records"] = res.record.size();
  man["files"] = {cfg.prefix + "timeseries.csv", cfg.prefix + "heatmap.csv", cfg.prefix + "chain_coefficients.csv",
                  cfg.prefix + "couplings.csv"};
  auto f = open("manifest.json");
  f << man.dump(2) << '\n';
}

} // namespace corrbath
