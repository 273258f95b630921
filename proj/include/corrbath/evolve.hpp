#pragma once

#include <cmath>
#include <functional>
#include <sstream>

#include "corrbath/observables.hpp"
#include "corrbath/tdvp.hpp"

namespace corrbath {

struct RecordOptions {
  int record_every = 1;      ///< in steps
  bool chain_occupations = true;
};

/// Append the observables of the current snapshot at time t.
inline void record_snapshot(TrajectoryRecord &rec, const MPSState &state, const MPOHamiltonian &mpo,
                            const SystemSpec &sys, TDVPEngine &engine, double t, bool with_chain) {
  const MatrixXc rho = system_rdm(state, sys.n_sites);
  const Eigen::VectorXd pops = eigen_populations(rho, sys);
  rec.times.push_back(t);
  rec.upper_pop.push_back(pops(pops.size() - 1));
  rec.lower_pop.push_back(pops(0));
  rec.coherence.push_back(sys.n_sites >= 2 ? site_coherence(rho) : cplx{});
  rec.purity.push_back(purity(rho));
  rec.norm.push_back(norm(state));
  rec.energy.push_back(engine.energy());
  if (with_chain) {
    if (rec.signed_modes.empty()) rec.signed_modes = signed_mode_labels(mpo);
    rec.chain_occ.push_back(chain_occupations(state, mpo));
  }
}

inline long step_count(const TDVPConfig &cfg) {
  const double raw = cfg.t_max / cfg.dt;
  const long steps = std::lround(raw);
  if (std::abs(raw - static_cast<double>(steps)) > 1e-9 * std::max(1.0, raw)) {
    std::ostringstream os;
    os << "t_max = " << cfg.t_max << " is not a whole number of steps dt = " << cfg.dt;
    throw InputError(os.str());
  }
  return steps;
}

/// Time loop around the TDVP sweep. Records t = 0 and every
/// `record_every` steps thereafter.
inline TrajectoryRecord evolve(MPSState &state, const MPOHamiltonian &mpo, const SystemSpec &sys,
                               const TDVPConfig &cfg, const RecordOptions &opts = {},
                               const std::function<void(const TrajectoryRecord &)> &on_record = {}) {
  cfg.validate();
  detail::require(opts.record_every >= 1, "evolve: record_every must be >= 1");
  const long steps = step_count(cfg);
  if (steps % opts.record_every != 0) {
    std::ostringstream os;
    os << "evolve: record_every = " << opts.record_every << " does not divide the step count " << steps;
    throw InputError(os.str());
  }
  TDVPEngine engine(mpo, state, cfg);
  TrajectoryRecord rec;
  record_snapshot(rec, state, mpo, sys, engine, 0.0, opts.chain_occupations);
  if (on_record) on_record(rec);
  for (long k = 1; k <= steps; ++k) {
    engine.sweep(cfg.dt);
    if (k % opts.record_every == 0) {
      record_snapshot(rec, state, mpo, sys, engine, static_cast<double>(k) * cfg.dt, opts.chain_occupations);
      if (on_record) on_record(rec);
    }
  }
  return rec;
}

} // namespace corrbath
