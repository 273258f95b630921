#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "corrbath/common.hpp"
#include "corrbath/csv.hpp"
#include "corrbath/mpo.hpp"
#include "corrbath/mps.hpp"

namespace corrbath {

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> upper_pop, lower_pop;
  std::vector<cplx> coherence;  ///< rho_S(1, 2)
  std::vector<double> purity;
  std::vector<double> norm, energy;
  std::vector<int> signed_modes;                ///< +n for c_n, -n for d_n
  std::vector<std::vector<double>> chain_occ;   ///< per time, aligned with signed_modes

  std::size_t size() const { return times.size(); }
};

/// Reduced density matrix of `count` consecutive sites starting at `first`,
/// in the product basis with the first site most significant. Unit trace.
inline MatrixXc reduced_density_matrix(const MPSState &state, int first, int count) {
  const int n = static_cast<int>(state.size());
  if (first < 0 || count < 1 || first + count > n)
    throw InputError("reduced_density_matrix: region must be a contiguous range of sites");
  std::int64_t dim = 1;
  for (int i = first; i < first + count; ++i) {
    dim *= state.dims[static_cast<std::size_t>(i)];
    detail::require(dim <= 4096, "reduced_density_matrix: region too large");
  }
  MPSState work = state;
  move_center(work, first);
  // amplitude block per local configuration, first site most significant
  const Eigen::Index dl = work.tensors[static_cast<std::size_t>(first)].rows();
  std::vector<MatrixXc> amps;  // dl x D_r each
  {
    const auto i0 = static_cast<std::size_t>(first);
    for (int s = 0; s < work.dims[i0]; ++s) amps.emplace_back(work.block(i0, s));
  }
  for (int i = first + 1; i < first + count; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    std::vector<MatrixXc> next;
    next.reserve(amps.size() * static_cast<std::size_t>(work.dims[ii]));
    for (const auto &m : amps)
      for (int s = 0; s < work.dims[ii]; ++s) next.emplace_back(m * work.block(ii, s));
    amps = std::move(next);
  }
  const Eigen::Index cols = dl * amps.front().cols();
  MatrixXc big(static_cast<Eigen::Index>(amps.size()), cols);
  for (std::size_t k = 0; k < amps.size(); ++k)
    big.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const VectorXc>(amps[k].data(), cols).transpose();
  MatrixXc rho = big * big.adjoint();
  const cplx tr = rho.trace();
  detail::require(std::abs(tr) > 0, "reduced_density_matrix: state has zero norm");
  return rho / tr;
}

/// Single-excitation block of the system reduced density matrix (N x N).
inline MatrixXc system_rdm(const MPSState &state, int n_system) {
  const MatrixXc full = reduced_density_matrix(state, 0, n_system);
  MatrixXc rho(n_system, n_system);
  auto index = [n_system](int a) { return Eigen::Index{1} << (n_system - 1 - a); };
  for (int a = 0; a < n_system; ++a)
    for (int b = 0; b < n_system; ++b) rho(a, b) = full(index(a), index(b));
  return rho;
}

/// Diagonal of rho in the eigenbasis of H_S, ascending energy. Exactly
/// degenerate eigenvalues keep the order returned for site-ordered input.
inline Eigen::VectorXd eigen_populations(const MatrixXc &rho, const SystemSpec &sys) {
  detail::require(rho.rows() == sys.n_sites && rho.cols() == sys.n_sites,
                  "eigen_populations: rho does not match the system size");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.hamiltonian());
  const MatrixXc v = es.eigenvectors().cast<cplx>();
  const MatrixXc d = v.adjoint() * rho * v;
  return d.diagonal().real();
}

inline cplx site_coherence(const MatrixXc &rho) {
  detail::require(rho.rows() >= 2, "site_coherence: need at least two sites");
  return rho(0, 1);
}

inline double purity(const MatrixXc &rho) { return (rho * rho).trace().real(); }

/// <n> on every bath site, c-chain first then d-chain, both in mode order.
/// Uses the left environment built from the centre at 0 (everything to the
/// right is right-orthonormal).
inline std::vector<double> chain_occupations(const MPSState &state, const MPOHamiltonian &mpo) {
  MPSState work = state;
  move_center(work, 0);
  const double nn = work.tensors[0].squaredNorm();
  std::vector<double> occ;
  occ.reserve(static_cast<std::size_t>(mpo.n_c + mpo.n_d));
  MatrixXc env = MatrixXc::Ones(1, 1);
  for (std::size_t i = 0; i < work.size(); ++i) {
    const int d = work.dims[i];
    const MatrixXc &a = work.tensors[i];
    const MatrixXc ea = env * a;  // Dl x (d Dr)
    const Eigen::Index dr = a.cols() / d;
    if (static_cast<int>(i) >= mpo.n_system) {
      double sum = 0;
      for (int s = 1; s < d; ++s)
        sum += s * (a.middleCols(s * dr, dr).conjugate().cwiseProduct(ea.middleCols(s * dr, dr))).sum().real();
      occ.push_back(sum / nn);
    }
    MatrixXc next = MatrixXc::Zero(dr, dr);
    for (int s = 0; s < d; ++s) next.noalias() += a.middleCols(s * dr, dr).adjoint() * ea.middleCols(s * dr, dr);
    env = std::move(next);
  }
  return occ;
}

inline std::vector<int> signed_mode_labels(const MPOHamiltonian &mpo) {
  std::vector<int> labels;
  for (int m = 1; m <= mpo.n_c; ++m) labels.push_back(m);
  for (int m = 1; m <= mpo.n_d; ++m) labels.push_back(-m);
  return labels;
}

struct Revival {
  double time = 0;
  double value = 0;
  double prominence = 0;
  double width = 0;  ///< full width at half prominence
  double sharpness() const { return width > 0 ? prominence / width : 0.0; }
};

inline constexpr double kRevivalProminence = 0.01;

/// Local maxima with topographic prominence >= min_prominence, in time order.
/// Endpoints are never peaks, so the initial decay does not count.
inline std::vector<Revival> revival_detector(const std::vector<double> &times, const std::vector<double> &values,
                                             double min_prominence = kRevivalProminence) {
  detail::require(times.size() == values.size(), "revival_detector: size mismatch");
  if (times.size() < 3) throw InputError("revival_detector: trajectory too short");
  const std::size_t n = values.size();
  std::vector<Revival> out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(values[i] > values[i - 1] && values[i] >= values[i + 1])) continue;
    // flat tops count once, at their left edge
    const double peak = values[i];
    double left_min = peak, right_min = peak;
    std::size_t l = i;
    while (l > 0 && values[l - 1] <= peak) left_min = std::min(left_min, values[--l]);
    std::size_t r = i;
    while (r + 1 < n && values[r + 1] <= peak) right_min = std::min(right_min, values[++r]);
    const double base = std::max(left_min, right_min);
    const double prom = peak - base;
    if (prom < min_prominence) continue;
    const double half = peak - prom / 2;
    auto cross = [&](std::size_t from, int dir) {
      std::size_t k = from;
      while (true) {
        const std::size_t nk = dir < 0 ? k - 1 : k + 1;
        if ((dir < 0 && k == 0) || (dir > 0 && k + 1 >= n)) return times[k];
        if (values[nk] <= half) {
          const double f = (values[k] - half) / (values[k] - values[nk]);
          return times[k] + f * (times[nk] - times[k]);
        }
        k = nk;
      }
    };
    Revival rv;
    rv.time = times[i];
    rv.value = peak;
    rv.prominence = prom;
    rv.width = cross(i, +1) - cross(i, -1);
    out.push_back(rv);
  }
  return out;
}

inline std::vector<Revival> revival_detector(const TrajectoryRecord &rec,
                                             double min_prominence = kRevivalProminence) {
  return revival_detector(rec.times, rec.upper_pop, min_prominence);
}

inline void write_timeseries_csv(std::ostream &os, const TrajectoryRecord &rec) {
  os << "t,upper_pop,lower_pop,re_coh,im_coh,purity,norm,energy\n";
  for (std::size_t k = 0; k < rec.size(); ++k)
    csv::row(os, rec.times[k], rec.upper_pop[k], rec.lower_pop[k], rec.coherence[k].real(),
             rec.coherence[k].imag(), rec.purity[k], rec.norm[k], rec.energy[k]);
}

inline void write_heatmap_csv(std::ostream &os, const TrajectoryRecord &rec) {
  os << "t,signed_mode,occupation\n";
  for (std::size_t k = 0; k < rec.size(); ++k)
    for (std::size_t m = 0; m < rec.signed_modes.size(); ++m)
      csv::row(os, rec.times[k], rec.signed_modes[m], rec.chain_occ[k][m]);
}

} // namespace corrbath
