#pragma once

// Exact reference models that never touch the MPO/MPS code path.
//
// 1. direct_hamiltonian: the chain-mapped Hamiltonian on the full product
//    space, summed term by term from Kronecker products of local operators.
// 2. DenseModel: single-excitation system x truncated Fock space of an
//    arbitrary quadratic bath (chain or star geometry), propagated with a
//    Chebyshev expansion of exp(-iHt).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Sparse>

#include "corrbath/chain_mapping.hpp"
#include "corrbath/common.hpp"
#include "corrbath/local_ops.hpp"
#include "corrbath/mpo.hpp"

namespace corrbath {

// ---------------------------------------------------------------------------
// full product space, term by term

namespace detail {

inline SparseMatrixC sparse_identity(Eigen::Index n) {
  SparseMatrixC id(n, n);
  id.setIdentity();
  return id;
}

inline SparseMatrixC sparse_kron(const SparseMatrixC &a, const SparseMatrixC &b) {
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Eigen::Index i = 0; i < a.outerSize(); ++i)
    for (SparseMatrixC::InnerIterator ia(a, i); ia; ++ia)
      for (Eigen::Index j = 0; j < b.outerSize(); ++j)
        for (SparseMatrixC::InnerIterator ib(b, j); ib; ++ib)
          trips.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                             ia.value() * ib.value());
  SparseMatrixC out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// op acting on `site` of a product space with local dimensions `dims`.
inline SparseMatrixC embed(const MatrixXc &op, std::size_t site, const std::vector<int> &dims) {
  Eigen::Index left = 1, right = 1;
  for (std::size_t i = 0; i < site; ++i) left *= dims[i];
  for (std::size_t i = site + 1; i < dims.size(); ++i) right *= dims[i];
  const SparseMatrixC local = op.sparseView();
  return sparse_kron(sparse_kron(sparse_identity(left), local), sparse_identity(right));
}

} // namespace detail

/// H_S + H_chains + H_int on [system][c-chain][d-chain], site 0 most significant.
inline SparseMatrixC direct_hamiltonian(const SystemSpec &sys, const ChainGeometry &c_chain,
                                        const ChainGeometry &d_chain, const CouplingTable &table,
                                        int d_env, std::int64_t max_dimension = kMaxDenseDimension) {
  sys.validate();
  const int n = sys.n_sites;
  const auto nc = static_cast<int>(c_chain.length()), nd = static_cast<int>(d_chain.length());
  std::vector<int> dims(static_cast<std::size_t>(n), 2);
  dims.insert(dims.end(), static_cast<std::size_t>(nc + nd), d_env);
  std::int64_t dim = 1;
  for (int d : dims) {
    dim *= d;
    detail::require(dim <= max_dimension, "direct_hamiltonian: Hilbert dimension too large");
  }
  const MatrixXc f = ops::site_lower(), fd = ops::site_raise(), proj = ops::site_projector();
  const MatrixXc a = ops::annihilate(d_env), ad = ops::create(d_env), num = ops::number(d_env);
  auto at = [&](const MatrixXc &op, int site) { return detail::embed(op, static_cast<std::size_t>(site), dims); };

  SparseMatrixC h(dim, dim);
  for (int s = 0; s < n; ++s) h += sys.energies[static_cast<std::size_t>(s)] * at(proj, s);
  for (int s = 0; s + 1 < n; ++s) {
    const SparseMatrixC hop = at(fd, s) * at(f, s + 1);
    h += sys.hopping * SparseMatrixC(hop + SparseMatrixC(hop.adjoint()));
  }
  auto chain = [&](const ChainGeometry &g, int offset, int len) {
    for (int m = 0; m < len; ++m) h += g.omega[static_cast<std::size_t>(m)] * at(num, offset + m);
    for (int m = 0; m + 1 < len; ++m) {
      const SparseMatrixC hop = at(ad, offset + m) * at(a, offset + m + 1);
      h += g.t[static_cast<std::size_t>(m)] * SparseMatrixC(hop + SparseMatrixC(hop.adjoint()));
    }
  };
  chain(c_chain, n, nc);
  chain(d_chain, n + nc, nd);
  // n_s (g b + g* b^+) with (g, b) = (gamma, c) on the c-chain and (gamma*, d) on the d-chain
  auto linear = [&](int site, int mode, cplx g) {
    SparseMatrixC lower = at(a, mode), upper = at(ad, mode);
    lower *= g;
    upper *= std::conj(g);
    return SparseMatrixC(at(proj, site) * SparseMatrixC(lower + upper));
  };
  for (int s = 0; s < n; ++s) {
    for (int m = 0; m < nc; ++m) h += linear(s, n + m, table.gamma(m, s));
    for (int m = 0; m < nd; ++m) h += linear(s, n + nc + m, std::conj(table.gamma(m, s)));
  }
  h.prune(cplx{0.0});
  return h;
}

// ---------------------------------------------------------------------------
// single-excitation sector with a quadratic bath

/// H_B = sum_ij h_ij b_i^+ b_j,  H_int = sum_a n_a sum_j (lambda_aj b_j + h.c.)
struct QuadraticBath {
  MatrixXc h;
  MatrixXc lambda;  ///< sites x modes
  Eigen::Index modes() const { return h.rows(); }
};

/// Two chains: modes c_1..c_Nm then d_1..d_Nm'. The d-chain couples through
/// gamma* d + gamma d^+.
inline QuadraticBath chain_bath(const ChainGeometry &c_chain, const ChainGeometry &d_chain,
                                const CouplingTable &table) {
  const auto nc = static_cast<Eigen::Index>(c_chain.length()), nd = static_cast<Eigen::Index>(d_chain.length());
  detail::require(table.modes() >= std::max(nc, nd), "chain_bath: coupling table too short");
  QuadraticBath bath;
  bath.h = MatrixXc::Zero(nc + nd, nc + nd);
  bath.lambda = MatrixXc::Zero(table.sites(), nc + nd);
  auto fill = [&](const ChainGeometry &g, Eigen::Index off, Eigen::Index len, bool conj) {
    for (Eigen::Index m = 0; m < len; ++m) {
      bath.h(off + m, off + m) = g.omega[static_cast<std::size_t>(m)];
      if (m + 1 < len) bath.h(off + m, off + m + 1) = bath.h(off + m + 1, off + m) = g.t[static_cast<std::size_t>(m)];
      for (Eigen::Index s = 0; s < table.sites(); ++s)
        bath.lambda(s, off + m) = conj ? std::conj(table.gamma(m, s)) : table.gamma(m, s);
    }
  };
  fill(c_chain, 0, nc, false);
  fill(d_chain, nc, nd, true);
  return bath;
}

/// Star geometry from a discrete measure {x_i, w_i}: right-moving modes a_i
/// with coupling sqrt(w_i) e^{i x_i r / c}, then left-moving modes b_i with
/// sqrt(w_i) e^{-i x_i r / c}. `left_movers = false` keeps only the a_i.
inline QuadraticBath star_bath(const DiscretizedMeasure &measure, const std::vector<double> &positions,
                               double sound_speed, bool left_movers = true) {
  const auto m = static_cast<Eigen::Index>(measure.size());
  const Eigen::Index total = left_movers ? 2 * m : m;
  QuadraticBath bath;
  bath.h = MatrixXc::Zero(total, total);
  bath.lambda = MatrixXc::Zero(static_cast<Eigen::Index>(positions.size()), total);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = measure.nodes[static_cast<std::size_t>(i)];
    const double g = std::sqrt(measure.weights[static_cast<std::size_t>(i)]);
    bath.h(i, i) = x;
    if (left_movers) bath.h(m + i, m + i) = x;
    for (std::size_t s = 0; s < positions.size(); ++s) {
      const cplx phase = std::exp(I_unit * x * positions[s] / sound_speed);
      bath.lambda(static_cast<Eigen::Index>(s), i) = g * phase;
      if (left_movers) bath.lambda(static_cast<Eigen::Index>(s), m + i) = g * std::conj(phase);
    }
  }
  return bath;
}

struct BasisOptions {
  int levels = 4;             ///< per-mode Fock cutoff d_E
  int max_total_quanta = -1;  ///< total bath quanta cap K, < 0 for none
};

class DenseModel {
public:
  DenseModel(const SystemSpec &sys, const QuadraticBath &bath, BasisOptions opts) : sys_(sys), opts_(opts) {
    sys.validate();
    n_sites_ = sys.n_sites;
    modes_ = static_cast<int>(bath.modes());
    detail::require(opts.levels >= 1, "DenseModel: levels must be >= 1");
    detail::require(bath.lambda.rows() == n_sites_, "DenseModel: coupling rows must match system sites");
    double bits = std::log2(static_cast<double>(opts.levels)) * modes_;
    detail::require(bits < 62, "DenseModel: Fock keys do not fit in 64 bits");
    enumerate();
    build(bath);
  }

  std::size_t dimension() const { return static_cast<std::size_t>(n_sites_) * keys_.size(); }
  std::size_t bath_states() const { return keys_.size(); }
  std::size_t nonzeros() const { return values_.size(); }

  VectorXc initial_state(const VectorXc &sys_state) const {
    detail::require(sys_state.size() == n_sites_, "DenseModel::initial_state: wrong system vector length");
    VectorXc psi = VectorXc::Zero(static_cast<Eigen::Index>(dimension()));
    // the vacuum has key 0, the first sorted bath state
    for (int s = 0; s < n_sites_; ++s) psi(index(s, 0)) = sys_state(s);
    return psi;
  }

  VectorXc apply(const VectorXc &x) const {
    VectorXc y = VectorXc::Zero(x.size());
    for (std::size_t col = 0; col + 1 < starts_.size(); ++col) {
      const cplx xc = x(static_cast<Eigen::Index>(col));
      if (xc == cplx{}) continue;
      for (std::size_t k = starts_[col]; k < starts_[col + 1]; ++k) y(rows_[k]) += values_[k] * xc;
    }
    return y;
  }

  /// Gershgorin enclosure of the spectrum.
  std::pair<double, double> spectral_bounds() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t col = 0; col + 1 < starts_.size(); ++col) {
      double diag = 0, radius = 0;
      for (std::size_t k = starts_[col]; k < starts_[col + 1]; ++k) {
        if (static_cast<std::size_t>(rows_[k]) == col) diag += values_[k].real();
        else radius += std::abs(values_[k]);
      }
      lo = std::min(lo, diag - radius);
      hi = std::max(hi, diag + radius);
    }
    return {lo, hi};
  }

  /// N x N single-excitation system density matrix, unit trace.
  MatrixXc system_rdm(const VectorXc &psi) const {
    const auto nb = static_cast<Eigen::Index>(keys_.size());
    const Eigen::Map<const MatrixXc> m(psi.data(), nb, n_sites_);
    MatrixXc rho = m.transpose() * m.conjugate();
    return rho / rho.trace();
  }

  /// <b_j^+ b_j> for every bath mode.
  std::vector<double> mode_occupations(const VectorXc &psi) const {
    std::vector<double> occ(static_cast<std::size_t>(modes_), 0.0);
    const double nn = psi.squaredNorm();
    for (std::size_t b = 0; b < keys_.size(); ++b) {
      double w = 0;
      for (int s = 0; s < n_sites_; ++s) w += std::norm(psi(index(s, b)));
      if (w == 0) continue;
      std::uint64_t key = keys_[b];
      for (int j = 0; j < modes_; ++j) {
        occ[static_cast<std::size_t>(j)] += w * static_cast<double>(key % static_cast<std::uint64_t>(opts_.levels));
        key /= static_cast<std::uint64_t>(opts_.levels);
      }
    }
    for (double &o : occ) o /= nn;
    return occ;
  }

  double energy(const VectorXc &psi) const { return psi.dot(apply(psi)).real() / psi.squaredNorm(); }

private:
  SystemSpec sys_;
  BasisOptions opts_;
  int n_sites_ = 0;
  int modes_ = 0;
  std::vector<std::uint64_t> keys_;  // sorted mixed-radix bath keys, mode j has weight levels^j
  std::vector<std::uint64_t> powers_;
  // compressed columns of H
  std::vector<std::size_t> starts_;
  std::vector<std::int32_t> rows_;
  std::vector<cplx> values_;

  Eigen::Index index(int site, std::size_t bath) const {
    return static_cast<Eigen::Index>(static_cast<std::size_t>(site) * keys_.size() + bath);
  }

  std::size_t lookup(std::uint64_t key) const {
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return keys_.size();
    return static_cast<std::size_t>(it - keys_.begin());
  }

  void enumerate() {
    const int cap = opts_.max_total_quanta < 0 ? std::numeric_limits<int>::max() : opts_.max_total_quanta;
    powers_.assign(static_cast<std::size_t>(modes_) + 1, 1);
    for (int j = 0; j < modes_; ++j)
      powers_[static_cast<std::size_t>(j) + 1] = powers_[static_cast<std::size_t>(j)] * static_cast<std::uint64_t>(opts_.levels);
    std::function<void(int, int, std::uint64_t)> rec = [&](int mode, int left, std::uint64_t key) {
      if (mode == modes_) {
        keys_.push_back(key);
        return;
      }
      for (int q = 0; q < opts_.levels && q <= left; ++q)
        rec(mode + 1, left - q, key + static_cast<std::uint64_t>(q) * powers_[static_cast<std::size_t>(mode)]);
    };
    rec(0, cap, 0);
    std::sort(keys_.begin(), keys_.end());
    detail::require(static_cast<double>(keys_.size()) * n_sites_ < 2.0e9, "DenseModel: basis too large");
  }

  void build(const QuadraticBath &bath) {
    const int cap = opts_.max_total_quanta < 0 ? std::numeric_limits<int>::max() : opts_.max_total_quanta;
    const std::size_t nb = keys_.size();
    starts_.reserve(dimension() + 1);
    starts_.push_back(0);
    std::vector<int> occ(static_cast<std::size_t>(modes_));
    std::vector<std::pair<Eigen::Index, cplx>> col;
    for (int s = 0; s < n_sites_; ++s) {
      for (std::size_t b = 0; b < nb; ++b) {
        std::uint64_t key = keys_[b];
        int total = 0;
        for (int j = 0; j < modes_; ++j) {
          occ[static_cast<std::size_t>(j)] = static_cast<int>(key % static_cast<std::uint64_t>(opts_.levels));
          key /= static_cast<std::uint64_t>(opts_.levels);
          total += occ[static_cast<std::size_t>(j)];
        }
        col.clear();
        // H |s, b> = sum_t |t> H_ts
        double diag = sys_.energies[static_cast<std::size_t>(s)];
        for (int j = 0; j < modes_; ++j) diag += bath.h(j, j).real() * occ[static_cast<std::size_t>(j)];
        col.emplace_back(index(s, b), diag);
        if (s > 0 && sys_.hopping != 0.0) col.emplace_back(index(s - 1, b), sys_.hopping);
        if (s + 1 < n_sites_ && sys_.hopping != 0.0) col.emplace_back(index(s + 1, b), sys_.hopping);
        const std::uint64_t k0 = keys_[b];
        for (int j = 0; j < modes_; ++j) {
          const int nj = occ[static_cast<std::size_t>(j)];
          const std::uint64_t pj = powers_[static_cast<std::size_t>(j)];
          // h_ij b_i^+ b_j
          if (nj > 0)
            for (int i = 0; i < modes_; ++i) {
              if (i == j || bath.h(i, j) == cplx{}) continue;
              const int ni = occ[static_cast<std::size_t>(i)];
              if (ni + 1 >= opts_.levels) continue;
              const std::size_t t = lookup(k0 - pj + powers_[static_cast<std::size_t>(i)]);
              if (t == nb) continue;
              col.emplace_back(index(s, t), bath.h(i, j) * std::sqrt(static_cast<double>(nj) * (ni + 1)));
            }
          const cplx lam = bath.lambda(s, j);
          if (lam == cplx{}) continue;
          if (nj > 0) {
            const std::size_t t = lookup(k0 - pj);
            if (t != nb) col.emplace_back(index(s, t), lam * std::sqrt(static_cast<double>(nj)));
          }
          if (nj + 1 < opts_.levels && total + 1 <= cap) {
            const std::size_t t = lookup(k0 + pj);
            if (t != nb) col.emplace_back(index(s, t), std::conj(lam) * std::sqrt(static_cast<double>(nj + 1)));
          }
        }
        for (const auto &[r, v] : col) {
          rows_.push_back(static_cast<std::int32_t>(r));
          values_.push_back(v);
        }
        starts_.push_back(rows_.size());
      }
    }
  }
};

/// Chebyshev propagation psi(t) = exp(-iHt) psi0, reported at each requested
/// time (ascending, starting at or after 0) through `on_time`.
inline void dense_evolve(const DenseModel &model, const VectorXc &psi0, const std::vector<double> &times,
                         const std::function<void(double, const VectorXc &)> &on_time, double tol = 1e-14) {
  detail::require(std::is_sorted(times.begin(), times.end()), "dense_evolve: times must be ascending");
  auto [lo, hi] = model.spectral_bounds();
  const double centre = 0.5 * (hi + lo);
  const double radius = 0.5 * (hi - lo) * 1.01 + 1e-12;
  auto scaled = [&](const VectorXc &v) -> VectorXc { return (model.apply(v) - centre * v) / radius; };

  VectorXc psi = psi0;
  double now = 0;
  for (double t : times) {
    detail::require(t >= now - 1e-15, "dense_evolve: times must be nonnegative");
    const double tau = t - now;
    if (tau > 0) {
      const double x = radius * tau;
      VectorXc t_prev = psi, t_cur = scaled(psi);
      VectorXc acc = std::cyl_bessel_j(0.0, x) * psi + 2.0 * (-I_unit) * std::cyl_bessel_j(1.0, x) * t_cur;
      cplx phase = -I_unit;
      for (int k = 2;; ++k) {
        VectorXc t_next = 2.0 * scaled(t_cur) - t_prev;
        phase *= -I_unit;
        const double jk = std::cyl_bessel_j(static_cast<double>(k), x);
        acc += 2.0 * phase * jk * t_next;
        t_prev = std::move(t_cur);
        t_cur = std::move(t_next);
        if (k > x && std::abs(jk) < tol) break;
        if (k > 100000) throw ConvergenceError("dense_evolve: Chebyshev series did not converge");
      }
      psi = std::exp(-I_unit * centre * tau) * acc;
      now = t;
    }
    on_time(t, psi);
  }
}

} // namespace corrbath
