#pragma once

// Matrix product operator for the chain-mapped Hamiltonian
//
//   H = sum_a E_a n_a + J sum_a (f_a^+ f_{a+1} + h.c.)
//     + sum_n w_n (c_n^+ c_n + d_n^+ d_n) + t_n (c_n^+ c_{n+1} + d_n^+ d_{n+1} + h.c.)
//     + sum_a n_a sum_n [ gamma_n(r_a) (c_n + d_n^+) + h.c. ]
//
// Site order is [system 1..N][c-chain 1..N_m][d-chain 1..N_m'].  A bond to the
// right of system site a carries 2a + 4 channels:
//
//   0            nothing placed yet (identity to the left)
//   1, 2         pending nearest-neighbour hop (system or chain)
//   3 + 2b       n_b placed, waiting for gamma-terms   (gamma c, gamma d^+)
//   4 + 2b       n_b placed, waiting for gamma*-terms  (gamma* c^+, gamma* d)
//   last         Hamiltonian complete on the left
//
// Inside the chains the width is 2N + 4 whatever the chain length.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <Eigen/Sparse>

#include "corrbath/chain_mapping.hpp"
#include "corrbath/common.hpp"
#include "corrbath/local_ops.hpp"

namespace corrbath {

using SparseMatrixC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct SystemSpec {
  int n_sites = 2;
  std::vector<double> energies{0.0, 0.0};
  double hopping = 0.25;
  std::vector<double> positions{0.0, 0.0};

  void validate() const {
    detail::require(n_sites >= 1, "SystemSpec: n_sites must be >= 1");
    detail::require(energies.size() == static_cast<std::size_t>(n_sites),
                    "SystemSpec: energies must have n_sites entries");
    detail::require(positions.size() == static_cast<std::size_t>(n_sites),
                    "SystemSpec: positions must have n_sites entries");
  }

  /// Single-excitation block of H_S in the site basis.
  Eigen::MatrixXd hamiltonian() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_sites, n_sites);
    for (int a = 0; a < n_sites; ++a) h(a, a) = energies[static_cast<std::size_t>(a)];
    for (int a = 0; a + 1 < n_sites; ++a) h(a, a + 1) = h(a + 1, a) = hopping;
    return h;
  }
};

enum class SiteKind { system, chain_c, chain_d };

struct MpoBlock {
  int left = 0;
  int right = 0;
  MatrixXc op;
};

/// One W tensor, stored as its nonzero operator-valued entries.
struct MpoSite {
  int dl = 1, dr = 1, d = 1;
  std::vector<MpoBlock> blocks;

  MatrixXc block(int l, int r) const {
    MatrixXc out = MatrixXc::Zero(d, d);
    for (const auto &b : blocks)
      if (b.left == l && b.right == r) out += b.op;
    return out;
  }
  /// Element W(l, r, s, s').
  cplx at(int l, int r, int s, int sp) const { return block(l, r)(s, sp); }
};

struct MPOHamiltonian {
  std::vector<MpoSite> tensors;
  std::vector<SiteKind> kinds;
  std::vector<int> local_dims;
  int n_system = 0;
  int n_c = 0;
  int n_d = 0;

  std::size_t size() const { return tensors.size(); }
  int c_site(int mode) const { return n_system + mode; }
  int d_site(int mode) const { return n_system + n_c + mode; }
};

namespace detail {
inline bool nonzero(cplx v) { return v != cplx{0.0, 0.0}; }

inline void trim_boundaries(std::vector<MpoSite> &sites) {
  if (sites.empty()) return;
  auto &first = sites.front();
  std::erase_if(first.blocks, [](const MpoBlock &b) { return b.left != 0; });
  first.dl = 1;
  auto &last = sites.back();
  const int done = last.dr - 1;
  std::erase_if(last.blocks, [done](const MpoBlock &b) { return b.right != done; });
  for (auto &b : last.blocks) b.right = 0;
  last.dr = 1;
}
} // namespace detail

/// Assemble the Hamiltonian MPO. `table` supplies gamma_n(r_a) for both chains;
/// chain lengths are those of `c_chain` and `d_chain` (either may be empty).
inline MPOHamiltonian build_mpo(const SystemSpec &sys, const ChainGeometry &c_chain,
                                const ChainGeometry &d_chain, const CouplingTable &table, int d_env) {
  sys.validate();
  detail::require(d_env >= 2, "build_mpo: bath local dimension d_E must be >= 2");
  const int n = sys.n_sites;
  const auto n_c = static_cast<int>(c_chain.length());
  const auto n_d = static_cast<int>(d_chain.length());
  if (n_c + n_d > 0) {
    detail::require(table.sites() == n, "build_mpo: coupling table has wrong number of sites");
    if (table.modes() < std::max(n_c, n_d)) {
      std::ostringstream os;
      os << "build_mpo: coupling table covers " << table.modes() << " modes but chains need "
         << std::max(n_c, n_d);
      throw InputError(os.str());
    }
  }

  const MatrixXc f = ops::site_lower(), fd = ops::site_raise(), proj = ops::site_projector();
  const MatrixXc id2 = ops::identity(2);
  const MatrixXc a = ops::annihilate(d_env), ad = ops::create(d_env), num = ops::number(d_env);
  const MatrixXc ide = ops::identity(d_env);
  auto chan_a = [](int b) { return 3 + 2 * b; };
  auto chan_b = [](int b) { return 4 + 2 * b; };

  MPOHamiltonian mpo;
  mpo.n_system = n;
  mpo.n_c = n_c;
  mpo.n_d = n_d;

  for (int s = 0; s < n; ++s) {
    MpoSite w;
    w.d = 2;
    w.dl = s == 0 ? 1 : 2 * s + 4;
    w.dr = 2 * (s + 1) + 4;
    const int done_l = w.dl - 1, done_r = w.dr - 1;
    const double hop = s + 1 < n ? sys.hopping : 0.0;
    w.blocks.push_back({0, 0, id2});
    if (hop != 0.0) {
      w.blocks.push_back({0, 1, hop * f});
      w.blocks.push_back({0, 2, hop * fd});
    }
    if (s > 0 && sys.hopping != 0.0) {
      w.blocks.push_back({1, done_r, fd});
      w.blocks.push_back({2, done_r, f});
    }
    for (int b = 0; b < s; ++b) {
      w.blocks.push_back({chan_a(b), chan_a(b), id2});
      w.blocks.push_back({chan_b(b), chan_b(b), id2});
    }
    w.blocks.push_back({0, chan_a(s), proj});
    w.blocks.push_back({0, chan_b(s), proj});
    const double e = sys.energies[static_cast<std::size_t>(s)];
    if (e != 0.0) w.blocks.push_back({0, done_r, e * proj});
    if (s > 0) w.blocks.push_back({done_l, done_r, id2});
    mpo.tensors.push_back(std::move(w));
    mpo.kinds.push_back(SiteKind::system);
    mpo.local_dims.push_back(2);
  }

  const int width = 2 * n + 4;
  const int done = width - 1;
  auto chain_site = [&](const ChainGeometry &geom, int m, bool is_c) {
    MpoSite w;
    w.d = d_env;
    w.dl = w.dr = width;
    const int len = static_cast<int>(geom.length());
    const double om = geom.omega[static_cast<std::size_t>(m)];
    const double t = m + 1 < len ? geom.t[static_cast<std::size_t>(m)] : 0.0;  // t_{N_m} = 0
    w.blocks.push_back({0, 0, ide});
    if (om != 0.0) w.blocks.push_back({0, done, om * num});
    if (t != 0.0) {
      w.blocks.push_back({0, 1, t * ad});
      w.blocks.push_back({0, 2, t * a});
    }
    if (m > 0) {
      w.blocks.push_back({1, done, a});
      w.blocks.push_back({2, done, ad});
    }
    for (int b = 0; b < n; ++b) {
      const cplx g = table.gamma(m, b);
      w.blocks.push_back({chan_a(b), chan_a(b), ide});
      w.blocks.push_back({chan_b(b), chan_b(b), ide});
      if (detail::nonzero(g)) {
        w.blocks.push_back({chan_a(b), done, g * (is_c ? a : ad)});
        w.blocks.push_back({chan_b(b), done, std::conj(g) * (is_c ? ad : a)});
      }
    }
    w.blocks.push_back({done, done, ide});
    return w;
  };
  for (int m = 0; m < n_c; ++m) {
    mpo.tensors.push_back(chain_site(c_chain, m, true));
    mpo.kinds.push_back(SiteKind::chain_c);
    mpo.local_dims.push_back(d_env);
  }
  for (int m = 0; m < n_d; ++m) {
    mpo.tensors.push_back(chain_site(d_chain, m, false));
    mpo.kinds.push_back(SiteKind::chain_d);
    mpo.local_dims.push_back(d_env);
  }
  detail::trim_boundaries(mpo.tensors);
  return mpo;
}

/// Dimensions of the internal bonds (size L - 1).
inline std::vector<int> bond_dimension_profile(const MPOHamiltonian &mpo) {
  std::vector<int> dims;
  for (std::size_t i = 0; i + 1 < mpo.size(); ++i) dims.push_back(mpo.tensors[i].dr);
  return dims;
}

namespace detail {
inline SparseMatrixC kron(const SparseMatrixC &lhs, const MatrixXc &rhs) {
  const Eigen::Index d = rhs.rows();
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(lhs.nonZeros() * d));
  for (Eigen::Index i = 0; i < lhs.outerSize(); ++i)
    for (SparseMatrixC::InnerIterator it(lhs, i); it; ++it)
      for (Eigen::Index p = 0; p < d; ++p)
        for (Eigen::Index q = 0; q < d; ++q)
          if (rhs(p, q) != cplx{}) trips.emplace_back(it.row() * d + p, it.col() * d + q, it.value() * rhs(p, q));
  SparseMatrixC out(lhs.rows() * d, lhs.cols() * d);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}
} // namespace detail

inline constexpr std::int64_t kMaxDenseDimension = std::int64_t{1} << 17;

/// Contract the MPO into an explicit (sparse) operator on the full product
/// space, site 0 being the most significant factor.
inline SparseMatrixC mpo_to_dense(const MPOHamiltonian &mpo,
                                  std::int64_t max_dimension = kMaxDenseDimension) {
  detail::require(mpo.size() > 0, "mpo_to_dense: empty MPO");
  std::int64_t dim = 1;
  for (int d : mpo.local_dims) {
    dim *= d;
    if (dim > max_dimension) {
      std::ostringstream os;
      os << "mpo_to_dense: Hilbert dimension exceeds " << max_dimension;
      throw InputError(os.str());
    }
  }
  std::vector<SparseMatrixC> acc(1);
  acc[0].resize(1, 1);
  acc[0].insert(0, 0) = 1.0;
  for (const auto &w : mpo.tensors) {
    std::vector<SparseMatrixC> next(static_cast<std::size_t>(w.dr));
    const Eigen::Index rows = acc[0].rows() * w.d;
    for (auto &m : next) m.resize(rows, rows);
    for (const auto &b : w.blocks) {
      const auto &lhs = acc[static_cast<std::size_t>(b.left)];
      if (lhs.nonZeros() == 0) continue;
      next[static_cast<std::size_t>(b.right)] += detail::kron(lhs, b.op);
    }
    acc = std::move(next);
  }
  return acc[0];
}

/// Binary dump: "CBMPO1", uint64 site count, then per site int64 (dl, dr, d, d)
/// followed by dl*dr*d*d (re, im) float64 pairs in (l, r, s, s') row-major order.
/// Little-endian hosts only.
inline void write_mpo_binary(std::ostream &os, const MPOHamiltonian &mpo) {
  static_assert(std::endian::native == std::endian::little);
  os.write("CBMPO1", 6);
  const std::uint64_t count = mpo.size();
  os.write(reinterpret_cast<const char *>(&count), sizeof count);
  for (const auto &w : mpo.tensors) {
    const std::int64_t shape[4] = {w.dl, w.dr, w.d, w.d};
    os.write(reinterpret_cast<const char *>(shape), sizeof shape);
    for (int l = 0; l < w.dl; ++l)
      for (int r = 0; r < w.dr; ++r) {
        const MatrixXc blk = w.block(l, r);
        for (int s = 0; s < w.d; ++s)
          for (int sp = 0; sp < w.d; ++sp) {
            const double pair[2] = {blk(s, sp).real(), blk(s, sp).imag()};
            os.write(reinterpret_cast<const char *>(pair), sizeof pair);
          }
      }
  }
}

/// Reads a dump back as dense blocks (site kinds are not stored).
inline std::vector<MpoSite> read_mpo_binary(std::istream &is) {
  char magic[6];
  is.read(magic, 6);
  if (!is || std::string(magic, 6) != "CBMPO1") throw InputError("read_mpo_binary: bad magic");
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char *>(&count), sizeof count);
  std::vector<MpoSite> sites;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::int64_t shape[4];
    is.read(reinterpret_cast<char *>(shape), sizeof shape);
    if (!is) throw InputError("read_mpo_binary: truncated stream");
    MpoSite w;
    w.dl = static_cast<int>(shape[0]);
    w.dr = static_cast<int>(shape[1]);
    w.d = static_cast<int>(shape[2]);
    for (int l = 0; l < w.dl; ++l)
      for (int r = 0; r < w.dr; ++r) {
        MatrixXc blk(w.d, w.d);
        for (int s = 0; s < w.d; ++s)
          for (int sp = 0; sp < w.d; ++sp) {
            double pair[2];
            is.read(reinterpret_cast<char *>(pair), sizeof pair);
            blk(s, sp) = {pair[0], pair[1]};
          }
        if (!is) throw InputError("read_mpo_binary: truncated stream");
        if (blk.cwiseAbs().maxCoeff() > 0) w.blocks.push_back({l, r, blk});
      }
    sites.push_back(std::move(w));
  }
  return sites;
}

} // namespace corrbath
