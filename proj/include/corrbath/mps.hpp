#pragma once

// Matrix product state. Site i is stored flat as a D_l x (d * D_r) matrix
// whose column block s is A^s, so left-multiplication by a bond matrix is a
// plain GEMM. `center` marks the orthogonality centre: sites left of it are
// left-orthonormal, sites right of it right-orthonormal.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "corrbath/common.hpp"
#include "corrbath/mpo.hpp"

namespace corrbath {

struct MPSState {
  std::vector<MatrixXc> tensors;
  std::vector<int> dims;  ///< physical dimension per site
  int center = 0;
  int max_bond = 24;

  std::size_t size() const { return tensors.size(); }
  int left_dim(std::size_t i) const { return static_cast<int>(tensors[i].rows()); }
  int right_dim(std::size_t i) const {
    return static_cast<int>(tensors[i].cols()) / dims[i];
  }
  auto block(std::size_t i, int s) { return tensors[i].middleCols(s * right_dim(i), right_dim(i)); }
  auto block(std::size_t i, int s) const {
    return tensors[i].middleCols(s * right_dim(i), right_dim(i));
  }
};

namespace detail {

/// (d * D_l) x D_r stack of the A^s, s-major.
inline MatrixXc to_vertical(const MatrixXc &flat, int d) {
  const Eigen::Index dl = flat.rows(), dr = flat.cols() / d;
  MatrixXc v(d * dl, dr);
  for (int s = 0; s < d; ++s) v.middleRows(s * dl, dl) = flat.middleCols(s * dr, dr);
  return v;
}

inline MatrixXc from_vertical(const MatrixXc &vert, int d) {
  const Eigen::Index dl = vert.rows() / d, dr = vert.cols();
  MatrixXc f(dl, d * dr);
  for (int s = 0; s < d; ++s) f.middleCols(s * dr, dr) = vert.middleRows(s * dl, dl);
  return f;
}

/// Thin QR: a = q r with q having orthonormal columns.
inline void thin_qr(const MatrixXc &a, MatrixXc &q, MatrixXc &r) {
  const Eigen::Index n = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<MatrixXc> qr(a);
  q = qr.householderQ() * MatrixXc::Identity(a.rows(), n);
  r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
}

/// Right-multiply every A^s by c.
inline MatrixXc right_multiply(const MatrixXc &flat, int d, const MatrixXc &c) {
  return from_vertical(to_vertical(flat, d) * c, d);
}

} // namespace detail

/// Bond dimension used between site i and i + 1.
inline std::vector<int> bond_caps(const std::vector<int> &dims, int max_bond) {
  const std::size_t n = dims.size();
  std::vector<int> caps(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::int64_t left = 1, right = 1;
    for (std::size_t j = 0; j <= i && left < max_bond; ++j) left *= dims[j];
    for (std::size_t j = i + 1; j < n && right < max_bond; ++j) right *= dims[j];
    caps[i] = static_cast<int>(std::min<std::int64_t>({left, right, max_bond}));
  }
  return caps;
}

/// Move the orthogonality centre from `state.center` to `target`.
inline void move_center(MPSState &state, int target) {
  while (state.center < target) {
    const auto i = static_cast<std::size_t>(state.center);
    const int d = state.dims[i];
    MatrixXc q, r;
    detail::thin_qr(detail::to_vertical(state.tensors[i], d), q, r);
    state.tensors[i] = detail::from_vertical(q, d);
    state.tensors[i + 1] = r * state.tensors[i + 1];
    ++state.center;
  }
  while (state.center > target) {
    const auto i = static_cast<std::size_t>(state.center);
    const int d = state.dims[i - 1];
    MatrixXc q, r;
    detail::thin_qr(state.tensors[i].adjoint(), q, r);
    state.tensors[i] = q.adjoint();
    state.tensors[i - 1] = detail::right_multiply(state.tensors[i - 1], d, r.adjoint());
    --state.center;
  }
}

/// Bring the whole chain into right-canonical form with the centre at 0.
inline void canonicalize(MPSState &state) {
  state.center = static_cast<int>(state.size()) - 1;
  move_center(state, 0);
}

inline double norm(const MPSState &state) { return state.tensors[static_cast<std::size_t>(state.center)].norm(); }

/// Product state |S> (x) vacuum. The single-excitation system vector is a
/// W-type superposition, written exactly with bond dimension 2 across the
/// system; all bonds are then padded up to their caps with tiny seeded noise
/// so one-site TDVP can use the full manifold.
inline MPSState init_product_state(const VectorXc &sys_state, const MPOHamiltonian &mpo, int max_bond,
                                   std::uint64_t seed = 0, double noise = 1e-12) {
  const int n = mpo.n_system;
  detail::require(n >= 1, "init_product_state: MPO has no system sites");
  detail::require(sys_state.size() == n, "init_product_state: system vector has wrong length");
  detail::require(std::abs(sys_state.norm() - 1.0) < 1e-10, "init_product_state: system vector is not normalized");
  detail::require(max_bond >= 2, "init_product_state: max_bond must be >= 2");

  MPSState st;
  st.dims = mpo.local_dims;
  st.max_bond = max_bond;
  const std::size_t len = mpo.size();
  const std::vector<int> caps = bond_caps(st.dims, max_bond);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t i = 0; i < len; ++i) {
    const int d = st.dims[i];
    const int dl = i == 0 ? 1 : caps[i - 1];
    const int dr = i + 1 == len ? 1 : caps[i];
    const auto si = static_cast<int>(i);
    // Exact bond dimensions before padding: 2 inside the system (channel 0 =
    // excitation not yet placed, 1 = placed), 1 elsewhere.
    const int orig_l = si >= 1 && si < n ? 2 : 1;
    const int orig_r = si < n - 1 ? 2 : 1;
    MatrixXc a = MatrixXc::Zero(dl, d * dr);
    // Chain sites get noise only in their vacuum component. Fully random
    // padding canonicalizes into basis states with O(1) occupation deep in
    // the chain, which the projector then feeds from the first step.
    const int noisy_levels = si < n ? d : 1;
    if (noise > 0)
      for (int s = 0; s < noisy_levels; ++s)
        for (int r = 0; r < dr; ++r)
          for (int l = 0; l < dl; ++l)
            if (l >= orig_l || r >= orig_r) a(l, s * dr + r) = noise * cplx(gauss(rng), gauss(rng));
    if (si < n) {
      const cplx amp = sys_state(si);
      if (si < n - 1) {
        a(0, 0 * dr + 0) = 1.0;
        a(0, 1 * dr + 1) = amp;
        if (si > 0) a(1, 0 * dr + 1) = 1.0;
      } else {
        // the right bond has a single channel: excitation placed
        a(0, 1 * dr + 0) = amp;
        if (si > 0) a(1, 0 * dr + 0) = 1.0;
      }
    } else {
      a(0, 0) = 1.0;
    }
    st.tensors.push_back(std::move(a));
  }
  canonicalize(st);
  const double nrm = norm(st);
  st.tensors[0] /= nrm;
  return st;
}

} // namespace corrbath
