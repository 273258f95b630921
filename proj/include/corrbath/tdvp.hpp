#pragma once

// One-site TDVP, symmetric second-order sweep:
//   left -> right: site forward dt/2, QR, bond backward dt/2
//   right -> left: site forward dt/2, LQ, bond backward dt/2
// The last site is visited twice in a row, which amounts to one dt step.
//
// Environments. For the MPO bond w:
//   L_w(a, a') = <left block, bra a | h_w | left block, ket a'>
//   R_w(b', b) with the ket index first,
// stacked vertically into (Dw * D) x D matrices, so the effective site
// operator is  y^s = sum W^{s s'}_{w w'} L_w M^{s'} R_{w'}.

#include <cmath>
#include <functional>
#include <vector>

#include "corrbath/common.hpp"
#include "corrbath/krylov.hpp"
#include "corrbath/mpo.hpp"
#include "corrbath/mps.hpp"

namespace corrbath {

struct TDVPConfig {
  double dt = 0.1;
  double t_max = 10.0;
  int krylov_dim = 24;
  double krylov_tol = 1e-10;

  void validate() const {
    detail::require(dt > 0, "TDVPConfig: dt must be > 0");
    detail::require(t_max >= 0, "TDVPConfig: t_max must be >= 0");
    detail::require(krylov_dim >= 3, "TDVPConfig: krylov_dim must be >= 3");
    detail::require(krylov_tol > 0, "TDVPConfig: krylov_tol must be > 0");
  }
};

namespace detail {

// Scalar nonzero entry of an MPO tensor: W^{s s'}_{l r} = value.
struct MpoEntry {
  int l, r, s, sp;
  cplx value;
};

inline std::vector<MpoEntry> expand_entries(const MpoSite &w) {
  std::vector<MpoEntry> out;
  for (const auto &b : w.blocks)
    for (int s = 0; s < w.d; ++s)
      for (int sp = 0; sp < w.d; ++sp)
        if (b.op(s, sp) != cplx{}) out.push_back({b.left, b.right, s, sp, b.op(s, sp)});
  return out;
}

/// U(s * Dl + ., r * Dr + .) = sum W^{s s'}_{l r} T(l * Dl + ., s' * Dr + .)
inline MatrixXc apply_entries(const std::vector<MpoEntry> &entries, const MatrixXc &t, int d, int dw_r,
                              Eigen::Index dl, Eigen::Index dr) {
  MatrixXc u = MatrixXc::Zero(d * dl, dw_r * dr);
  for (const auto &e : entries)
    u.block(e.s * dl, e.r * dr, dl, dr).noalias() += e.value * t.block(e.l * dl, e.sp * dr, dl, dr);
  return u;
}

/// Vertical (Dw * D) x D stack <-> horizontal D x (Dw * D) row of blocks.
inline MatrixXc vertical_to_horizontal(const MatrixXc &v, Eigen::Index blocks) {
  const Eigen::Index d = v.rows() / blocks;
  MatrixXc h(d, blocks * v.cols());
  for (Eigen::Index w = 0; w < blocks; ++w) h.middleCols(w * v.cols(), v.cols()) = v.middleRows(w * d, d);
  return h;
}

inline MatrixXc horizontal_to_vertical(const MatrixXc &h, Eigen::Index blocks) {
  const Eigen::Index c = h.cols() / blocks;
  MatrixXc v(blocks * h.rows(), c);
  for (Eigen::Index w = 0; w < blocks; ++w) v.middleRows(w * h.rows(), h.rows()) = h.middleCols(w * c, c);
  return v;
}

} // namespace detail

class TDVPEngine {
public:
  TDVPEngine(const MPOHamiltonian &mpo, MPSState &state, TDVPConfig cfg)
      : mpo_(mpo), psi_(state), cfg_(cfg) {
    cfg_.validate();
    detail::require(mpo.size() == state.size(), "TDVPEngine: MPO and MPS lengths differ");
    for (std::size_t i = 0; i < mpo.size(); ++i)
      detail::require(mpo.local_dims[i] == state.dims[i], "TDVPEngine: physical dimensions differ");
    entries_.reserve(mpo.size());
    for (const auto &w : mpo.tensors) entries_.push_back(detail::expand_entries(w));
    if (psi_.center != 0) move_center(psi_, 0);
    const std::size_t n = mpo.size();
    lenv_.assign(n, MatrixXc());
    renv_.assign(n, MatrixXc());
    lenv_[0] = MatrixXc::Ones(1, 1);
    renv_[n - 1] = MatrixXc::Ones(1, 1);
    for (std::size_t i = n - 1; i > 0; --i) renv_[i - 1] = update_right(i);
  }

  /// Advance the state by one symmetric step of length dt.
  void sweep(double dt) {
    const std::size_t n = psi_.size();
    const cplx fwd = -I_unit * (dt / 2), bwd = I_unit * (dt / 2);
    for (std::size_t i = 0; i < n; ++i) {
      evolve_site(i, fwd);
      if (i + 1 == n) break;
      const int d = psi_.dims[i];
      MatrixXc q, c;
      detail::thin_qr(detail::to_vertical(psi_.tensors[i], d), q, c);
      psi_.tensors[i] = detail::from_vertical(q, d);
      lenv_[i + 1] = update_left(i);
      c = evolve_bond(c, lenv_[i + 1], renv_[i], bwd);
      psi_.tensors[i + 1] = c * psi_.tensors[i + 1];
      psi_.center = static_cast<int>(i + 1);
    }
    for (std::size_t i = n; i-- > 0;) {
      evolve_site(i, fwd);
      if (i == 0) break;
      MatrixXc q, r;
      detail::thin_qr(psi_.tensors[i].adjoint(), q, r);
      psi_.tensors[i] = q.adjoint();
      renv_[i - 1] = update_right(i);
      MatrixXc c = evolve_bond(r.adjoint(), lenv_[i], renv_[i - 1], bwd);
      psi_.tensors[i - 1] = detail::right_multiply(psi_.tensors[i - 1], psi_.dims[i - 1], c);
      psi_.center = static_cast<int>(i - 1);
    }
  }

  /// <psi|H|psi> / <psi|psi> from the centre at site 0.
  double energy() {
    if (psi_.center != 0) rebuild();
    const MatrixXc &a = psi_.tensors[0];
    const MatrixXc h = apply_site(0, a);
    const double nn = a.squaredNorm();
    return (a.conjugate().cwiseProduct(h)).sum().real() / nn;
  }

  const KrylovStats &last_stats() const { return stats_; }
  int total_matvecs() const { return matvecs_; }

private:
  const MPOHamiltonian &mpo_;
  MPSState &psi_;
  TDVPConfig cfg_;
  std::vector<std::vector<detail::MpoEntry>> entries_;
  std::vector<MatrixXc> lenv_, renv_;
  KrylovStats stats_;
  int matvecs_ = 0;

  void rebuild() {
    move_center(psi_, 0);
    for (std::size_t i = psi_.size() - 1; i > 0; --i) renv_[i - 1] = update_right(i);
  }

  KrylovOptions kopts() const { return {cfg_.krylov_dim, cfg_.krylov_tol, 12}; }

  MatrixXc apply_site(std::size_t i, const MatrixXc &m) const {
    const auto &w = mpo_.tensors[i];
    const Eigen::Index dl = m.rows(), dr = m.cols() / w.d;
    const MatrixXc t = lenv_[i] * m;  // (Dw_l * Dl) x (d * Dr)
    const MatrixXc u = detail::apply_entries(entries_[i], t, w.d, w.dr, dl, dr);
    MatrixXc y(dl, w.d * dr);
    for (int s = 0; s < w.d; ++s) y.middleCols(s * dr, dr).noalias() = u.middleRows(s * dl, dl) * renv_[i];
    return y;
  }

  void evolve_site(std::size_t i, cplx z) {
    const MatrixXc &a = psi_.tensors[i];
    const Eigen::Index rows = a.rows(), cols = a.cols();
    auto apply = [&](const VectorXc &v) -> VectorXc {
      const MatrixXc m = Eigen::Map<const MatrixXc>(v.data(), rows, cols);
      const MatrixXc y = apply_site(i, m);
      return Eigen::Map<const VectorXc>(y.data(), y.size());
    };
    const VectorXc v0 = Eigen::Map<const VectorXc>(a.data(), a.size());
    const VectorXc v1 = expv(apply, v0, z, kopts(), &stats_);
    matvecs_ += stats_.matvecs;
    psi_.tensors[i] = Eigen::Map<const MatrixXc>(v1.data(), rows, cols);
  }

  MatrixXc evolve_bond(const MatrixXc &c, const MatrixXc &lenv, const MatrixXc &renv, cplx z) {
    const Eigen::Index rows = c.rows(), cols = c.cols();
    const Eigen::Index dw = lenv.rows() / rows;
    auto apply = [&](const VectorXc &v) -> VectorXc {
      const MatrixXc m = Eigen::Map<const MatrixXc>(v.data(), rows, cols);
      const MatrixXc t = lenv * m;
      const MatrixXc y = detail::vertical_to_horizontal(t, dw) * renv;
      return Eigen::Map<const VectorXc>(y.data(), y.size());
    };
    const VectorXc v0 = Eigen::Map<const VectorXc>(c.data(), c.size());
    const VectorXc v1 = expv(apply, v0, z, kopts(), &stats_);
    matvecs_ += stats_.matvecs;
    return Eigen::Map<const MatrixXc>(v1.data(), rows, cols);
  }

  // L' for the bond right of site i, from left-orthonormal A_i.
  MatrixXc update_left(std::size_t i) const {
    const auto &w = mpo_.tensors[i];
    const MatrixXc &a = psi_.tensors[i];
    const Eigen::Index dl = a.rows(), dr = a.cols() / w.d;
    const MatrixXc t = lenv_[i] * a;
    const MatrixXc u = detail::apply_entries(entries_[i], t, w.d, w.dr, dl, dr);
    const MatrixXc h = detail::to_vertical(a, w.d).adjoint() * u;  // Dr x (Dw_r * Dr)
    return detail::horizontal_to_vertical(h, w.dr);
  }

  // R' for the bond left of site i, from right-orthonormal A_i.
  MatrixXc update_right(std::size_t i) const {
    const auto &w = mpo_.tensors[i];
    const MatrixXc &a = psi_.tensors[i];
    const Eigen::Index dl = a.rows(), dr = a.cols() / w.d;
    const MatrixXc rh = detail::vertical_to_horizontal(renv_[i], w.dr);  // Dr x (Dw_r * Dr)
    const MatrixXc s = detail::to_vertical(a, w.d) * rh;                 // (d Dl) x (Dw_r Dr), block (s', r)
    MatrixXc v = MatrixXc::Zero(w.dl * dl, w.d * dr);                     // block (l, s)
    for (const auto &e : entries_[i])
      v.block(e.l * dl, e.s * dr, dl, dr).noalias() += e.value * s.block(e.sp * dl, e.r * dr, dl, dr);
    return v * a.adjoint();  // (Dw_l Dl) x Dl, ket index first
  }
};

} // namespace corrbath
