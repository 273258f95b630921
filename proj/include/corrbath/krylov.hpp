#pragma once

// Lanczos approximation of exp(z H) v for Hermitian H given only as a
// matrix-vector product. Full reorthogonalization: the subspaces are small
// (<= a few dozen vectors) and losing orthogonality costs more than it saves.

#include <cmath>
#include <sstream>
#include <vector>

#include "corrbath/common.hpp"

namespace corrbath {

struct KrylovOptions {
  int max_dim = 24;
  double tol = 1e-10;
  int max_halvings = 12;  ///< substep refinement before giving up
};

struct KrylovStats {
  int matvecs = 0;
  int substeps = 0;
  double error_estimate = 0;
};

namespace detail {

// One Lanczos attempt. Returns false when the error estimate stays above tol.
template <class Apply>
bool lanczos_expv(Apply &apply, const VectorXc &v, cplx z, const KrylovOptions &opt, VectorXc &out,
                  KrylovStats &stats) {
  const double beta0 = v.norm();
  if (beta0 == 0.0) {
    out = v;
    return true;
  }
  const int m_max = std::max(2, opt.max_dim);
  std::vector<VectorXc> basis;
  basis.reserve(static_cast<std::size_t>(m_max));
  basis.push_back(v / beta0);
  std::vector<double> alpha, beta;

  Eigen::VectorXd coeffs_re;
  VectorXc small;
  for (int j = 0; j < m_max; ++j) {
    VectorXc w = apply(basis.back());
    ++stats.matvecs;
    const double a = basis.back().dot(w).real();
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto &q : basis) w -= q.dot(w) * q;
    const double b = w.norm();

    const int k = j + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < k; ++i) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const auto &ev = es.eigenvalues();
    const auto &vecs = es.eigenvectors();
    small = VectorXc::Zero(k);
    for (int i = 0; i < k; ++i) small += (vecs(0, i) * std::exp(z * ev(i))) * vecs.col(i).cast<cplx>();

    const bool breakdown = b <= 1e-13 * (std::abs(a) + 1.0);
    const double err = beta0 * b * std::abs(small(k - 1));
    stats.error_estimate = err;
    if (breakdown || err <= opt.tol * beta0 || k == m_max) {
      if (!breakdown && err > opt.tol * beta0) return false;
      out = VectorXc::Zero(v.size());
      for (int i = 0; i < k; ++i) out += small(i) * basis[static_cast<std::size_t>(i)];
      out *= beta0;
      return true;
    }
    beta.push_back(b);
    basis.push_back(w / b);
  }
  return false;
}

} // namespace detail

/// exp(z H) v. If the Krylov space is too small the step is split into
/// equal substeps; ConvergenceError after `max_halvings` refinements.
template <class Apply>
VectorXc expv(Apply &&apply, const VectorXc &v, cplx z, const KrylovOptions &opt = {},
              KrylovStats *stats_out = nullptr) {
  detail::require(opt.max_dim >= 3, "expv: krylov dimension must be >= 3");
  KrylovStats stats;
  VectorXc cur = v;
  double done = 0.0;
  double h = 1.0;
  int halvings = 0;
  while (done < 1.0) {
    h = std::min(h, 1.0 - done);
    VectorXc next;
    if (detail::lanczos_expv(apply, cur, z * h, opt, next, stats)) {
      cur = std::move(next);
      done += h;
      ++stats.substeps;
    } else {
      if (++halvings > opt.max_halvings) {
        std::ostringstream os;
        os << "expv: Krylov error " << stats.error_estimate << " above tolerance " << opt.tol
           << " after " << opt.max_halvings << " step halvings (krylov_dim " << opt.max_dim << ")";
        throw ConvergenceError(os.str());
      }
      h *= 0.5;
    }
  }
  if (stats_out) *stats_out = stats;
  return cur;
}

} // namespace corrbath
