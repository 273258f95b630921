#pragma once

// Orthonormal-polynomial chain mapping of a bosonic bath.
//
// A positive weight w(x) on an interval is discretized on a composite
// Gauss-Legendre grid; the discretized Stieltjes procedure gives the monic
// three-term recurrence
//     pi_{n+1}(x) = (x - a_n) pi_n(x) - b_n pi_{n-1}(x),   b_0 = mu_0,
// from which the chain on-site energies are a_n and the hoppings sqrt(b_{n+1}).
// The orthonormal polynomials P_n = pi_n / ||pi_n|| give the long-range
// system-chain couplings gamma_n(r) = int dx w(x) e^{i x r / c} P_n(x).

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <vector>

#include "corrbath/common.hpp"
#include "corrbath/csv.hpp"
#include "corrbath/quadrature.hpp"
#include "corrbath/spectral_density.hpp"

namespace corrbath {

struct DiscretizedMeasure {
  std::vector<double> nodes;    ///< strictly increasing abscissae
  std::vector<double> weights;  ///< strictly positive, w(x_i) times grid weight
  double lo = 0, hi = 0;        ///< support interval

  std::size_t size() const { return nodes.size(); }
  double mass() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Monic recurrence coefficients: a[0..n-1], b[0..n] with b[0] = mu_0.
struct RecurrenceCoefficients {
  std::vector<double> a;
  std::vector<double> b;
  std::size_t count() const { return a.size(); }
};

/// Tight-binding chain: on-site omega[n], hopping t[n] between modes n and n+1.
struct ChainGeometry {
  std::vector<double> omega;
  std::vector<double> t;
  std::size_t length() const { return omega.size(); }

  ChainGeometry truncated(std::size_t n) const {
    detail::require(n <= length(), "ChainGeometry::truncated: chain too short");
    ChainGeometry g;
    g.omega.assign(omega.begin(), omega.begin() + static_cast<long>(n));
    g.t.assign(t.begin(), t.begin() + static_cast<long>(n));
    return g;
  }
};

/// gamma(n, alpha): coupling of chain mode n (0-based) to system site alpha.
struct CouplingTable {
  MatrixXc gamma;
  std::vector<double> positions;

  Eigen::Index modes() const { return gamma.rows(); }
  Eigen::Index sites() const { return gamma.cols(); }
};

/// Default quadrature panel order.
inline constexpr int kPanelOrder = 16;

/// Composite Gauss-Legendre discretization of an arbitrary nonnegative weight.
/// A panel boundary is placed at `breakpoint` when it lies inside (lo, hi).
/// Nodes where the weight underflows to zero are dropped.
inline DiscretizedMeasure discretize(const std::function<double(double)> &weight,
                                     double lo, double hi, std::size_t n_points,
                                     double breakpoint = std::numeric_limits<double>::quiet_NaN()) {
  detail::require(hi > lo, "discretize: empty support");
  detail::require(n_points >= kPanelOrder, "discretize: need at least one panel of points");
  int panels = static_cast<int>((n_points + kPanelOrder - 1) / kPanelOrder);
  std::vector<quadrature::Rule> parts;
  if (breakpoint > lo && breakpoint < hi) {
    const int left = std::max(1, static_cast<int>(std::lround(panels * (breakpoint - lo) / (hi - lo))));
    const int right = std::max(1, panels - left);
    parts.push_back(quadrature::composite(lo, breakpoint, left, kPanelOrder));
    parts.push_back(quadrature::composite(breakpoint, hi, right, kPanelOrder));
  } else {
    parts.push_back(quadrature::composite(lo, hi, panels, kPanelOrder));
  }
  DiscretizedMeasure m;
  m.lo = lo;
  m.hi = hi;
  for (const auto &p : parts) {
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      const double w = weight(p.nodes[i]);
      if (w < 0 || !std::isfinite(w)) {
        std::ostringstream os;
        os << "discretize: weight is negative or non-finite at x = " << p.nodes[i];
        throw InputError(os.str());
      }
      if (w == 0) continue;
      m.nodes.push_back(p.nodes[i]);
      m.weights.push_back(w * p.weights[i]);
    }
  }
  detail::require(!m.nodes.empty() && m.mass() > 0, "discretize: weight has zero mass");
  return m;
}

inline DiscretizedMeasure build_measure(const OhmicSpec &spec, std::size_t n_points) {
  spec.validate();
  return discretize([&](double w) { return evaluate_zero_t(spec, w); }, 0.0, spec.cutoff, n_points);
}

inline DiscretizedMeasure build_measure(const ThermalSpec &spec, std::size_t n_points) {
  spec.validate();
  const double wc = spec.base.cutoff;
  return discretize([&](double w) { return evaluate_thermal(spec, w); }, -wc, wc, n_points, 0.0);
}

/// Discretized Stieltjes procedure carried out on normalized vectors.
/// `oversampling` = 1 with n_levels = size() tridiagonalizes a genuinely
/// discrete measure exactly; the final b then vanishes and is stored as 0.
inline RecurrenceCoefficients stieltjes_recurrence(const DiscretizedMeasure &measure,
                                                   std::size_t n_levels, std::size_t oversampling = 4) {
  const std::size_t m = measure.size();
  if (n_levels == 0 || oversampling == 0 || oversampling * n_levels > m) {
    std::ostringstream os;
    os << "stieltjes_recurrence: " << n_levels << " levels need at least " << oversampling * n_levels
       << " quadrature nodes, measure has " << m;
    throw InputError(os.str());
  }
  const Eigen::Map<const Eigen::VectorXd> x(measure.nodes.data(), static_cast<Eigen::Index>(m));
  const Eigen::Map<const Eigen::VectorXd> w(measure.weights.data(), static_cast<Eigen::Index>(m));
  auto dot = [&](const Eigen::VectorXd &u, const Eigen::VectorXd &v) {
    return (w.array() * u.array() * v.array()).sum();
  };

  RecurrenceCoefficients rec;
  rec.a.reserve(n_levels);
  rec.b.reserve(n_levels + 1);
  const double mu0 = w.sum();
  rec.b.push_back(mu0);

  Eigen::VectorXd q_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  Eigen::VectorXd q = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / std::sqrt(mu0));
  for (std::size_t n = 0; n < n_levels; ++n) {
    const double an = dot(q, x.cwiseProduct(q));
    rec.a.push_back(an);
    Eigen::VectorXd r = (x.array() - an).matrix().cwiseProduct(q);
    if (n > 0) r -= std::sqrt(rec.b[n]) * q_prev;
    // one pass of local reorthogonalization
    r -= dot(r, q) * q;
    if (n > 0) r -= dot(r, q_prev) * q_prev;
    if (n + 1 == m) {  // measure exhausted
      rec.b.push_back(0.0);
      break;
    }
    const double bn1 = dot(r, r);
    if (!(bn1 > 0) || !std::isfinite(bn1)) {
      std::ostringstream os;
      os << "stieltjes_recurrence: b[" << n + 1 << "] = " << bn1
         << " is not positive; the measure is under-resolved";
      throw ConvergenceError(os.str());
    }
    rec.b.push_back(bn1);
    q_prev = std::move(q);
    q = r / std::sqrt(bn1);
  }
  return rec;
}

/// omega_n = a_n * scale, t_n = sqrt(b_{n+1}) * scale.
inline ChainGeometry chain_coefficients(const RecurrenceCoefficients &rec, double frequency_scale = 1.0) {
  ChainGeometry g;
  const std::size_t n = rec.count();
  g.omega.resize(n);
  g.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.omega[i] = rec.a[i] * frequency_scale;
    g.t[i] = std::sqrt(rec.b[i + 1]) * frequency_scale;
  }
  return g;
}

/// Orthonormal polynomials P_0..P_{n-1} evaluated at `nodes` level by level.
/// Result is (nodes x n).
inline Eigen::MatrixXd orthonormal_polynomials(const RecurrenceCoefficients &rec,
                                               const std::vector<double> &nodes, std::size_t n) {
  detail::require(n <= rec.count(), "orthonormal_polynomials: recurrence too short");
  const auto m = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd p(m, static_cast<Eigen::Index>(n));
  if (n == 0) return p;
  const Eigen::Map<const Eigen::VectorXd> x(nodes.data(), m);
  p.col(0).setConstant(1.0 / std::sqrt(rec.b[0]));
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::VectorXd next = (x.array() - rec.a[k]).matrix().cwiseProduct(p.col(kk));
    if (k > 0) next -= std::sqrt(rec.b[k]) * p.col(kk - 1);
    p.col(kk + 1) = next / std::sqrt(rec.b[k + 1]);
  }
  return p;
}

/// max_{m,n} | sum_i w_i P_n(x_i) P_m(x_i) - delta_nm |
inline double orthonormality_defect(const RecurrenceCoefficients &rec,
                                    const DiscretizedMeasure &measure, std::size_t n) {
  const Eigen::MatrixXd p = orthonormal_polynomials(rec, measure.nodes, n);
  const Eigen::Map<const Eigen::VectorXd> w(measure.weights.data(),
                                            static_cast<Eigen::Index>(measure.size()));
  const Eigen::MatrixXd gram = p.transpose() * w.asDiagonal() * p;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

/// gamma_n(r) = sum_i w_i e^{i x_i r / c} P_n(x_i), evaluated on the recurrence grid.
inline CouplingTable couplings(const RecurrenceCoefficients &rec, const DiscretizedMeasure &measure,
                               const std::vector<double> &positions, double sound_speed,
                               std::size_t n_modes) {
  detail::require(sound_speed > 0, "couplings: sound speed must be > 0");
  detail::require(!positions.empty(), "couplings: no site positions");
  const Eigen::MatrixXd p = orthonormal_polynomials(rec, measure.nodes, n_modes);
  const auto m = static_cast<Eigen::Index>(measure.size());
  MatrixXc phases(m, static_cast<Eigen::Index>(positions.size()));
  for (Eigen::Index i = 0; i < m; ++i)
    for (std::size_t s = 0; s < positions.size(); ++s)
      phases(i, static_cast<Eigen::Index>(s)) =
          measure.weights[static_cast<std::size_t>(i)] *
          std::exp(I_unit * measure.nodes[static_cast<std::size_t>(i)] * positions[s] / sound_speed);
  CouplingTable table;
  table.positions = positions;
  table.gamma = p.transpose().cast<cplx>() * phases;
  return table;
}

struct SiteCouplingProfile {
  Eigen::Index site = 0;
  double position = 0;
  Eigen::Index peak_mode = 0;
  double peak_magnitude = 0;
  double pre_peak_mass = 0;  ///< sum |gamma_n|^2 over n < peak / 2
  double total_mass = 0;     ///< sum |gamma_n|^2 over all tabulated modes
};

inline std::vector<SiteCouplingProfile> coupling_profile_report(const CouplingTable &table) {
  detail::require(table.modes() > 0 && table.sites() > 0, "coupling_profile_report: empty table");
  std::vector<SiteCouplingProfile> out;
  for (Eigen::Index s = 0; s < table.sites(); ++s) {
    SiteCouplingProfile prof;
    prof.site = s;
    prof.position = table.positions.at(static_cast<std::size_t>(s));
    const Eigen::VectorXd mag = table.gamma.col(s).cwiseAbs();
    prof.peak_magnitude = mag.maxCoeff(&prof.peak_mode);
    for (Eigen::Index n = 0; n < mag.size(); ++n) {
      const double m2 = mag(n) * mag(n);
      prof.total_mass += m2;
      if (2 * n < prof.peak_mode) prof.pre_peak_mass += m2;
    }
    out.push_back(prof);
  }
  return out;
}

/// Chain truncation heuristic: light-cone reach over t_max plus the farthest
/// coupling peak plus a margin. `bandwidth` is the width of the weight's
/// support (w_c at zero temperature, 2 w_c for the thermal weight).
inline std::size_t default_chain_length(double bandwidth, double t_max, double max_separation,
                                        double sound_speed) {
  return static_cast<std::size_t>(std::ceil(0.6 * bandwidth * t_max) +
                                  std::ceil(std::abs(max_separation) / sound_speed) + 20);
}

/// Everything the simulator needs about one chain-mapped bath.
struct ChainMapping {
  DiscretizedMeasure measure;
  RecurrenceCoefficients recurrence;
  ChainGeometry geometry;
  CouplingTable table;
};

inline std::size_t default_quadrature_points(std::size_t n_modes) {
  return std::max<std::size_t>(16 * n_modes, 2048);
}

inline ChainMapping map_bath(DiscretizedMeasure measure, const std::vector<double> &positions,
                             double sound_speed, std::size_t n_modes) {
  ChainMapping cm;
  cm.measure = std::move(measure);
  cm.recurrence = stieltjes_recurrence(cm.measure, n_modes);
  cm.geometry = chain_coefficients(cm.recurrence);
  cm.table = couplings(cm.recurrence, cm.measure, positions, sound_speed, n_modes);
  return cm;
}

/// CSV: n, omega_n, t_n, re_gamma_site1..N, im_gamma_site1..N
inline void write_chain_coefficients_csv(std::ostream &os, const ChainGeometry &geom,
                                         const CouplingTable &table) {
  os << "n,omega_n,t_n";
  for (Eigen::Index s = 0; s < table.sites(); ++s) os << ",re_gamma_site" << s + 1;
  for (Eigen::Index s = 0; s < table.sites(); ++s) os << ",im_gamma_site" << s + 1;
  os << '\n';
  const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(geom.length()), table.modes());
  for (Eigen::Index i = 0; i < n; ++i) {
    os << i << ',' << csv::num(geom.omega[static_cast<std::size_t>(i)]) << ','
       << csv::num(geom.t[static_cast<std::size_t>(i)]);
    for (Eigen::Index s = 0; s < table.sites(); ++s) os << ',' << csv::num(table.gamma(i, s).real());
    for (Eigen::Index s = 0; s < table.sites(); ++s) os << ',' << csv::num(table.gamma(i, s).imag());
    os << '\n';
  }
}

} // namespace corrbath
