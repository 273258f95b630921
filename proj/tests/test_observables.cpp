#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "corrbath/mpo.hpp"
#include "corrbath/observables.hpp"

using namespace corrbath;

namespace {

std::vector<double> grid(double t0, double t1, double dt) {
  std::vector<double> t;
  for (long k = 0; t0 + k * dt <= t1 + 1e-12; ++k) t.push_back(t0 + k * dt);
  return t;
}

MatrixXc random_density(std::mt19937_64 &rng, int n) {
  std::normal_distribution<double> g;
  MatrixXc a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = cplx(g(rng), g(rng));
  MatrixXc rho = a * a.adjoint();
  return rho / rho.trace();
}

// Product MPS with every bond of dimension 1 and site i in local state occ[i].
MPSState product(const std::vector<int> &dims, const std::vector<int> &occ) {
  MPSState st;
  st.dims = dims;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    MatrixXc a = MatrixXc::Zero(1, dims[i]);
    a(0, occ[i]) = 1.0;
    st.tensors.push_back(a);
  }
  return st;
}

MPOHamiltonian labelled_mpo(int modes, int de) {
  ChainGeometry c;
  c.omega.assign(static_cast<std::size_t>(modes), 0.5);
  c.t.assign(static_cast<std::size_t>(modes), 0.25);
  CouplingTable t;
  t.positions = {0.0, 0.0};
  t.gamma = MatrixXc::Constant(modes, 2, 0.1);
  return build_mpo(SystemSpec{}, c, c, t, de);
}

} // namespace

TEST(Populations, DegenerateDimerExamples) {
  SystemSpec sys;  // E = 0, J = 0.25
  MatrixXc site0 = MatrixXc::Zero(2, 2);
  site0(0, 0) = 1.0;
  const auto p = eigen_populations(site0, sys);
  EXPECT_NEAR(p(0), 0.5, 1e-15);
  EXPECT_NEAR(p(1), 0.5, 1e-15);
  const MatrixXc plus = MatrixXc::Constant(2, 2, 0.5);
  const auto q = eigen_populations(plus, sys);
  EXPECT_NEAR(q(1), 1.0, 1e-15);  // symmetric state is the upper level for J > 0
  EXPECT_NEAR(q(0), 0.0, 1e-15);
}

TEST(Populations, RejectsWrongShape) {
  EXPECT_THROW(eigen_populations(MatrixXc::Identity(3, 3), SystemSpec{}), InputError);
}

// For the degenerate dimer, upper - 1/2 = Re rho_12.
TEST(PopulationsProperty, CoherenceIdentity) {
  std::mt19937_64 rng(17);
  SystemSpec sys;
  for (int i = 0; i < 500; ++i) {
    const MatrixXc rho = random_density(rng, 2);
    const auto p = eigen_populations(rho, sys);
    ASSERT_NEAR(p(1) - 0.5, site_coherence(rho).real(), 1e-13);
    ASSERT_NEAR(p.sum(), 1.0, 1e-13);
    ASSERT_LE(purity(rho), 1.0 + 1e-13);
    ASSERT_GE(purity(rho), 0.5 - 1e-13);
  }
}

TEST(Purity, Examples) {
  EXPECT_NEAR(purity(MatrixXc::Identity(2, 2) / 2.0), 0.5, 1e-15);
  EXPECT_NEAR(purity(MatrixXc::Constant(2, 2, 0.5)), 1.0, 1e-15);
  MatrixXc rho(2, 2);
  rho << 0.5, cplx(0, 0.2), cplx(0, -0.2), 0.5;
  EXPECT_NEAR(site_coherence(rho).imag(), 0.2, 1e-15);
}

TEST(ChainOccupations, SingleQuantumInMode) {
  const auto mpo = labelled_mpo(4, 3);
  std::vector<int> occ(mpo.size(), 0);
  occ[0] = 1;                       // excitation on system site 0
  occ[static_cast<std::size_t>(mpo.c_site(2))] = 1;  // third c mode
  occ[static_cast<std::size_t>(mpo.d_site(0))] = 2;  // first d mode, two quanta
  const auto st = product(mpo.local_dims, occ);
  const auto n = chain_occupations(st, mpo);
  const auto labels = signed_mode_labels(mpo);
  ASSERT_EQ(n.size(), labels.size());
  EXPECT_EQ(labels, (std::vector<int>{1, 2, 3, 4, -1, -2, -3, -4}));
  for (std::size_t k = 0; k < n.size(); ++k) {
    const double expect = labels[k] == 3 ? 1.0 : labels[k] == -1 ? 2.0 : 0.0;
    EXPECT_NEAR(n[k], expect, 1e-15) << labels[k];
  }
  const MatrixXc rho = system_rdm(st, 2);
  EXPECT_NEAR(rho(0, 0).real(), 1.0, 1e-15);
}

TEST(Revivals, MonotoneDecayHasNone) {
  const auto t = grid(0, 30, 0.1);
  std::vector<double> v;
  for (double x : t) v.push_back(0.5 + 0.5 * std::exp(-x / 5));
  EXPECT_TRUE(revival_detector(t, v).empty());
}

TEST(Revivals, GaussianBumpProminenceAndWidth) {
  const auto t = grid(0, 20, 0.001);
  std::vector<double> v;
  for (double x : t) v.push_back(0.1 + 0.5 * std::exp(-(x - 10) * (x - 10) / 2));
  const auto r = revival_detector(t, v);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0].time, 10.0, 1e-9);
  EXPECT_NEAR(r[0].prominence, 0.5, 1e-6);
  EXPECT_NEAR(r[0].width, 2 * std::sqrt(2 * std::log(2.0)), 1e-3);
  EXPECT_NEAR(r[0].sharpness(), 0.5 / r[0].width, 1e-15);
}

TEST(Revivals, TrainWithDecayingProminence) {
  const auto t = grid(0, 50, 0.05);
  std::vector<double> v;
  for (double x : t) {
    double y = 0.5 + 0.5 * std::exp(-x);
    for (int k = 1; k <= 4; ++k) y += 0.2 / k * std::exp(-(x - 10 * k) * (x - 10 * k));
    v.push_back(y);
  }
  const auto r = revival_detector(t, v);
  ASSERT_EQ(r.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(r[k].time, 10.0 * (k + 1), 0.05);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_LT(r[k].prominence, r[k - 1].prominence);
}

TEST(Revivals, ThresholdAndErrors) {
  const auto t = grid(0, 20, 0.01);
  std::vector<double> v;
  for (double x : t) v.push_back(0.005 * std::exp(-(x - 10) * (x - 10)));
  EXPECT_TRUE(revival_detector(t, v).empty());
  EXPECT_EQ(revival_detector(t, v, 0.001).size(), 1u);
  EXPECT_THROW(revival_detector(t, std::vector<double>(3, 0.0)), InputError);
  EXPECT_THROW(revival_detector({0.0, 1.0}, {0.0, 1.0}), InputError);
}

TEST(Revivals, FlatTopCountsOnce) {
  const std::vector<double> t{0, 1, 2, 3, 4, 5, 6};
  const std::vector<double> v{0, 0.5, 0.5, 0.5, 0.1, 0.1, 0.1};
  const auto r = revival_detector(t, v);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].time, 1.0);
}

TEST(Csv, TimeseriesAndHeatmap) {
  TrajectoryRecord rec;
  rec.times = {0.0, 0.1};
  rec.upper_pop = {0.5, 0.6};
  rec.lower_pop = {0.5, 0.4};
  rec.coherence = {cplx(0, 0), cplx(0.1, -0.0)};
  rec.purity = {1, 1};
  rec.norm = {1, 1};
  rec.energy = {0.25, 0.25};
  rec.signed_modes = {1, -1};
  rec.chain_occ = {{0, 0}, {0.01, 0.02}};
  std::ostringstream ts, hm;
  write_timeseries_csv(ts, rec);
  write_heatmap_csv(hm, rec);
  EXPECT_EQ(ts.str(), "t,upper_pop,lower_pop,re_coh,im_coh,purity,norm,energy\n"
                      "0,0.5,0.5,0,0,1,1,0.25\n"
                      "0.1,0.6,0.4,0.1,0,1,1,0.25\n");
  EXPECT_EQ(hm.str(), "t,signed_mode,occupation\n0,1,0\n0,-1,0\n0.1,1,0.01\n0.1,-1,0.02\n");
}
