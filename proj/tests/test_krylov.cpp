#include <random>

#include <gtest/gtest.h>

#include "corrbath/krylov.hpp"

using namespace corrbath;

namespace {

MatrixXc random_hermitian(int n, std::mt19937_64 &rng, double scale) {
  std::normal_distribution<double> g;
  MatrixXc a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = cplx(g(rng), g(rng));
  return scale * (a + a.adjoint()) / 2.0;
}

VectorXc exact(const MatrixXc &h, const VectorXc &v, cplx z) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(h);
  const VectorXc phase = (z * es.eigenvalues().cast<cplx>()).array().exp().matrix();
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint() * v;
}

} // namespace

TEST(Krylov, MatchesEigendecomposition) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXc h = random_hermitian(60, rng, 0.3);
    VectorXc v = VectorXc::Random(60);
    for (cplx z : {cplx(0, -0.1), cplx(0, -1.0), cplx(0, 0.5)}) {
      KrylovStats st;
      const VectorXc got = expv([&](const VectorXc &x) { return VectorXc(h * x); }, v, z, {24, 1e-12, 12}, &st);
      EXPECT_LT((got - exact(h, v, z)).norm(), 1e-10 * v.norm());
      EXPECT_GT(st.matvecs, 0);
    }
  }
}

TEST(Krylov, SplitsLongStepsIntoSubsteps) {
  std::mt19937_64 rng(2);
  const MatrixXc h = random_hermitian(80, rng, 1.0);
  const VectorXc v = VectorXc::Random(80);
  KrylovStats st;
  const VectorXc got = expv([&](const VectorXc &x) { return VectorXc(h * x); }, v, cplx(0, -5.0), {6, 1e-10, 12}, &st);
  EXPECT_GT(st.substeps, 1);
  EXPECT_LT((got - exact(h, v, cplx(0, -5.0))).norm(), 1e-8 * v.norm());
  EXPECT_NEAR(got.norm(), v.norm(), 1e-8 * v.norm());
}

TEST(Krylov, InvariantSubspaceTerminatesEarly) {
  MatrixXc h = MatrixXc::Zero(10, 10);
  h.diagonal().setConstant(2.0);
  VectorXc v = VectorXc::Zero(10);
  v(3) = 1.0;
  const VectorXc got = expv([&](const VectorXc &x) { return VectorXc(h * x); }, v, cplx(0, -0.5));
  EXPECT_LT(std::abs(got(3) - std::exp(cplx(0, -1.0))), 1e-14);
}

TEST(Krylov, GivesUpWithConvergenceError) {
  std::mt19937_64 rng(3);
  const MatrixXc h = random_hermitian(80, rng, 50.0);
  const VectorXc v = VectorXc::Random(80);
  EXPECT_THROW(expv([&](const VectorXc &x) { return VectorXc(h * x); }, v, cplx(0, -10.0), {3, 1e-14, 0}),
               ConvergenceError);
  EXPECT_THROW(expv([&](const VectorXc &x) { return VectorXc(h * x); }, v, cplx(0, -1.0), {2, 1e-10, 12}),
               InputError);
}

TEST(Krylov, ZeroVector) {
  const VectorXc v = VectorXc::Zero(5);
  const VectorXc got = expv([](const VectorXc &x) { return x; }, v, cplx(0, -1.0));
  EXPECT_EQ(got.norm(), 0.0);
}
