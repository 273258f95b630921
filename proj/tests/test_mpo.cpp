#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "corrbath/mpo.hpp"
#include "corrbath/chain_mapping.hpp"

using namespace corrbath;

namespace {

using Dense = Eigen::MatrixXcd;

Dense kron(const Dense &a, const Dense &b) {
  Dense out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Dense lowering(int d) {
  Dense m = Dense::Zero(d, d);
  for (int k = 1; k < d; ++k) m(k - 1, k) = std::sqrt(static_cast<double>(k));
  return m;
}

// Operator `op` acting on `site` of the product space `dims`.
Dense on_site(const Dense &op, std::size_t site, const std::vector<int> &dims) {
  Dense out = Dense::Identity(1, 1);
  for (std::size_t k = 0; k < dims.size(); ++k) out = kron(out, k == site ? op : Dense::Identity(dims[k], dims[k]));
  return out;
}

// Independent reference Hamiltonian written term by term.
Dense reference_hamiltonian(const SystemSpec &sys, const ChainGeometry &c, const ChainGeometry &d,
                            const CouplingTable &g, int de) {
  const int n = sys.n_sites;
  const auto nc = static_cast<int>(c.length()), nd = static_cast<int>(d.length());
  std::vector<int> dims(static_cast<std::size_t>(n), 2);
  dims.insert(dims.end(), static_cast<std::size_t>(nc + nd), de);
  const Dense f = lowering(2), b = lowering(de);
  const Dense nf = f.adjoint() * f, nb = b.adjoint() * b;
  Eigen::Index dim = 1;
  for (int x : dims) dim *= x;
  Dense h = Dense::Zero(dim, dim);
  auto op = [&](const Dense &o, int s) { return on_site(o, static_cast<std::size_t>(s), dims); };
  for (int a = 0; a < n; ++a) h += sys.energies[static_cast<std::size_t>(a)] * op(nf, a);
  for (int a = 0; a + 1 < n; ++a) {
    const Dense hop = op(f.adjoint(), a) * op(f, a + 1);
    h += sys.hopping * (hop + hop.adjoint());
  }
  for (int m = 0; m < nc; ++m) {
    h += c.omega[static_cast<std::size_t>(m)] * op(nb, n + m);
    if (m + 1 < nc) {
      const Dense hop = op(b.adjoint(), n + m) * op(b, n + m + 1);
      h += c.t[static_cast<std::size_t>(m)] * (hop + hop.adjoint());
    }
  }
  for (int m = 0; m < nd; ++m) {
    h += d.omega[static_cast<std::size_t>(m)] * op(nb, n + nc + m);
    if (m + 1 < nd) {
      const Dense hop = op(b.adjoint(), n + nc + m) * op(b, n + nc + m + 1);
      h += d.t[static_cast<std::size_t>(m)] * (hop + hop.adjoint());
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int m = 0; m < nc; ++m) {
      const cplx gm = g.gamma(m, a);
      h += op(nf, a) * (gm * op(b, n + m) + std::conj(gm) * op(b.adjoint(), n + m));
    }
    for (int m = 0; m < nd; ++m) {
      const cplx gm = g.gamma(m, a);
      h += op(nf, a) * (std::conj(gm) * op(b, n + nc + m) + gm * op(b.adjoint(), n + nc + m));
    }
  }
  return h;
}

struct Instance {
  SystemSpec sys;
  ChainGeometry c, d;
  CouplingTable table;
  int de = 2;
};

// Hand-rolled generator of random small models.
Instance random_instance(std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> sites(1, 3), chain(0, 3), levels(2, 3);
  std::normal_distribution<double> g;
  Instance in;
  in.sys.n_sites = sites(rng);
  in.sys.energies.resize(static_cast<std::size_t>(in.sys.n_sites));
  in.sys.positions.assign(static_cast<std::size_t>(in.sys.n_sites), 0.0);
  for (auto &e : in.sys.energies) e = g(rng);
  in.sys.hopping = g(rng);
  in.de = levels(rng);
  int nc = chain(rng), nd = chain(rng);
  while (in.sys.n_sites + nc + nd > 6) nc > nd ? --nc : --nd;
  auto geom = [&](int len) {
    ChainGeometry x;
    for (int k = 0; k < len; ++k) {
      x.omega.push_back(g(rng));
      x.t.push_back(k + 1 < len ? g(rng) : 0.0);
    }
    return x;
  };
  in.c = geom(nc);
  in.d = geom(nd);
  in.table.positions = in.sys.positions;
  in.table.gamma = MatrixXc::Zero(std::max(1, std::max(nc, nd)), in.sys.n_sites);
  for (Eigen::Index i = 0; i < in.table.gamma.size(); ++i) in.table.gamma(i) = cplx(g(rng), g(rng));
  return in;
}

CouplingTable single_site_table(std::vector<cplx> g) {
  CouplingTable t;
  t.positions = {0.0};
  t.gamma = MatrixXc::Zero(static_cast<Eigen::Index>(g.size()), 1);
  for (std::size_t i = 0; i < g.size(); ++i) t.gamma(static_cast<Eigen::Index>(i), 0) = g[i];
  return t;
}

ChainGeometry uniform_chain(std::size_t n) {
  ChainGeometry g;
  g.omega.assign(n, 0.5);
  g.t.assign(n, 0.25);
  return g;
}

CouplingTable flat_table(std::size_t modes, int sites) {
  CouplingTable t;
  t.positions.assign(static_cast<std::size_t>(sites), 0.0);
  t.gamma = MatrixXc::Constant(static_cast<Eigen::Index>(modes), sites, cplx(0.1, 0.05));
  return t;
}

} // namespace

TEST(Mpo, SingleSiteRowTensor) {
  SystemSpec sys;
  sys.n_sites = 1;
  sys.energies = {0.7};
  sys.positions = {0.0};
  const auto table = single_site_table({0.3, 0.1});
  const auto mpo = build_mpo(sys, uniform_chain(2), ChainGeometry{}, table, 2);
  const auto &w = mpo.tensors.front();
  ASSERT_EQ(w.dl, 1);
  ASSERT_EQ(w.dr, 6);
  const MatrixXc n = ops::site_projector();
  EXPECT_TRUE(w.block(0, 0).isApprox(ops::identity(2)));
  EXPECT_TRUE(w.block(0, 1).isZero());  // hopping J f, absent for a single site
  EXPECT_TRUE(w.block(0, 2).isZero());
  EXPECT_TRUE(w.block(0, 3).isApprox(n));
  EXPECT_TRUE(w.block(0, 4).isApprox(n));
  EXPECT_TRUE(w.block(0, 5).isApprox(0.7 * n));
}

TEST(Mpo, TwoModeContractionByHand) {
  SystemSpec sys;
  sys.n_sites = 1;
  sys.energies = {0.2};
  sys.positions = {0.0};
  ChainGeometry c;
  c.omega = {0.6, 0.4};
  c.t = {0.3, 0.0};
  const cplx g0(0.3, 0.1), g1(-0.2, 0.05);
  const auto mpo = build_mpo(sys, c, ChainGeometry{}, single_site_table({g0, g1}), 2);
  // explicit 8 x 8 Hamiltonian on |s, n0, n1>
  const Dense f = lowering(2), id = Dense::Identity(2, 2), nf = f.adjoint() * f;
  Dense h = 0.2 * kron(kron(nf, id), id) + 0.6 * kron(kron(id, nf), id) + 0.4 * kron(kron(id, id), nf) +
            0.3 * (kron(kron(id, f.adjoint()), f) + kron(kron(id, f), f.adjoint())) +
            kron(kron(nf, g0 * f + std::conj(g0) * f.adjoint()), id) +
            kron(kron(nf, id), g1 * f + std::conj(g1) * f.adjoint());
  const Dense got = Dense(mpo_to_dense(mpo));
  EXPECT_LT((got - h).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Mpo, DecoupledIsDiagonal) {
  SystemSpec sys;
  sys.energies = {0.1, -0.3};
  sys.hopping = 0.0;
  ChainGeometry c;
  c.omega = {0.5, 0.2};
  c.t = {0.0, 0.0};
  CouplingTable t;
  t.positions = {0.0, 0.0};
  t.gamma = MatrixXc::Zero(2, 2);
  const Dense h = Dense(mpo_to_dense(build_mpo(sys, c, c, t, 3)));
  EXPECT_TRUE(h.isApprox(Dense(h.diagonal().asDiagonal())));
  // |1, 0; n0=2, n1=0; m0=0, m1=1> has energy 0.1 + 2 * 0.5 + 0.2
  const Eigen::Index idx = ((((1 * 2 + 0) * 3 + 2) * 3 + 0) * 3 + 0) * 3 + 1;
  EXPECT_NEAR(h(idx, idx).real(), 0.1 + 1.0 + 0.2, 1e-14);
}

TEST(Mpo, BondProfiles) {
  SystemSpec two;
  for (std::size_t len : {100u, 1000u}) {
    const auto mpo = build_mpo(two, uniform_chain(len), uniform_chain(len), flat_table(len, 2), 2);
    const auto prof = bond_dimension_profile(mpo);
    ASSERT_EQ(prof.size(), mpo.size() - 1);
    EXPECT_EQ(*std::max_element(prof.begin(), prof.end()), 8) << len;
    for (std::size_t i = 2; i < prof.size(); ++i) ASSERT_EQ(prof[i], 8);
  }
  SystemSpec five;
  five.n_sites = 5;
  five.energies.assign(5, 0.0);
  five.positions = {0, 1, 2, 3, 4};
  const auto mpo = build_mpo(five, uniform_chain(10), uniform_chain(10), flat_table(10, 5), 2);
  const auto prof = bond_dimension_profile(mpo);
  EXPECT_EQ(*std::max_element(prof.begin(), prof.end()), 14);
  EXPECT_EQ(prof.back(), 14);
}

TEST(MpoProperty, MatchesReferenceAndHermitian) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance in = random_instance(rng);
    const auto mpo = build_mpo(in.sys, in.c, in.d, in.table, in.de);
    const Dense got = Dense(mpo_to_dense(mpo));
    const Dense ref = reference_hamiltonian(in.sys, in.c, in.d, in.table, in.de);
    ASSERT_EQ(got.rows(), ref.rows());
    ASSERT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    ASSERT_LT((got - got.adjoint()).cwiseAbs().maxCoeff(), 1e-14) << "trial " << trial;
  }
}

TEST(Mpo, BinaryRoundTrip) {
  std::mt19937_64 rng(9);
  const Instance in = random_instance(rng);
  const auto mpo = build_mpo(in.sys, in.c, in.d, in.table, in.de);
  std::stringstream ss;
  write_mpo_binary(ss, mpo);
  const auto sites = read_mpo_binary(ss);
  ASSERT_EQ(sites.size(), mpo.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    ASSERT_EQ(sites[i].dl, mpo.tensors[i].dl);
    ASSERT_EQ(sites[i].dr, mpo.tensors[i].dr);
    for (int l = 0; l < sites[i].dl; ++l)
      for (int r = 0; r < sites[i].dr; ++r) ASSERT_TRUE(sites[i].block(l, r) == mpo.tensors[i].block(l, r));
  }
  std::stringstream bad("CBMPO2");
  EXPECT_THROW(read_mpo_binary(bad), InputError);
}

TEST(Mpo, Errors) {
  SystemSpec sys;
  EXPECT_THROW(build_mpo(sys, uniform_chain(3), uniform_chain(3), flat_table(3, 2), 1), InputError);
  EXPECT_THROW(build_mpo(sys, uniform_chain(5), uniform_chain(3), flat_table(3, 2), 2), InputError);
  EXPECT_THROW(build_mpo(sys, uniform_chain(3), uniform_chain(3), flat_table(3, 1), 2), InputError);
  SystemSpec broken;
  broken.n_sites = 3;
  EXPECT_THROW(build_mpo(broken, uniform_chain(1), uniform_chain(1), flat_table(1, 3), 2), InputError);
  const auto big = build_mpo(sys, uniform_chain(10), uniform_chain(10), flat_table(10, 2), 3);
  EXPECT_THROW(mpo_to_dense(big), InputError);
}
