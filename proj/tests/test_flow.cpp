#include <gtest/gtest.h>

#include <random>

#include "qlocal/models.hpp"

using namespace qlocal;

namespace {

XYModel small_impurity_model(int L, int N) {
  XYModelSpec spec;
  spec.L = L;
  spec.gamma = 1.0;
  spec.impurities.push_back({0, N, "hopping_ramp", 0.3});
  return build_xy_model(spec);
}

}  // namespace

TEST(HardcoreMap, SpinMatrixMatchesXYInteraction) {
  LatticeGraph G = ring(8);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ud(1.0, 2.0);
  std::vector<double> u(8);
  for (double& x : u) x = ud(rng);
  Mat spin = assemble_dense(G, xy_spin_family(G, u), G.all_sites());
  Mat hc = spin_matrix(xy_hardcore_terms(G, u, 8));
  EXPECT_LT((spin - hc).norm(), 1e-12);
  EXPECT_LT((hc * number_operator(8) - number_operator(8) * hc).norm(), 1e-12);
}

TEST(HardcoreMap, VacuumHasZeroEnergyAndBlockSpectraMatch) {
  LatticeGraph G = ring(8);
  std::vector<double> u(8, 1.0);
  HardcoreTerms t = xy_hardcore_terms(G, u, 8);
  Mat spin = assemble_dense(G, xy_spin_family(G, u), G.all_sites());
  const Index vac = config_to_spin_index(0, 8);
  EXPECT_EQ(vac, 255);
  EXPECT_LT(spin.col(vac).norm(), 1e-14);

  std::vector<double> blocks;
  for (int n = 0; n <= 8; ++n) {
    RVec ev = eigvalsh(t.block(HardcoreBasis(8, n)));
    blocks.insert(blocks.end(), ev.data(), ev.data() + ev.size());
  }
  std::sort(blocks.begin(), blocks.end());
  RVec full = eigvalsh(spin);
  ASSERT_EQ(static_cast<Index>(blocks.size()), full.size());
  for (Index i = 0; i < full.size(); ++i) EXPECT_NEAR(blocks[i], full[i], 1e-10);
  EXPECT_NEAR(full[0], 0.0, 1e-12);
  EXPECT_GE(full[1] - full[0], 1.0 - 1e-10);
}

TEST(HardcoreMap, IndexRoundTrip) {
  for (Index i = 0; i < 64; ++i) EXPECT_EQ(config_to_spin_index(spin_index_to_config(i, 6), 6), i);
  // site 0 is the most significant factor and spin up means occupied
  EXPECT_EQ(spin_index_to_config(0b011111, 6), Config(1));
}

TEST(HardcoreMap, SingleParticleBlockIsShiftedLaplacian) {
  const int L = 8;
  LatticeGraph G = ring(L);
  std::vector<double> u{1.0, 1.5, 1.0, 2.0, 1.0, 1.2, 1.0, 1.0};
  HardcoreBasis B(L, 1);
  Mat H = xy_hardcore_terms(G, u, L).block(B);
  Mat want = Mat::Zero(L, L);
  for (int x = 0; x < L; ++x) {
    ASSERT_EQ(B[x], Config(1) << x);
    want(x, x) = 2.0 + u[x];
    want(x, (x + 1) % L) = -1.0;
    want((x + 1) % L, x) = -1.0;
  }
  EXPECT_LT((H - want).norm(), 1e-14);
}

TEST(Kato, RotatingProjectorGivesSigmaY) {
  const double th = 0.7;
  for (double s : {0.0, 0.3, 1.1}) {
    Vec v(2);
    v << std::cos(th * s), std::sin(th * s);
    Mat P = v * v.adjoint();
    Mat dP(2, 2);
    dP << -std::sin(2 * th * s), std::cos(2 * th * s), std::cos(2 * th * s), std::sin(2 * th * s);
    dP *= th;
    Mat G = kato_generator(P, dP);
    EXPECT_LT((G + th * pauli::Y()).norm(), 1e-14);
  }
  // The generated unitary transports the initial vector along the path.
  Mat G = -th * pauli::Y();
  Vec e0 = Vec::Zero(2);
  e0[0] = 1.0;
  Vec v = expi_hermitian(G, 1.0) * e0;
  EXPECT_NEAR(std::abs(v[0] - std::cos(th)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(v[1] - std::sin(th)), 0.0, 1e-14);
  EXPECT_THROW(kato_generator(2.0 * Mat::Identity(2, 2), Mat::Zero(2, 2)), Error);
}

TEST(Kato, ResolventDerivativeMatchesFiniteDifference) {
  XYModel m = small_impurity_model(6, 1);
  HardcorePath path = xy_coupling_path(m, {0});
  auto blocks = make_blocks(path, 2);
  for (double s : {0.25, 0.6}) {
    auto exact = projector_derivative(path, blocks, s, m.D_total, DerivativeMethod::Resolvent);
    auto fd = projector_derivative(path, blocks, s, m.D_total, DerivativeMethod::FiniteDifference);
    double worst = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) worst = std::max(worst, operator_norm(exact[b] - fd[b]));
    EXPECT_LT(worst, 1e-6) << "s=" << s;
  }
}

TEST(Kato, SectorSplitsOverBlocksWithinCapacity) {
  XYModel m = small_impurity_model(6, 1);
  HardcorePath path = xy_coupling_path(m, {0});
  auto blocks = make_blocks(path, 2);
  for (double s : {0.0, 0.5, 1.0}) {
    std::vector<int> D = sector_counts(path, blocks, s, m.D_total);
    EXPECT_EQ(D[0] + D[1], 2);
    EXPECT_EQ(D[2], 0);
  }
}

TEST(Truncation, FullRadiusLeavesGeneratorUnchanged) {
  XYModel m = small_impurity_model(6, 1);
  HardcorePath path = xy_coupling_path(m, {0});
  auto blocks = make_blocks(path, 2);
  BlockSectors mid = block_sectors(path, blocks, 0.5, m.D_total);
  auto dP = projector_derivative(path, blocks, 0.5, m.D_total, DerivativeMethod::Resolvent);
  std::vector<Mat> G;
  for (std::size_t b = 0; b < blocks.size(); ++b) G.push_back(kato_generator(mid.P[b], dP[b]));
  Config all = allowed_mask(m.bulk, Region{0}, m.bulk.diameter(), path.impurity_mask);
  EXPECT_EQ(all, (Config(1) << m.n_sites) - 1);
  auto Gl = truncate_generators(G, blocks, all);
  for (std::size_t b = 0; b < blocks.size(); ++b) EXPECT_LT((Gl[b] - G[b]).norm(), 1e-14);
}

TEST(Truncation, OutsideParticlesAreSpectators) {
  XYModel m = small_impurity_model(6, 1);
  HardcorePath path = xy_coupling_path(m, {0});
  auto blocks = make_blocks(path, 2);
  std::mt19937_64 rng(9);
  std::vector<Mat> G;
  for (const auto& b : blocks) G.push_back(random_hermitian(b.basis.size(), rng));
  const Config allowed = allowed_mask(m.bulk, Region{0}, 1, path.impurity_mask);  // sites 5, 0, 1 and the impurity
  auto Gl = truncate_generators(G, blocks, allowed);
  const HardcoreBasis& B1 = blocks[1].basis;
  const HardcoreBasis& B2 = blocks[2].basis;
  // Two particles, one parked at site 3 outside: the inside particle moves with the one-particle generator.
  const Config spect = Config(1) << 3;
  for (int x : {0, 1, 5, 6})
    for (int y : {0, 1, 5, 6}) {
      Config cx = Config(1) << x, cy = Config(1) << y;
      EXPECT_EQ(Gl[2](B2.index(cx | spect), B2.index(cy | spect)), G[1](B1.index(cx), B1.index(cy)));
    }
  // Moving the outside particle is never generated.
  EXPECT_EQ(Gl[2](B2.index((Config(1) << 0) | (Config(1) << 3)), B2.index((Config(1) << 0) | (Config(1) << 2))),
            cplx(0.0));
  // Configurations entirely inside read off the same block.
  Config a = (Config(1) << 0) | (Config(1) << 6), b = (Config(1) << 1) | (Config(1) << 5);
  EXPECT_EQ(Gl[2](B2.index(a), B2.index(b)), G[2](B2.index(a), B2.index(b)));
}

TEST(Flow, UncoupledImpurityFlowIsTrivial) {
  XYModel m = small_impurity_model(6, 0);
  EXPECT_EQ(m.D_total, 1);
  HardcorePath path = xy_coupling_path(m, {0});
  auto blocks = make_blocks(path, 1);
  FlowOptions opt;
  opt.D_total = 1;
  opt.ds = 0.25;
  opt.truncate = false;
  FlowState st = integrate_flow(path, blocks, m.bulk, Region{0}, opt);
  for (const Mat& U : st.U) EXPECT_LT((U - Mat::Identity(U.rows(), U.cols())).norm(), 1e-14);
  EXPECT_LT(st.final_error(), 1e-14);
}

TEST(Flow, UntruncatedFlowTransportsTheSector) {
  XYModel m = small_impurity_model(6, 1);
  HardcorePath path = xy_coupling_path(m, {0});
  auto blocks = make_blocks(path, 2);
  FlowOptions opt;
  opt.D_total = m.D_total;
  opt.ds = 0.02;
  opt.truncate = false;
  FlowState coarse = integrate_flow(path, blocks, m.bulk, Region{0}, opt);
  opt.ds = 0.01;
  FlowState fine = integrate_flow(path, blocks, m.bulk, Region{0}, opt);
  EXPECT_LT(fine.final_error(), 1e-5);
  EXPECT_LT(fine.trace.unitarity.back(), 1e-12);
  EXPECT_NEAR(coarse.final_error() / fine.final_error(), 4.0, 0.2);
  EXPECT_THROW(
      {
        opt.ds = 0.3;
        integrate_flow(path, blocks, m.bulk, Region{0}, opt);
      },
      Error);
}

TEST(CombesThomas, SingleParticleResolventMatchesLatticeGreenFunction) {
  const int L = 60;
  const double u = 1.0, z = -1.0;
  LatticeGraph G = ring(L);
  HardcoreBasis B(L, 1);
  Mat H = xy_hardcore_terms(G, std::vector<double>(L, u), L).block(B);
  ResolventProfile p = combes_thomas_profile(H, B, G, cplx(z), Config(1));
  const double kappa = free_resolvent_rate(u, z);
  EXPECT_NEAR(std::cosh(kappa), 1.0 + (u - z) / 2.0, 1e-14);
  // (-Delta + u - z)^{-1}(d) = e^{-kappa d} / (2 sinh kappa) on Z; the ring's wrap-around is below 1e-20 here.
  for (std::size_t i = 0; i < 12; ++i) {
    ASSERT_EQ(p.distance[i], static_cast<int>(i));
    double want = std::exp(-kappa * i) / (2.0 * std::sinh(kappa));
    EXPECT_NEAR(p.magnitude[i], want, 1e-12 * std::max(want, 1e-6)) << "d=" << i;
  }
  EXPECT_NEAR(p.dist_to_spectrum, u - z, 1e-10);
  EXPECT_THROW(free_resolvent_rate(1.0, 2.0), Error);
}
