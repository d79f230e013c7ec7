#include <gtest/gtest.h>

#include <random>

#include "qlocal/models.hpp"
#include "qlocal/quasilocal.hpp"

using namespace qlocal;

TEST(ToricCode, FourfoldGroundSpaceAndGap) {
  ToricCode tc = build_toric_code(2);
  EXPECT_EQ(tc.qubits.num_sites(), 8);
  Mat H = assemble_dense(tc.qubits, tc.phi, tc.qubits.all_sites());
  RVec ev = eigvalsh(H);
  // every star and plaquette satisfied; defects come in pairs, each costing 2
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(ev[i], -8.0, 1e-10);
  EXPECT_NEAR(ev[4] - ev[3], 4.0, 1e-10);
  EXPECT_THROW(build_toric_code(4), Error);
}

TEST(ToricCode, StabilizersCommute) {
  ToricCode tc = build_toric_code(2);
  const LatticeGraph& G = tc.qubits;
  std::vector<Mat> S;
  for (const LocalOperator& t : tc.phi.terms()) S.push_back(embed_matrix(G, t, G.all_sites()));
  ASSERT_EQ(S.size(), 8u);
  for (std::size_t a = 0; a < S.size(); ++a)
    for (std::size_t b = a + 1; b < S.size(); ++b) EXPECT_LT(commutator_norm(S[a], S[b]), 1e-12);
  for (const Region& r : tc.stars) EXPECT_EQ(r.size(), 4u);
}

TEST(TQO, SingleQubitPaulisAreProportionalToTheProjector) {
  ToricCode tc = build_toric_code(2);
  const LatticeGraph& G = tc.qubits;
  SpectralData S = eigendecompose(assemble_dense(G, tc.phi, G.all_sites()), EigenMode::Dense);
  Mat basis = S.vectors.leftCols(4);
  for (Site q = 0; q < G.num_sites(); ++q)
    for (char p : std::string("XYZ")) {
      TQOResult r = tqo_check(G, basis, site_operator(G, q, pauli::by_name(p)), tc.Lstar);
      EXPECT_LT(r.deviation, 1e-12);
      EXPECT_LT(std::abs(r.z), 1e-12);
    }
  EXPECT_THROW(tqo_check(G, basis, product_operator(G, {{0, pauli::Z()}, {1, pauli::Z()}}), tc.Lstar), NotApplicable);
}

TEST(TQO, IdentityAndScalarProbes) {
  LatticeGraph G = chain(3);
  std::mt19937_64 rng(1);
  Mat B = Mat::Zero(8, 2);
  B.col(0) = random_unit_vector(8, rng);
  Vec w = random_unit_vector(8, rng);
  w -= B.col(0) * (B.col(0).adjoint() * w);
  B.col(1) = w / w.norm();
  TQOResult one = tqo_check(G, B, LocalOperator::identity(G, Region{1}), 5);
  EXPECT_NEAR(std::abs(one.z - 1.0), 0.0, 1e-14);
  EXPECT_LT(one.deviation, 1e-14);
  TQOResult three = tqo_check(G, B, site_operator(G, 2, 3.0 * pauli::I()), 5);
  EXPECT_NEAR(std::abs(three.z - 3.0), 0.0, 1e-14);
  // a generic probe on a generic plane is not proportional
  EXPECT_GT(tqo_check(G, B, site_operator(G, 0, pauli::Z()), 5).deviation, 1e-3);
}

TEST(Impurity, UncoupledSectorIsProductWithImpurityDimension) {
  GappedModel m = build_gapped_chain({"tfim", 5, false, 1.0, 2.0});
  ImpurityModel im = attach_impurity(m.graph, m.phi, 2, 2, impurity_coupling_matrix("exchange_ramp", 2), 0.0);
  EXPECT_EQ(im.graph.site_dim(2), 4);
  EXPECT_TRUE(im.path.perturbation().empty());
  SpectralData S = eigendecompose(im.path.dense(0.0), EigenMode::Dense);
  SectorSpectrum sec = identify_sector(S, SectorRule::window(1e-9));
  EXPECT_EQ(sec.D, 2);
  EXPECT_NEAR(sec.gap, m.gap, 1e-10);

  SpectralData Sb = eigendecompose(assemble_dense(m.graph, m.phi, m.graph.all_sites()), EigenMode::Dense);
  Mat B = product_sector_basis(im.graph, 2, 2, Sb.vectors.col(0));
  EXPECT_LT((sec.projector() * B - B).norm(), 1e-10);
  EXPECT_LT(product_structure_defect(im.graph, 2, 2, B), 1e-12);
  EXPECT_LT(product_structure_defect(im.graph, 2, 2, sec.basis), 1e-10);

  std::mt19937_64 rng(6);
  Mat R(B.rows(), 2);
  R.col(0) = random_unit_vector(B.rows(), rng);
  R.col(1) = random_unit_vector(B.rows(), rng);
  EXPECT_GT(product_structure_defect(im.graph, 2, 2, R), 1e-3);
}

TEST(Impurity, TrivialImpurityIsAPlainSitePerturbation) {
  GappedModel m = build_gapped_chain({"tfim", 4, false, 1.0, 2.0});
  Mat c = impurity_coupling_matrix("field", 1);
  ImpurityModel im = attach_impurity(m.graph, m.phi, 1, 1, c, 0.4);
  EXPECT_EQ(im.graph.hilbert_dim(), m.graph.hilbert_dim());
  PerturbationPath W;
  W.add(1, site_operator(m.graph, 1, 0.4 * (pauli::X() + pauli::Z()) / std::sqrt(2.0)));
  HamiltonianPath direct(m.graph, m.phi, W);
  for (double s : {0.0, 0.5, 1.0}) EXPECT_LT((im.path.dense(s) - direct.dense(s)).norm(), 1e-13);
  EXPECT_THROW(impurity_coupling_matrix("exchange_ramp", 1), ConfigError);
}

TEST(Impurity, LiftAddsTrailingIdentityFactor) {
  LatticeGraph G = chain(3);
  std::vector<int> dims = G.site_dims();
  dims[1] *= 2;
  LatticeGraph Gi = G.with_site_dims(dims);
  std::mt19937_64 rng(8);
  Mat a = random_hermitian(2, rng);
  LocalOperator lifted = lift_to_impurity(G, Gi, site_operator(G, 1, a), 1, 2);
  EXPECT_LT((lifted.matrix() - kron(a, Mat::Identity(2, 2))).norm(), 1e-15);
  Mat ab = random_hermitian(4, rng);
  LocalOperator pair = lift_to_impurity(G, Gi, LocalOperator(G, Region{0, 1}, ab), 1, 2);
  EXPECT_LT((pair.matrix() - kron(ab, Mat::Identity(2, 2))).norm(), 1e-15);
}

TEST(Impurity, CoupledPathStaysGapped) {
  GappedModel m = build_gapped_chain({"tfim", 6, false, 0.1, 2.5});
  ImpurityModel im = attach_impurity(m.graph, m.phi, 0, 2, impurity_coupling_matrix("exchange_ramp", 2), 0.5);
  GapSummary g = verify_gap_along_path(im.path, SectorRule::fixed(2), 11);
  EXPECT_GT(g.g_min, 1.0);
  EXPECT_LE(g.g_min, m.gap + 1e-10);
}
