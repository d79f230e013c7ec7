#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qlocal/interactions.hpp"
#include "qlocal/sectors.hpp"
#include "qlocal/spectral_flow.hpp"

namespace qlocal {

// ---------------------------------------------------------------------------
// Gapped chains

/// H = -J sum sigma^x sigma^x - h sum sigma^z on the edges / sites of G.
inline InteractionFamily tfim(const LatticeGraph& G, double J, double h) {
  InteractionFamily Phi;
  for (auto [a, b] : G.edges()) Phi.add(G, product_operator(G, {{a, -J * pauli::X()}, {b, pauli::X()}}));
  for (Site x = 0; x < G.num_sites(); ++x) Phi.add(G, site_operator(G, x, -h * pauli::Z()));
  return Phi;
}

struct GappedModel {
  LatticeGraph graph;
  InteractionFamily phi;
  double gap = 0.0;
  std::vector<std::string> warnings;
};

struct ChainParams {
  std::string kind = "tfim";  ///< "tfim" or "xy"
  int n = 10;
  bool periodic = false;
  double J = 1.0;
  double h = 2.0;  ///< field (tfim) or potential u (xy)
};

inline InteractionFamily xy_spin_family(const LatticeGraph& G, const std::vector<double>& u);

/// Chain Hamiltonian with its measured gap above a unique ground state.
inline GappedModel build_gapped_chain(const ChainParams& p, double gap_tol = 1e-8) {
  GappedModel m{p.periodic ? ring(p.n) : chain(p.n), {}, 0.0, {}};
  if (p.kind == "tfim") {
    m.phi = tfim(m.graph, p.J, p.h);
  } else if (p.kind == "xy") {
    if (p.J != 1.0) m.warnings.push_back("xy chain uses unit hopping; J ignored");
    m.phi = xy_spin_family(m.graph, std::vector<double>(p.n, p.h));
  } else {
    throw Error("unknown chain kind '" + p.kind + "'");
  }
  SpectralData S;
  Index dim = m.graph.hilbert_dim();
  if (dim <= kDenseLimit)
    S = eigendecompose(assemble_dense(m.graph, m.phi, m.graph.all_sites()), EigenMode::Dense);
  else
    S = eigendecompose(assemble_sparse(m.graph, m.phi, m.graph.all_sites()), EigenMode::Iterative, 2);
  m.gap = S.values[1] - S.values[0];
  if (m.gap < gap_tol) m.warnings.push_back("ground state is degenerate (gap " + std::to_string(m.gap) + ")");
  return m;
}

// ---------------------------------------------------------------------------
// xy model and hard-core bosons

/// H = -sum_{ordered pairs d(x,y)=1} (S1 S1 + S2 S2) + sum_x (u(x) + 2 nu)(1/2 + S3_x), S = sigma/2.
inline InteractionFamily xy_spin_family(const LatticeGraph& G, const std::vector<double>& u) {
  InteractionFamily Phi;
  const double nu = G.lattice_dimension();
  const Mat xx_yy = kron(pauli::X(), pauli::X()) + kron(pauli::Y(), pauli::Y());
  for (auto [a, b] : G.edges()) Phi.add(G, LocalOperator(G, Region{a, b}, -0.5 * xx_yy));
  Mat up = (pauli::I() + pauli::Z()) / 2.0;  // 1/2 + S3
  for (Site x = 0; x < G.num_sites(); ++x) Phi.add(G, site_operator(G, x, (u.at(x) + 2.0 * nu) * up));
  return Phi;
}

/// Hard-core image of the xy model on the bulk sites (site ids as in G) within `n_sites` total sites.
inline HardcoreTerms xy_hardcore_terms(const LatticeGraph& G, const std::vector<double>& u, int n_sites) {
  HardcoreTerms t;
  t.n_sites = n_sites;
  const double nu = G.lattice_dimension();
  for (auto [a, b] : G.edges()) t.hopping.emplace_back(a, b, -1.0);
  for (Site x = 0; x < G.num_sites(); ++x) t.potential.emplace_back(x, u.at(x) + 2.0 * nu);
  return t;
}

struct XYImpuritySpec {
  Site k = 0;             ///< bulk site the impurity couples to
  int N = 1;              ///< impurity spins
  std::string preset = "hopping_ramp";
  double strength = 0.3;
};

struct XYModelSpec {
  int L = 10;
  int nu = 1;
  double gamma = 1.0;
  std::vector<double> u;  ///< per-site potential; empty means u = gamma everywhere
  std::vector<XYImpuritySpec> impurities;
};

struct XYModel {
  LatticeGraph bulk;             ///< ring or torus
  std::vector<double> u;
  int n_sites = 0;               ///< bulk + impurity spins
  std::vector<int> impurity_first;  ///< first hard-core site of each impurity
  HardcoreTerms H0;              ///< bulk, impurities uncoupled
  std::vector<HardcoreTerms> couplings;  ///< full-strength coupling per impurity
  Config impurity_mask = 0;
  std::vector<Config> impurity_masks;  ///< hard-core sites of each impurity
  int D_total = 1;               ///< 2^(total impurity spins)
};

inline HardcoreTerms xy_coupling(int n_sites, Site k, int first, int N, const std::string& preset, double w) {
  HardcoreTerms t;
  t.n_sites = n_sites;
  for (int i = first; i < first + N; ++i) {
    if (preset == "hopping_ramp") {
      t.hopping.emplace_back(k, i, w);
    } else if (preset == "exchange_ramp") {
      // w (S_k . S_i - 1/4): vanishes on the vacuum
      t.hopping.emplace_back(k, i, 0.5 * w);
      t.density.emplace_back(k, i, w);
      t.potential.emplace_back(k, -0.5 * w);
      t.potential.emplace_back(i, -0.5 * w);
    } else {
      throw ConfigError("unknown impurity coupling preset '" + preset + "'");
    }
  }
  return t;
}

inline XYModel build_xy_model(const XYModelSpec& spec) {
  if (spec.gamma <= 0.0) throw Error("gamma must be positive");
  XYModel m;
  if (spec.nu == 1)
    m.bulk = ring(spec.L);
  else if (spec.nu == 2)
    m.bulk = torus(spec.L);
  else
    throw Error("xy model supports nu = 1 or 2");
  const int nb = m.bulk.num_sites();
  m.u = spec.u.empty() ? std::vector<double>(nb, spec.gamma) : spec.u;
  if (static_cast<int>(m.u.size()) != nb) throw Error("potential list has wrong length");
  for (double x : m.u)
    if (x < spec.gamma) throw Error("potential u(x) below gamma");
  m.n_sites = nb;
  for (const auto& imp : spec.impurities) {
    if (imp.N < 0) throw Error("negative impurity size");
    if (imp.k < 0 || imp.k >= nb) throw Error("impurity site outside lattice");
    m.impurity_first.push_back(m.n_sites);
    m.n_sites += imp.N;
  }
  if (m.n_sites > 62) throw Error("too many sites for hard-core configurations");
  m.H0 = xy_hardcore_terms(m.bulk, m.u, m.n_sites);
  int total_spins = 0;
  for (std::size_t i = 0; i < spec.impurities.size(); ++i) {
    const auto& imp = spec.impurities[i];
    m.couplings.push_back(xy_coupling(m.n_sites, imp.k, m.impurity_first[i], imp.N, imp.preset, imp.strength));
    Config mask = 0;
    for (int j = 0; j < imp.N; ++j) mask |= Config(1) << (m.impurity_first[i] + j);
    m.impurity_masks.push_back(mask);
    m.impurity_mask |= mask;
    total_spins += imp.N;
  }
  m.D_total = 1 << total_spins;
  return m;
}

/// Coupling path H0 + f(s) (W_1 + ... ) for the selected impurities.
inline HardcorePath xy_coupling_path(const XYModel& m, const std::vector<std::size_t>& which,
                                     const std::vector<std::size_t>& already_coupled = {}) {
  HardcorePath p;
  p.H0 = m.H0;
  for (std::size_t i : already_coupled) p.H0.append(m.couplings.at(i));
  p.W.n_sites = m.n_sites;
  // Only the impurities being coupled belong to the flow's support; the others are spectators.
  for (std::size_t i : which) {
    p.W.append(m.couplings.at(i));
    p.impurity_mask |= m.impurity_masks.at(i);
  }
  return p;
}

/// Graph over all hard-core sites: bulk lattice plus an edge from each impurity spin to its site k.
inline LatticeGraph xy_full_graph(const XYModel& m, const XYModelSpec& spec) {
  std::vector<std::pair<Site, Site>> e = m.bulk.edges();
  for (std::size_t i = 0; i < spec.impurities.size(); ++i)
    for (int j = 0; j < spec.impurities[i].N; ++j) e.emplace_back(spec.impurities[i].k, m.impurity_first[i] + j);
  return LatticeGraph(m.n_sites, e, std::vector<int>(m.n_sites, 2), m.bulk.lattice_dimension());
}

/// Spin-space image of a hard-core state vector given per block (Matsubara-Matsueda).
inline Vec boson_to_spin(const HardcoreBasis& B, const Vec& v) { return block_embedding(B) * v; }

// ---------------------------------------------------------------------------
// Impurities attached to a site of a spin graph

/// Lifts an operator on a region of G to the graph where site k carries an extra trailing factor.
inline LocalOperator lift_to_impurity(const LatticeGraph& G, const LatticeGraph& Gimp, const LocalOperator& A, Site k,
                                      int impurity_dim) {
  if (!A.support().contains(k)) return LocalOperator(Gimp, A.support(), A.matrix());
  std::vector<int> dims;
  std::vector<char> mask;
  for (Site x : A.support()) {
    dims.push_back(G.site_dim(x));
    mask.push_back(1);
    if (x == k) {
      dims.push_back(impurity_dim);
      mask.push_back(0);
    }
  }
  detail::SplitIndex sp = detail::split_index(dims, mask);
  const Index d = A.dim() * impurity_dim;
  Mat M = Mat::Zero(d, d);
  const Mat& a = A.matrix();
  for (Index r : sp.outer)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = 0; i < a.rows(); ++i) M(sp.inner[i] + r, sp.inner[j] + r) = a(i, j);
  return LocalOperator(Gimp, A.support(), M);
}

struct ImpurityModel {
  LatticeGraph graph;  ///< site k has dimension d_k * impurity_dim
  HamiltonianPath path;
  Site k = 0;
  int impurity_dim = 1;
};

/// Single-site coupling operators between the bulk spin at k and a spin-1/2 impurity.
inline Mat impurity_coupling_matrix(const std::string& preset, int impurity_dim) {
  if (impurity_dim == 1) {
    if (preset == "field") return (pauli::X() + pauli::Z()) / std::sqrt(2.0);
    throw ConfigError("preset '" + preset + "' needs a spin-1/2 impurity");
  }
  if (impurity_dim != 2) throw ConfigError("coupling presets support impurity dimension 1 or 2");
  if (preset == "hopping_ramp") return 0.5 * (kron(pauli::X(), pauli::X()) + kron(pauli::Y(), pauli::Y()));
  if (preset == "exchange_ramp")
    return kron(pauli::X(), pauli::X()) + kron(pauli::Y(), pauli::Y()) + kron(pauli::Z(), pauli::Z());
  if (preset == "ising_xx") return kron(pauli::X(), pauli::X());
  throw ConfigError("unknown impurity coupling preset '" + preset + "'");
}

/// Enlarges site k by an impurity factor; bulk terms act trivially on it; W(s) = f(s) w C on site k.
inline ImpurityModel attach_impurity(const LatticeGraph& G, const InteractionFamily& Phi, Site k, int impurity_dim,
                                     const Mat& coupling, double strength, Profile f = Profile::ramp()) {
  std::vector<int> dims = G.site_dims();
  dims[k] *= impurity_dim;
  LatticeGraph Gi = G.with_site_dims(dims);
  InteractionFamily lifted;
  for (const LocalOperator& t : Phi.terms()) lifted.add(Gi, lift_to_impurity(G, Gi, t, k, impurity_dim));
  PerturbationPath W;
  if (coupling.rows() != dims[k]) throw SupportError("coupling does not act on H_k (x) I_k");
  if (strength != 0.0) W.add(k, LocalOperator(Gi, Region{k}, strength * coupling, true), std::move(f));
  return ImpurityModel{Gi, HamiltonianPath(Gi, lifted, W), k, impurity_dim};
}

// ---------------------------------------------------------------------------
// Toric code

struct ToricCode {
  int L = 2;
  LatticeGraph qubits;  ///< qubits adjacent when their edges share a vertex
  InteractionFamily phi;
  std::vector<Region> stars, plaquettes;
  int Lstar = 1;

  static int h_edge(int L, int x, int y) { return ((x % L + L) % L) + L * ((y % L + L) % L); }
  static int v_edge(int L, int x, int y) { return L * L + ((x % L + L) % L) + L * ((y % L + L) % L); }
};

inline ToricCode build_toric_code(int L, double J_star = 1.0, double J_plaq = 1.0) {
  if (L < 2 || L > 3) throw Error("toric code supports L = 2 or 3");
  ToricCode tc;
  tc.L = L;
  tc.Lstar = L - 1;
  const int nq = 2 * L * L;
  // endpoints of each edge
  std::vector<std::pair<int, int>> ends(nq);
  auto vid = [L](int x, int y) { return ((x % L + L) % L) + L * ((y % L + L) % L); };
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) {
      ends[ToricCode::h_edge(L, x, y)] = {vid(x, y), vid(x + 1, y)};
      ends[ToricCode::v_edge(L, x, y)] = {vid(x, y), vid(x, y + 1)};
    }
  std::vector<std::pair<Site, Site>> e;
  for (int a = 0; a < nq; ++a)
    for (int b = a + 1; b < nq; ++b)
      if (ends[a].first == ends[b].first || ends[a].first == ends[b].second || ends[a].second == ends[b].first ||
          ends[a].second == ends[b].second)
        e.emplace_back(a, b);
  tc.qubits = LatticeGraph(nq, e, std::vector<int>(nq, 2), 2);
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) {
      std::vector<std::pair<Site, Mat>> star = {{ToricCode::h_edge(L, x, y), pauli::X()},
                                                {ToricCode::h_edge(L, x - 1, y), pauli::X()},
                                                {ToricCode::v_edge(L, x, y), pauli::X()},
                                                {ToricCode::v_edge(L, x, y - 1), pauli::X()}};
      std::vector<std::pair<Site, Mat>> plaq = {{ToricCode::h_edge(L, x, y), pauli::Z()},
                                                {ToricCode::h_edge(L, x, y + 1), pauli::Z()},
                                                {ToricCode::v_edge(L, x, y), pauli::Z()},
                                                {ToricCode::v_edge(L, x + 1, y), pauli::Z()}};
      LocalOperator A = product_operator(tc.qubits, star);
      LocalOperator B = product_operator(tc.qubits, plaq);
      tc.stars.push_back(A.support());
      tc.plaquettes.push_back(B.support());
      tc.phi.add(tc.qubits, LocalOperator(tc.qubits, A.support(), -J_star * A.matrix()));
      tc.phi.add(tc.qubits, LocalOperator(tc.qubits, B.support(), -J_plaq * B.matrix()));
    }
  return tc;
}

struct TQOResult {
  cplx z;
  double deviation = 0.0;
};

/// A support fits an L*-square when its diameter in the qubit metric is below L*.
inline bool fits_lstar(const LatticeGraph& G, const Region& support, int Lstar) {
  return G.region_diameter(support) < Lstar;
}

/// z = Tr(PAP)/Tr(P) and ||PAP - zP||, with P given by an orthonormal basis of its range.
inline TQOResult tqo_check(const LatticeGraph& G, const Mat& basis, const LocalOperator& A, int Lstar) {
  if (!fits_lstar(G, A.support(), Lstar)) throw NotApplicable("probe support does not fit an L*-square");
  Mat AB(basis.rows(), basis.cols());
  for (Index c = 0; c < basis.cols(); ++c) AB.col(c) = apply(G, A, Vec(basis.col(c)));
  Mat M = basis.adjoint() * AB;  // compression of A to the range of P
  TQOResult r;
  r.z = M.trace() / static_cast<double>(basis.cols());
  r.deviation = operator_norm(M - r.z * Mat::Identity(M.rows(), M.cols()));
  return r;
}

}  // namespace qlocal
