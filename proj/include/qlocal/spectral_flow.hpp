#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "qlocal/interactions.hpp"
#include "qlocal/parallel.hpp"
#include "qlocal/sectors.hpp"

namespace qlocal {

// ---------------------------------------------------------------------------
// Hard-core boson configurations

using Config = std::uint64_t;

/// All configurations of n particles on `n_sites` sites (bit x set = site x occupied), ascending.
class HardcoreBasis {
 public:
  HardcoreBasis(int n_sites, int n) : n_sites_(n_sites), n_(n) {
    if (n_sites < 1 || n_sites > 62) throw Error("hard-core basis supports 1..62 sites");
    if (n < 0 || n > n_sites) throw Error("particle number out of range");
    if (n == 0) {
      configs_.push_back(0);
      return;
    }
    Config c = (Config(1) << n) - 1;
    const Config limit = Config(1) << n_sites;
    while (c < limit) {
      configs_.push_back(c);
      // next integer with the same popcount (Gosper's hack)
      Config u = c & (~c + 1);
      Config v = c + u;
      c = v + (((v ^ c) / u) >> 2);
    }
  }

  int n_sites() const { return n_sites_; }
  int particles() const { return n_; }
  Index size() const { return static_cast<Index>(configs_.size()); }
  Config operator[](Index i) const { return configs_[i]; }
  const std::vector<Config>& configs() const { return configs_; }

  Index index(Config c) const {
    auto it = std::lower_bound(configs_.begin(), configs_.end(), c);
    if (it == configs_.end() || *it != c) return -1;
    return static_cast<Index>(it - configs_.begin());
  }

  static std::vector<int> positions(Config c) {
    std::vector<int> p;
    while (c) {
      p.push_back(std::countr_zero(c));
      c &= c - 1;
    }
    return p;
  }

 private:
  int n_sites_;
  int n_;
  std::vector<Config> configs_;
};

/// Number-conserving Hamiltonian of hard-core bosons:
/// sum t (b+_x b_y + h.c.) + sum eps n_x + sum V n_x n_y + constant.
struct HardcoreTerms {
  int n_sites = 0;
  std::vector<std::tuple<int, int, double>> hopping;
  std::vector<std::pair<int, double>> potential;
  std::vector<std::tuple<int, int, double>> density;
  double constant = 0.0;

  HardcoreTerms scaled(double f) const {
    HardcoreTerms o = *this;
    for (auto& [x, y, t] : o.hopping) t *= f;
    for (auto& [x, e] : o.potential) e *= f;
    for (auto& [x, y, V] : o.density) V *= f;
    o.constant *= f;
    return o;
  }

  void append(const HardcoreTerms& other) {
    if (other.n_sites != n_sites) throw Error("hard-core terms on different site counts");
    hopping.insert(hopping.end(), other.hopping.begin(), other.hopping.end());
    potential.insert(potential.end(), other.potential.begin(), other.potential.end());
    density.insert(density.end(), other.density.begin(), other.density.end());
    constant += other.constant;
  }

  /// Sites touched by any term.
  Config support_mask() const {
    Config m = 0;
    for (auto& [x, y, t] : hopping) m |= (Config(1) << x) | (Config(1) << y);
    for (auto& [x, e] : potential) m |= Config(1) << x;
    for (auto& [x, y, V] : density) m |= (Config(1) << x) | (Config(1) << y);
    return m;
  }

  Mat block(const HardcoreBasis& B) const {
    if (B.n_sites() != n_sites) throw Error("basis and terms disagree on the site count");
    const Index d = B.size();
    Mat H = Mat::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
      const Config c = B[i];
      double diag = constant;
      for (auto& [x, e] : potential)
        if (c >> x & 1) diag += e;
      for (auto& [x, y, V] : density)
        if ((c >> x & 1) && (c >> y & 1)) diag += V;
      H(i, i) += diag;
      for (auto& [x, y, t] : hopping) {
        // b+_x b_y moves a particle y -> x; the conjugate term moves it back.
        for (int pass = 0; pass < 2; ++pass) {
          int to = pass == 0 ? x : y, from = pass == 0 ? y : x;
          if ((c >> from & 1) && !(c >> to & 1)) {
            Config c2 = (c & ~(Config(1) << from)) | (Config(1) << to);
            H(B.index(c2), i) += t;
          }
        }
      }
    }
    return H;
  }
};

/// Matsubara-Matsueda map on computational basis indices: spin up (local index 0) is an occupied site.
/// Site 0 is the most significant factor of the spin index.
inline Config spin_index_to_config(Index idx, int n_sites) {
  Config c = 0;
  for (int x = 0; x < n_sites; ++x) {
    int bit = static_cast<int>((idx >> (n_sites - 1 - x)) & 1);
    if (bit == 0) c |= Config(1) << x;
  }
  return c;
}

inline Index config_to_spin_index(Config c, int n_sites) {
  Index idx = 0;
  for (int x = 0; x < n_sites; ++x) {
    idx <<= 1;
    if (!(c >> x & 1)) idx |= 1;
  }
  return idx;
}

/// Columns of the isometry from the n-particle block into the 2^N spin space.
inline Mat block_embedding(const HardcoreBasis& B) {
  const Index D = Index(1) << B.n_sites();
  Mat E = Mat::Zero(D, B.size());
  for (Index i = 0; i < B.size(); ++i) E(config_to_spin_index(B[i], B.n_sites()), i) = 1.0;
  return E;
}

/// Spin-space matrix of the hard-core Hamiltonian (all blocks).
inline Mat spin_matrix(const HardcoreTerms& H) {
  const Index D = Index(1) << H.n_sites;
  Mat M = Mat::Zero(D, D);
  for (int n = 0; n <= H.n_sites; ++n) {
    HardcoreBasis B(H.n_sites, n);
    Mat E = block_embedding(B);
    M += E * H.block(B) * E.adjoint();
  }
  return M;
}

/// Total particle number (sum of 1/2 + S^3) on the spin space.
inline Mat number_operator(int n_sites) {
  const Index D = Index(1) << n_sites;
  Mat N = Mat::Zero(D, D);
  for (Index i = 0; i < D; ++i) N(i, i) = std::popcount(spin_index_to_config(i, n_sites));
  return N;
}

/// Configuration distance: min over matchings of the max hop distance between matched particles.
inline int config_distance(const LatticeGraph& G, Config a, Config b) {
  std::vector<int> pa = HardcoreBasis::positions(a), pb = HardcoreBasis::positions(b);
  if (pa.size() != pb.size()) throw Error("configurations with different particle numbers");
  if (pa.empty()) return 0;
  std::vector<int> perm(pb.size());
  std::iota(perm.begin(), perm.end(), 0);
  int best = std::numeric_limits<int>::max();
  do {
    int m = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) m = std::max(m, G.distance(pa[i], pb[perm[i]]));
    best = std::min(best, m);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Sector blocks along a coupling path

/// H(s) = H0 + f(s) W on hard-core configurations.
struct HardcorePath {
  HardcoreTerms H0;
  HardcoreTerms W;
  Profile f;
  Config impurity_mask = 0;  ///< sites always kept by the generator truncation
};

struct SectorBlockHamiltonian {
  int n = 0;
  HardcoreBasis basis;
  Mat H0, W;

  SectorBlockHamiltonian(const HardcorePath& path, int n_)
      : n(n_), basis(path.H0.n_sites, n_), H0(path.H0.block(basis)), W(path.W.block(basis)) {}

  Mat matrix(const HardcorePath& path, double s) const { return H0 + path.f(s) * W; }
  Mat derivative(const HardcorePath& path, double s) const { return path.f.derivative(s) * W; }
};

/// Sector data of all blocks n <= n_max at one s: the global sector is the lowest `D_total`
/// eigenvalues over all blocks.
struct BlockSectors {
  double s = 0.0;
  std::vector<SpectralData> spectra;
  std::vector<int> D;  ///< sector dimension per block
  double gap = 0.0;
  std::vector<Mat> P;  ///< per-block projector

  Mat projector(std::size_t n) const { return P[n]; }
};

inline BlockSectors block_sectors(const HardcorePath& path, const std::vector<SectorBlockHamiltonian>& blocks,
                                  double s, int D_total) {
  BlockSectors bs;
  bs.s = s;
  std::vector<std::pair<double, int>> all;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    bs.spectra.push_back(eigendecompose(blocks[b].matrix(path, s), EigenMode::Dense));
    for (Index i = 0; i < bs.spectra.back().values.size(); ++i)
      all.emplace_back(bs.spectra.back().values[i], static_cast<int>(b));
  }
  std::sort(all.begin(), all.end());
  if (D_total < 1 || D_total >= static_cast<int>(all.size())) throw Error("sector dimension out of range");
  bs.gap = all[D_total].first - all[D_total - 1].first;
  if (bs.gap < kGapTol) throw GapClosed(s, bs.gap);
  bs.D.assign(blocks.size(), 0);
  for (int i = 0; i < D_total; ++i) ++bs.D[all[i].second];
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Mat& V = bs.spectra[b].vectors;
    bs.P.push_back(V.leftCols(bs.D[b]) * V.leftCols(bs.D[b]).adjoint());
  }
  return bs;
}

inline Mat projector_derivative_resolvent(const SpectralData& S, int D, const Mat& dH) {
  const Index d = S.values.size();
  if (D == 0 || D == d) return Mat::Zero(d, d);
  Mat V_in = S.vectors.leftCols(D), V_out = S.vectors.rightCols(d - D);
  Mat M = V_out.adjoint() * dH * V_in;  // <out| dH |in>
  for (Index o = 0; o < M.rows(); ++o)
    for (Index i = 0; i < M.cols(); ++i) M(o, i) /= (S.values[i] - S.values[D + o]);
  Mat X = V_out * M * V_in.adjoint();
  return X + X.adjoint();
}

enum class DerivativeMethod { Resolvent, FiniteDifference };

/// dP^{(n)}/ds per block.
inline std::vector<Mat> projector_derivative(const HardcorePath& path, const std::vector<SectorBlockHamiltonian>& blocks,
                                             double s, int D_total, DerivativeMethod method, double h = 1e-3) {
  std::vector<Mat> out;
  if (method == DerivativeMethod::Resolvent) {
    BlockSectors bs = block_sectors(path, blocks, s, D_total);
    for (std::size_t b = 0; b < blocks.size(); ++b)
      out.push_back(projector_derivative_resolvent(bs.spectra[b], bs.D[b], blocks[b].derivative(path, s)));
    return out;
  }
  // Richardson-extrapolated central differences: (4 D(h/2) - D(h)) / 3.
  auto central = [&](double hh) {
    BlockSectors p = block_sectors(path, blocks, s + hh, D_total);
    BlockSectors m = block_sectors(path, blocks, s - hh, D_total);
    std::vector<Mat> d;
    for (std::size_t b = 0; b < blocks.size(); ++b) d.push_back((p.P[b] - m.P[b]) / (2.0 * hh));
    return d;
  };
  std::vector<Mat> d1 = central(h), d2 = central(h / 2);
  for (std::size_t b = 0; b < blocks.size(); ++b) out.push_back((4.0 * d2[b] - d1[b]) / 3.0);
  return out;
}

/// Projector derivative of a generic Hermitian path from its eigen-data.
inline Mat projector_derivative(const SpectralData& S, int D, const Mat& dH) {
  return projector_derivative_resolvent(S, D, dH);
}

/// G = i [P, dP].
inline Mat kato_generator(const Mat& P, const Mat& dP, double tol = 1e-8) {
  if ((P * P - P).norm() > tol * std::max(1.0, P.norm())) throw Error("kato_generator: input is not a projector");
  if (!is_hermitian(dP, 1e-10)) throw Error("kato_generator: derivative is not Hermitian");
  Mat G = kI * (P * dP - dP * P);
  return hermitian_part(G);
}

/// Localizes the block generators to `allowed`: G_l = A (x) 1, where A is read off from configurations with
/// no particle outside `allowed` (block n_in for n_in particles inside) and particles outside are spectators.
inline std::vector<Mat> truncate_generators(const std::vector<Mat>& G, const std::vector<SectorBlockHamiltonian>& blocks,
                                           Config allowed) {
  std::vector<Mat> out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const HardcoreBasis& B = blocks[b].basis;
    Mat Gl = Mat::Zero(B.size(), B.size());
    for (Index j = 0; j < B.size(); ++j)
      for (Index i = 0; i < B.size(); ++i) {
        if ((B[i] & ~allowed) != (B[j] & ~allowed)) continue;
        const Config ci = B[i] & allowed, cj = B[j] & allowed;
        const std::size_t m = static_cast<std::size_t>(std::popcount(ci));
        if (m >= blocks.size() || blocks[m].n != static_cast<int>(m)) throw Error("generator truncation needs every lower block");
        const HardcoreBasis& Bm = blocks[m].basis;
        Gl(i, j) = G[m](Bm.index(ci), Bm.index(cj));
      }
    out.push_back(hermitian_part(Gl));
  }
  return out;
}

/// Bits of K_l (fattening of the perturbation sites in the bulk graph) together with the impurity sites.
inline Config allowed_mask(const LatticeGraph& bulk, const Region& K, int l, Config impurity_mask) {
  Config m = impurity_mask;
  for (Site x : fatten(bulk, K, l)) m |= Config(1) << x;
  return m;
}

struct FlowTrace {
  std::vector<double> s;
  std::vector<double> error;       ///< ||P(s) - U P(0) U^dag||
  std::vector<double> unitarity;   ///< max_n ||U^dag U - 1||
  std::vector<double> trunc_norm;  ///< ||G(s_mid) - G_l(s_mid)|| per step
};

struct FlowState {
  double s = 0.0;
  std::vector<Mat> U;  ///< per block
  FlowTrace trace;
  double final_error() const { return trace.error.empty() ? 0.0 : trace.error.back(); }
};

struct FlowOptions {
  int D_total = 1;
  int n_max = 2;
  double ds = 1e-2;
  bool truncate = true;
  int l = 0;  ///< used when truncate
  DerivativeMethod derivative = DerivativeMethod::Resolvent;
};

/// Blocks n = 0..n_max of a hard-core path, with the capacity check that blocks n > N carry no sector states.
inline std::vector<SectorBlockHamiltonian> make_blocks(const HardcorePath& path, int n_max) {
  std::vector<SectorBlockHamiltonian> blocks;
  for (int n = 0; n <= std::min(n_max, path.H0.n_sites); ++n) blocks.emplace_back(path, n);
  return blocks;
}

/// Exponential-midpoint integration of -i dU/ds = G_l(s) U.
inline FlowState integrate_flow(const HardcorePath& path, const std::vector<SectorBlockHamiltonian>& blocks,
                                const LatticeGraph& bulk, const Region& K, const FlowOptions& opt) {
  const int steps = static_cast<int>(std::llround(1.0 / opt.ds));
  if (steps < 1 || std::abs(steps * opt.ds - 1.0) > 1e-9) throw Error("ds must divide [0,1] evenly");
  const Config allowed = opt.truncate ? allowed_mask(bulk, K, opt.l, path.impurity_mask) : ~Config(0);
  FlowState st;
  for (const auto& b : blocks) st.U.push_back(Mat::Identity(b.basis.size(), b.basis.size()));
  BlockSectors s0 = block_sectors(path, blocks, 0.0, opt.D_total);
  auto record = [&](double s, const BlockSectors& bs) {
    double err = 0.0, uni = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const Mat& U = st.U[b];
      err = std::max(err, operator_norm(bs.P[b] - U * s0.P[b] * U.adjoint()));
      uni = std::max(uni, operator_norm(U.adjoint() * U - Mat::Identity(U.rows(), U.cols())));
    }
    st.trace.s.push_back(s);
    st.trace.error.push_back(err);
    st.trace.unitarity.push_back(uni);
  };
  record(0.0, s0);
  for (int j = 0; j < steps; ++j) {
    const double smid = (j + 0.5) * opt.ds;
    BlockSectors mid = block_sectors(path, blocks, smid, opt.D_total);
    std::vector<Mat> dP = projector_derivative(path, blocks, smid, opt.D_total, opt.derivative);
    std::vector<Mat> G;
    for (std::size_t b = 0; b < blocks.size(); ++b) G.push_back(kato_generator(mid.P[b], dP[b]));
    std::vector<Mat> Gl = opt.truncate ? truncate_generators(G, blocks, allowed) : G;
    double tn = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      tn = std::max(tn, operator_norm(G[b] - Gl[b]));
      st.U[b] = expi_hermitian(Gl[b], opt.ds) * st.U[b];
    }
    st.trace.trunc_norm.push_back(tn);
    const double s = (j + 1) * opt.ds;
    record(s, block_sectors(path, blocks, s, opt.D_total));
  }
  st.s = 1.0;
  return st;
}

/// Number of sector states per block at s (used to assert P^{(n)} = 0 above the impurity capacity).
inline std::vector<int> sector_counts(const HardcorePath& path, const std::vector<SectorBlockHamiltonian>& blocks,
                                      double s, int D_total) {
  return block_sectors(path, blocks, s, D_total).D;
}

// ---------------------------------------------------------------------------
// Combes-Thomas profiling

struct ResolventProfile {
  std::vector<int> distance;
  std::vector<double> magnitude;  ///< max |<x|(H - z)^{-1}|x0>| at that distance
  double dist_to_spectrum = 0.0;
};

inline ResolventProfile combes_thomas_profile(const Mat& H, const HardcoreBasis& B, const LatticeGraph& G, cplx z,
                                              Config x0) {
  const Index i0 = B.index(x0);
  if (i0 < 0) throw Error("reference configuration not in block");
  RVec ev = eigvalsh(H);
  double dist = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < ev.size(); ++i) dist = std::min(dist, std::abs(cplx(ev[i]) - z));
  if (dist < 1e-8) throw Error("z is too close to the spectrum of the block");
  Mat A = H - z * Mat::Identity(H.rows(), H.cols());
  Vec e = Vec::Zero(H.rows());
  e[i0] = 1.0;
  Vec col = A.partialPivLu().solve(e);
  std::map<int, double> by_d;
  for (Index i = 0; i < B.size(); ++i) {
    int d = config_distance(G, B[i], x0);
    by_d[d] = std::max(by_d[d], std::abs(col[i]));
  }
  ResolventProfile p;
  p.dist_to_spectrum = dist;
  for (auto& [d, m] : by_d) {
    p.distance.push_back(d);
    p.magnitude.push_back(m);
  }
  return p;
}

/// Decay rate of (-Delta + u - z)^{-1} on Z for real z below the band: cosh(kappa) = 1 + (u - z)/2.
inline double free_resolvent_rate(double u, double z) {
  if (!(u - z > 0.0)) throw Error("z must lie below the band");
  return std::acosh(1.0 + (u - z) / 2.0);
}

}  // namespace qlocal
