#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "qlocal/interactions.hpp"
#include "qlocal/spectral.hpp"

namespace qlocal {

inline constexpr double kGapTol = 1e-10;
inline constexpr double kClusterTol = 1e-9;

struct SectorRule {
  enum class Kind { FixedD, EnergyWindow };
  Kind kind = Kind::FixedD;
  int D = 1;           ///< FixedD: number of lowest eigenvalues
  double width = 0.0;  ///< EnergyWindow: [E_min, E_min + width]

  static SectorRule fixed(int d) { return {Kind::FixedD, d, 0.0}; }
  static SectorRule window(double w) { return {Kind::EnergyWindow, 0, w}; }
};

struct SectorSpectrum {
  double s = std::numeric_limits<double>::quiet_NaN();
  RVec sigma_in;   ///< with multiplicity, ascending
  RVec sigma_out;  ///< remaining computed eigenvalues
  double gap = 0.0;
  double width = 0.0;
  int D = 0;
  Mat basis;  ///< columns psi_i
  double residual_tol = 0.0;

  Mat projector() const { return basis * basis.adjoint(); }
};

/// Sector eigenvalues merged into distinct filter nodes (values within `tol` of the cluster start).
inline std::vector<double> distinct_values(const RVec& v, double tol = kClusterTol) {
  std::vector<double> out;
  for (Index i = 0; i < v.size(); ++i) {
    if (out.empty() || v[i] - out.back() > tol) out.push_back(v[i]);
  }
  return out;
}

inline SectorSpectrum identify_sector(const SpectralData& S, const SectorRule& rule,
                                      double s = std::numeric_limits<double>::quiet_NaN()) {
  const Index n = S.values.size();
  Index D = 0;
  if (rule.kind == SectorRule::Kind::FixedD) {
    D = rule.D;
    if (D < 1 || D > n) throw Error("sector dimension out of range for available spectrum");
  } else {
    if (n == 0) throw Error("empty spectrum");
    while (D < n && S.values[D] <= S.values[0] + rule.width) ++D;
  }
  SectorSpectrum sec;
  sec.s = s;
  sec.D = static_cast<int>(D);
  sec.sigma_in = S.values.head(D);
  sec.sigma_out = S.values.tail(n - D);
  sec.width = S.values[D - 1] - S.values[0];
  sec.residual_tol = S.residual_tol;
  if (D == n && S.complete) {
    sec.gap = std::numeric_limits<double>::infinity();
  } else if (D == n) {
    throw Error("sector fills the computed spectrum; request more eigenpairs");
  } else {
    // Sorted spectrum: the closest cross pair is adjacent at the boundary.
    sec.gap = S.values[D] - S.values[D - 1];
  }
  if (sec.gap < kGapTol) throw GapClosed(s, sec.gap);
  sec.basis = S.vectors.leftCols(D);
  return sec;
}

/// Dense spectral data of H(s), or the lowest k pairs when the space is too large.
inline SpectralData path_spectrum(const HamiltonianPath& path, double s, int k_iterative = 0) {
  if (path.dim() <= kDenseLimit) return eigendecompose(path.dense(s), EigenMode::Dense);
  return eigendecompose(path.sparse(s), EigenMode::Iterative, k_iterative);
}

struct GapSummary {
  double g_min = std::numeric_limits<double>::infinity();
  double width_max = 0.0;
  double s_at_min = 0.0;
};

/// Gap and sector width on an equally spaced grid of n_check points in [s_begin, s_end].
inline GapSummary verify_gap_along_path(const HamiltonianPath& path, const SectorRule& rule, int n_check,
                                        double s_begin = 0.0, double s_end = 1.0, int k_iterative = 0) {
  if (n_check < 1) throw Error("n_check must be positive");
  GapSummary out;
  for (int j = 0; j < n_check; ++j) {
    double s = n_check == 1 ? s_begin : s_begin + (s_end - s_begin) * j / (n_check - 1);
    SectorSpectrum sec = identify_sector(path_spectrum(path, s, k_iterative), rule, s);
    if (sec.gap < out.g_min) {
      out.g_min = sec.gap;
      out.s_at_min = s;
    }
    out.width_max = std::max(out.width_max, sec.width);
  }
  return out;
}

/// Re-phase `next` (and re-mix inside degenerate blocks) so that its overlap with `prev` has a
/// positive definite Hermitian part.
inline SectorSpectrum align_phases(const SectorSpectrum& prev, SectorSpectrum next, double cluster_tol = kClusterTol) {
  if (prev.D != next.D) throw StepTooLarge("sector dimension changed between steps");
  const Index D = next.D;
  Mat O = prev.basis.adjoint() * next.basis;  // O_ij = <psi_i(prev), psi_j(next)>
  Eigen::JacobiSVD<Mat> full(O);
  if (full.singularValues()[D - 1] < 1e-8) throw StepTooLarge("overlap of consecutive sector bases is singular");
  Index start = 0;
  while (start < D) {
    Index end = start + 1;
    while (end < D && next.sigma_in[end] - next.sigma_in[end - 1] <= cluster_tol) ++end;
    const Index m = end - start;
    Mat blk = O.block(start, start, m, m);
    Eigen::JacobiSVD<Mat> svd(blk, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // A cluster whose diagonal overlap block is singular has no preferred gauge relative to prev (prev
    // itself was degenerate there); it is left as is.
    if (svd.singularValues()[m - 1] < 1e-8) {
      start = end;
      continue;
    }
    // blk = W S V^dag; right-multiplying by V W^dag leaves W S W^dag.
    Mat X = svd.matrixV() * svd.matrixU().adjoint();
    next.basis.middleCols(start, m) = next.basis.middleCols(start, m) * X;
    start = end;
  }
  return next;
}

}  // namespace qlocal
