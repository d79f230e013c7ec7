#pragma once

#include <cmath>

#include "qlocal/linalg.hpp"
#include "qlocal/operator.hpp"

namespace qlocal {

enum class EigenMode { Auto, Dense, Iterative };

/// Dense path is used up to this dimension in Auto mode.
inline constexpr Index kDenseLimit = Index(1) << 13;

struct SpectralData {
  RVec values;        ///< ascending
  Mat vectors;        ///< orthonormal columns
  double residual_tol = 0.0;
  bool complete = false;  ///< full spectrum available

  Index dim() const { return vectors.rows(); }
  Index count() const { return values.size(); }

  /// Spectral function f(H) = V f(Lambda) V^dag (complete data only).
  template <class F>
  Mat apply_function(F&& f) const {
    if (!complete) throw Error("spectral function needs the full spectrum");
    Vec fv(values.size());
    for (Index i = 0; i < values.size(); ++i) fv[i] = f(values[i]);
    return vectors * fv.asDiagonal() * vectors.adjoint();
  }
};

inline SpectralData from_dense(DenseEigen e, const Mat& H) {
  SpectralData S;
  S.values = std::move(e.values);
  S.vectors = std::move(e.vectors);
  S.complete = true;
  double scale = std::max(1.0, S.values.size() ? S.values.cwiseAbs().maxCoeff() : 0.0);
  // zheevd is backward stable; record the measured worst residual.
  if (S.values.size() <= 4096) {
    Mat R = H * S.vectors - S.vectors * S.values.cast<cplx>().asDiagonal();
    S.residual_tol = R.colwise().norm().maxCoeff();
  } else {
    S.residual_tol = 1e-13 * scale * std::sqrt(static_cast<double>(S.values.size()));
  }
  return S;
}

inline SpectralData eigendecompose(const Mat& H, EigenMode mode = EigenMode::Auto, int k = 0,
                                   double tol = 1e-10) {
  if (!is_hermitian(H)) throw Error("eigendecompose: matrix is not Hermitian");
  if (mode == EigenMode::Auto) mode = H.rows() <= kDenseLimit ? EigenMode::Dense : EigenMode::Iterative;
  if (mode == EigenMode::Dense) return from_dense(dense_eigh(H), H);
  if (k < 1) throw Error("iterative eigensolver needs k >= 1");
  LanczosOptions opt;
  opt.k = k;
  opt.tol = tol;
  LinearMap op = [&H](const Vec& in, Vec& out) { out.noalias() = H * in; };
  LanczosResult r = lanczos_lowest(op, H.rows(), opt);
  SpectralData S;
  S.values = r.values;
  S.vectors = r.vectors;
  S.residual_tol = *std::max_element(r.residuals.begin(), r.residuals.end());
  return S;
}

/// Lowest-k pairs of a sparse Hermitian matrix (Lanczos), or the full spectrum when small.
inline SpectralData eigendecompose(const SparseMat& H, EigenMode mode = EigenMode::Auto, int k = 0,
                                   double tol = 1e-10) {
  if (mode == EigenMode::Auto) mode = H.rows() <= kDenseLimit ? EigenMode::Dense : EigenMode::Iterative;
  if (mode == EigenMode::Dense) return eigendecompose(Mat(H), EigenMode::Dense);
  if (k < 1) throw Error("iterative eigensolver needs k >= 1");
  SparseMat Hd = H.adjoint();
  if ((Hd - H).norm() > 1e-12 * std::max(1.0, H.norm())) throw Error("eigendecompose: matrix is not Hermitian");
  LanczosOptions opt;
  opt.k = k;
  opt.tol = tol;
  LinearMap op = [&H](const Vec& in, Vec& out) { out.noalias() = H * in; };
  LanczosResult r = lanczos_lowest(op, H.rows(), opt);
  SpectralData S;
  S.values = r.values;
  S.vectors = r.vectors;
  S.residual_tol = *std::max_element(r.residuals.begin(), r.residuals.end());
  return S;
}

inline SpectralData eigendecompose(const LocalOperator& H, EigenMode mode = EigenMode::Auto, int k = 0) {
  return eigendecompose(H.matrix(), mode, k);
}

/// Heisenberg evolution e^{iHt} A e^{-iHt} from a complete decomposition of H.
inline Mat evolve(const Mat& A, double t, const SpectralData& S) {
  if (!S.complete) throw Error("evolve needs the full spectrum");
  if (A.rows() != S.dim()) throw Error("evolve: dimension mismatch");
  Vec ph = (kI * t * S.values.cast<cplx>()).array().exp();
  Mat U = S.vectors * ph.asDiagonal() * S.vectors.adjoint();
  return U * A * U.adjoint();
}

/// Evolution of A in the eigenbasis: returns V^dag tau_t(A) V given Ae = V^dag A V.
inline Mat evolve_eigenbasis(const Mat& Ae, double t, const RVec& values) {
  Mat out = Ae;
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) *= std::exp(kI * t * (values[i] - values[j]));
  return out;
}

}  // namespace qlocal
