#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <lapacke.h>

#include "qlocal/types.hpp"

namespace qlocal {

/// Relative Hermiticity test: ||A - A^dag|| <= tol * ||A|| (max-abs entries).
inline bool is_hermitian(const Mat& A, double tol = 1e-12) {
  if (A.rows() != A.cols()) return false;
  double scale = A.cwiseAbs().maxCoeff();
  double defect = (A - A.adjoint()).cwiseAbs().maxCoeff();
  return defect <= tol * std::max(scale, 1e-300);
}

inline Mat hermitian_part(const Mat& A) { return 0.5 * (A + A.adjoint()); }

struct DenseEigen {
  RVec values;  ///< ascending
  Mat vectors;  ///< columns
};

/// Full Hermitian eigendecomposition (LAPACK zheevd). Only the upper triangle is read.
inline DenseEigen dense_eigh(const Mat& H, bool want_vectors = true) {
  if (H.rows() != H.cols()) throw Error("dense_eigh: matrix not square");
  const lapack_int n = static_cast<lapack_int>(H.rows());
  DenseEigen out;
  out.values.resize(n);
  if (n == 0) return out;
  Mat A = H;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'U', n,
                                   reinterpret_cast<lapack_complex_double*>(A.data()), n, out.values.data());
  if (info != 0) throw Error("zheevd failed with info=" + std::to_string(info));
  if (want_vectors) out.vectors = std::move(A);
  return out;
}

inline RVec eigvalsh(const Mat& H) { return dense_eigh(H, false).values; }

/// exp(i t H) for Hermitian H, exactly unitary.
inline Mat expi_hermitian(const Mat& H, double t) {
  DenseEigen e = dense_eigh(H);
  Vec phases = (kI * t * e.values.cast<cplx>()).array().exp();
  return e.vectors * phases.asDiagonal() * e.vectors.adjoint();
}

inline Vec random_unit_vector(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = cplx(nd(rng), nd(rng));
  return v / v.norm();
}

inline Mat random_hermitian(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat A(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) A(i, j) = cplx(nd(rng), nd(rng));
  return hermitian_part(A);
}

using LinearMap = std::function<void(const Vec& in, Vec& out)>;

struct LanczosOptions {
  int k = 1;                 ///< number of lowest eigenpairs
  double tol = 1e-9;         ///< residual ||Hv - lambda v|| per pair
  int max_iter = 600;        ///< Krylov dimension cap per pair
  std::uint64_t seed = 0x5eed5eedULL;
};

struct LanczosResult {
  RVec values;
  Mat vectors;
  std::vector<double> residuals;
  int matvecs = 0;
};

/// Lowest-k eigenpairs of a Hermitian map by Lanczos with full reorthogonalization.
/// Pairs are found one at a time; each new Krylov space is kept orthogonal to the locked
/// vectors, which resolves degenerate eigenvalues one copy per pass.
inline LanczosResult lanczos_lowest(const LinearMap& apply, Index dim, const LanczosOptions& opt) {
  if (opt.k < 1 || opt.k > dim) throw Error("lanczos: k out of range");
  std::mt19937_64 rng(opt.seed);
  LanczosResult res;
  std::vector<Vec> locked;
  std::vector<double> locked_vals;

  auto project_out_locked = [&](Vec& w) {
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& q : locked) w -= q * q.dot(w);
  };

  const int max_iter = static_cast<int>(std::min<Index>(opt.max_iter, dim - static_cast<Index>(locked.size())));
  for (int target = 0; target < opt.k; ++target) {
    std::vector<Vec> basis;
    std::vector<double> alpha, beta;
    Vec v = random_unit_vector(dim, rng);
    project_out_locked(v);
    v /= v.norm();
    basis.push_back(v);
    Vec w(dim);
    double best_res = std::numeric_limits<double>::infinity();
    bool converged = false;
    double theta = 0.0;
    Vec ritz;
    const int cap = std::max(1, std::min(max_iter, static_cast<int>(dim - static_cast<Index>(locked.size()))));
    for (int j = 0; j < cap; ++j) {
      apply(basis[j], w);
      ++res.matvecs;
      double a = basis[j].dot(w).real();
      alpha.push_back(a);
      w -= a * basis[j];
      if (j > 0) w -= beta[j - 1] * basis[j - 1];
      project_out_locked(w);
      for (int pass = 0; pass < 2; ++pass)
        for (const Vec& q : basis) w -= q * q.dot(w);
      double b = w.norm();
      const int m = j + 1;
      const bool exhausted = b < 1e-13 || m == cap;
      if (m % 4 == 0 || exhausted || m < 4) {
        RMat T = RMat::Zero(m, m);
        for (int i = 0; i < m; ++i) {
          T(i, i) = alpha[i];
          if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<RMat> tri(T);
        theta = tri.eigenvalues()[0];
        double est = std::abs(b * tri.eigenvectors()(m - 1, 0));
        best_res = std::min(best_res, est);
        if (est <= 0.1 * opt.tol || exhausted) {
          ritz = Vec::Zero(dim);
          for (int i = 0; i < m; ++i) ritz += tri.eigenvectors()(i, 0) * basis[i];
          project_out_locked(ritz);
          ritz /= ritz.norm();
          Vec hr(dim);
          apply(ritz, hr);
          ++res.matvecs;
          theta = ritz.dot(hr).real();
          double true_res = (hr - theta * ritz).norm();
          best_res = std::min(best_res, true_res);
          if (true_res <= opt.tol) {
            converged = true;
            best_res = true_res;
            break;
          }
          if (exhausted) break;
        }
      }
      beta.push_back(b);
      basis.push_back(w / b);
    }
    if (!converged) throw ConvergenceError("lanczos did not converge", best_res);
    locked.push_back(ritz);
    locked_vals.push_back(theta);
    res.residuals.push_back(best_res);
  }

  std::vector<int> order(locked.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return locked_vals[a] < locked_vals[b]; });
  res.values.resize(opt.k);
  res.vectors.resize(dim, opt.k);
  std::vector<double> sorted_res(opt.k);
  for (int i = 0; i < opt.k; ++i) {
    res.values[i] = locked_vals[order[i]];
    res.vectors.col(i) = locked[order[i]];
    sorted_res[i] = res.residuals[order[i]];
  }
  res.residuals = sorted_res;
  return res;
}

/// Largest singular value. Dense SVD for small matrices; Lanczos on M^dag M otherwise.
inline double operator_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  if (M.rows() <= 96 || M.cols() <= 96) {
    Eigen::JacobiSVD<Mat> svd(M);
    return svd.singularValues()[0];
  }
  // Largest eigenvalue of M^dag M via the lowest of -(M^dag M).
  LanczosOptions opt;
  opt.k = 1;
  double scale = M.cwiseAbs2().sum();  // Frobenius^2 bounds the top eigenvalue
  opt.tol = 1e-13 * std::max(scale, 1e-300);
  opt.max_iter = 400;
  Vec tmp(M.rows());
  LinearMap neg_gram = [&](const Vec& in, Vec& out) {
    tmp.noalias() = M * in;
    out.noalias() = -(M.adjoint() * tmp);
  };
  try {
    LanczosResult r = lanczos_lowest(neg_gram, M.cols(), opt);
    return std::sqrt(std::max(0.0, -r.values[0]));
  } catch (const ConvergenceError&) {
    Eigen::BDCSVD<Mat> svd(M);
    return svd.singularValues()[0];
  }
}

}  // namespace qlocal
