#pragma once

#include <utility>
#include <vector>

#include "qlocal/lattice.hpp"
#include "qlocal/linalg.hpp"

namespace qlocal {

namespace detail {

/// Index split of a tensor product over an ordered site list into a chosen subset and the rest.
/// Full index of (subset index a, rest index r) is inner[a] + outer[r].
struct SplitIndex {
  std::vector<Index> inner;
  std::vector<Index> outer;
};

inline SplitIndex split_index(const std::vector<int>& dims, const std::vector<char>& in_subset) {
  const std::size_t n = dims.size();
  std::vector<Index> stride(n, 1);
  for (std::size_t i = n; i-- > 1;) stride[i - 1] = stride[i] * dims[i];
  SplitIndex out;
  out.inner = {0};
  out.outer = {0};
  // Site 0 is the most significant factor, so walk the sites in order and expand each list.
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Index>& list = in_subset[i] ? out.inner : out.outer;
    std::vector<Index> next;
    next.reserve(list.size() * dims[i]);
    for (Index base : list)
      for (int d = 0; d < dims[i]; ++d) next.push_back(base + d * stride[i]);
    list = std::move(next);
  }
  return out;
}

inline SplitIndex split_index(const LatticeGraph& G, const Region& outer_space, const Region& subset) {
  if (!outer_space.contains(subset)) throw SupportError("support is not contained in the target region");
  std::vector<int> dims;
  std::vector<char> mask;
  for (Site x : outer_space) {
    dims.push_back(G.site_dim(x));
    mask.push_back(subset.contains(x) ? 1 : 0);
  }
  return split_index(dims, mask);
}

}  // namespace detail

/// Matrix on the tensor product of the site spaces in `support` (vertex-id order).
class LocalOperator {
 public:
  LocalOperator() = default;

  LocalOperator(const LatticeGraph& G, Region support, Mat matrix, bool require_hermitian = false)
      : support_(std::move(support)), matrix_(std::move(matrix)) {
    const Index dim = G.hilbert_dim(support_);
    for (Site x : support_)
      if (x < 0 || x >= G.num_sites()) throw SupportError("support site outside graph");
    if (matrix_.rows() != dim || matrix_.cols() != dim)
      throw Error("operator dimension " + std::to_string(matrix_.rows()) + " does not match support dimension " +
                  std::to_string(dim));
    hermitian_ = is_hermitian(matrix_);
    if (require_hermitian && !hermitian_) throw Error("operator is not Hermitian");
  }

  static LocalOperator identity(const LatticeGraph& G, const Region& support) {
    Index d = G.hilbert_dim(support);
    return LocalOperator(G, support, Mat::Identity(d, d));
  }

  const Region& support() const { return support_; }
  const Mat& matrix() const { return matrix_; }
  Index dim() const { return matrix_.rows(); }
  bool hermitian() const { return hermitian_; }

  double norm() const {
    if (hermitian_) {
      RVec ev = eigvalsh(matrix_);
      return ev.size() ? std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1])) : 0.0;
    }
    return operator_norm(matrix_);
  }

 private:
  Region support_;
  Mat matrix_;
  bool hermitian_ = false;
};

/// Matrix of A (x) 1 on H_Lambda.
inline Mat embed_matrix(const LatticeGraph& G, const LocalOperator& A, const Region& Lambda) {
  if (A.support() == Lambda) return A.matrix();
  detail::SplitIndex sp = detail::split_index(G, Lambda, A.support());
  const Index D = G.hilbert_dim(Lambda);
  Mat M = Mat::Zero(D, D);
  const Mat& a = A.matrix();
  for (Index r : sp.outer)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = 0; i < a.rows(); ++i) M(sp.inner[i] + r, sp.inner[j] + r) = a(i, j);
  return M;
}

inline LocalOperator embed(const LatticeGraph& G, const LocalOperator& A, const Region& Lambda) {
  return LocalOperator(G, Lambda, embed_matrix(G, A, Lambda));
}

/// Sparse version of embed_matrix; entries of A below `drop` are skipped.
inline SparseMat embed_sparse(const LatticeGraph& G, const LocalOperator& A, const Region& Lambda,
                              double drop = 0.0) {
  detail::SplitIndex sp = detail::split_index(G, Lambda, A.support());
  const Index D = G.hilbert_dim(Lambda);
  const Mat& a = A.matrix();
  std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> trip;
  std::size_t nnz_local = 0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (std::abs(a(i, j)) > drop) ++nnz_local;
  trip.reserve(nnz_local * sp.outer.size());
  for (Index r : sp.outer)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = 0; i < a.rows(); ++i)
        if (std::abs(a(i, j)) > drop) trip.emplace_back(sp.inner[i] + r, sp.inner[j] + r, a(i, j));
  SparseMat M(D, D);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

/// Normalized partial trace of an operator on Lambda over Lambda \ X.
inline Mat partial_trace_localize(const LatticeGraph& G, const Mat& A, const Region& Lambda, const Region& X) {
  if (A.rows() != G.hilbert_dim(Lambda)) throw Error("partial trace: dimension mismatch");
  if (X == Lambda) return A;
  detail::SplitIndex sp = detail::split_index(G, Lambda, X);
  const Index dX = static_cast<Index>(sp.inner.size());
  Mat out = Mat::Zero(dX, dX);
  for (Index r : sp.outer)
    for (Index j = 0; j < dX; ++j)
      for (Index i = 0; i < dX; ++i) out(i, j) += A(sp.inner[i] + r, sp.inner[j] + r);
  return out / static_cast<double>(sp.outer.size());
}

inline LocalOperator partial_trace_localize(const LatticeGraph& G, const LocalOperator& A, const Region& X) {
  if (!A.support().contains(X)) throw SupportError("partial trace: region not inside operator support");
  return LocalOperator(G, X, partial_trace_localize(G, A.matrix(), A.support(), X));
}

/// (A (x) 1) psi for psi in H_Lambda, without forming the embedded matrix.
inline Vec apply(const LatticeGraph& G, const LocalOperator& A, const Vec& psi, const Region& Lambda) {
  if (psi.size() != G.hilbert_dim(Lambda)) throw Error("apply: vector dimension mismatch");
  detail::SplitIndex sp = detail::split_index(G, Lambda, A.support());
  const Index dA = A.dim();
  const Index nR = static_cast<Index>(sp.outer.size());
  Mat blk(dA, nR);
  for (Index r = 0; r < nR; ++r)
    for (Index a = 0; a < dA; ++a) blk(a, r) = psi[sp.inner[a] + sp.outer[r]];
  Mat res = A.matrix() * blk;
  Vec out(psi.size());
  for (Index r = 0; r < nR; ++r)
    for (Index a = 0; a < dA; ++a) out[sp.inner[a] + sp.outer[r]] = res(a, r);
  return out;
}

inline Vec apply(const LatticeGraph& G, const LocalOperator& A, const Vec& psi) {
  return apply(G, A, psi, G.all_sites());
}

/// Product AB as an operator on the union of the supports.
inline LocalOperator multiply(const LatticeGraph& G, const LocalOperator& A, const LocalOperator& B) {
  Region U = A.support() | B.support();
  return LocalOperator(G, U, embed_matrix(G, A, U) * embed_matrix(G, B, U));
}

inline LocalOperator add(const LatticeGraph& G, const LocalOperator& A, const LocalOperator& B) {
  Region U = A.support() | B.support();
  return LocalOperator(G, U, embed_matrix(G, A, U) + embed_matrix(G, B, U));
}

/// Largest singular value of AB - BA.
inline double commutator_norm(const Mat& A, const Mat& B) { return operator_norm(A * B - B * A); }

inline double commutator_norm(const LatticeGraph& G, const LocalOperator& A, const LocalOperator& B) {
  Region U = A.support() | B.support();
  return commutator_norm(embed_matrix(G, A, U), embed_matrix(G, B, U));
}

// ---------------------------------------------------------------------------
// Single-site operators

namespace pauli {

inline Mat I() { return Mat::Identity(2, 2); }
inline Mat X() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Mat Y() {
  Mat m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}
/// Basis order |0> = up (+1), |1> = down (-1).
inline Mat Z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
inline Mat by_name(char c) {
  switch (c) {
    case 'I': return I();
    case 'X': return X();
    case 'Y': return Y();
    case 'Z': return Z();
  }
  throw Error(std::string("unknown Pauli '") + c + "'");
}

}  // namespace pauli

inline Mat kron(const Mat& A, const Mat& B) {
  Mat out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

/// Operator `m` acting on the first factor of a site whose space is d_site = m.rows() * d_rest.
inline Mat on_leading_factor(const Mat& m, Index d_site) {
  if (d_site % m.rows() != 0) throw Error("factor dimension does not divide site dimension");
  return kron(m, Mat::Identity(d_site / m.rows(), d_site / m.rows()));
}

/// Single-site operator on site x of G. When the site space is larger than m (an attached impurity),
/// m acts on the leading (bulk) factor.
inline LocalOperator site_operator(const LatticeGraph& G, Site x, const Mat& m) {
  const Index d = G.site_dim(x);
  return LocalOperator(G, Region{x}, m.rows() == d ? m : on_leading_factor(m, d));
}

/// Product of single-site operators; the factors must sit on distinct sites.
inline LocalOperator product_operator(const LatticeGraph& G, const std::vector<std::pair<Site, Mat>>& factors) {
  std::vector<std::pair<Site, Mat>> f = factors;
  std::sort(f.begin(), f.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Site> sites;
  Mat m = Mat::Identity(1, 1);
  for (auto& [x, op] : f) {
    if (!sites.empty() && sites.back() == x) throw Error("product_operator: repeated site");
    sites.push_back(x);
    Index d = G.site_dim(x);
    m = kron(m, op.rows() == d ? op : on_leading_factor(op, d));
  }
  return LocalOperator(G, Region(sites), m);
}

}  // namespace qlocal
