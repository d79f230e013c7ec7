#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qlocal/interactions.hpp"
#include "qlocal/parallel.hpp"
#include "qlocal/quadrature.hpp"
#include "qlocal/sectors.hpp"

namespace qlocal {

// ---------------------------------------------------------------------------
// Gaussian filter

struct FilterParams {
  double alpha = 0.0;
  double T = 0.0;
  int l = 0;
  double mu_prime = 0.0;  ///< decay rate per unit l of the common exponent
  double exponent = 0.0;  ///< mu g l / (g + 4 C_mu ||Phi||'_mu)
  std::vector<double> nodes;
  std::vector<double> a;
};

/// alpha and T balancing the Gaussian tail, the time cutoff and the Lieb-Robinson leakage.
inline FilterParams choose_filter_params(double g, double mu, double C_mu, double phi_prime_norm, double v, int l) {
  if (l <= 0) throw Error("filter parameters need l > 0");
  if (!(v > 0.0)) throw Error("filter parameters need a positive Lieb-Robinson velocity");
  if (!(g > 0.0) || !(mu > 0.0) || !(C_mu > 0.0) || !(phi_prime_norm > 0.0))
    throw Error("filter parameters need positive g, mu, C_mu and ||Phi||'");
  const double c4 = 4.0 * C_mu * phi_prime_norm;
  FilterParams p;
  p.l = l;
  p.alpha = g * (g + c4) / (4.0 * mu * l);
  p.T = c4 * l / ((g + c4) * v);
  p.mu_prime = mu * g / (g + c4);
  p.exponent = p.mu_prime * l;
  return p;
}

/// The three tail exponents g^2/(4 alpha), alpha T^2 and mu (l - v T).
inline std::array<double, 3> filter_exponents(const FilterParams& p, double g, double mu, double v) {
  return {g * g / (4.0 * p.alpha), p.alpha * p.T * p.T, mu * (p.l - v * p.T)};
}

/// sum_kappa exp(-(kappa - lambda)^2 / (4 alpha)) Q_kappa.
inline Mat gaussian_filtered_projector(const SpectralData& S, double lambda, double alpha) {
  return S.apply_function([&](double k) { return cplx(std::exp(-(k - lambda) * (k - lambda) / (4.0 * alpha))); });
}

struct FilterCoefficients {
  std::vector<double> nodes;
  std::vector<double> a;
  double condition = 1.0;
  std::vector<std::string> warnings;
};

/// Solves sum_lambda a_lambda exp(-(kappa - lambda)^2 / (4 alpha)) = 1 for every kappa in the node set.
inline FilterCoefficients solve_filter_coefficients(const std::vector<double>& nodes, double alpha) {
  const Index m = static_cast<Index>(nodes.size());
  if (m == 0) throw Error("no filter nodes");
  for (Index i = 1; i < m; ++i)
    if (!(nodes[i] - nodes[i - 1] > kClusterTol)) throw Error("filter nodes must be distinct and ascending");
  RMat A(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      double d = nodes[i] - nodes[j];
      A(i, j) = std::exp(-d * d / (4.0 * alpha));
    }
  Eigen::JacobiSVD<RMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  FilterCoefficients out;
  out.nodes = nodes;
  out.condition = svd.singularValues()[0] / svd.singularValues()[m - 1];
  if (!(out.condition <= 1e12))
    throw Error("Gaussian filter system is ill-conditioned (cond " + std::to_string(out.condition) +
                "); use a smaller alpha");
  RVec a = svd.solve(RVec::Ones(m));
  out.a.assign(a.data(), a.data() + m);
  for (Index i = 0; i < m; ++i)
    if (!(a[i] > 0.0 && a[i] < 1.0) && !(m == 1 && a[i] == 1.0))
      out.warnings.push_back("filter coefficient a[" + std::to_string(i) + "] = " + std::to_string(a[i]) +
                             " outside (0,1)");
  return out;
}

/// sum_lambda a_lambda P_lambda.
inline Mat filtered_projector(const SpectralData& S, const std::vector<double>& nodes, const std::vector<double>& a,
                              double alpha) {
  return S.apply_function([&](double k) {
    double f = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) f += a[i] * std::exp(-(k - nodes[i]) * (k - nodes[i]) / (4.0 * alpha));
    return cplx(f);
  });
}

/// sqrt(alpha/pi) int_{-T}^{T} exp(-alpha t^2) exp(i omega t) dt on a given rule over [0, T].
inline double truncated_gaussian_weight(double omega, double alpha, const QuadratureRule& q) {
  const double pref = 2.0 * std::sqrt(alpha / std::numbers::pi);
  double s = 0.0;
  for (std::size_t n = 0; n < q.size(); ++n) s += q.weights[n] * std::exp(-alpha * q.nodes[n] * q.nodes[n]) * std::cos(omega * q.nodes[n]);
  return pref * s;
}

/// sqrt(alpha/pi) int dt exp(-alpha t^2) exp(it(H - lambda)) by panel-doubled Gauss-Legendre quadrature on the
/// window alpha T^2 = 40, where the discarded Gaussian tail is below 1e-17.
inline Mat gaussian_filtered_projector_quadrature(const SpectralData& S, double lambda, double alpha,
                                                  double tol = 1e-12, int max_doublings = 12) {
  if (!(alpha > 0.0)) throw Error("Gaussian filter needs alpha > 0");
  const double T = std::sqrt(40.0 / alpha);
  double wmax = 0.0;
  for (Index i = 0; i < S.values.size(); ++i) wmax = std::max(wmax, std::abs(S.values[i] - lambda));
  int panels = std::max(1, static_cast<int>(std::ceil(wmax * T / 6.0)));
  QuadratureRule q = composite_gauss_legendre(0.0, T, panels);
  auto eval = [&](const QuadratureRule& r) {
    return S.apply_function([&](double k) { return cplx(truncated_gaussian_weight(k - lambda, alpha, r)); });
  };
  Mat cur = eval(q);
  for (int it = 0; it < max_doublings; ++it) {
    panels *= 2;
    Mat next = eval(composite_gauss_legendre(0.0, T, panels));
    double change = operator_norm(next - cur);
    cur = std::move(next);
    if (change < tol) return cur;
  }
  throw ConvergenceError("Gaussian filter quadrature did not converge", 0.0);
}

// ---------------------------------------------------------------------------
// The operator R^{<=T}

struct RBuild {
  Mat R;                    ///< on the full space
  double constant = 0.0;    ///< coefficient of the identity (time-independent part outside [-T, T])
  int panels = 0;           ///< Gauss-Legendre panels on [0, T]
  double quad_change = 0.0; ///< bound on ||R(panels) - R(panels/2)||
};

struct RBuildOptions {
  double quad_tol = 1e-10;
  int max_doublings = 12;
};

/// R = sum_lambda a_lambda sqrt(alpha/pi) [ int_R dt e^{-alpha t^2} e^{it(lambda_i0 - lambda)}
///     + int_{-T}^{T} dt e^{-alpha t^2} e^{it(lambda_i0 - lambda)} (e^{itH} e^{-itH0} - 1) ],
/// i.e. the Dyson expansion of the time integral with all terms of order >= 1 restricted to |t| <= T.
/// Evaluated exactly in the two eigenbases with composite Gauss-Legendre quadrature in t.
inline RBuild build_R(const SpectralData& S0, const SpectralData& S, double lambda_i0, const FilterParams& p,
                      const Mat* overlap = nullptr, const RBuildOptions& opt = {}) {
  if (!S0.complete || !S.complete) throw Error("build_R needs full spectral data");
  if (S0.dim() != S.dim()) throw Error("build_R: spectral data on different spaces");
  if (p.a.size() != p.nodes.size() || p.a.empty()) throw Error("build_R: filter coefficients missing");
  const Index dim = S.dim();
  const double alpha = p.alpha, T = p.T;

  double shift_max = 0.0, sum_abs_a = 0.0;
  for (std::size_t j = 0; j < p.nodes.size(); ++j) {
    shift_max = std::max(shift_max, std::abs(lambda_i0 - p.nodes[j]));
    sum_abs_a += std::abs(p.a[j]);
  }
  const double omega_max = std::max(std::abs(S.values.maxCoeff() - S0.values.minCoeff()),
                                    std::abs(S.values.minCoeff() - S0.values.maxCoeff())) + shift_max;

  // Choose the panel count from a scalar check over the frequency band: every matrix entry of K is an
  // a-weighted combination of such scalar integrals, so max|dK| <= sum|a| * max|dw|, and
  // ||dK o X|| <= ||dK o X||_F <= max|dK| sqrt(dim).
  int panels = std::max(1, static_cast<int>(std::ceil(omega_max * T / 6.0)));
  const int n_probe = 65;
  double change = std::numeric_limits<double>::infinity();
  QuadratureRule coarse = composite_gauss_legendre(0.0, T, panels);
  for (int it = 0; it <= opt.max_doublings; ++it) {
    QuadratureRule fine = composite_gauss_legendre(0.0, T, 2 * panels);
    double dmax = 0.0;
    for (int k = 0; k < n_probe; ++k) {
      double w = omega_max * k / (n_probe - 1);
      dmax = std::max(dmax, std::abs(truncated_gaussian_weight(w, alpha, fine) - truncated_gaussian_weight(w, alpha, coarse)));
    }
    change = dmax * sum_abs_a * (1.0 + std::sqrt(static_cast<double>(dim)));
    panels *= 2;
    coarse = std::move(fine);
    if (change < opt.quad_tol) break;
  }
  if (!(change < opt.quad_tol)) throw ConvergenceError("quadrature for R did not converge", change);

  const QuadratureRule& q = coarse;
  const Index N = static_cast<Index>(q.size());
  const double pref = 2.0 * std::sqrt(alpha / std::numbers::pi);
  Vec weighted(N);
  for (Index n = 0; n < N; ++n) {
    double t = q.nodes[n];
    cplx beta = 0.0;
    for (std::size_t j = 0; j < p.nodes.size(); ++j) beta += p.a[j] * std::exp(kI * t * (lambda_i0 - p.nodes[j]));
    weighted[n] = pref * q.weights[n] * std::exp(-alpha * t * t) * beta;
  }
  Mat E(dim, N), E0c(N, dim);
  for (Index n = 0; n < N; ++n) {
    double t = q.nodes[n];
    for (Index a = 0; a < dim; ++a) E(a, n) = std::exp(kI * t * S.values[a]) * weighted[n];
    for (Index b = 0; b < dim; ++b) E0c(n, b) = std::exp(-kI * t * S0.values[b]);
  }
  Mat K = (E * E0c).real().cast<cplx>();

  double c = 0.0;
  for (std::size_t j = 0; j < p.nodes.size(); ++j) {
    double w = lambda_i0 - p.nodes[j];
    c += p.a[j] * (std::exp(-w * w / (4.0 * alpha)) - truncated_gaussian_weight(w, alpha, q));
  }

  Mat X = overlap ? *overlap : Mat(S.vectors.adjoint() * S0.vectors);
  Mat KX = K.cwiseProduct(X);
  RBuild out;
  out.R = S.vectors * KX * S0.vectors.adjoint();
  out.R.diagonal().array() += c;
  out.constant = c;
  out.panels = panels;
  out.quad_change = change;
  return out;
}

/// Normalized partial trace of R onto K_l (R given on the full space of G).
inline LocalOperator localize_R(const LatticeGraph& G, const Mat& R, const Region& K, int l) {
  Region Kl = fatten(G, K, l);
  return LocalOperator(G, Kl, partial_trace_localize(G, R, G.all_sites(), Kl));
}

// ---------------------------------------------------------------------------
// Single step

struct LocalityInputs {
  LRConstants lr;
  double g = 0.0;
};

/// Filter parameters and coefficients for radius l, sector nodes from `sec`.
inline FilterParams make_filter(const LocalityInputs& in, int l, const SectorSpectrum& sec,
                                std::vector<std::string>* warnings = nullptr) {
  FilterParams p = choose_filter_params(in.g, in.lr.mu, in.lr.C_mu, in.lr.phi_prime_norm, in.lr.v, l);
  FilterCoefficients fc = solve_filter_coefficients(distinct_values(sec.sigma_in), p.alpha);
  p.nodes = fc.nodes;
  p.a = fc.a;
  if (warnings)
    for (auto& w : fc.warnings) warnings->push_back(w);
  return p;
}

struct WeakStepPoint {
  int l = 0;
  FilterParams filter;
  std::vector<double> error;              ///< ||(P' - R_i^l) psi_i||
  std::vector<double> error_unlocalized;  ///< ||(P' - R_i) psi_i||
  std::vector<double> tail;               ///< ||(sum a P_lambda - R_i) psi_i||, the discarded |t| > T part
  std::vector<double> r_norm;             ///< ||R_i^l||
  int panels = 0;
};

struct WeakStepResult {
  LocalityInputs locality;
  double s0 = 0.0, eps = 0.0;
  int D = 0;
  std::vector<WeakStepPoint> points;
  std::vector<std::string> warnings;
};

struct WeakStepOptions {
  SectorRule rule = SectorRule::fixed(1);
  std::vector<int> l_grid;
  int gap_checks = 5;
  int workers = 1;
};

/// R_i^l for the step s0 -> s0 + eps and the errors ||(P(s0+eps) - R_i^l) psi_i(s0)|| over the l-grid.
inline WeakStepResult weak_step(const HamiltonianPath& path, const LRConstants& lr, double s0, double eps,
                                const WeakStepOptions& opt) {
  const LatticeGraph& G = path.graph();
  WeakStepResult res;
  res.s0 = s0;
  res.eps = eps;
  res.locality.lr = lr;
  GapSummary gs = verify_gap_along_path(path, opt.rule, std::max(2, opt.gap_checks), s0, s0 + eps);
  res.locality.g = gs.g_min;

  SpectralData S0 = eigendecompose(path.dense(s0), EigenMode::Dense);
  SpectralData S1 = eigendecompose(path.dense(s0 + eps), EigenMode::Dense);
  SectorSpectrum sec0 = identify_sector(S0, opt.rule, s0);
  SectorSpectrum sec1 = identify_sector(S1, opt.rule, s0 + eps);
  if (sec0.D != sec1.D) throw GapClosed(s0 + eps, 0.0);
  res.D = sec0.D;
  const Mat P1 = sec1.projector();
  const Mat X = S1.vectors.adjoint() * S0.vectors;
  const Region K = path.perturbation().sites();

  res.points.resize(opt.l_grid.size());
  std::vector<std::vector<std::string>> warn(opt.l_grid.size());
  parallel_for(opt.l_grid.size(), opt.workers, [&](std::size_t li) {
    WeakStepPoint& pt = res.points[li];
    pt.l = opt.l_grid[li];
    pt.filter = make_filter(res.locality, pt.l, sec1, &warn[li]);
    Mat Pfilt = filtered_projector(S1, pt.filter.nodes, pt.filter.a, pt.filter.alpha);
    for (int i = 0; i < sec0.D; ++i) {
      const Vec psi = sec0.basis.col(i);
      RBuild rb = build_R(S0, S1, sec0.sigma_in[i], pt.filter, &X);
      pt.panels = std::max(pt.panels, rb.panels);
      LocalOperator Rl = localize_R(G, rb.R, K, pt.l);
      Vec target = P1 * psi;
      pt.error.push_back((target - apply(G, Rl, psi)).norm());
      pt.error_unlocalized.push_back((target - rb.R * psi).norm());
      pt.tail.push_back((Pfilt * psi - rb.R * psi).norm());
      pt.r_norm.push_back(Rl.norm());
    }
  });
  for (auto& w : warn) res.warnings.insert(res.warnings.end(), w.begin(), w.end());
  return res;
}

// ---------------------------------------------------------------------------
// Step coefficients and path transport

struct StepCoefficients {
  Mat c;                       ///< psi_i(next) = sum_j c_ij P(next) psi_j(prev)
  std::vector<double> row_l1;  ///< ||c_i||_1
  double bound = 0.0;          ///< 2 sqrt(D)
  bool within_bound = true;
};

inline StepCoefficients solve_step_coefficients(const SectorSpectrum& prev, const SectorSpectrum& next) {
  if (prev.D != next.D) throw StepTooLarge("sector dimension changed between steps");
  const Index D = prev.D;
  // M_mj = <psi_m(next), psi_j(prev)>: P(next) psi_j(prev) = sum_m psi_m(next) M_mj.
  Mat M = next.basis.adjoint() * prev.basis;
  Mat gram = M.adjoint() * M;  // Gram matrix of the projected vectors
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  if (es.eigenvalues()[0] < 1e-14) throw StepTooLarge("projected sector vectors are linearly dependent");
  // c M^T = 1  <=>  c^T = M^{-1} = gram^{-1} M^dag
  Mat cT = gram.ldlt().solve(M.adjoint());
  StepCoefficients sc;
  sc.c = cT.transpose();
  sc.bound = 2.0 * std::sqrt(static_cast<double>(D));
  for (Index i = 0; i < D; ++i) {
    double r = sc.c.row(i).cwiseAbs().sum();
    sc.row_l1.push_back(r);
    if (r > sc.bound) sc.within_bound = false;
  }
  return sc;
}

struct TransportOptions {
  SectorRule rule = SectorRule::fixed(1);
  std::vector<int> l_grid;
  int n_start = 10;
  int n_cap = 10000;
  int workers = 1;
  std::optional<Mat> initial_basis;  ///< replaces the s = 0 sector basis (must span the same space)
};

struct TransportLevel {
  int l = 0;
  Region Kl;
  FilterParams last_filter;
  std::vector<Mat> L;              ///< D*D operators on H_{K_l}, row-major (i, j)
  std::vector<double> error;       ///< ||psi_i(1) - sum_j L_ij psi_j(0)||
  double norm_max = 0.0;           ///< max_ij ||L_ij||
  double accumulated_bound = 1.0;  ///< prod_m max_i sum_j |c_ij| ||R_j||

  const Mat& at(int i, int j, int D) const { return L[static_cast<std::size_t>(i) * D + j]; }
};

struct TransportSet {
  LocalityInputs locality;
  int n = 0;
  int D = 0;
  std::vector<StepCoefficients> steps;
  Mat basis0, basis1;  ///< sector bases at s = 0 and s = 1
  std::vector<TransportLevel> levels;
  std::vector<std::string> warnings;
  int doublings = 0;
};

namespace detail {

struct PathSamples {
  std::vector<SpectralData> spectra;
  std::vector<SectorSpectrum> sectors;
  std::vector<StepCoefficients> steps;
};

inline std::optional<PathSamples> sample_path(const HamiltonianPath& path, int n, const TransportOptions& opt) {
  PathSamples ps;
  for (int m = 0; m <= n; ++m) {
    double s = static_cast<double>(m) / n;
    ps.spectra.push_back(eigendecompose(path.dense(s), EigenMode::Dense));
    SectorSpectrum sec = identify_sector(ps.spectra.back(), opt.rule, s);
    if (m == 0 && opt.initial_basis) {
      const Mat& B = *opt.initial_basis;
      if (B.cols() != sec.D || B.rows() != sec.basis.rows()) throw Error("initial basis has wrong shape");
      Mat P = sec.projector();
      if ((P * B - B).norm() > 1e-8 || (B.adjoint() * B - Mat::Identity(sec.D, sec.D)).norm() > 1e-10)
        throw Error("initial basis is not an orthonormal basis of the s = 0 sector");
      sec.basis = B;
    }
    if (m > 0) {
      try {
        sec = align_phases(ps.sectors.back(), sec);
        StepCoefficients sc = solve_step_coefficients(ps.sectors.back(), sec);
        if (!sc.within_bound) return std::nullopt;
        ps.steps.push_back(sc);
      } catch (const StepTooLarge&) {
        return std::nullopt;
      }
    }
    ps.sectors.push_back(std::move(sec));
  }
  return ps;
}

}  // namespace detail

/// Iterated transport L_ij^l over the whole path with an adaptive step count.
inline TransportSet path_transport(const HamiltonianPath& path, const LRConstants& lr, const TransportOptions& opt) {
  const LatticeGraph& G = path.graph();
  TransportSet ts;
  ts.locality.lr = lr;
  int n = opt.n_start;
  std::optional<detail::PathSamples> ps;
  while (true) {
    ps = detail::sample_path(path, n, opt);
    if (ps) break;
    if (2 * n > opt.n_cap) throw StepTooLarge("step count cap exceeded in path transport");
    n *= 2;
    ++ts.doublings;
  }
  ts.n = n;
  ts.D = ps->sectors.front().D;
  ts.steps = ps->steps;
  ts.basis0 = ps->sectors.front().basis;
  ts.basis1 = ps->sectors.back().basis;
  double g = std::numeric_limits<double>::infinity();
  for (const auto& sec : ps->sectors) g = std::min(g, sec.gap);
  ts.locality.g = g;

  const Region K = path.perturbation().sites();
  const int D = ts.D;
  ts.levels.resize(opt.l_grid.size());
  std::vector<std::vector<std::string>> warn(opt.l_grid.size());
  parallel_for(opt.l_grid.size(), opt.workers, [&](std::size_t li) {
    TransportLevel& lev = ts.levels[li];
    lev.l = opt.l_grid[li];
    lev.Kl = fatten(G, K, lev.l);
    const Index dK = G.hilbert_dim(lev.Kl);
    std::vector<Mat> L(static_cast<std::size_t>(D) * D);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) L[i * D + j] = i == j ? Mat(Mat::Identity(dK, dK)) : Mat(Mat::Zero(dK, dK));
    for (int m = 1; m <= n; ++m) {
      const SpectralData& S0 = ps->spectra[m - 1];
      const SpectralData& S1 = ps->spectra[m];
      const SectorSpectrum& prev = ps->sectors[m - 1];
      const SectorSpectrum& next = ps->sectors[m];
      FilterParams fp = make_filter(ts.locality, lev.l, next, &warn[li]);
      lev.last_filter = fp;
      const Mat X = S1.vectors.adjoint() * S0.vectors;
      std::vector<Mat> R(D);
      std::vector<double> Rn(D);
      for (int j = 0; j < D; ++j) {
        RBuild rb = build_R(S0, S1, prev.sigma_in[j], fp, &X);
        R[j] = partial_trace_localize(G, rb.R, G.all_sites(), lev.Kl);
        Rn[j] = operator_norm(R[j]);
      }
      const Mat& c = ps->steps[m - 1].c;
      double step_bound = 0.0;
      for (int i = 0; i < D; ++i) {
        double b = 0.0;
        for (int j = 0; j < D; ++j) b += std::abs(c(i, j)) * Rn[j];
        step_bound = std::max(step_bound, b);
      }
      lev.accumulated_bound *= step_bound;
      std::vector<Mat> RL(static_cast<std::size_t>(D) * D);
      for (int jp = 0; jp < D; ++jp)
        for (int j = 0; j < D; ++j) RL[jp * D + j] = R[jp] * L[jp * D + j];
      std::vector<Mat> next_L(static_cast<std::size_t>(D) * D, Mat::Zero(dK, dK));
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
          for (int jp = 0; jp < D; ++jp) next_L[i * D + j] += c(i, jp) * RL[jp * D + j];
      L = std::move(next_L);
    }
    for (int i = 0; i < D; ++i) {
      Vec recon = Vec::Zero(ts.basis0.rows());
      for (int j = 0; j < D; ++j)
        recon += apply(G, LocalOperator(G, lev.Kl, L[i * D + j]), Vec(ts.basis0.col(j)));
      lev.error.push_back((Vec(ts.basis1.col(i)) - recon).norm());
    }
    for (const Mat& m : L) lev.norm_max = std::max(lev.norm_max, operator_norm(m));
    lev.L = std::move(L);
  });
  for (auto& w : warn) ts.warnings.insert(ts.warnings.end(), w.begin(), w.end());
  return ts;
}

// ---------------------------------------------------------------------------
// Impurity transformation

/// Basis psi_gs (x) phi_i of the uncoupled sector, where the impurity factor is the trailing factor of
/// site k. psi_gs is a vector on the bulk space (site k with its bulk dimension).
inline Mat product_sector_basis(const LatticeGraph& G, Site k, int impurity_dim, const Vec& psi_gs) {
  const Index dim = G.hilbert_dim();
  if (psi_gs.size() * impurity_dim != dim) throw Error("product basis: dimension mismatch");
  std::vector<int> dims = G.site_dims();
  dims[k] /= impurity_dim;
  dims.insert(dims.begin() + k + 1, impurity_dim);
  std::vector<char> mask(dims.size(), 0);
  mask[k + 1] = 1;
  detail::SplitIndex sp = detail::split_index(dims, mask);  // inner: impurity index, outer: bulk index
  Mat B = Mat::Zero(dim, impurity_dim);
  for (int i = 0; i < impurity_dim; ++i)
    for (Index r = 0; r < static_cast<Index>(sp.outer.size()); ++r) B(sp.inner[i] + sp.outer[r], i) = psi_gs[r];
  return B;
}

/// Checks that the columns of B are of the form psi (x) phi_i on the impurity factor of site k.
inline double product_structure_defect(const LatticeGraph& G, Site k, int impurity_dim, const Mat& B) {
  // Reduced density matrix of the bulk part must have rank one for a product sector.
  std::vector<int> dims = G.site_dims();
  dims[k] /= impurity_dim;
  dims.insert(dims.begin() + k + 1, impurity_dim);
  std::vector<char> mask(dims.size(), 0);
  mask[k + 1] = 1;
  detail::SplitIndex sp = detail::split_index(dims, mask);
  const Index nb = static_cast<Index>(sp.outer.size());
  Mat rho = Mat::Zero(nb, nb);
  for (Index c = 0; c < B.cols(); ++c) {
    Mat psi(impurity_dim, nb);
    for (int i = 0; i < impurity_dim; ++i)
      for (Index r = 0; r < nb; ++r) psi(i, r) = B(sp.inner[i] + sp.outer[r], c);
    rho += psi.transpose() * psi.conjugate();
  }
  rho /= static_cast<double>(B.cols());
  RVec ev = eigvalsh(rho);
  return ev.head(ev.size() - 1).cwiseAbs().sum();
}

struct ImpurityTransform {
  int l = 0;
  LocalOperator T;
  double error = 0.0;  ///< ||P' - T P T^dag||
};

/// T_l = sum_ij L_ij^l I_ji with I_ji = 1 (x) |phi_j><phi_i| on the impurity factor of site k.
inline ImpurityTransform impurity_transform(const LatticeGraph& G, const TransportSet& ts, std::size_t level,
                                            Site k, int impurity_dim) {
  const TransportLevel& lev = ts.levels.at(level);
  if (ts.D != impurity_dim) throw Error("impurity transform needs D equal to the impurity dimension");
  if (!lev.Kl.contains(k)) throw SupportError("impurity site outside K_l");
  if (product_structure_defect(G, k, impurity_dim, ts.basis0) > 1e-8)
    throw Error("unperturbed sector is not a product of a bulk state and the impurity space");
  const int D = ts.D;
  const Index dk = G.site_dim(k);
  const Index dbulk = dk / impurity_dim;
  Mat T = Mat::Zero(lev.L.front().rows(), lev.L.front().cols());
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      Mat ket_bra = Mat::Zero(impurity_dim, impurity_dim);
      ket_bra(j, i) = 1.0;
      LocalOperator Iji(G, Region{k}, kron(Mat::Identity(dbulk, dbulk), ket_bra));
      T += lev.at(i, j, D) * embed_matrix(G, Iji, lev.Kl);
    }
  ImpurityTransform out;
  out.l = lev.l;
  out.T = LocalOperator(G, lev.Kl, T);
  Mat Tfull = embed_matrix(G, out.T, G.all_sites());
  Mat P = ts.basis0 * ts.basis0.adjoint();
  Mat P1 = ts.basis1 * ts.basis1.adjoint();
  out.error = operator_norm(P1 - Tfull * P * Tfull.adjoint());
  return out;
}

}  // namespace qlocal
