#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "qlocal/operator.hpp"

namespace qlocal {

/// F_mu(d) = exp(-mu d) F0(d) with F0 non-increasing; default F0(d) = (1+d)^{-(nu+1)}.
struct DecayFunctions {
  double mu = 0.0;
  int nu = 1;
  std::function<double(int)> F0;

  DecayFunctions() : DecayFunctions(0.0, 1) {}
  DecayFunctions(double mu_, int nu_) : mu(mu_), nu(nu_) {
    F0 = [p = nu_ + 1.0](int d) { return std::pow(1.0 + d, -p); };
  }
  DecayFunctions(double mu_, int nu_, std::function<double(int)> f0) : mu(mu_), nu(nu_), F0(std::move(f0)) {}

  double F(int d) const { return std::exp(-mu * d) * F0(d); }
  DecayFunctions with_mu(double m) const { return DecayFunctions(m, nu, F0); }
};

/// sup_x sum_y F_mu(d(x,y)) on the finite graph.
inline double f_norm(const DecayFunctions& D, const LatticeGraph& G) {
  double best = 0.0;
  for (Site x = 0; x < G.num_sites(); ++x) {
    double s = 0.0;
    for (Site y = 0; y < G.num_sites(); ++y) s += D.F(G.distance(x, y));
    best = std::max(best, s);
  }
  return best;
}

/// sup_{x,y} sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y)).
inline double convolution_constant(const DecayFunctions& D, const LatticeGraph& G) {
  const int n = G.num_sites();
  const int dmax = G.diameter();
  std::vector<double> F(dmax + 1);
  for (int d = 0; d <= dmax; ++d) F[d] = D.F(d);
  double best = 0.0;
  for (Site x = 0; x < n; ++x)
    for (Site y = x; y < n; ++y) {
      double s = 0.0;
      for (Site z = 0; z < n; ++z) s += F[G.distance(x, z)] * F[G.distance(z, y)];
      best = std::max(best, s / F[G.distance(x, y)]);
    }
  return best;
}

/// Map from regions to Hermitian local operators. Terms on the same region are summed.
class InteractionFamily {
 public:
  InteractionFamily() = default;

  void add(const LatticeGraph& G, const LocalOperator& term) {
    if (!term.hermitian()) throw Error("interaction terms must be Hermitian");
    auto it = index_.find(term.support());
    if (it == index_.end()) {
      index_.emplace(term.support(), terms_.size());
      terms_.push_back(term);
      norms_.push_back(term.norm());
    } else {
      LocalOperator& t = terms_[it->second];
      t = LocalOperator(G, t.support(), t.matrix() + term.matrix(), true);
      norms_[it->second] = t.norm();
    }
  }

  const std::vector<LocalOperator>& terms() const { return terms_; }
  double term_norm(std::size_t i) const { return norms_[i]; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  std::vector<Region> supports(bool skip_zero = true) const {
    std::vector<Region> out;
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (!skip_zero || norms_[i] > 0.0) out.push_back(terms_[i].support());
    return out;
  }

  /// Largest support diameter over nonzero terms.
  int range(const LatticeGraph& G) const {
    int r = 0;
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (norms_[i] > 0.0) r = std::max(r, G.region_diameter(terms_[i].support()));
    return r;
  }

 private:
  std::vector<LocalOperator> terms_;
  std::vector<double> norms_;
  std::map<Region, std::size_t> index_;
};

/// sup_{x,y} sum_{X containing x,y} ||Phi(X)|| / F_mu(d(x,y)); the primed variant skips |X| = 1.
inline double interaction_norm(const InteractionFamily& Phi, const DecayFunctions& D, const LatticeGraph& G,
                               bool drop_single_site) {
  const int n = G.num_sites();
  std::vector<double> acc(static_cast<std::size_t>(n) * n, 0.0);
  for (std::size_t t = 0; t < Phi.size(); ++t) {
    const Region& X = Phi.terms()[t].support();
    if (drop_single_site && X.size() == 1) continue;
    for (Site x : X)
      for (Site y : X) acc[static_cast<std::size_t>(x) * n + y] += Phi.term_norm(t);
  }
  double best = 0.0;
  for (Site x = 0; x < n; ++x)
    for (Site y = 0; y < n; ++y) {
      double a = acc[static_cast<std::size_t>(x) * n + y];
      if (a > 0.0) best = std::max(best, a / D.F(G.distance(x, y)));
    }
  return best;
}

inline double lr_velocity(double phi_prime_norm, double C_mu, double mu) {
  if (!(mu > 0.0)) throw Error("Lieb-Robinson velocity needs mu > 0");
  return 2.0 * phi_prime_norm * C_mu / mu;
}

inline double lr_velocity(const InteractionFamily& Phi, const DecayFunctions& D, const LatticeGraph& G) {
  return lr_velocity(interaction_norm(Phi, D, G, true), convolution_constant(D, G), D.mu);
}

/// Locality length scale 1/mu + 2v/g.
inline double xi(double mu, double v, double g) {
  if (!(mu > 0.0)) throw Error("xi needs mu > 0");
  if (!(g > 0.0)) throw Error("xi needs g > 0");
  return 1.0 / mu + 2.0 * v / g;
}

/// Finite-volume Lieb-Robinson constants of an interaction on a graph.
struct LRConstants {
  double mu = 0.0;
  int nu = 1;
  double f_norm = 0.0;   ///< ||F_mu||
  double f0_norm = 0.0;  ///< ||F_0|| (mu = 0)
  double C_mu = 0.0;
  double phi_norm = 0.0;
  double phi_prime_norm = 0.0;
  double v = 0.0;
};

inline LRConstants lr_constants(const InteractionFamily& Phi, const DecayFunctions& D, const LatticeGraph& G) {
  LRConstants c;
  c.mu = D.mu;
  c.nu = D.nu;
  c.f_norm = f_norm(D, G);
  c.f0_norm = f_norm(D.with_mu(0.0), G);
  c.C_mu = convolution_constant(D, G);
  c.phi_norm = interaction_norm(Phi, D, G, false);
  c.phi_prime_norm = interaction_norm(Phi, D, G, true);
  c.v = lr_velocity(c.phi_prime_norm, c.C_mu, c.mu);
  return c;
}

/// (2||F_0||/C_mu) ||A|| ||B|| min(|dX|, |dY|) exp(-mu (d(X,Y) - v|t|)).
inline double lr_bound_rhs(const LatticeGraph& G, const InteractionFamily& Phi, const LRConstants& c,
                           const Region& X, double normA, const Region& Y, double normB, double t) {
  if (X.intersects(Y)) throw SupportError("lr bound needs disjoint supports");
  std::vector<Region> sup = Phi.supports();
  double bx = static_cast<double>(phi_boundary(X, sup).size());
  double by = static_cast<double>(phi_boundary(Y, sup).size());
  return 2.0 * c.f0_norm / c.C_mu * normA * normB * std::min(bx, by) *
         std::exp(-c.mu * (G.distance(X, Y) - c.v * std::abs(t)));
}

// ---------------------------------------------------------------------------
// Hamiltonian assembly

inline Mat assemble_dense(const LatticeGraph& G, const InteractionFamily& Phi, const Region& Lambda) {
  const Index D = G.hilbert_dim(Lambda);
  Mat H = Mat::Zero(D, D);
  for (const LocalOperator& t : Phi.terms()) {
    if (!Lambda.contains(t.support())) continue;
    detail::SplitIndex sp = detail::split_index(G, Lambda, t.support());
    const Mat& a = t.matrix();
    for (Index r : sp.outer)
      for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) H(sp.inner[i] + r, sp.inner[j] + r) += a(i, j);
  }
  return H;
}

inline SparseMat assemble_sparse(const LatticeGraph& G, const InteractionFamily& Phi, const Region& Lambda) {
  const Index D = G.hilbert_dim(Lambda);
  SparseMat H(D, D);
  for (const LocalOperator& t : Phi.terms()) {
    if (!Lambda.contains(t.support())) continue;
    H += embed_sparse(G, t, Lambda, 1e-15);
  }
  H.prune(cplx(0.0), 1e-15);
  return H;
}

/// Piecewise-linear scalar profile f(s) on [0,1] with f(0) = 0.
class Profile {
 public:
  Profile() : s_{0.0, 1.0}, v_{0.0, 1.0} {}
  Profile(std::vector<double> knots, std::vector<double> values) : s_(std::move(knots)), v_(std::move(values)) {
    if (s_.size() < 2 || s_.size() != v_.size()) throw Error("profile needs matching knot lists of length >= 2");
    if (s_.front() != 0.0 || s_.back() != 1.0) throw Error("profile knots must span [0,1]");
    for (std::size_t i = 1; i < s_.size(); ++i)
      if (!(s_[i] > s_[i - 1])) throw Error("profile knots must increase");
    if (v_.front() != 0.0) throw Error("perturbation profile must vanish at s = 0");
  }
  static Profile ramp() { return Profile(); }

  double operator()(double s) const {
    std::size_t i = segment(s);
    double w = (s - s_[i]) / (s_[i + 1] - s_[i]);
    return (1.0 - w) * v_[i] + w * v_[i + 1];
  }
  double derivative(double s) const {
    std::size_t i = segment(s);
    return (v_[i + 1] - v_[i]) / (s_[i + 1] - s_[i]);
  }

 private:
  std::size_t segment(double s) const {
    s = std::clamp(s, 0.0, 1.0);
    std::size_t i = std::upper_bound(s_.begin(), s_.end(), s) - s_.begin();
    return std::min(i == 0 ? 0 : i - 1, s_.size() - 2);
  }
  std::vector<double> s_, v_;
};

struct PathTerm {
  Site site;  ///< perturbation site k_i this term belongs to
  LocalOperator op;
  Profile profile;
};

/// W(s) = sum_m f_m(s) W_m, grouped by perturbation site.
class PerturbationPath {
 public:
  PerturbationPath() = default;

  void add(Site k, LocalOperator op, Profile f = Profile::ramp()) {
    if (!op.hermitian()) throw Error("perturbation terms must be Hermitian");
    if (!op.support().contains(k)) throw SupportError("perturbation term must act on its site");
    terms_.push_back({k, std::move(op), std::move(f)});
  }

  const std::vector<PathTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  Region sites() const {
    std::vector<Site> k;
    for (const auto& t : terms_) k.push_back(t.site);
    return Region(k);
  }
  Region support() const {
    Region r;
    for (const auto& t : terms_) r = r | t.op.support();
    return r;
  }

  Mat dense(const LatticeGraph& G, const Region& Lambda, double s) const { return combine(G, Lambda, s, false); }
  Mat derivative(const LatticeGraph& G, const Region& Lambda, double s) const {
    return combine(G, Lambda, s, true);
  }

  /// max_s ||dW/ds|| from forward differences on an s-grid.
  double C_W(const LatticeGraph& G, int grid = 1001) const {
    if (terms_.empty()) return 0.0;
    Region U = support();
    double best = 0.0;
    Mat prev = dense(G, U, 0.0);
    for (int j = 1; j < grid; ++j) {
      double s = static_cast<double>(j) / (grid - 1);
      Mat cur = dense(G, U, s);
      best = std::max(best, operator_norm((cur - prev) * static_cast<double>(grid - 1)));
      prev = std::move(cur);
    }
    return best;
  }

 private:
  Mat combine(const LatticeGraph& G, const Region& Lambda, double s, bool deriv) const {
    const Index D = G.hilbert_dim(Lambda);
    Mat W = Mat::Zero(D, D);
    for (const auto& t : terms_) {
      double f = deriv ? t.profile.derivative(s) : t.profile(s);
      if (f == 0.0) continue;
      detail::SplitIndex sp = detail::split_index(G, Lambda, t.op.support());
      const Mat& a = t.op.matrix();
      for (Index r : sp.outer)
        for (Index j = 0; j < a.cols(); ++j)
          for (Index i = 0; i < a.rows(); ++i) W(sp.inner[i] + r, sp.inner[j] + r) += f * a(i, j);
    }
    return W;
  }

  std::vector<PathTerm> terms_;
};

/// H(s) = H^Phi_Lambda + W(s) on the whole graph.
class HamiltonianPath {
 public:
  HamiltonianPath(LatticeGraph G, InteractionFamily Phi, PerturbationPath W)
      : G_(std::move(G)), Phi_(std::move(Phi)), W_(std::move(W)), cache_(std::make_shared<Cache>()) {
    Region all = G_.all_sites();
    for (const auto& t : Phi_.terms())
      if (!all.contains(t.support())) throw SupportError("interaction support outside graph");
    for (const auto& t : W_.terms())
      if (!all.contains(t.op.support())) throw SupportError("perturbation support outside graph");
  }

  const LatticeGraph& graph() const { return G_; }
  const InteractionFamily& interaction() const { return Phi_; }
  const PerturbationPath& perturbation() const { return W_; }
  Index dim() const { return G_.hilbert_dim(); }

  const Mat& bulk_dense() const {
    std::call_once(cache_->once, [this] { cache_->H0 = assemble_dense(G_, Phi_, G_.all_sites()); });
    return cache_->H0;
  }
  Mat dense(double s) const { return bulk_dense() + W_.dense(G_, G_.all_sites(), s); }
  Mat dW(double s) const { return W_.derivative(G_, G_.all_sites(), s); }

  SparseMat sparse(double s) const {
    SparseMat H = assemble_sparse(G_, Phi_, G_.all_sites());
    for (const auto& t : W_.terms()) {
      double f = t.profile(s);
      if (f != 0.0) H += f * embed_sparse(G_, t.op, G_.all_sites(), 1e-15);
    }
    return H;
  }

 private:
  struct Cache {
    std::once_flag once;
    Mat H0;
  };
  LatticeGraph G_;
  InteractionFamily Phi_;
  PerturbationPath W_;
  std::shared_ptr<Cache> cache_;
};

}  // namespace qlocal
