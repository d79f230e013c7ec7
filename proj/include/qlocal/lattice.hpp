#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "qlocal/types.hpp"

namespace qlocal {

using Site = int;

/// Sorted set of vertex ids.
class Region {
 public:
  Region() = default;
  Region(std::initializer_list<Site> sites) : sites_(sites) { normalize(); }
  explicit Region(std::vector<Site> sites) : sites_(std::move(sites)) { normalize(); }

  static Region range(Site first, Site last_inclusive) {
    std::vector<Site> s;
    for (Site x = first; x <= last_inclusive; ++x) s.push_back(x);
    return Region(std::move(s));
  }

  bool contains(Site x) const { return std::binary_search(sites_.begin(), sites_.end(), x); }
  bool contains(const Region& other) const {
    return std::includes(sites_.begin(), sites_.end(), other.sites_.begin(), other.sites_.end());
  }
  bool intersects(const Region& other) const { return !(*this & other).empty(); }

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  Site operator[](std::size_t i) const { return sites_[i]; }
  /// Position of `x` inside the sorted site list, or -1.
  int position(Site x) const {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), x);
    if (it == sites_.end() || *it != x) return -1;
    return static_cast<int>(it - sites_.begin());
  }

  auto begin() const { return sites_.begin(); }
  auto end() const { return sites_.end(); }
  const std::vector<Site>& sites() const { return sites_; }

  friend Region operator|(const Region& a, const Region& b) {
    std::vector<Site> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return Region(std::move(out));
  }
  friend Region operator&(const Region& a, const Region& b) {
    std::vector<Site> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return Region(std::move(out));
  }
  friend Region operator-(const Region& a, const Region& b) {
    std::vector<Site> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return Region(std::move(out));
  }
  friend bool operator==(const Region& a, const Region& b) { return a.sites_ == b.sites_; }
  friend bool operator<(const Region& a, const Region& b) { return a.sites_ < b.sites_; }

 private:
  void normalize() {
    std::sort(sites_.begin(), sites_.end());
    sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  }
  std::vector<Site> sites_;
};

/// Finite connected graph with hop-count metric and per-vertex Hilbert dimensions.
class LatticeGraph {
 public:
  LatticeGraph() = default;

  LatticeGraph(int num_sites, std::vector<std::pair<Site, Site>> edges, std::vector<int> site_dims = {},
               int lattice_dimension = 1)
      : n_(num_sites), nu_(lattice_dimension), site_dims_(std::move(site_dims)) {
    if (n_ <= 0) throw Error("graph needs at least one vertex");
    if (site_dims_.empty()) site_dims_.assign(n_, 2);
    if (static_cast<int>(site_dims_.size()) != n_) throw Error("site_dims size does not match vertex count");
    for (int d : site_dims_)
      if (d < 1) throw Error("site dimension must be >= 1");
    adjacency_.assign(n_, {});
    for (auto [a, b] : edges) {
      if (a < 0 || b < 0 || a >= n_ || b >= n_) throw Error("edge endpoint out of range");
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      edges_.emplace_back(a, b);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (auto [a, b] : edges_) {
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
    compute_distances();
  }

  int num_sites() const { return n_; }
  int lattice_dimension() const { return nu_; }
  int site_dim(Site x) const { return site_dims_.at(x); }
  const std::vector<int>& site_dims() const { return site_dims_; }
  const std::vector<std::pair<Site, Site>>& edges() const { return edges_; }
  const std::vector<Site>& neighbors(Site x) const { return adjacency_.at(x); }

  int distance(Site x, Site y) const { return dist_[static_cast<std::size_t>(x) * n_ + y]; }

  /// d(X, Y) = min over pairs; infinite (INT_MAX) when either region is empty.
  int distance(const Region& X, const Region& Y) const {
    int best = std::numeric_limits<int>::max();
    for (Site x : X)
      for (Site y : Y) best = std::min(best, distance(x, y));
    return best;
  }

  int diameter() const { return *std::max_element(dist_.begin(), dist_.end()); }

  int region_diameter(const Region& X) const {
    int best = 0;
    for (Site x : X)
      for (Site y : X) best = std::max(best, distance(x, y));
    return best;
  }

  Region all_sites() const { return Region::range(0, n_ - 1); }

  /// Dimension of the tensor product space over `X`.
  Index hilbert_dim(const Region& X) const {
    Index d = 1;
    for (Site x : X) d *= site_dims_[x];
    return d;
  }
  Index hilbert_dim() const { return hilbert_dim(all_sites()); }

  LatticeGraph with_site_dims(std::vector<int> dims) const {
    return LatticeGraph(n_, edges_, std::move(dims), nu_);
  }

 private:
  void compute_distances() {
    constexpr int kInf = std::numeric_limits<int>::max();
    dist_.assign(static_cast<std::size_t>(n_) * n_, kInf);
    for (Site s = 0; s < n_; ++s) {
      std::deque<Site> queue{s};
      int* row = &dist_[static_cast<std::size_t>(s) * n_];
      row[s] = 0;
      while (!queue.empty()) {
        Site x = queue.front();
        queue.pop_front();
        for (Site y : adjacency_[x]) {
          if (row[y] == kInf) {
            row[y] = row[x] + 1;
            queue.push_back(y);
          }
        }
      }
    }
    for (int d : dist_)
      if (d == kInf) throw Error("graph is not connected");
  }

  int n_ = 0;
  int nu_ = 1;
  std::vector<int> site_dims_;
  std::vector<std::pair<Site, Site>> edges_;
  std::vector<std::vector<Site>> adjacency_;
  std::vector<int> dist_;
};

// ---------------------------------------------------------------------------
// Graph builders

inline LatticeGraph chain(int n, int site_dim = 2) {
  std::vector<std::pair<Site, Site>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return LatticeGraph(n, e, std::vector<int>(n, site_dim), 1);
}

inline LatticeGraph ring(int n, int site_dim = 2) {
  std::vector<std::pair<Site, Site>> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return LatticeGraph(n, e, std::vector<int>(n, site_dim), 1);
}

/// L x L periodic square lattice; vertex (x, y) has id x + L*y.
inline LatticeGraph torus(int L, int site_dim = 2) {
  std::vector<std::pair<Site, Site>> e;
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) {
      e.emplace_back(x + L * y, (x + 1) % L + L * y);
      e.emplace_back(x + L * y, x + L * ((y + 1) % L));
    }
  return LatticeGraph(L * L, e, std::vector<int>(L * L, site_dim), 2);
}

/// Open Lx x Ly grid; vertex (x, y) has id x + Lx*y.
inline LatticeGraph grid(int Lx, int Ly, int site_dim = 2) {
  std::vector<std::pair<Site, Site>> e;
  for (int y = 0; y < Ly; ++y)
    for (int x = 0; x < Lx; ++x) {
      if (x + 1 < Lx) e.emplace_back(x + Lx * y, x + 1 + Lx * y);
      if (y + 1 < Ly) e.emplace_back(x + Lx * y, x + Lx * (y + 1));
    }
  return LatticeGraph(Lx * Ly, e, std::vector<int>(Lx * Ly, site_dim), 2);
}

// ---------------------------------------------------------------------------
// Region operations

/// X_l = { x : d(X, {x}) <= l }.
inline Region fatten(const LatticeGraph& G, const Region& X, int l) {
  if (X.empty()) throw Error("fatten: empty region");
  std::vector<Site> out;
  for (Site x = 0; x < G.num_sites(); ++x) {
    for (Site y : X) {
      if (G.distance(x, y) <= l) {
        out.push_back(x);
        break;
      }
    }
  }
  return Region(std::move(out));
}

/// Sites of X lying in some interaction set that meets both X and its complement.
inline Region phi_boundary(const Region& X, const std::vector<Region>& interaction_supports) {
  std::vector<Site> out;
  for (const Region& Y : interaction_supports) {
    Region inside = Y & X;
    if (inside.empty() || inside.size() == Y.size()) continue;
    out.insert(out.end(), inside.begin(), inside.end());
  }
  return Region(std::move(out));
}

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

/// True when the subgraph induced on S is connected (empty counts as connected).
inline bool is_connected(const LatticeGraph& G, const Region& S) {
  if (S.size() <= 1) return true;
  detail::UnionFind uf(G.num_sites());
  for (auto [a, b] : G.edges())
    if (S.contains(a) && S.contains(b)) uf.unite(a, b);
  int root = uf.find(S[0]);
  for (Site x : S)
    if (uf.find(x) != root) return false;
  return true;
}

struct Contraction {
  LatticeGraph graph;
  std::vector<Site> old_to_new;  ///< new id of every old vertex
  Site merged = 0;               ///< id of the merged vertex
};

/// Contract the connected set S into a single vertex whose site dimension is the product over S.
inline Contraction contract(const LatticeGraph& G, const Region& S) {
  if (S.empty()) throw Error("contract: empty set");
  if (!is_connected(G, S)) throw Error("contract: set is not connected");
  Contraction c;
  c.old_to_new.assign(G.num_sites(), -1);
  std::vector<int> dims;
  Site next = 0;
  int merged_dim = 1;
  for (Site x : S) merged_dim *= G.site_dim(x);
  for (Site x = 0; x < G.num_sites(); ++x) {
    if (S.contains(x)) {
      if (x == S[0]) {
        c.merged = next++;
        dims.push_back(merged_dim);
      }
      continue;
    }
    c.old_to_new[x] = next++;
    dims.push_back(G.site_dim(x));
  }
  for (Site x : S) c.old_to_new[x] = c.merged;
  std::vector<std::pair<Site, Site>> edges;
  for (auto [a, b] : G.edges()) {
    Site na = c.old_to_new[a], nb = c.old_to_new[b];
    if (na != nb) edges.emplace_back(na, nb);
  }
  c.graph = LatticeGraph(next, edges, dims, G.lattice_dimension());
  return c;
}

/// Smallest l such that X_l | Y_l | K_l has one component containing both X and Y.
inline int effective_distance(const LatticeGraph& G, const Region& X, const Region& Y, const Region& K) {
  if (X.empty() || Y.empty()) throw Error("effective_distance: empty region");
  for (int l = 0; l <= G.diameter(); ++l) {
    Region U = fatten(G, X, l) | fatten(G, Y, l);
    if (!K.empty()) U = U | fatten(G, K, l);
    detail::UnionFind uf(G.num_sites());
    for (auto [a, b] : G.edges())
      if (U.contains(a) && U.contains(b)) uf.unite(a, b);
    int root = uf.find(X[0]);
    bool joined = true;
    for (Site x : X) joined = joined && uf.find(x) == root;
    for (Site y : Y) joined = joined && uf.find(y) == root;
    if (joined) return l;
  }
  return G.diameter();
}

}  // namespace qlocal
