#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "stitch3d/common.hpp"
#include "stitch3d/rng.hpp"
#include "stitch3d/types.hpp"

namespace stitch3d {

/// Plain undirected graph on 0..n-1 used by the connectivity machinery.
struct SimpleGraph {
  int n = 0;
  std::vector<std::vector<int>> adj;

  SimpleGraph() = default;
  explicit SimpleGraph(int nodes) : n(nodes), adj(nodes) {}

  void add_edge(int i, int j) {
    if (i == j) return;
    if (!has_edge(i, j)) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }

  bool has_edge(int i, int j) const {
    return std::find(adj[i].begin(), adj[i].end(), j) != adj[i].end();
  }

  int m() const {
    int c = 0;
    for (const auto& a : adj) c += static_cast<int>(a.size());
    return c / 2;
  }

  bool complete() const {
    for (int v = 0; v < n; ++v)
      if (static_cast<int>(adj[v].size()) != n - 1) return false;
    return true;
  }

  bool connected() const {
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
    }
    return count == n;
  }

  /// Subgraph induced by `nodes`; the i-th node of `nodes` becomes vertex i.
  SimpleGraph induced(const std::vector<int>& nodes) const {
    std::vector<int> local(n, -1);
    for (size_t k = 0; k < nodes.size(); ++k) local[nodes[k]] = static_cast<int>(k);
    SimpleGraph out(static_cast<int>(nodes.size()));
    for (int v : nodes)
      for (int w : adj[v])
        if (v < w && local[w] >= 0) out.add_edge(local[v], local[w]);
    return out;
  }

  static SimpleGraph from_measurement(const MeasurementGraph& g) {
    SimpleGraph out(g.n());
    for (const auto& e : g.edges()) out.add_edge(e.i, e.j);
    return out;
  }
};

namespace detail {

/// Unit-capacity max-flow on the node-split transformation (each vertex
/// becomes an in/out pair joined by a capacity-1 arc), which makes the
/// max-flow value equal the number of internally disjoint s-t paths.
class VertexFlow {
 public:
  explicit VertexFlow(const SimpleGraph& g) : g_(g), n_(g.n) {}

  /// Max number of internally vertex-disjoint s-t paths; `limit` caps the
  /// search. s and t must be non-adjacent for connectivity semantics.
  int max_flow(int s, int t, int limit) {
    // Arc list built fresh per query; graphs here are tiny.
    head_.assign(2 * n_, -1);
    arcs_.clear();
    for (int v = 0; v < n_; ++v)
      if (v != s && v != t) add_arc(in(v), out(v), 1);
    for (int v : {s, t}) add_arc(in(v), out(v), 2 * n_);
    for (int v = 0; v < n_; ++v)
      for (int w : g_.adj[v]) {
        add_arc(out(v), in(w), 2 * n_);
      }
    int flow = 0;
    while (flow < limit && augment(out(s), in(t))) ++flow;
    source_ = s;
    sink_ = t;
    return flow;
  }

  /// After max_flow: the vertices whose internal arc crosses the reachable
  /// frontier of the residual graph (a minimum vertex cut).
  std::vector<int> min_cut() {
    std::vector<char> seen(2 * n_, 0);
    std::vector<int> stack{out(source_)};
    seen[out(source_)] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int a = head_[v]; a >= 0; a = arcs_[a].next)
        if (arcs_[a].cap > 0 && !seen[arcs_[a].to]) {
          seen[arcs_[a].to] = 1;
          stack.push_back(arcs_[a].to);
        }
    }
    std::vector<int> cut;
    for (int v = 0; v < n_; ++v)
      if (v != source_ && v != sink_ && seen[in(v)] && !seen[out(v)])
        cut.push_back(v);
    return cut;
  }

 private:
  struct Arc {
    int to, next, cap;
  };

  int in(int v) const { return 2 * v; }
  int out(int v) const { return 2 * v + 1; }

  void add_arc(int from, int to, int cap) {
    arcs_.push_back({to, head_[from], cap});
    head_[from] = static_cast<int>(arcs_.size()) - 1;
    arcs_.push_back({from, head_[to], 0});
    head_[to] = static_cast<int>(arcs_.size()) - 1;
  }

  bool augment(int s, int t) {
    std::vector<int> prev_arc(2 * n_, -1);
    std::vector<char> seen(2 * n_, 0);
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty() && !seen[t]) {
      const int v = q.front();
      q.pop();
      for (int a = head_[v]; a >= 0; a = arcs_[a].next)
        if (arcs_[a].cap > 0 && !seen[arcs_[a].to]) {
          seen[arcs_[a].to] = 1;
          prev_arc[arcs_[a].to] = a;
          q.push(arcs_[a].to);
        }
    }
    if (!seen[t]) return false;
    for (int v = t; v != s;) {
      const int a = prev_arc[v];
      --arcs_[a].cap;
      ++arcs_[a ^ 1].cap;
      v = arcs_[a ^ 1].to;
    }
    return true;
  }

  const SimpleGraph& g_;
  int n_;
  std::vector<int> head_;
  std::vector<Arc> arcs_;
  int source_ = 0, sink_ = 0;
};

}  // namespace detail

/// Exact vertex connectivity kappa(g) (n-1 for complete graphs). Any
/// minimum vertex cut has size kappa, and for every vertex s outside such a
/// cut there is a non-neighbor t separated from it, so scanning flows from
/// kappa+1 distinct sources is enough.
inline int vertex_connectivity(const SimpleGraph& g, int cap = 500) {
  if (g.n > cap) throw std::invalid_argument("graph exceeds connectivity cap");
  if (g.n <= 1) return std::max(0, g.n - 1);
  if (!g.connected()) throw GraphDisconnected("vertex_connectivity needs a connected graph");
  if (g.complete()) return g.n - 1;
  int best = g.n - 1;
  detail::VertexFlow flow(g);
  for (int s = 0; s < std::min(g.n, best + 1); ++s) {
    for (int t = 0; t < g.n; ++t) {
      if (t == s || g.has_edge(s, t)) continue;
      best = std::min(best, flow.max_flow(s, t, best + 1));
    }
  }
  return best;
}

/// A minimum vertex cut of a connected, non-complete graph.
inline std::vector<int> min_vertex_cut(const SimpleGraph& g) {
  const int kappa = vertex_connectivity(g);
  detail::VertexFlow flow(g);
  for (int s = 0; s < g.n; ++s)
    for (int t = 0; t < g.n; ++t) {
      if (t == s || g.has_edge(s, t)) continue;
      if (flow.max_flow(s, t, g.n) == kappa) return flow.min_cut();
    }
  throw std::logic_error("no cut found (complete graph?)");
}

/// Maximal node subsets (in g-local ids) inducing 4-vertex-connected
/// subgraphs; size-4 subsets qualify only as complete K4. Found by
/// recursively splitting on minimum vertex cuts of size <= 3.
inline std::vector<std::vector<int>> four_connected_components(
    const SimpleGraph& g, int cap = 500) {
  if (g.n > cap) throw std::invalid_argument("graph exceeds connectivity cap");
  std::set<std::vector<int>> emitted;
  std::set<std::vector<int>> visited;

  std::vector<int> all(g.n);
  for (int i = 0; i < g.n; ++i) all[i] = i;

  std::vector<std::vector<int>> work{all};
  while (!work.empty()) {
    std::vector<int> nodes = std::move(work.back());
    work.pop_back();
    std::sort(nodes.begin(), nodes.end());
    if (static_cast<int>(nodes.size()) < 4) continue;
    if (!visited.insert(nodes).second) continue;
    SimpleGraph sub = g.induced(nodes);

    if (!sub.connected()) {
      // Split into connected components and retry each.
      std::vector<char> seen(sub.n, 0);
      for (int start = 0; start < sub.n; ++start) {
        if (seen[start]) continue;
        std::vector<int> comp;
        std::vector<int> stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
          const int v = stack.back();
          stack.pop_back();
          comp.push_back(nodes[v]);
          for (int w : sub.adj[v])
            if (!seen[w]) {
              seen[w] = 1;
              stack.push_back(w);
            }
        }
        work.push_back(std::move(comp));
      }
      continue;
    }

    if (sub.complete()) {
      emitted.insert(nodes);
      continue;
    }
    const int kappa = vertex_connectivity(sub);
    if (kappa >= 4) {
      emitted.insert(nodes);
      continue;
    }
    const std::vector<int> cut = min_vertex_cut(sub);
    std::vector<char> in_cut(sub.n, 0);
    for (int v : cut) in_cut[v] = 1;
    std::vector<char> seen(sub.n, 0);
    for (int start = 0; start < sub.n; ++start) {
      if (seen[start] || in_cut[start]) continue;
      std::vector<int> side;
      std::vector<int> stack{start};
      seen[start] = 1;
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        side.push_back(nodes[v]);
        for (int w : sub.adj[v])
          if (!seen[w] && !in_cut[w]) {
            seen[w] = 1;
            stack.push_back(w);
          }
      }
      for (int v : cut) side.push_back(nodes[v]);
      work.push_back(std::move(side));
    }
  }

  // Keep only subsets maximal by inclusion.
  std::vector<std::vector<int>> out(emitted.begin(), emitted.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<std::vector<int>> maximal;
  for (const auto& cand : out) {
    bool contained = false;
    for (const auto& big : maximal) {
      if (std::includes(big.begin(), big.end(), cand.begin(), cand.end())) {
        contained = true;
        break;
      }
    }
    if (!contained) maximal.push_back(cand);
  }
  return maximal;
}

/// A k-star graph with at least dim-1 centers is generically globally rigid
/// in R^dim exactly when it is (dim+1)-vertex-connected.
inline bool is_star_globally_rigid(const SimpleGraph& g, int dim) {
  int centers = 0;
  for (int v = 0; v < g.n; ++v)
    if (static_cast<int>(g.adj[v].size()) == g.n - 1) ++centers;
  if (centers < dim - 1)
    throw NotAStarGraph("need at least dim-1 vertices adjacent to all others");
  if (g.complete()) return true;
  return vertex_connectivity(g) >= dim + 1;
}

/// Lexicographically smallest complete subgraph on four vertices, or
/// nullopt. When `allowed` is nonempty the search is restricted to it.
inline std::optional<std::array<int, 4>> find_k4(
    const SimpleGraph& g, const std::vector<int>& allowed = {}) {
  std::vector<char> ok(g.n, allowed.empty() ? 1 : 0);
  for (int v : allowed) ok[v] = 1;
  for (int a = 0; a < g.n; ++a) {
    if (!ok[a]) continue;
    for (int b = a + 1; b < g.n; ++b) {
      if (!ok[b] || !g.has_edge(a, b)) continue;
      for (int c = b + 1; c < g.n; ++c) {
        if (!ok[c] || !g.has_edge(a, c) || !g.has_edge(b, c)) continue;
        for (int d = c + 1; d < g.n; ++d)
          if (ok[d] && g.has_edge(a, d) && g.has_edge(b, d) && g.has_edge(c, d))
            return std::array<int, 4>{a, b, c, d};
      }
    }
  }
  return std::nullopt;
}

/// Smallest K4 through the given center: the center plus the
/// lexicographically smallest triangle among its neighbors. nullopt when the
/// graph minus the center is triangle-free.
inline std::optional<std::array<int, 4>> find_pseudo_anchors(
    const SimpleGraph& g, int center) {
  if (static_cast<int>(g.adj[center].size()) != g.n - 1)
    throw NotAStarGraph("pseudo-anchor search expects a center adjacent to all nodes");
  for (int a = 0; a < g.n; ++a) {
    if (a == center) continue;
    for (int b = a + 1; b < g.n; ++b) {
      if (b == center || !g.has_edge(a, b)) continue;
      for (int c = b + 1; c < g.n; ++c) {
        if (c == center || !g.has_edge(a, c) || !g.has_edge(b, c)) continue;
        return std::array<int, 4>{center, a, b, c};
      }
    }
  }
  return std::nullopt;
}

/// Monte Carlo estimate of how often m spheres of radius 1/3 dropped inside
/// the unit sphere contain three that pairwise overlap. Placing radius-1/3
/// spheres inside the unit sphere confines their centers to the concentric
/// ball of radius 2/3, and two of them overlap iff their centers are closer
/// than 2/3.
inline double sphere_packing_experiment(int m, int trials, uint64_t seed,
                                        double center_radius = 2.0 / 3.0,
                                        double overlap_distance = 2.0 / 3.0) {
  if (m < 3 || trials < 1)
    throw std::invalid_argument("need m >= 3 and trials >= 1");
  std::vector<char> success(trials, 0);
  parallel_for(trials, [&](int t) {
    Rng rng(derive_seed(seed, "spheres", static_cast<uint64_t>(t)));
    std::vector<Eigen::Vector3d> c(m);
    for (int i = 0; i < m; ++i) c[i] = rng.point_in_ball(center_radius);
    const double thr2 = overlap_distance * overlap_distance;
    for (int i = 0; i < m && !success[t]; ++i)
      for (int j = i + 1; j < m && !success[t]; ++j) {
        if ((c[i] - c[j]).squaredNorm() >= thr2) continue;
        for (int k = j + 1; k < m; ++k)
          if ((c[i] - c[k]).squaredNorm() < thr2 &&
              (c[j] - c[k]).squaredNorm() < thr2) {
            success[t] = 1;
            break;
          }
      }
  });
  int count = 0;
  for (char s : success) count += s;
  return static_cast<double>(count) / trials;
}

}  // namespace stitch3d
