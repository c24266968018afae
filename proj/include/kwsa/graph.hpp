#pragma once

// Undirected communication graphs, their Laplacians, and the i.i.d. link
// failure process that produces one random topology per iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kwsa/error.hpp"
#include "kwsa/random.hpp"

namespace kwsa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Unordered node pair stored canonically as (lo, hi), lo < hi.
struct Edge {
  std::size_t lo;
  std::size_t hi;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline constexpr double kSpectralEps = 1e-9;
inline constexpr double kConnectivityEps = 1e-8;

/// Simple undirected graph on nodes 0..N-1. Edges are kept sorted.
class Graph {
 public:
  explicit Graph(std::size_t num_nodes, std::vector<Edge> edges = {})
      : num_nodes_(num_nodes), edges_(std::move(edges)) {
    if (num_nodes_ == 0) throw InvariantViolation("graph must have at least one node");
    for (auto& e : edges_) {
      if (e.lo == e.hi) throw InvariantViolation("self-loop on node " + std::to_string(e.lo));
      if (e.lo > e.hi) std::swap(e.lo, e.hi);
      if (e.hi >= num_nodes_)
        throw InvariantViolation("edge endpoint " + std::to_string(e.hi) + " out of range for " +
                                 std::to_string(num_nodes_) + " nodes");
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw InvariantViolation("duplicate edge");
    build_adjacency();
  }

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Neighbours of node i in increasing index order.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }

  std::size_t max_degree() const {
    std::size_t m = 0;
    for (const auto& a : adjacency_) m = std::max(m, a.size());
    return m;
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
  }

  /// Relabel nodes: node i becomes perm[i].
  Graph permuted(const std::vector<std::size_t>& perm) const {
    std::vector<Edge> out;
    out.reserve(edges_.size());
    for (const auto& e : edges_) out.push_back({perm.at(e.lo), perm.at(e.hi)});
    return Graph(num_nodes_, std::move(out));
  }

  static Graph complete(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e.push_back({i, j});
    return Graph(n, std::move(e));
  }

  static Graph path(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
    return Graph(n, std::move(e));
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_;
  }

 private:
  void build_adjacency() {
    adjacency_.assign(num_nodes_, {});
    for (const auto& e : edges_) {
      adjacency_[e.lo].push_back(e.hi);
      adjacency_[e.hi].push_back(e.lo);
    }
    for (auto& a : adjacency_) std::sort(a.begin(), a.end());
  }

  std::size_t num_nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// L = D - A. Off-diagonals are exactly 0 or -1, so L * 1 = 0 holds exactly.
inline Matrix laplacian_of(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix lap = Matrix::Zero(n, n);
  for (const auto& e : g.edges()) {
    const auto i = static_cast<Eigen::Index>(e.lo);
    const auto j = static_cast<Eigen::Index>(e.hi);
    lap(i, j) = -1.0;
    lap(j, i) = -1.0;
    lap(i, i) += 1.0;
    lap(j, j) += 1.0;
  }
  return lap;
}

/// Ascending eigenvalues of a symmetric matrix. Throws on asymmetric input.
inline Vector symmetric_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols())
    throw InvariantViolation("expected a square matrix");
  if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > kSpectralEps)
    throw InvariantViolation("expected a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  return solver.eigenvalues();
}

/// Second-smallest eigenvalue of a Laplacian-like matrix, clamped at zero
/// when within kSpectralEps of it. A single-node graph has lambda_2 = 0.
inline double algebraic_connectivity(const Matrix& lap) {
  const Vector ev = symmetric_eigenvalues(lap);
  if (ev.size() < 2) return 0.0;
  const double l2 = ev(1);
  return std::abs(l2) <= kSpectralEps ? 0.0 : std::max(l2, 0.0);
}

inline bool is_connected(const Graph& g) {
  if (g.num_nodes() == 1) return true;
  return algebraic_connectivity(laplacian_of(g)) > kConnectivityEps;
}

/// Base topology whose links fail independently with probability p_fail,
/// independently across iterations.
struct RandomNetworkModel {
  Graph base_graph;
  double p_fail = 0.0;

  RandomNetworkModel(Graph base, double p) : base_graph(std::move(base)), p_fail(p) {
    if (!(p_fail >= 0.0 && p_fail <= 1.0))
      throw InvariantViolation("p_fail must lie in [0, 1], got " + std::to_string(p_fail));
  }
};

/// One draw of the random topology. Base edges are visited in sorted order
/// with one uniform draw each; an edge survives when the draw is >= p_fail.
/// Using the same stream with a larger p_fail yields a subgraph.
inline Graph sample_network(const RandomNetworkModel& model, RandomStream& rng) {
  std::vector<Edge> kept;
  kept.reserve(model.base_graph.num_edges());
  for (const auto& e : model.base_graph.edges())
    if (rng.uniform() >= model.p_fail) kept.push_back(e);
  return Graph(model.base_graph.num_nodes(), std::move(kept));
}

inline Matrix expected_laplacian(const RandomNetworkModel& model) {
  return (1.0 - model.p_fail) * laplacian_of(model.base_graph);
}

/// Random geometric graph request. An unset radius means "auto": for each
/// placement use the smallest radius that connects it, plus 10%.
struct GeometricGraphSpec {
  std::size_t num_nodes = 10;
  std::optional<double> connection_radius;
  std::size_t retry_limit = 1000;
  std::optional<std::size_t> max_degree;

  std::string describe() const {
    std::ostringstream os;
    os << "geometric graph {nodes=" << num_nodes << ", radius=";
    if (connection_radius)
      os << *connection_radius;
    else
      os << "auto";
    os << ", retry_limit=" << retry_limit;
    if (max_degree) os << ", max_degree=" << *max_degree;
    os << "}";
    return os.str();
  }
};

struct Point2 {
  double x;
  double y;
};

namespace detail {

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Longest edge of the Euclidean minimum spanning tree (Prim, dense): the
/// smallest radius at which the disk graph is connected.
inline double connectivity_threshold(const std::vector<Point2>& pts) {
  const std::size_t n = pts.size();
  if (n < 2) return 0.0;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<bool> in_tree(n, false);
  best[0] = 0.0;
  double bottleneck = 0.0;
  for (std::size_t it = 0; it < n; ++it) {
    std::size_t u = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (u == n || best[v] < best[u])) u = v;
    in_tree[u] = true;
    bottleneck = std::max(bottleneck, best[u]);
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v]) best[v] = std::min(best[v], distance(pts[u], pts[v]));
  }
  return bottleneck;
}

}  // namespace detail

inline constexpr double kAutoRadiusMargin = 1.10;

/// Disk graph over the given placement.
inline Graph disk_graph(const std::vector<Point2>& pts, double radius) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (detail::distance(pts[i], pts[j]) <= radius) edges.push_back({i, j});
  return Graph(pts.size(), std::move(edges));
}

/// N uniform points on the unit square, linked when within the connection
/// radius. Whole placements are redrawn until the graph is connected (and
/// meets the degree cap, if any).
inline Graph generate_geometric_graph(const GeometricGraphSpec& spec, RandomStream& rng) {
  if (spec.num_nodes == 0) throw InvariantViolation("geometric graph needs at least one node");
  if (spec.connection_radius &&
      !(*spec.connection_radius > 0.0 && *spec.connection_radius <= std::sqrt(2.0)))
    throw InvariantViolation("connection radius must lie in (0, sqrt(2)]");
  if (spec.retry_limit == 0) throw InvariantViolation("retry_limit must be positive");

  std::vector<Point2> pts(spec.num_nodes);
  for (std::size_t attempt = 0; attempt < spec.retry_limit; ++attempt) {
    for (auto& p : pts) {
      p.x = rng.uniform();
      p.y = rng.uniform();
    }
    const double radius =
        spec.connection_radius
            ? *spec.connection_radius
            : std::min(kAutoRadiusMargin * detail::connectivity_threshold(pts), std::sqrt(2.0));
    Graph g = disk_graph(pts, radius);
    if (!is_connected(g)) continue;
    if (spec.max_degree && g.max_degree() > *spec.max_degree) continue;
    return g;
  }
  throw GenerationFailure("retry limit exhausted generating " + spec.describe());
}

/// Edge-list text: "N <num_nodes>" then one sorted "i j" line per edge.
inline std::string to_edge_list(const Graph& g) {
  std::ostringstream os;
  os << "N " << g.num_nodes() << '\n';
  for (const auto& e : g.edges()) os << e.lo << ' ' << e.hi << '\n';
  return os.str();
}

inline Graph parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  long long n = 0;
  if (!(in >> tag >> n) || tag != "N" || n <= 0)
    throw ParseError("edge list must start with \"N <num_nodes>\"");
  std::vector<Edge> edges;
  long long i = 0, j = 0;
  while (in >> i) {
    if (!(in >> j)) throw ParseError("edge list: dangling endpoint");
    if (i < 0 || j < 0) throw ParseError("edge list: negative node index");
    edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
  }
  if (!in.eof()) throw ParseError("edge list: non-numeric token");
  try {
    return Graph(static_cast<std::size_t>(n), std::move(edges));
  } catch (const InvariantViolation& e) {
    throw ParseError(std::string("edge list: ") + e.what());
  }
}

}  // namespace kwsa
