// Alpha-shape boundary of a planar point set.
//
// An edge (p, q) with |pq| <= 2 alpha belongs to the alpha-shape boundary
// when at least one of the two radius-alpha disks through p and q contains
// no other point. Such edges are Delaunay edges, so enumerating pairs within
// 2 alpha through a k-d tree yields the same edge set as filtering a
// Delaunay triangulation. Each edge is oriented with its empty side on the
// right; loops are traced by always taking the rightmost turn, which keeps
// the exterior on the right and so walks outer boundaries counterclockwise.

#include "dbh/cross_section.hpp"
#include "dbh/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <map>
#include <numbers>
#include <unordered_map>

namespace dbh {

namespace {

struct DirectedEdge {
  Index from;
  Index to;
};

bool disk_is_empty(const KdTree2& tree, const Points2& pts, const Vec2& center, double alpha,
                   Index skip_a, Index skip_b, std::vector<Index>& scratch) {
  const double inner = alpha * (1.0 - 1e-9);
  tree.radius_search(center, inner, scratch);
  for (const Index k : scratch) {
    if (k == skip_a || k == skip_b) continue;
    if ((pts.col(k) - pts.col(skip_a)).squaredNorm() == 0.0) continue;  // duplicate of p
    if ((pts.col(k) - pts.col(skip_b)).squaredNorm() == 0.0) continue;  // duplicate of q
    return false;
  }
  return true;
}

// Counterclockwise angle from a to b in (0, 2 pi].
double ccw_angle(const Vec2& a, const Vec2& b) {
  double ang = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
  if (ang <= 0) ang += 2 * std::numbers::pi;
  return ang;
}

double signed_area(const Points2& loop) {
  double area = 0;
  const Index n = loop.cols();
  for (Index i = 0; i < n; ++i) {
    const Vec2 a = loop.col(i), b = loop.col((i + 1) % n);
    area += a.x() * b.y() - a.y() * b.x();
  }
  return area / 2;
}

}  // namespace

double default_alpha(const Points2& points, double scale) {
  if (points.cols() < 2) throw FitError("alpha: need at least two points");
  const KdTree2 tree(points);
  std::vector<double> nn;
  nn.reserve(static_cast<std::size_t>(points.cols()));
  for (Index i = 0; i < points.cols(); ++i) {
    const auto r = tree.knn(points.col(i), 2);
    nn.push_back(std::sqrt(r.back().first));
  }
  auto mid = nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2);
  std::nth_element(nn.begin(), mid, nn.end());
  double median = *mid;
  if (nn.size() % 2 == 0) {
    const double lower = *std::max_element(nn.begin(), mid);
    median = 0.5 * (median + lower);
  }
  if (!(median > 0)) throw FitError("alpha: points are coincident");
  return scale * median;
}

AlphaRegion connected_alpha_region(const Points2& points, double min_alpha, double coverage) {
  const Index n = points.cols();
  if (n < 2) throw FitError("alpha: need at least two points");

  // Prim's algorithm on the complete graph; sections hold at most a few thousand points.
  struct Edge {
    double length;
    Index a, b;
  };
  std::vector<Edge> mst;
  mst.reserve(static_cast<std::size_t>(n - 1));
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<Index> from(static_cast<std::size_t>(n), 0);
  std::vector<std::uint8_t> done(static_cast<std::size_t>(n), 0);
  Index current = 0;
  done[0] = 1;
  for (Index step = 1; step < n; ++step) {
    Index next = -1;
    for (Index j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (done[uj]) continue;
      const double d = (points.col(j) - points.col(current)).norm();
      if (d < dist[uj]) {
        dist[uj] = d;
        from[uj] = current;
      }
      if (next < 0 || dist[uj] < dist[static_cast<std::size_t>(next)]) next = j;
    }
    done[static_cast<std::size_t>(next)] = 1;
    mst.push_back({dist[static_cast<std::size_t>(next)], from[static_cast<std::size_t>(next)], next});
    current = next;
  }
  std::stable_sort(mst.begin(), mst.end(), [](const Edge& x, const Edge& y) { return x.length < y.length; });

  std::vector<Index> parent(static_cast<std::size_t>(n)), size(static_cast<std::size_t>(n), 1);
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  auto unite = [&](Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return size[static_cast<std::size_t>(a)];
    if (size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
    return size[static_cast<std::size_t>(a)];
  };

  const auto needed = static_cast<Index>(std::ceil(coverage * static_cast<double>(n)));
  double alpha = min_alpha;
  std::size_t e = 0;
  Index largest = 1;
  while (e < mst.size() && (largest < needed || mst[e].length <= 2.0 * alpha)) {
    if (largest < needed) alpha = std::max(alpha, 0.5 * mst[e].length * (1.0 + 1e-9));
    largest = std::max(largest, unite(mst[e].a, mst[e].b));
    ++e;
  }

  Index root = 0;
  for (Index i = 0; i < n; ++i)
    if (size[static_cast<std::size_t>(find(i))] > size[static_cast<std::size_t>(find(root))]) root = find(i);
  root = find(root);
  AlphaRegion region;
  region.alpha = alpha;
  for (Index i = 0; i < n; ++i)
    if (find(i) == root) region.members.push_back(i);
  return region;
}

Points2 alpha_shape_boundary(const Points2& points, double alpha) {
  if (!(alpha > 0)) throw PreconditionError("alpha must be positive");
  const Index n = points.cols();
  if (n < 3) throw FitError("alpha shape: need at least 3 points");

  const KdTree2 tree(points);
  std::vector<DirectedEdge> edges;
  std::vector<Index> near, scratch;
  for (Index i = 0; i < n; ++i) {
    tree.radius_search(points.col(i), 2 * alpha, near);
    for (const Index j : near) {
      if (j <= i) continue;
      const Vec2 p = points.col(i), q = points.col(j);
      const Vec2 d = q - p;
      const double len = d.norm();
      if (!(len > 0)) continue;
      const double h2 = alpha * alpha - 0.25 * len * len;
      const double h = h2 > 0 ? std::sqrt(h2) : 0.0;
      const Vec2 mid = 0.5 * (p + q);
      const Vec2 left_normal(-d.y() / len, d.x() / len);
      const bool left_empty = disk_is_empty(tree, points, mid + h * left_normal, alpha, i, j, scratch);
      const bool right_empty = disk_is_empty(tree, points, mid - h * left_normal, alpha, i, j, scratch);
      if (right_empty) edges.push_back({i, j});
      if (left_empty) edges.push_back({j, i});
    }
  }
  if (edges.empty()) throw FitError("alpha shape: no boundary edges; increase alpha");

  std::unordered_map<Index, std::vector<std::size_t>> outgoing;
  for (std::size_t e = 0; e < edges.size(); ++e) outgoing[edges[e].from].push_back(e);

  // Successor of each directed edge: the rightmost turn at its head.
  std::vector<std::ptrdiff_t> next(edges.size(), -1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    const Vec2 back = points.col(u) - points.col(v);
    double best_angle = std::numeric_limits<double>::infinity();
    std::ptrdiff_t best = -1, reverse = -1;
    for (const std::size_t f : outgoing[v]) {
      const Index w = edges[f].to;
      if (w == u) {
        reverse = static_cast<std::ptrdiff_t>(f);
        continue;
      }
      const double ang = ccw_angle(back, points.col(w) - points.col(v));
      if (ang < best_angle || (ang == best_angle && w < edges[static_cast<std::size_t>(best)].to)) {
        best_angle = ang;
        best = static_cast<std::ptrdiff_t>(f);
      }
    }
    next[e] = best >= 0 ? best : reverse;
  }

  // Cycles of the successor map are the closed boundary loops.
  std::vector<int> walk_id(edges.size(), -1);
  std::vector<std::size_t> best_loop;
  double best_length = 0;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (walk_id[start] >= 0) continue;
    std::size_t e = start;
    while (e != static_cast<std::size_t>(-1) && walk_id[e] < 0) {
      walk_id[e] = static_cast<int>(start);
      e = next[e] >= 0 ? static_cast<std::size_t>(next[e]) : static_cast<std::size_t>(-1);
    }
    if (e == static_cast<std::size_t>(-1) || walk_id[e] != static_cast<int>(start)) continue;
    std::vector<std::size_t> loop;
    double length = 0;
    std::size_t f = e;
    do {
      loop.push_back(f);
      length += (points.col(edges[f].to) - points.col(edges[f].from)).norm();
      f = static_cast<std::size_t>(next[f]);
    } while (f != e);
    if (loop.size() >= 3 && length > best_length) {
      best_length = length;
      best_loop = std::move(loop);
    }
  }
  if (best_loop.empty()) throw FitError("alpha shape: no closed boundary loop; increase alpha");

  // Start the loop at its smallest vertex index for a canonical ordering.
  const auto first = std::min_element(best_loop.begin(), best_loop.end(), [&](auto a, auto b) {
    return edges[a].from < edges[b].from;
  });
  std::rotate(best_loop.begin(), first, best_loop.end());
  Points2 boundary(2, static_cast<Index>(best_loop.size()));
  for (std::size_t k = 0; k < best_loop.size(); ++k)
    boundary.col(static_cast<Index>(k)) = points.col(edges[best_loop[k]].from);
  if (signed_area(boundary) < 0) {
    const Index m = boundary.cols();
    boundary.rightCols(m - 1) = boundary.rightCols(m - 1).rowwise().reverse().eval();
  }
  return boundary;
}

Points2 closed_alpha_boundary(const Points2& points, double alpha, int max_growth) {
  std::string last_error = "alpha shape has no simple boundary";
  for (int step = 0; step <= max_growth; ++step, alpha *= 1.25) {
    Points2 loop;
    try {
      loop = alpha_shape_boundary(points, alpha);
    } catch (const FitError& e) {
      last_error = e.what();
      continue;
    }
    bool simple = true;
    for (Index i = 0; i < loop.cols() && simple; ++i)
      for (Index j = i + 1; j < loop.cols() && simple; ++j) simple = loop.col(i) != loop.col(j);
    if (simple) return loop;
  }
  throw FitError(last_error);
}

}  // namespace dbh
