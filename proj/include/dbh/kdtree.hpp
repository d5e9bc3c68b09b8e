// Static k-d tree over the columns of a fixed-dimension point matrix.
//
// The tree stores a reference to the points; they must outlive it and must
// not be modified. All query results are returned in a deterministic order.

#ifndef DBH_KDTREE_HPP
#define DBH_KDTREE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace dbh {

template <int Dim, typename Scalar = double>
class KdTree {
 public:
  using PointMatrix = Eigen::Matrix<Scalar, Dim, Eigen::Dynamic>;
  using Point = Eigen::Matrix<Scalar, Dim, 1>;
  using Index = Eigen::Index;

  explicit KdTree(const PointMatrix& points, int leaf_size = 16)
      : points_(points), leaf_size_(std::max(1, leaf_size)) {
    order_.resize(static_cast<std::size_t>(points.cols()));
    std::iota(order_.begin(), order_.end(), Index{0});
    if (!order_.empty()) root_ = build(0, static_cast<Index>(order_.size()), 0);
  }

  [[nodiscard]] Index size() const noexcept { return points_.cols(); }

  /// Indices of all points with ||p - q|| <= radius, sorted ascending.
  template <typename Derived>
  [[nodiscard]] std::vector<Index> radius_search(const Eigen::MatrixBase<Derived>& query,
                                                 Scalar radius) const {
    std::vector<Index> out;
    radius_search(query, radius, out);
    return out;
  }

  template <typename Derived>
  void radius_search(const Eigen::MatrixBase<Derived>& query, Scalar radius,
                     std::vector<Index>& out) const {
    out.clear();
    if (root_ < 0) return;
    const Point q = query;
    radius_recurse(root_, q, radius * radius, out);
    std::sort(out.begin(), out.end());
  }

  /// The k nearest points as (squared distance, index), nearest first; ties by index.
  template <typename Derived>
  [[nodiscard]] std::vector<std::pair<Scalar, Index>> knn(const Eigen::MatrixBase<Derived>& query,
                                                          int k) const {
    std::vector<std::pair<Scalar, Index>> heap;
    if (root_ < 0 || k <= 0) return heap;
    const Point q = query;
    heap.reserve(static_cast<std::size_t>(k) + 1);
    knn_recurse(root_, q, static_cast<std::size_t>(k), heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  /// Nearest point (squared distance, index); index -1 when the tree is empty.
  template <typename Derived>
  [[nodiscard]] std::pair<Scalar, Index> nearest(const Eigen::MatrixBase<Derived>& query) const {
    auto r = knn(query, 1);
    if (r.empty()) return {std::numeric_limits<Scalar>::infinity(), Index{-1}};
    return r.front();
  }

 private:
  struct Node {
    Index begin = 0, end = 0;  // range into order_ (leaves only)
    int axis = -1;             // -1 for leaves
    Scalar split = 0;
    int left = -1, right = -1;
    Point lo, hi;              // bounding box
  };

  int build(Index begin, Index end, int depth) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = points_.col(order_[static_cast<std::size_t>(begin)]);
    node.hi = node.lo;
    for (Index i = begin + 1; i < end; ++i) {
      const auto p = points_.col(order_[static_cast<std::size_t>(i)]);
      node.lo = node.lo.cwiseMin(p);
      node.hi = node.hi.cwiseMax(p);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= leaf_size_) return id;

    int axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    if (node.hi[axis] - node.lo[axis] <= Scalar(0)) return id;  // all coincident

    const Index mid = begin + (end - begin) / 2;
    auto first = order_.begin() + begin;
    auto nth = order_.begin() + mid;
    auto last = order_.begin() + end;
    std::nth_element(first, nth, last, [&](Index a, Index b) {
      const Scalar va = points_(axis, a), vb = points_(axis, b);
      return va < vb || (va == vb && a < b);
    });
    const Scalar split = points_(axis, *nth);
    (void)depth;
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split = split;
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  Scalar box_dist2(const Node& n, const Point& q) const {
    const Point d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(Point::Zero());
    return d.squaredNorm();
  }

  void radius_recurse(int id, const Point& q, Scalar r2, std::vector<Index>& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (box_dist2(n, q) > r2) return;
    if (n.axis < 0) {
      for (Index i = n.begin; i < n.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        if ((points_.col(idx) - q).squaredNorm() <= r2) out.push_back(idx);
      }
      return;
    }
    radius_recurse(n.left, q, r2, out);
    radius_recurse(n.right, q, r2, out);
  }

  void knn_recurse(int id, const Point& q, std::size_t k,
                   std::vector<std::pair<Scalar, Index>>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (heap.size() == k && box_dist2(n, q) > heap.front().first) return;
    if (n.axis < 0) {
      for (Index i = n.begin; i < n.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        const std::pair<Scalar, Index> cand{(points_.col(idx) - q).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    knn_recurse(go_left ? n.left : n.right, q, k, heap);
    knn_recurse(go_left ? n.right : n.left, q, k, heap);
  }

  const PointMatrix& points_;
  int leaf_size_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

}  // namespace dbh

#endif  // DBH_KDTREE_HPP
