#ifndef OREOS_KDTREE_HPP
#define OREOS_KDTREE_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace oreos {

template <typename Scalar>
struct Neighbor {
  Eigen::Index index;
  Scalar squared_distance;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
    return a.index < b.index;
  }
  bool operator==(const Neighbor&) const = default;
};

/// Squared Euclidean distance, summed in coordinate order so that the tree
/// and a linear scan produce bit-identical values.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
  typename DerivedA::Scalar sum(0);
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const auto diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

/**
 * Exact k-nearest-neighbor kd-tree over the columns of a Dim x N matrix.
 *
 * Splits on the coordinate of widest spread at the median. Search keeps the
 * k best (distance, index) pairs and only prunes a subtree when its splitting
 * plane is strictly farther than the current k-th best, so ties resolve to
 * the lower index exactly as a linear scan would.
 */
template <typename Scalar, int Dim>
class KdTree {
 public:
  using PointMatrix = Eigen::Matrix<Scalar, Dim, Eigen::Dynamic>;
  using Point = Eigen::Matrix<Scalar, Dim, 1>;

  KdTree() = default;
  explicit KdTree(PointMatrix points, int leaf_size = 8)
      : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
    if (!points_.allFinite()) throw std::invalid_argument("KdTree: non-finite point");
    order_.resize(static_cast<std::size_t>(points_.cols()));
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    if (points_.cols() > 0) {
      nodes_.reserve(static_cast<std::size_t>(2 * points_.cols() / leaf_size_ + 2));
      build(0, points_.cols());
    }
  }

  Eigen::Index size() const { return points_.cols(); }
  Eigen::Index dimension() const { return points_.rows(); }
  const PointMatrix& points() const { return points_; }

  template <typename Derived>
  std::vector<Neighbor<Scalar>> knn(const Eigen::MatrixBase<Derived>& query, Eigen::Index k) const {
    if (k < 1 || k > size()) {
      throw std::out_of_range("KdTree::knn: k=" + std::to_string(k) + " outside [1, " +
                              std::to_string(size()) + "]");
    }
    if (query.size() != dimension()) throw std::invalid_argument("KdTree::knn: dimension mismatch");
    std::vector<Neighbor<Scalar>> best;
    best.reserve(static_cast<std::size_t>(k) + 1);
    const Point q = query;
    search(0, q, k, best);
    return best;
  }

  template <typename Derived>
  Neighbor<Scalar> nearest(const Eigen::MatrixBase<Derived>& query) const {
    return knn(query, 1).front();
  }

 private:
  struct Node {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
    int split_dim = -1;  // -1 marks a leaf
    Scalar split_value = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(Eigen::Index begin, Eigen::Index end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_) return id;

    int best_dim = 0;
    Scalar best_spread = -1;
    for (int d = 0; d < dimension(); ++d) {
      Scalar lo = std::numeric_limits<Scalar>::max();
      Scalar hi = std::numeric_limits<Scalar>::lowest();
      for (Eigen::Index i = begin; i < end; ++i) {
        const Scalar v = points_(d, order_[i]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0) return id;  // all points coincide

    const Eigen::Index mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Eigen::Index a, Eigen::Index b) {
                       return points_(best_dim, a) < points_(best_dim, b);
                     });
    const Scalar split = points_(best_dim, order_[mid]);
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.split_dim = best_dim;
    node.split_value = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void offer(std::vector<Neighbor<Scalar>>& best, Eigen::Index k, Neighbor<Scalar> cand) const {
    if (static_cast<Eigen::Index>(best.size()) == k && !(cand < best.back())) return;
    best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
    if (static_cast<Eigen::Index>(best.size()) > k) best.pop_back();
  }

  void search(std::int32_t id, const Point& q, Eigen::Index k,
              std::vector<Neighbor<Scalar>>& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.split_dim < 0) {
      for (Eigen::Index i = node.begin; i < node.end; ++i) {
        const Eigen::Index idx = order_[i];
        offer(best, k, {idx, squared_distance(q, points_.col(idx))});
      }
      return;
    }
    const Scalar diff = q[node.split_dim] - node.split_value;
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    search(near, q, k, best);
    const Scalar plane = diff * diff;
    if (static_cast<Eigen::Index>(best.size()) < k || !(plane > best.back().squared_distance)) {
      search(far, q, k, best);
    }
  }

  PointMatrix points_;
  int leaf_size_ = 8;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
};

using KdTree3d = KdTree<double, 3>;

}  // namespace oreos

#endif  // OREOS_KDTREE_HPP
