#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace touchloc {

/// Static exact KD-tree over points in R^Dim.
///
/// Nearest-neighbour ties are broken towards the lowest original index, so a
/// query always has a single well-defined answer. Points are copied into
/// leaf order for locality; `index` values reported by queries refer to the
/// order of the input vector.
template <std::size_t Dim>
class KdTree {
 public:
  using Point = std::array<double, Dim>;

  struct Hit {
    std::size_t index = 0;
    double dist_sq = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  explicit KdTree(const std::vector<Point>& points, std::size_t leaf_size = 10)
      : leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (points.size() >= std::numeric_limits<std::uint32_t>::max())
      throw std::length_error("KdTree: too many points");
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), 0u);
    original_ = points;
    if (!points.empty()) {
      nodes_.reserve(2 * points.size() / leaf_size_ + 2);
      build(0, static_cast<std::uint32_t>(points.size()));
    }
    points_.resize(points.size());
    for (std::size_t i = 0; i < order_.size(); ++i) points_[i] = original_[order_[i]];
  }

  std::size_t size() const { return original_.size(); }
  bool empty() const { return original_.empty(); }
  const Point& point(std::size_t index) const { return original_[index]; }

  Hit nearest(const Point& query) const {
    Hit best;
    if (empty()) return best;
    search(query, best);
    return best;
  }

  /// Same result as `nearest(query)`; `hint` seeds the search bound, which
  /// speeds up batches of queries that are close to each other.
  Hit nearest(const Point& query, std::size_t hint) const {
    Hit best;
    if (empty()) return best;
    if (hint < original_.size()) best = {hint, dist_sq(query, original_[hint])};
    search(query, best);
    return best;
  }

  static double dist_sq(const Point& a, const Point& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < Dim; ++k) {
      const double t = a[k] - b[k];
      d += t * t;
    }
    return d;
  }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;   // 0 marks a leaf (root is never a child)
    std::uint32_t right = 0;
    std::uint32_t dim = 0;
    double split = 0.0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0, 0, 0.0});
    if (end - begin <= leaf_size_) return id;

    Point lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::uint32_t i = begin; i < end; ++i) {
      const Point& p = original_[order_[i]];
      for (std::size_t k = 0; k < Dim; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
    std::size_t dim = 0;
    for (std::size_t k = 1; k < Dim; ++k)
      if (hi[k] - lo[k] > hi[dim] - lo[dim]) dim = k;
    if (hi[dim] - lo[dim] <= 0.0) return id;  // all points identical

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return original_[a][dim] < original_[b][dim];
                     });
    const double split = original_[order_[mid]][dim];

    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    Node& node = nodes_[id];
    node.left = left;
    node.right = right;
    node.dim = static_cast<std::uint32_t>(dim);
    node.split = split;
    return id;
  }

  void search(const Point& query, Hit& best) const {
    std::array<double, Dim> offsets{};
    visit(0, query, 0.0, offsets, best);
  }

  // `rd` is the squared distance from the query to the cell of `id`,
  // accumulated per dimension in `off`.
  void visit(std::uint32_t id, const Point& query, double rd, std::array<double, Dim>& off,
             Hit& best) const {
    const Node& node = nodes_[id];
    if (node.left == 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d = dist_sq(query, points_[i]);
        if (d < best.dist_sq || (d == best.dist_sq && order_[i] < best.index)) {
          best.dist_sq = d;
          best.index = order_[i];
        }
      }
      return;
    }
    const double diff = query[node.dim] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    visit(near, query, rd, off, best);

    const double old = off[node.dim];
    const double far_rd = rd - old * old + diff * diff;
    // Ties must still be explored so that the lowest index wins.
    if (far_rd <= best.dist_sq) {
      off[node.dim] = diff;
      visit(far, query, far_rd, off, best);
      off[node.dim] = old;
    }
  }

  std::size_t leaf_size_ = 10;
  std::vector<Point> original_;
  std::vector<Point> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace touchloc
