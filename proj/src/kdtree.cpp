#include "vgicp/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace vgicp {

namespace {
constexpr int kLeafSize = 16;
}

// Bounded worst-first heap of (squared distance, index). The ordering makes
// equidistant candidates with a higher index "worse", which implements the
// lower-index tie rule.
struct KnnHeap {
  struct Entry {
    double d2;
    int index;
    bool operator<(const Entry& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
  };

  explicit KnnHeap(int k) : capacity(k) { entries.reserve(k); }

  bool full() const { return static_cast<int>(entries.size()) == capacity; }
  const Entry& worst() const { return entries.front(); }

  void push(double d2, int index) {
    const Entry e{d2, index};
    if (!full()) {
      entries.push_back(e);
      std::push_heap(entries.begin(), entries.end());
      return;
    }
    if (e < entries.front()) {
      std::pop_heap(entries.begin(), entries.end());
      entries.back() = e;
      std::push_heap(entries.begin(), entries.end());
    }
  }

  int capacity;
  std::vector<Entry> entries;
};

KdTree::KdTree(const std::vector<Eigen::Vector3d>& points) : points_(points) {
  indices_.resize(points_.size());
  std::iota(indices_.begin(), indices_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(points_.size()));
  }
}

int KdTree::build(int begin, int end) {
  const int node_id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  if (end - begin <= kLeafSize) {
    Node& n = nodes_[node_id];
    n.begin = begin;
    n.end = end;
    return node_id;
  }

  Eigen::Vector3d lo = points_[indices_[begin]];
  Eigen::Vector3d hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[indices_[i]]);
    hi = hi.cwiseMax(points_[indices_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const int mid = (begin + end) / 2;
  std::nth_element(indices_.begin() + begin, indices_.begin() + mid, indices_.begin() + end,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });

  const double split = points_[indices_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);

  Node& n = nodes_[node_id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return node_id;
}

void KdTree::knn_recurse(int node_id, const Eigen::Vector3d& query, KnnHeap& heap) const {
  const Node& n = nodes_[node_id];
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int idx = indices_[i];
      heap.push((points_[idx] - query).squaredNorm(), idx);
    }
    return;
  }

  const double diff = query[n.axis] - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;

  knn_recurse(near, query, heap);
  // Visit the far side when it can still hold an equal-or-better candidate;
  // equality must be visited to honor the index tie rule.
  if (!heap.full() || diff * diff <= heap.worst().d2) {
    knn_recurse(far, query, heap);
  }
}

std::vector<int> KdTree::knn(const Eigen::Vector3d& query, int k) const {
  k = std::min<int>(k, static_cast<int>(points_.size()));
  if (k <= 0) return {};

  KnnHeap heap(k);
  knn_recurse(root_, query, heap);

  std::sort(heap.entries.begin(), heap.entries.end());
  std::vector<int> out(heap.entries.size());
  for (std::size_t i = 0; i < heap.entries.size(); ++i) out[i] = heap.entries[i].index;
  return out;
}

void KdTree::radius_recurse(int node_id, const Eigen::Vector3d& query, double r2, std::vector<int>& out) const {
  const Node& n = nodes_[node_id];
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const int idx = indices_[i];
      if ((points_[idx] - query).squaredNorm() <= r2) out.push_back(idx);
    }
    return;
  }
  const double diff = query[n.axis] - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  radius_recurse(near, query, r2, out);
  if (diff * diff <= r2) radius_recurse(far, query, r2, out);
}

std::vector<int> KdTree::radius_search(const Eigen::Vector3d& query, double radius) const {
  std::vector<int> out;
  if (root_ < 0 || radius < 0.0) return out;
  radius_recurse(root_, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vgicp
