#pragma once

#include <Eigen/Core>

#include <vector>

namespace vgicp {

/// Static array-backed kd-tree over 3D points. Built once, queried from any
/// number of threads. Exact queries: k nearest by Euclidean distance with
/// ties broken toward the lower point index.
class KdTree {
 public:
  explicit KdTree(const std::vector<Eigen::Vector3d>& points);

  /// Indices of the k nearest points to query, nearest first.
  /// k is clamped to the cloud size.
  std::vector<int> knn(const Eigen::Vector3d& query, int k) const;

  /// Indices of all points within radius of query (inclusive), ascending index.
  std::vector<int> radius_search(const Eigen::Vector3d& query, double radius) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int begin = 0;   // leaf payload range in indices_
    int end = 0;
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end);
  void knn_recurse(int node, const Eigen::Vector3d& query, struct KnnHeap& heap) const;
  void radius_recurse(int node, const Eigen::Vector3d& query, double r2, std::vector<int>& out) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> indices_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace vgicp
