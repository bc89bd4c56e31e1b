#include "vgicp/voxelmap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace vgicp {

namespace {

constexpr int kKeyBits = 21;
constexpr std::int64_t kKeyBias = 1 << 20;
constexpr int kShards = 64;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct VoxelAccumulator {
  KahanSum<Eigen::Vector3d> mean_sum;
  KahanSum<Eigen::Matrix3d> second_moment_sum;  // sum of C_k + mu_k mu_k^T
  int count = 0;

  void add(const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov) {
    mean_sum.add(mean);
    second_moment_sum.add(cov + mean * mean.transpose());
    ++count;
  }

  GaussianVoxel finalize() const {
    GaussianVoxel v;
    v.count = count;
    v.mean = mean_sum.sum / count;
    v.covariance = second_moment_sum.sum / count - v.mean * v.mean.transpose();
    return v;
  }
};

}  // namespace

Eigen::Vector3i GaussianVoxelMap::voxel_coord(const Eigen::Vector3d& point) const {
  Eigen::Vector3i coord;
  for (int a = 0; a < 3; ++a) {
    const double c = std::floor(point[a] / resolution_);
    if (!(c >= -static_cast<double>(kKeyBias) && c < static_cast<double>(kKeyBias))) {
      throw std::out_of_range("point beyond the +-2^20 voxel-per-axis range limit");
    }
    coord[a] = static_cast<int>(c);
  }
  return coord;
}

std::uint64_t GaussianVoxelMap::pack_key(const Eigen::Vector3i& coord) {
  std::uint64_t key = 0;
  for (int a = 0; a < 3; ++a) {
    key = (key << kKeyBits) | static_cast<std::uint64_t>(coord[a] + kKeyBias);
  }
  return key;
}

GaussianVoxelMap::GaussianVoxelMap(const PointCloud& cloud, double resolution, const ExecPolicy& policy)
    : resolution_(resolution), total_points_(cloud.size()) {
  if (resolution <= 0.0) {
    throw std::invalid_argument("voxel resolution must be positive");
  }
  if (!cloud.has_covariances()) {
    throw std::invalid_argument("voxel map construction requires per-point covariances");
  }

  const std::size_t n = cloud.size();
  std::vector<std::uint64_t> keys(n);
  parallel_for(n, policy, [&](std::size_t i) { keys[i] = pack_key(voxel_coord(cloud.means[i])); });

  // Stable scatter into key shards: every voxel belongs to exactly one shard
  // and sees its points in input order, so accumulation does not depend on
  // the thread count.
  std::array<std::vector<std::uint32_t>, kShards> shards;
  for (auto& s : shards) s.reserve(n / kShards + 1);
  for (std::size_t i = 0; i < n; ++i) {
    shards[mix(keys[i]) & (kShards - 1)].push_back(static_cast<std::uint32_t>(i));
  }

  std::array<std::unordered_map<std::uint64_t, VoxelAccumulator>, kShards> partials;
  parallel_for(kShards, policy, [&](std::size_t s) {
    auto& local = partials[s];
    local.reserve(shards[s].size());
    for (const std::uint32_t i : shards[s]) {
      local[keys[i]].add(cloud.means[i], cloud.covariances[i]);
    }
  });

  std::size_t total = 0;
  for (const auto& p : partials) total += p.size();
  voxels_.reserve(total);
  for (const auto& p : partials) {
    for (const auto& [key, acc] : p) {
      voxels_.emplace(key, acc.finalize());
    }
  }
}

const GaussianVoxel* GaussianVoxelMap::lookup(const Eigen::Vector3d& point) const {
  Eigen::Vector3i coord;
  for (int a = 0; a < 3; ++a) {
    const double c = std::floor(point[a] / resolution_);
    if (!(c >= -static_cast<double>(kKeyBias) && c < static_cast<double>(kKeyBias))) {
      return nullptr;
    }
    coord[a] = static_cast<int>(c);
  }
  const auto it = voxels_.find(pack_key(coord));
  return it == voxels_.end() ? nullptr : &it->second;
}

double overlap_rate(const PointCloud& cloud, const Pose& pose_rel, const GaussianVoxelMap& map,
                    const ExecPolicy& policy) {
  if (cloud.empty()) {
    throw std::invalid_argument("overlap_rate requires a nonempty cloud");
  }
  const std::size_t hits = parallel_reduce(
      cloud.size(), std::size_t{0}, policy,
      [&](std::size_t begin, std::size_t end) {
        std::size_t h = 0;
        for (std::size_t i = begin; i < end; ++i) {
          if (map.lookup(pose_rel.apply(cloud.means[i])) != nullptr) ++h;
        }
        return h;
      },
      [](std::size_t a, std::size_t b) { return a + b; });
  return static_cast<double>(hits) / static_cast<double>(cloud.size());
}

PointCloud voxel_downsample(const PointCloud& cloud, double resolution, const ExecPolicy& policy) {
  const GaussianVoxelMap map(cloud, resolution, policy);

  std::vector<std::uint64_t> keys;
  keys.reserve(map.size());
  for (const auto& [key, voxel] : map.voxels()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  std::unordered_map<std::uint64_t, std::pair<double, int>> intensity_sums;
  if (cloud.has_intensities()) {
    intensity_sums.reserve(map.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      auto& slot = intensity_sums[GaussianVoxelMap::pack_key(map.voxel_coord(cloud.means[i]))];
      slot.first += cloud.intensities[i];
      slot.second += 1;
    }
  }

  PointCloud out;
  out.means.reserve(keys.size());
  out.covariances.reserve(keys.size());
  if (cloud.has_intensities()) out.intensities.reserve(keys.size());
  for (const std::uint64_t key : keys) {
    const GaussianVoxel& v = map.voxels().at(key);
    out.means.push_back(v.mean);
    out.covariances.push_back(v.covariance);
    if (cloud.has_intensities()) {
      const auto& slot = intensity_sums.at(key);
      out.intensities.push_back(slot.first / slot.second);
    }
  }
  return out;
}

}  // namespace vgicp
