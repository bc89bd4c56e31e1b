#pragma once

#include "vgicp/evaluation.hpp"
#include "vgicp/point_cloud.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vgicp {

/// KITTI velodyne scan: packed little-endian float32 (x, y, z, intensity)
/// records. Throws std::runtime_error naming the byte offset when the file
/// size is not a multiple of 16. An empty file yields an empty cloud with
/// the warning flag set.
struct KittiScan {
  PointCloud cloud;
  bool empty_file_warning = false;
};
KittiScan load_kitti_scan(const std::filesystem::path& path);

void save_kitti_scan(const PointCloud& cloud, const std::filesystem::path& path);

/// KITTI pose file: one row-major 3x4 [R|t] per line, 12 fields. Frame
/// indices are the line numbers.
Trajectory read_kitti_trajectory(const std::filesystem::path& path);

/// 12 space-separated values per frame, 12 significant digits so poses
/// survive a write/read roundtrip within 1e-9. Atomic (temp + rename).
void write_trajectory_kitti(const Trajectory& trajectory, const std::filesystem::path& path);

/// Binary little-endian PLY with float x/y/z and optional intensity.
/// Refuses an empty cloud.
void export_map_ply(const PointCloud& map, const std::filesystem::path& path);

/// Loop candidate file: "<submap_a> <submap_b> [yaw_deg]" per line; blank
/// lines and '#' comments ignored.
struct LoopCandidateRecord {
  int submap_a = 0;
  int submap_b = 0;
  std::optional<double> yaw_guess_deg;
};
std::vector<LoopCandidateRecord> read_loop_candidates(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory plus rename, so aborts
/// never leave partial outputs behind.
void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

}  // namespace vgicp
