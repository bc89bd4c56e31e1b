#include "vgicp/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vgicp {

namespace fs = std::filesystem;

void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

KittiScan load_kitti_scan(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open scan file: " + path.string());
  const std::streamoff size = in.tellg();
  in.seekg(0);

  KittiScan result;
  if (size == 0) {
    result.empty_file_warning = true;
    return result;
  }
  if (size % 16 != 0) {
    throw std::runtime_error("malformed KITTI scan " + path.string() + ": trailing " +
                             std::to_string(size % 16) + " bytes at offset " + std::to_string(size - size % 16));
  }

  const std::size_t n = static_cast<std::size_t>(size / 16);
  std::vector<float> buffer(4 * n);
  in.read(reinterpret_cast<char*>(buffer.data()), size);
  if (!in) throw std::runtime_error("read failed: " + path.string());

  result.cloud.means.resize(n);
  result.cloud.intensities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.cloud.means[i] = Eigen::Vector3d(buffer[4 * i], buffer[4 * i + 1], buffer[4 * i + 2]);
    result.cloud.intensities[i] = buffer[4 * i + 3];
  }
  result.cloud.validate();
  return result;
}

void save_kitti_scan(const PointCloud& cloud, const fs::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const float record[4] = {static_cast<float>(cloud.means[i].x()), static_cast<float>(cloud.means[i].y()),
                               static_cast<float>(cloud.means[i].z()),
                               cloud.has_intensities() ? static_cast<float>(cloud.intensities[i]) : 0.0f};
      out.write(reinterpret_cast<const char*>(record), sizeof(record));
    }
  });
}

Trajectory read_kitti_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path.string());

  Trajectory trajectory;
  std::string line;
  int index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!(ss >> v[i])) {
        throw std::runtime_error("malformed pose line " + std::to_string(index) + " in " + path.string());
      }
    }
    Eigen::Matrix3d R;
    R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    trajectory.append(index++, Pose(R, Eigen::Vector3d(v[3], v[7], v[11])));
  }
  return trajectory;
}

void write_trajectory_kitti(const Trajectory& trajectory, const fs::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    char buf[64];
    for (const auto& [index, pose] : trajectory.poses) {
      const Eigen::Matrix3d& R = pose.rotation;
      const Eigen::Vector3d& t = pose.translation;
      const double v[12] = {R(0, 0), R(0, 1), R(0, 2), t.x(),  //
                            R(1, 0), R(1, 1), R(1, 2), t.y(),  //
                            R(2, 0), R(2, 1), R(2, 2), t.z()};
      for (int i = 0; i < 12; ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", v[i]);
        out << buf << (i == 11 ? "" : " ");
      }
      out << "\n";
    }
  });
}

void export_map_ply(const PointCloud& map, const fs::path& path) {
  if (map.empty()) throw std::invalid_argument("refusing to export an empty map");

  atomic_write(path, [&](std::ostream& out) {
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << map.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (map.has_intensities()) out << "property float intensity\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < map.size(); ++i) {
      float record[4] = {static_cast<float>(map.means[i].x()), static_cast<float>(map.means[i].y()),
                         static_cast<float>(map.means[i].z()), 0.0f};
      if (map.has_intensities()) {
        record[3] = static_cast<float>(map.intensities[i]);
        out.write(reinterpret_cast<const char*>(record), 4 * sizeof(float));
      } else {
        out.write(reinterpret_cast<const char*>(record), 3 * sizeof(float));
      }
    }
  });
}

std::vector<LoopCandidateRecord> read_loop_candidates(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open loop candidate file: " + path.string());

  std::vector<LoopCandidateRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    LoopCandidateRecord rec;
    if (!(ss >> rec.submap_a)) continue;  // blank line
    if (!(ss >> rec.submap_b)) {
      throw std::runtime_error("loop candidate line " + std::to_string(line_no) + " needs two submap ids");
    }
    double yaw;
    if (ss >> yaw) rec.yaw_guess_deg = yaw;
    records.push_back(rec);
  }
  return records;
}

}  // namespace vgicp
