#include "vgicp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vgicp {

namespace {

// Deterministic draws independent of the platform's distribution
// implementations.
struct SceneRng {
  std::uint64_t state;
  explicit SceneRng(std::uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53); }
  double normal(double sigma) {
    const double u1 = std::max(uniform(0.0, 1.0), 1e-300);
    const double u2 = uniform(0.0, 1.0);
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

// Rectangular world surface: corner + two edge vectors.
struct Rect {
  Eigen::Vector3d corner;
  Eigen::Vector3d edge_u;
  Eigen::Vector3d edge_v;
  double area = 0.0;

  Rect(const Eigen::Vector3d& c, const Eigen::Vector3d& u, const Eigen::Vector3d& v)
      : corner(c), edge_u(u), edge_v(v), area(u.norm() * v.norm()) {}

  Eigen::Vector3d sample(SceneRng& rng) const { return corner + rng.uniform(0, 1) * edge_u + rng.uniform(0, 1) * edge_v; }

  double distance_lower_bound(const Eigen::Vector3d& p) const {
    // Distance to the rect's bounding sphere; 0 when inside.
    const Eigen::Vector3d center = corner + 0.5 * edge_u + 0.5 * edge_v;
    const double radius = 0.5 * (edge_u + edge_v).norm() + 0.5 * (edge_u - edge_v).norm();
    return std::max(0.0, (p - center).norm() - radius);
  }
};

void add_box(std::vector<Rect>& rects, const Eigen::Vector3d& center, double yaw, const Eigen::Vector3d& size) {
  const Eigen::Matrix3d R = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d ex = R * Eigen::Vector3d(size.x(), 0, 0);
  const Eigen::Vector3d ey = R * Eigen::Vector3d(0, size.y(), 0);
  const Eigen::Vector3d ez(0, 0, size.z());
  const Eigen::Vector3d base = center - 0.5 * ex - 0.5 * ey;
  rects.emplace_back(base, ex, ez);                 // -y face
  rects.emplace_back(base + ey, ex, ez);            // +y face
  rects.emplace_back(base, ey, ez);                 // -x face
  rects.emplace_back(base + ex, ey, ez);            // +x face
  rects.emplace_back(base + ez, ex, ey);            // top
}

std::vector<Pose> make_ground_truth(const SyntheticSceneSpec& spec) {
  std::vector<Pose> poses;
  poses.reserve(spec.frames);
  const double h = spec.sensor_height;
  for (int k = 0; k < spec.frames; ++k) {
    switch (spec.shape) {
      case TrajectoryShape::line: {
        poses.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(spec.spacing * k, 0, h));
        break;
      }
      case TrajectoryShape::circle: {
        const double phi = 2.0 * M_PI * k / spec.frames;
        const Eigen::Matrix3d R = Eigen::AngleAxisd(phi + M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        poses.emplace_back(R, Eigen::Vector3d(spec.radius * std::cos(phi), spec.radius * std::sin(phi), h));
        break;
      }
      case TrajectoryShape::figure_eight: {
        const double t = 2.0 * M_PI * k / spec.frames;
        const Eigen::Vector3d pos(spec.radius * std::sin(t), spec.radius * std::sin(t) * std::cos(t), h);
        const double heading = std::atan2(std::cos(2.0 * t), std::cos(t));
        const Eigen::Matrix3d R = Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        poses.emplace_back(R, pos);
        break;
      }
    }
  }
  return poses;
}

}  // namespace

TrajectoryShape trajectory_shape_from_string(const std::string& name) {
  if (name == "line") return TrajectoryShape::line;
  if (name == "circle") return TrajectoryShape::circle;
  if (name == "figure-eight" || name == "figure_eight" || name == "eight") return TrajectoryShape::figure_eight;
  throw std::invalid_argument("unknown trajectory shape: " + name);
}

const char* to_string(TrajectoryShape shape) {
  switch (shape) {
    case TrajectoryShape::line: return "line";
    case TrajectoryShape::circle: return "circle";
    case TrajectoryShape::figure_eight: return "figure-eight";
  }
  return "unknown";
}

void SyntheticSceneSpec::validate() const {
  if (frames < 2) throw std::invalid_argument("synthetic sequence needs at least 2 frames");
  if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
  if (points_per_scan < 10) throw std::invalid_argument("points per scan must be at least 10");
  if (max_range <= 0.0 || radius <= 0.0 || spacing <= 0.0) {
    throw std::invalid_argument("ranges and scales must be positive");
  }
}

SyntheticSequence generate_synthetic_sequence(const SyntheticSceneSpec& spec) {
  spec.validate();
  SceneRng rng(spec.seed);

  const std::vector<Pose> gt = make_ground_truth(spec);

  // World extent from the trajectory bounding box plus sensing margin.
  Eigen::Vector2d lo(1e30, 1e30), hi(-1e30, -1e30);
  for (const auto& T : gt) {
    lo = lo.cwiseMin(T.translation.head<2>());
    hi = hi.cwiseMax(T.translation.head<2>());
  }
  const double margin = 0.7 * spec.max_range;
  lo.array() -= margin;
  hi.array() += margin;

  std::vector<Rect> rects;
  rects.emplace_back(Eigen::Vector3d(lo.x(), lo.y(), 0.0), Eigen::Vector3d(hi.x() - lo.x(), 0, 0),
                     Eigen::Vector3d(0, hi.y() - lo.y(), 0));  // ground
  // Perimeter walls.
  const double wall_h = 5.0;
  rects.emplace_back(Eigen::Vector3d(lo.x(), lo.y(), 0), Eigen::Vector3d(hi.x() - lo.x(), 0, 0),
                     Eigen::Vector3d(0, 0, wall_h));
  rects.emplace_back(Eigen::Vector3d(lo.x(), hi.y(), 0), Eigen::Vector3d(hi.x() - lo.x(), 0, 0),
                     Eigen::Vector3d(0, 0, wall_h));
  rects.emplace_back(Eigen::Vector3d(lo.x(), lo.y(), 0), Eigen::Vector3d(0, hi.y() - lo.y(), 0),
                     Eigen::Vector3d(0, 0, wall_h));
  rects.emplace_back(Eigen::Vector3d(hi.x(), lo.y(), 0), Eigen::Vector3d(0, hi.y() - lo.y(), 0),
                     Eigen::Vector3d(0, 0, wall_h));

  for (int b = 0; b < spec.box_count; ++b) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const Eigen::Vector3d center(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), 0.0);
      double clearance = 1e30;
      for (const auto& T : gt) {
        clearance = std::min(clearance, (T.translation.head<2>() - center.head<2>()).norm());
      }
      if (clearance < 3.0) continue;  // keep the path clear
      const Eigen::Vector3d size(rng.uniform(1.0, 4.0), rng.uniform(1.0, 4.0), rng.uniform(1.5, 5.0));
      add_box(rects, center + Eigen::Vector3d(0, 0, 0.5 * size.z()), rng.uniform(0, M_PI), size);
      break;
    }
  }

  SyntheticSequence seq;
  seq.scans.reserve(spec.frames);

  std::vector<double> weights(rects.size());
  for (int k = 0; k < spec.frames; ++k) {
    const Pose& T = gt[k];
    const Pose T_inv = T.inverse();

    // Area-weighted sampling over surfaces that can be in range.
    double total_weight = 0.0;
    for (std::size_t r = 0; r < rects.size(); ++r) {
      weights[r] = rects[r].distance_lower_bound(T.translation) <= spec.max_range ? rects[r].area : 0.0;
      total_weight += weights[r];
    }

    PointCloud scan;
    scan.means.reserve(spec.points_per_scan);
    const int max_attempts = 60 * spec.points_per_scan;
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(scan.size()) < spec.points_per_scan;
         ++attempt) {
      double pick = rng.uniform(0.0, total_weight);
      std::size_t r = 0;
      for (; r + 1 < rects.size(); ++r) {
        if (pick < weights[r]) break;
        pick -= weights[r];
      }
      const Eigen::Vector3d p_world = rects[r].sample(rng);
      if ((p_world - T.translation).norm() > spec.max_range) continue;
      Eigen::Vector3d p_local = T_inv.apply(p_world);
      if (spec.noise_sigma > 0.0) {
        p_local += Eigen::Vector3d(rng.normal(spec.noise_sigma), rng.normal(spec.noise_sigma),
                                   rng.normal(spec.noise_sigma));
      }
      scan.means.push_back(p_local);
    }
    seq.scans.push_back(std::move(scan));
    seq.ground_truth.append(k, T);
  }

  // Odometry: ground-truth relative motions composed with the drift bias.
  Pose odom = gt[0];
  seq.odometry.append(0, odom);
  const Pose bias = se3_exp(spec.drift_per_frame);
  for (int k = 1; k < spec.frames; ++k) {
    odom = odom * (gt[k - 1].inverse() * gt[k]) * bias;
    seq.odometry.append(k, odom);
  }
  return seq;
}

}  // namespace vgicp
