#include "vgicp/config.hpp"

#include "vgicp/io.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace vgicp {

using ordered_json = nlohmann::ordered_json;

void PipelineConfig::validate() const {
  if (!(global_factor_overlap_min > 0.0 && global_factor_overlap_min < local_overlap_emit_min &&
        local_overlap_emit_min < local_overlap_skip_max && local_overlap_skip_max <= 1.0)) {
    throw std::invalid_argument(
        "overlap thresholds must satisfy 0 < global_min < local_emit_min < local_skip_max <= 1");
  }
  if (local_voxel_resolution <= 0.0 || global_voxel_resolution <= 0.0) {
    throw std::invalid_argument("voxel resolutions must be positive");
  }
  if (local_max_window_frames < 1) throw std::invalid_argument("window size must be at least 1");
  if (covariance_neighbors < 4) throw std::invalid_argument("covariance neighbors must be >= 4");
  if (tukey_width <= 0.0 || tukey_offset < 0.0 || huber_delta <= 0.0) {
    throw std::invalid_argument("kernel parameters out of range");
  }
  if (mme_radius <= 0.0) throw std::invalid_argument("mme radius must be positive");
  if (threads < 0) throw std::invalid_argument("thread count must be nonnegative");
}

namespace {

ordered_json gicp_to_json(const GicpSettings& g) {
  return ordered_json{{"max_iterations", g.max_iterations},
                      {"max_correspondence_distance", g.max_correspondence_distance},
                      {"convergence_twist_norm", g.convergence_twist_norm}};
}

void gicp_from_json(const ordered_json& j, GicpSettings& g) {
  g.max_iterations = j.value("max_iterations", g.max_iterations);
  g.max_correspondence_distance = j.value("max_correspondence_distance", g.max_correspondence_distance);
  g.convergence_twist_norm = j.value("convergence_twist_norm", g.convergence_twist_norm);
}

}  // namespace

std::string PipelineConfig::to_json() const {
  ordered_json j;
  j["local"] = {{"overlap_skip_max", local_overlap_skip_max},
                {"overlap_emit_min", local_overlap_emit_min},
                {"max_window_frames", local_max_window_frames},
                {"voxel_resolution", local_voxel_resolution}};
  j["global"] = {{"voxel_resolution", global_voxel_resolution},
                 {"factor_overlap_min", global_factor_overlap_min},
                 {"optimize_every_submap", global_optimize_every_submap},
                 {"submap_downsample_resolution", submap_downsample_resolution},
                 {"symmetric_factors", symmetric_factors}};
  j["covariance"] = {{"neighbors", covariance_neighbors}, {"plane_epsilon", covariance_plane_epsilon}};
  j["kernel"] = {{"tukey_width", tukey_width}, {"tukey_offset", tukey_offset}, {"huber_delta", huber_delta}};
  j["loop"] = {{"information", std::vector<double>(loop_information.data(), loop_information.data() + 6)},
               {"gate_min_overlap", loop_gate_min_overlap},
               {"gate_max_mean_residual", loop_gate_max_mean_residual},
               {"proximity_radius", proximity_radius},
               {"proximity_min_id_gap", proximity_min_id_gap},
               {"gicp", gicp_to_json(loop_gicp)}};
  j["odometry"] = {{"gicp", gicp_to_json(odometry_gicp)}};
  j["lm"] = {{"max_iterations", lm.max_iterations},
             {"lambda_init", lm.lambda_init},
             {"lambda_max", lm.lambda_max},
             {"relative_error_decrease", lm.relative_error_decrease},
             {"step_norm_tolerance", lm.step_norm_tolerance}};
  j["evaluation"] = {{"mme_radius", mme_radius}};
  j["runtime"] = {{"threads", threads},
                  {"deterministic", deterministic},
                  {"output_downsample_resolution", output_downsample_resolution}};
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  PipelineConfig c;

  if (j.contains("local")) {
    const auto& s = j["local"];
    c.local_overlap_skip_max = s.value("overlap_skip_max", c.local_overlap_skip_max);
    c.local_overlap_emit_min = s.value("overlap_emit_min", c.local_overlap_emit_min);
    c.local_max_window_frames = s.value("max_window_frames", c.local_max_window_frames);
    c.local_voxel_resolution = s.value("voxel_resolution", c.local_voxel_resolution);
  }
  if (j.contains("global")) {
    const auto& s = j["global"];
    c.global_voxel_resolution = s.value("voxel_resolution", c.global_voxel_resolution);
    c.global_factor_overlap_min = s.value("factor_overlap_min", c.global_factor_overlap_min);
    c.global_optimize_every_submap = s.value("optimize_every_submap", c.global_optimize_every_submap);
    c.submap_downsample_resolution = s.value("submap_downsample_resolution", c.submap_downsample_resolution);
    c.symmetric_factors = s.value("symmetric_factors", c.symmetric_factors);
  }
  if (j.contains("covariance")) {
    const auto& s = j["covariance"];
    c.covariance_neighbors = s.value("neighbors", c.covariance_neighbors);
    c.covariance_plane_epsilon = s.value("plane_epsilon", c.covariance_plane_epsilon);
  }
  if (j.contains("kernel")) {
    const auto& s = j["kernel"];
    c.tukey_width = s.value("tukey_width", c.tukey_width);
    c.tukey_offset = s.value("tukey_offset", c.tukey_offset);
    c.huber_delta = s.value("huber_delta", c.huber_delta);
  }
  if (j.contains("loop")) {
    const auto& s = j["loop"];
    if (s.contains("information")) {
      const auto vec = s["information"].get<std::vector<double>>();
      if (vec.size() != 6) throw std::invalid_argument("loop information needs 6 diagonal entries");
      for (int i = 0; i < 6; ++i) c.loop_information[i] = vec[i];
    }
    c.loop_gate_min_overlap = s.value("gate_min_overlap", c.loop_gate_min_overlap);
    c.loop_gate_max_mean_residual = s.value("gate_max_mean_residual", c.loop_gate_max_mean_residual);
    c.proximity_radius = s.value("proximity_radius", c.proximity_radius);
    c.proximity_min_id_gap = s.value("proximity_min_id_gap", c.proximity_min_id_gap);
    if (s.contains("gicp")) gicp_from_json(s["gicp"], c.loop_gicp);
  }
  if (j.contains("odometry") && j["odometry"].contains("gicp")) {
    gicp_from_json(j["odometry"]["gicp"], c.odometry_gicp);
  }
  if (j.contains("lm")) {
    const auto& s = j["lm"];
    c.lm.max_iterations = s.value("max_iterations", c.lm.max_iterations);
    c.lm.lambda_init = s.value("lambda_init", c.lm.lambda_init);
    c.lm.lambda_max = s.value("lambda_max", c.lm.lambda_max);
    c.lm.relative_error_decrease = s.value("relative_error_decrease", c.lm.relative_error_decrease);
    c.lm.step_norm_tolerance = s.value("step_norm_tolerance", c.lm.step_norm_tolerance);
  }
  if (j.contains("evaluation")) {
    c.mme_radius = j["evaluation"].value("mme_radius", c.mme_radius);
  }
  if (j.contains("runtime")) {
    const auto& s = j["runtime"];
    c.threads = s.value("threads", c.threads);
    c.deterministic = s.value("deterministic", c.deterministic);
    c.output_downsample_resolution = s.value("output_downsample_resolution", c.output_downsample_resolution);
  }

  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void PipelineConfig::save(const std::filesystem::path& path) const {
  atomic_write(path, [&](std::ostream& out) { out << to_json(); });
}

}  // namespace vgicp
