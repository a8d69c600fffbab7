#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <lcal/dynamic/dynamic_integration.hpp>
#include <lcal/error.hpp>
#include <lcal/init/reprojection_refinement.hpp>
#include <lcal/init/rotation_ransac.hpp>
#include <lcal/nid/fine_registration.hpp>
#include <lcal/vcam/virtual_camera.hpp>

namespace lcal {

/// One calibration data pair: the scans taken from a single sensor placement and the camera image.
struct PairInput {
  std::vector<std::string> clouds;
  std::string image;
  std::optional<std::string> correspondences;  ///< matcher or manual output for this pair
};

enum class IntegrationMode { Static, Dynamic };

struct PipelineConfig {
  std::string camera;  ///< camera intrinsics JSON
  std::vector<PairInput> pairs;
  IntegrationMode mode = IntegrationMode::Static;
  DynamicIntegrationParams dynamic;
  VirtualCameraParams virtual_camera;
  RansacParams ransac;
  RefineParams refine;
  FineRegistrationParams fine;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  /// Existence of every referenced input file; call before any computation.
  void validate() const {
    if (pairs.empty()) throw FormatError("config: \"pairs\" must list at least one data pair");
    auto require = [](const std::string& path, const std::string& what) {
      if (!std::filesystem::is_regular_file(path)) throw IoError("config: " + what + " not found: " + path);
    };
    require(camera, "camera intrinsics");
    for (std::size_t k = 0; k < pairs.size(); k++) {
      const std::string where = "pairs[" + std::to_string(k) + "]";
      if (pairs[k].clouds.empty()) throw FormatError("config: " + where + ".clouds is empty");
      for (const auto& c : pairs[k].clouds) require(c, where + " cloud");
      require(pairs[k].image, where + " image");
      if (pairs[k].correspondences) require(*pairs[k].correspondences, where + " correspondence file");
    }
    ransac.validate();
    if (fine.bins < 2) throw FormatError("config: fine.bins must be at least 2");
    if (fine.max_outer_iterations < 1) throw FormatError("config: fine.max_outer_iterations must be at least 1");
  }
};

namespace config_detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

}  // namespace config_detail

/// Parses a config object. Relative paths are taken relative to `base_dir`.
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  using config_detail::read_opt;
  using config_detail::resolve;
  PipelineConfig c;
  try {
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    c.camera = resolve(base_dir, j.at("camera").get<std::string>());
    for (const auto& p : j.at("pairs")) {
      PairInput pair;
      for (const auto& cloud : p.at("clouds")) pair.clouds.push_back(resolve(base_dir, cloud.get<std::string>()));
      pair.image = resolve(base_dir, p.at("image").get<std::string>());
      if (p.contains("correspondences") && !p.at("correspondences").is_null()) {
        pair.correspondences = resolve(base_dir, p.at("correspondences").get<std::string>());
      }
      c.pairs.push_back(std::move(pair));
    }

    const std::string mode = j.value("mode", std::string("static"));
    if (mode == "static") {
      c.mode = IntegrationMode::Static;
    } else if (mode == "dynamic") {
      c.mode = IntegrationMode::Dynamic;
    } else {
      throw FormatError("mode must be \"static\" or \"dynamic\", got \"" + mode + "\"");
    }

    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    else c.output_dir = resolve(base_dir, c.output_dir);
    read_opt(j, "seed", c.seed);

    if (j.contains("dynamic")) {
      const auto& d = j.at("dynamic");
      read_opt(d, "voxel_size", c.dynamic.ivox.voxel_size);
      read_opt(d, "max_points_per_voxel", c.dynamic.ivox.max_points_per_voxel);
      read_opt(d, "decimation_radius", c.dynamic.ivox.decimation_radius);
      read_opt(d, "deskew", c.dynamic.deskew);
      read_opt(d, "max_iterations", c.dynamic.ct_icp.max_iterations);
      read_opt(d, "max_correspondence_distance", c.dynamic.ct_icp.max_correspondence_distance);
    }
    if (j.contains("virtual_camera")) {
      const auto& v = j.at("virtual_camera");
      read_opt(v, "pinhole_size", c.virtual_camera.pinhole_size);
      read_opt(v, "equirect_width", c.virtual_camera.equirect_width);
      read_opt(v, "fov_margin", c.virtual_camera.fov_margin);
    }
    if (j.contains("ransac")) {
      const auto& r = j.at("ransac");
      read_opt(r, "iterations", c.ransac.iterations);
      read_opt(r, "pixel_threshold", c.ransac.pixel_threshold);
      read_opt(r, "angular_threshold", c.ransac.angular_threshold);
    }
    c.refine.pixel_threshold = c.ransac.pixel_threshold;
    c.refine.angular_threshold = c.ransac.angular_threshold;
    if (j.contains("refine")) {
      const auto& r = j.at("refine");
      if (r.contains("cauchy_scale") && !r.at("cauchy_scale").is_null()) c.refine.cauchy_scale = r.at("cauchy_scale").get<double>();
      read_opt(r, "max_iterations", c.refine.max_iterations);
    }
    if (j.contains("fine")) {
      const auto& f = j.at("fine");
      read_opt(f, "bins", c.fine.bins);
      read_opt(f, "max_outer_iterations", c.fine.max_outer_iterations);
      read_opt(f, "max_evaluations", c.fine.nelder_mead.max_evaluations);
      if (f.contains("initial_step")) {
        const auto steps = f.at("initial_step").get<std::vector<double>>();
        if (steps.size() != 6) throw FormatError("fine.initial_step needs 6 entries");
        c.fine.nelder_mead.steps = Eigen::Map<const Eigen::VectorXd>(steps.data(), 6);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream ifs(path);
  if (!ifs) throw IoError("failed to open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ifs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  try {
    return config_from_json(j, std::filesystem::absolute(path).parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

/// Sub-seed for one stochastic component; every random draw in the pipeline derives from the config seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t component) { return splitmix64(seed ^ splitmix64(component + 0x5eed)); }

}  // namespace lcal
