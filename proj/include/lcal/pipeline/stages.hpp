#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include <lcal/cloud/histogram_equalization.hpp>
#include <lcal/cloud/image_io.hpp>
#include <lcal/cloud/ply_io.hpp>
#include <lcal/cloud/point_cloud.hpp>
#include <lcal/dynamic/dynamic_integration.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/camera_io.hpp>
#include <lcal/geom/transform_io.hpp>
#include <lcal/init/correspondences.hpp>
#include <lcal/init/reprojection_refinement.hpp>
#include <lcal/init/rotation_ransac.hpp>
#include <lcal/nid/fine_registration.hpp>
#include <lcal/pipeline/config.hpp>
#include <lcal/pipeline/overlay.hpp>
#include <lcal/vcam/fov.hpp>
#include <lcal/vcam/virtual_camera.hpp>

namespace lcal {

/// File layout of a pipeline output directory. Per-pair artifacts live in pair_<k>/.
struct Workspace {
  std::filesystem::path root;

  explicit Workspace(std::filesystem::path root) : root(std::move(root)) {}

  std::filesystem::path pair_dir(std::size_t k) const { return root / ("pair_" + std::to_string(k)); }
  std::string dense_cloud(std::size_t k) const { return (pair_dir(k) / "dense.ply").string(); }
  std::string camera_image(std::size_t k) const { return (pair_dir(k) / "camera_equalized.png").string(); }
  std::string fov(std::size_t k) const { return (pair_dir(k) / "fov.json").string(); }
  std::string lidar_image(std::size_t k) const { return (pair_dir(k) / "lidar_intensity.png").string(); }
  std::string index_map(std::size_t k) const { return (pair_dir(k) / "lidar_indices.bin").string(); }
  std::string virtual_camera(std::size_t k) const { return (pair_dir(k) / "virtual_camera.json").string(); }
  std::string manual_correspondences(std::size_t k) const { return (pair_dir(k) / "manual_correspondences.json").string(); }
  std::string matches_image(std::size_t k) const { return (pair_dir(k) / "matches.png").string(); }
  std::string overlay_image(std::size_t k) const { return (pair_dir(k) / "overlay.png").string(); }
  std::string init_guess() const { return (root / "init_guess.json").string(); }
  std::string calibration() const { return (root / "calib.json").string(); }
};

namespace stage_detail {

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream ifs(path);
  if (!ifs) throw IoError("missing artifact " + path);
  try {
    return nlohmann::json::parse(ifs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream ofs(path);
  if (!ofs) throw IoError("failed to write " + path);
  ofs << j.dump(2) << "\n";
  if (!ofs) throw IoError("failed to write " + path);
}

inline void require_artifact(const std::string& path, const std::string& producer) {
  if (!std::filesystem::is_regular_file(path)) {
    throw IoError("missing artifact " + path + " (run the " + producer + " stage first)");
  }
}

/// Runs one stage, tagging any failure with the stage name.
template <typename F>
nlohmann::json guarded(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace stage_detail

/// Loads, densifies and equalizes every pair: dense.ply and camera_equalized.png.
inline nlohmann::json stage_preprocess(const PipelineConfig& config) {
  using namespace stage_detail;
  return guarded("preprocess", [&] {
    const Workspace ws(config.output_dir);
    const CameraModel cam = load_camera(config.camera);
    nlohmann::json report = nlohmann::json::array();
    for (std::size_t k = 0; k < config.pairs.size(); k++) {
      const auto& pair = config.pairs[k];
      std::filesystem::create_directories(ws.pair_dir(k));
      nlohmann::json entry;
      std::vector<std::string> warnings;

      std::vector<PointCloud> scans;
      std::size_t dropped = 0;
      for (const auto& path : pair.clouds) {
        auto loaded = load_cloud(path);
        dropped += loaded.dropped_non_finite;
        scans.push_back(std::move(loaded.cloud));
      }
      PointCloud dense;
      if (config.mode == IntegrationMode::Dynamic) {
        auto integrated = integrate_dynamic(scans, config.dynamic);
        dense = std::move(integrated.cloud);
        warnings.insert(warnings.end(), integrated.warnings.begin(), integrated.warnings.end());
      } else {
        dense = accumulate_static(scans);
      }
      if (dense.empty()) throw ArgumentError("pair " + std::to_string(k) + " has no valid points");
      dense.intensities = histogram_equalize(dense.intensities);
      dense.times.reset();
      write_cloud(ws.dense_cloud(k), dense);

      GrayImage image = load_png_gray(pair.image);
      if (image.width != image_width(cam) || image.height != image_height(cam)) {
        throw ArgumentError("image " + pair.image + " is " + std::to_string(image.width) + "x" + std::to_string(image.height) + " but the camera model expects " +
                            std::to_string(image_width(cam)) + "x" + std::to_string(image_height(cam)));
      }
      image.pixels = histogram_equalize(image.pixels);
      write_png(ws.camera_image(k), image, 16);

      entry["pair"] = k;
      entry["scans"] = scans.size();
      entry["points"] = dense.size();
      entry["dropped_non_finite"] = dropped;
      entry["warnings"] = warnings;
      report.push_back(entry);
    }
    return report;
  });
}

/// Estimates the LiDAR field of view of each dense cloud: fov.json.
inline nlohmann::json stage_fov(const PipelineConfig& config) {
  using namespace stage_detail;
  return guarded("fov", [&] {
    const Workspace ws(config.output_dir);
    nlohmann::json report = nlohmann::json::array();
    for (std::size_t k = 0; k < config.pairs.size(); k++) {
      require_artifact(ws.dense_cloud(k), "preprocess");
      const auto cloud = load_cloud(ws.dense_cloud(k)).cloud;
      const auto fov = estimate_fov(cloud, derive_seed(config.seed, 100 + k));
      const nlohmann::json j = {{"degrees", fov.degrees}, {"candidates", fov.candidates}, {"warnings", fov.warnings}};
      write_json(ws.fov(k), j);
      report.push_back(j);
    }
    return report;
  });
}

/// Renders each dense cloud through its virtual camera: lidar_intensity.png, lidar_indices.bin,
/// virtual_camera.json.
inline nlohmann::json stage_render(const PipelineConfig& config) {
  using namespace stage_detail;
  return guarded("render", [&] {
    const Workspace ws(config.output_dir);
    nlohmann::json report = nlohmann::json::array();
    for (std::size_t k = 0; k < config.pairs.size(); k++) {
      require_artifact(ws.dense_cloud(k), "preprocess");
      require_artifact(ws.fov(k), "fov");
      const auto cloud = load_cloud(ws.dense_cloud(k)).cloud;
      const double fov = read_json(ws.fov(k)).at("degrees").get<double>();
      const auto vc = select_virtual_camera(fov, cloud, config.virtual_camera);
      const auto rendered = render_intensity(cloud, vc);
      write_png(ws.lidar_image(k), rendered.image);
      write_index_map(ws.index_map(k), rendered.index_map);
      write_json(ws.virtual_camera(k), virtual_camera_to_json(vc));
      report.push_back({{"model", is_equirectangular(vc.model) ? "equirectangular" : "pinhole"}, {"width", image_width(vc.model)}, {"height", image_height(vc.model)}});
    }
    return report;
  });
}

/// Correspondences of one pair: the configured file, else the manual session's file.
inline std::optional<CorrespondenceSet> load_pair_correspondences(const PipelineConfig& config, std::size_t k, const CameraModel& cam) {
  const Workspace ws(config.output_dir);
  std::string path;
  if (config.pairs[k].correspondences) {
    path = *config.pairs[k].correspondences;
  } else if (std::filesystem::is_regular_file(ws.manual_correspondences(k))) {
    path = ws.manual_correspondences(k);
  } else {
    return std::nullopt;
  }
  stage_detail::require_artifact(ws.dense_cloud(k), "preprocess");
  stage_detail::require_artifact(ws.index_map(k), "render");
  const auto cloud = load_cloud(ws.dense_cloud(k)).cloud;
  const auto map = load_index_map(ws.index_map(k));
  return import_correspondences(path, cam, &map, &cloud);
}

struct InitGuessOutcome {
  RigidTransform T_camera_lidar;
  RansacResult ransac;
  std::optional<RefineResult> refined;
  std::vector<std::string> warnings;
};

/// Rotation-only RANSAC on the pooled pairs, then robust refinement from a zero translation.
/// With fewer than 3 pairs the refinement is skipped and the RANSAC rotation is returned.
inline InitGuessOutcome estimate_initial_guess(const CorrespondenceSet& pooled, const CameraModel& cam, const RansacParams& ransac, const RefineParams& refine) {
  InitGuessOutcome out;
  out.ransac = ransac_rotation(pooled, cam, ransac);
  out.warnings = out.ransac.warnings;
  out.T_camera_lidar = RigidTransform(out.ransac.rotation, Eigen::Vector3d::Zero());
  if (pooled.size() >= 3) {
    out.refined = refine_reprojection(pooled, cam, out.T_camera_lidar, refine);
    out.T_camera_lidar = out.refined->T_camera_lidar;
    out.warnings.insert(out.warnings.end(), out.refined->warnings.begin(), out.refined->warnings.end());
  } else {
    out.warnings.push_back("refinement needs at least 3 pairs; translation left at zero");
  }
  return out;
}

/// Pools every pair's correspondences and estimates the initial transform: init_guess.json and
/// a matches.png per pair.
inline nlohmann::json stage_init_guess(const PipelineConfig& config) {
  using namespace stage_detail;
  return guarded("init-guess", [&] {
    const Workspace ws(config.output_dir);
    const CameraModel cam = load_camera(config.camera);
    CorrespondenceSet pooled;
    std::vector<std::size_t> owner;
    std::size_t dropped = 0;
    bool any = false;
    for (std::size_t k = 0; k < config.pairs.size(); k++) {
      const auto set = load_pair_correspondences(config, k, cam);
      if (!set) continue;
      any = true;
      dropped += set->dropped;
      for (const auto& c : set->pairs) {
        pooled.pairs.push_back(c);
        owner.push_back(k);
      }
    }
    if (!any) {
      throw InsufficientCorrespondencesError("no correspondence file configured and no manual session found in " + ws.root.string() +
                                             "; create correspondences with `lcal serve --config <config>`");
    }

    RansacParams ransac = config.ransac;
    ransac.seed = derive_seed(config.seed, 1);
    const auto outcome = estimate_initial_guess(pooled, cam, ransac, config.refine);

    for (std::size_t k = 0; k < config.pairs.size(); k++) {
      if (!std::filesystem::is_regular_file(ws.lidar_image(k)) || !std::filesystem::is_regular_file(ws.camera_image(k))) continue;
      CorrespondenceSet mine;
      std::vector<bool> mask;
      for (std::size_t i = 0; i < pooled.size(); i++) {
        if (owner[i] != k) continue;
        mine.pairs.push_back(pooled.pairs[i]);
        mask.push_back(outcome.ransac.inliers[i]);
      }
      if (!mine.empty()) write_png(ws.matches_image(k), render_matches(load_png_gray(ws.camera_image(k)), load_png_gray(ws.lidar_image(k)), mine, mask));
    }

    nlohmann::json j;
    j["T_camera_lidar"] = transform_to_json(outcome.T_camera_lidar);
    j["ransac_rotation"] = transform_to_json(RigidTransform(outcome.ransac.rotation, Eigen::Vector3d::Zero()));
    j["pairs"] = pooled.size();
    j["dropped"] = dropped;
    j["num_inliers"] = outcome.ransac.num_inliers;
    j["inliers"] = outcome.ransac.inliers;
    j["refined"] = outcome.refined.has_value();
    if (outcome.refined) {
      j["initial_cost"] = outcome.refined->initial_cost;
      j["final_cost"] = outcome.refined->final_cost;
    }
    j["warnings"] = outcome.warnings;
    write_json(ws.init_guess(), j);
    return j;
  });
}

inline std::vector<LidarCameraPair> load_fine_pairs(const PipelineConfig& config) {
  const Workspace ws(config.output_dir);
  std::vector<LidarCameraPair> pairs;
  for (std::size_t k = 0; k < config.pairs.size(); k++) {
    stage_detail::require_artifact(ws.dense_cloud(k), "preprocess");
    stage_detail::require_artifact(ws.camera_image(k), "preprocess");
    pairs.push_back({load_cloud(ws.dense_cloud(k)).cloud, load_png_gray(ws.camera_image(k))});
  }
  return pairs;
}

/// Result file content: transform, final NID, pairs used, outer iterations.
inline nlohmann::json calibration_result_json(const FineRegistrationResult& r) {
  return {{"T_camera_lidar", transform_to_json(r.T_camera_lidar)}, {"final_nid", r.final_nid}, {"pairs_used", r.pairs_used}, {"outer_iterations", r.outer_iterations}};
}

/// NID fine registration from the initial guess: calib.json.
inline nlohmann::json stage_calibrate(const PipelineConfig& config) {
  using namespace stage_detail;
  return guarded("calibrate", [&] {
    const Workspace ws(config.output_dir);
    require_artifact(ws.init_guess(), "init-guess");
    const CameraModel cam = load_camera(config.camera);
    const RigidTransform T0 = transform_from_json(read_json(ws.init_guess()).at("T_camera_lidar"));
    const auto pairs = load_fine_pairs(config);
    const auto result = calibrate_fine(pairs, cam, T0, config.fine);
    const auto j = calibration_result_json(result);
    write_json(ws.calibration(), j);
    auto report = j;
    report["initial_nid"] = result.initial_nid;
    report["warnings"] = result.warnings;
    return report;
  });
}

/// Overlay of each pair at the latest estimate (calib.json, else init_guess.json): overlay.png.
inline nlohmann::json stage_overlay(const PipelineConfig& config) {
  using namespace stage_detail;
  return guarded("overlay", [&] {
    const Workspace ws(config.output_dir);
    std::string source;
    if (std::filesystem::is_regular_file(ws.calibration())) {
      source = ws.calibration();
    } else {
      require_artifact(ws.init_guess(), "init-guess or calibrate");
      source = ws.init_guess();
    }
    const RigidTransform T = transform_from_json(read_json(source).at("T_camera_lidar"));
    const CameraModel cam = load_camera(config.camera);
    nlohmann::json report = nlohmann::json::array();
    const auto pairs = load_fine_pairs(config);
    for (std::size_t k = 0; k < pairs.size(); k++) {
      write_png(ws.overlay_image(k), render_overlay(pairs[k].cloud, pairs[k].image, cam, T));
      report.push_back({{"overlay", ws.overlay_image(k)}, {"transform_source", source}});
    }
    return report;
  });
}

/// Every stage in order. Stages communicate only through the output directory, so running them
/// one by one yields the same files.
inline nlohmann::json run_pipeline(const PipelineConfig& config, const std::function<void(const std::string&, const nlohmann::json&)>& on_stage = {}) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  nlohmann::json all;
  const std::vector<std::pair<std::string, nlohmann::json (*)(const PipelineConfig&)>> stages = {
      {"preprocess", stage_preprocess}, {"fov", stage_fov}, {"render", stage_render}, {"init-guess", stage_init_guess}, {"calibrate", stage_calibrate}, {"overlay", stage_overlay}};
  for (const auto& [name, fn] : stages) {
    all[name] = fn(config);
    if (on_stage) on_stage(name, all[name]);
  }
  return all;
}

}  // namespace lcal
