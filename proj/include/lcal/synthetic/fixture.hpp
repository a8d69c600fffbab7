#pragma once

// Writes a complete synthetic calibration data set (clouds, image, intrinsics, matcher output,
// pipeline config and the ground truth) for end-to-end runs of the pipeline.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include <lcal/cloud/image_io.hpp>
#include <lcal/cloud/ply_io.hpp>
#include <lcal/geom/camera_io.hpp>
#include <lcal/geom/transform_io.hpp>
#include <lcal/init/correspondences.hpp>
#include <lcal/synthetic/scene.hpp>
#include <lcal/vcam/fov.hpp>
#include <lcal/vcam/virtual_camera.hpp>

namespace lcal::synthetic {

struct FixtureOptions {
  bool equirectangular = false;  ///< pinhole 640x480 or equirectangular 1024x512 camera
  int scans = 2;                 ///< static scans accumulated per pair
  std::size_t points_per_scan = 60000;
  int inliers = 60;
  int outliers = 40;
  double pixel_noise = 1.0;
  double image_noise = 0.02;
  std::uint32_t seed = 1;
};

struct FixtureInfo {
  std::string config;  ///< path of the generated pipeline config
  RigidTransform T_camera_lidar;
  CameraModel camera;
};

inline CameraModel fixture_camera(bool equirectangular) {
  if (equirectangular) return EquirectCamera{1024, 512};
  PinholeCamera cam;
  cam.fx = cam.fy = 500.0;
  cam.cx = 320.0;
  cam.cy = 240.0;
  cam.width = 640;
  cam.height = 480;
  return cam;
}

inline FixtureInfo write_fixture(const std::filesystem::path& dir, const FixtureOptions& options = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Scene scene = make_room_scene();
  const RigidTransform T = ground_truth_extrinsic();
  const CameraModel cam = fixture_camera(options.equirectangular);
  std::mt19937 mt(options.seed);

  // LiDAR scans: a narrow non-repetitive pattern for the pinhole set, a spinning band otherwise
  std::vector<std::string> scan_names;
  for (int s = 0; s < options.scans; s++) {
    PointCloud scan = options.equirectangular ? sample_lidar(scene, RigidTransform::identity(), options.points_per_scan, band_directions(deg2rad(45.0)), mt)
                                              : sample_lidar(scene, RigidTransform::identity(), options.points_per_scan, cone_directions(deg2rad(40.0)), mt);
    for (auto& v : scan.intensities) v = std::round(v * 255.0);  // raw 8-bit reflectivity
    scan_names.push_back("scan_" + std::to_string(s) + ".ply");
    write_cloud((dir / scan_names.back()).string(), scan);
  }

  save_camera((dir / "camera.json").string(), cam);
  write_png((dir / "image.png").string(), render_camera(scene, cam, T, options.image_noise, options.seed + 1000), 16);

  // The virtual LiDAR image the pipeline will render, reproduced from the files just written.
  std::vector<PointCloud> loaded;
  for (const auto& name : scan_names) loaded.push_back(load_cloud((dir / name).string()).cloud);
  const PointCloud dense = accumulate_static(loaded);
  const auto vc = select_virtual_camera(estimate_fov(dense).degrees, dense);
  const auto map = render_intensity(dense, vc).index_map;

  std::vector<std::size_t> filled;
  for (std::size_t k = 0; k < map.indices.size(); k++) {
    if (map.indices[k] >= 0) filled.push_back(k);
  }
  std::uniform_int_distribution<std::size_t> pick(0, filled.size() - 1);
  std::normal_distribution<> noise(0.0, options.pixel_noise);
  std::uniform_real_distribution<> unit(0.0, 1.0);
  const Eigen::Vector3d eye = T.inverse().translation();

  auto lidar_px = [&](std::size_t k) { return Eigen::Vector2d(static_cast<double>(k % map.width) + 0.5, static_cast<double>(k / map.width) + 0.5); };
  CorrespondenceSet matches;
  matches.source = "superglue";
  matches.matcher_threshold = 0.05;
  while (static_cast<int>(matches.size()) < options.inliers) {
    const std::size_t k = filled[pick(mt)];
    const Eigen::Vector3d p = dense.points[static_cast<std::size_t>(map.indices[k])];
    const auto x = project(cam, T * p);
    if (!x || !visible_from(scene, eye, p, 1e-3)) continue;
    const Eigen::Vector2d px = *x + Eigen::Vector2d(noise(mt), noise(mt));
    if (!in_image(cam, px)) continue;
    matches.pairs.push_back({px, p, 0.5 + 0.5 * unit(mt), lidar_px(k)});
  }
  for (int i = 0; i < options.outliers; i++) {
    const std::size_t k = filled[pick(mt)];
    const Eigen::Vector2d px(unit(mt) * image_width(cam), unit(mt) * image_height(cam));
    matches.pairs.push_back({px, dense.points[static_cast<std::size_t>(map.indices[k])], 0.5 * unit(mt), lidar_px(k)});
  }
  std::shuffle(matches.pairs.begin(), matches.pairs.end(), mt);

  // the file carries only LiDAR pixels, as a 2D matcher would produce
  auto j = correspondences_to_json(matches);
  for (auto& m : j["matches"]) m["lidar_point"] = nullptr;
  std::ofstream((dir / "matches.json").string()) << j.dump(2) << "\n";

  std::ofstream((dir / "ground_truth.json").string()) << nlohmann::json{{"T_camera_lidar", transform_to_json(T)}}.dump(2) << "\n";

  nlohmann::json config = {{"camera", "camera.json"},
                           {"pairs", {{{"clouds", scan_names}, {"image", "image.png"}, {"correspondences", "matches.json"}}}},
                           {"mode", "static"},
                           {"output_dir", "out"},
                           {"seed", 42}};
  std::ofstream((dir / "config.json").string()) << config.dump(2) << "\n";
  return {(dir / "config.json").string(), T, cam};
}

}  // namespace lcal::synthetic
