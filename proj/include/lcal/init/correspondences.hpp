#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <lcal/cloud/point_cloud.hpp>
#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>
#include <lcal/vcam/virtual_camera.hpp>

namespace lcal {

/// One 2D-3D match: a camera-image pixel and a LiDAR-frame point.
struct Correspondence {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double confidence = 1.0;
  std::optional<Eigen::Vector2d> lidar_pixel;  ///< where the point was picked on the LiDAR image, if known
};

struct CorrespondenceSet {
  std::string source = "manual";           ///< "superglue" or "manual"
  std::optional<double> matcher_threshold;  ///< provenance only
  std::vector<Correspondence> pairs;
  std::size_t dropped = 0;                  ///< matches whose LiDAR pixel had no point nearby

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

namespace correspondence_detail {

inline Eigen::Vector2d vec2(const nlohmann::json& j, const std::string& where) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2 || !std::isfinite(v[0]) || !std::isfinite(v[1])) {
    throw FormatError(where + " must be two finite numbers");
  }
  return {v[0], v[1]};
}

inline Eigen::Vector3d vec3(const nlohmann::json& j, const std::string& where) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3 || !std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
    throw FormatError(where + " must be three finite numbers");
  }
  return {v[0], v[1], v[2]};
}

}  // namespace correspondence_detail

/// Parses the correspondence schema. Matches given by LiDAR-image pixel are resolved to 3D points
/// through the index map (nearest filled pixel in a 3x3 window); unresolved ones are counted in
/// `dropped`. Pass a null index map / cloud when every match carries lidar_point.
inline CorrespondenceSet correspondences_from_json(const nlohmann::json& j, const CameraModel& cam, const IndexMap* index_map, const PointCloud* cloud) {
  using correspondence_detail::vec2;
  using correspondence_detail::vec3;

  CorrespondenceSet set;
  try {
    if (!j.is_object()) throw FormatError("correspondence file must be a JSON object");
    set.source = j.value("source", std::string("manual"));
    if (set.source != "superglue" && set.source != "manual") {
      throw FormatError("source must be \"superglue\" or \"manual\", got \"" + set.source + "\"");
    }
    if (j.contains("matcher_threshold") && !j.at("matcher_threshold").is_null()) {
      set.matcher_threshold = j.at("matcher_threshold").get<double>();
    }
    const auto& matches = j.at("matches");
    if (!matches.is_array()) throw FormatError("\"matches\" must be an array");

    for (std::size_t k = 0; k < matches.size(); k++) {
      const auto& m = matches[k];
      const std::string where = "matches[" + std::to_string(k) + "]";
      if (!m.is_object()) throw FormatError(where + " must be an object");

      Correspondence c;
      c.pixel = vec2(m.at("camera_px"), where + ".camera_px");
      if (!in_image(cam, c.pixel)) {
        throw FormatError(where + ".camera_px lies outside the " + std::to_string(image_width(cam)) + "x" + std::to_string(image_height(cam)) + " camera image");
      }
      c.confidence = m.value("confidence", 1.0);
      if (!(c.confidence >= 0.0 && c.confidence <= 1.0)) {
        throw FormatError(where + ".confidence must lie in [0, 1]");
      }

      const bool has_px = m.contains("lidar_px") && !m.at("lidar_px").is_null();
      const bool has_point = m.contains("lidar_point") && !m.at("lidar_point").is_null();
      if (!has_px && !has_point) {
        throw FormatError(where + " needs lidar_px or lidar_point");
      }
      if (has_px) {
        c.lidar_pixel = vec2(m.at("lidar_px"), where + ".lidar_px");
      }
      if (has_point) {
        c.point = vec3(m.at("lidar_point"), where + ".lidar_point");
      } else {
        if (!index_map || !cloud) {
          throw ArgumentError(where + " gives only lidar_px but no index map was supplied");
        }
        const auto index = index_map->lookup_window(static_cast<int>(std::floor(c.lidar_pixel->x())), static_cast<int>(std::floor(c.lidar_pixel->y())));
        if (!index) {
          set.dropped++;
          continue;
        }
        if (*index >= cloud->size()) {
          throw FormatError("index map entry " + std::to_string(*index) + " exceeds the cloud size");
        }
        c.point = cloud->points[*index];
      }
      set.pairs.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid correspondence file: ") + e.what());
  }
  return set;
}

inline nlohmann::json correspondences_to_json(const CorrespondenceSet& set) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& c : set.pairs) {
    nlohmann::json m;
    m["camera_px"] = {c.pixel.x(), c.pixel.y()};
    m["lidar_px"] = c.lidar_pixel ? nlohmann::json{c.lidar_pixel->x(), c.lidar_pixel->y()} : nlohmann::json(nullptr);
    m["lidar_point"] = {c.point.x(), c.point.y(), c.point.z()};
    m["confidence"] = c.confidence;
    matches.push_back(m);
  }
  return {{"source", set.source}, {"matcher_threshold", set.matcher_threshold ? nlohmann::json(*set.matcher_threshold) : nlohmann::json(nullptr)}, {"matches", matches}};
}

/// Reads a correspondence file; JSON syntax errors carry the parser's line and column.
inline CorrespondenceSet import_correspondences(const std::string& path, const CameraModel& cam, const IndexMap* index_map, const PointCloud* cloud) {
  std::ifstream ifs(path);
  if (!ifs) throw IoError("failed to open correspondence file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ifs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  try {
    return correspondences_from_json(j, cam, index_map, cloud);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void export_correspondences(const std::string& path, const CorrespondenceSet& set) {
  std::ofstream ofs(path);
  if (!ofs) throw IoError("failed to open " + path + " for writing");
  ofs << correspondences_to_json(set).dump(2) << "\n";
}

}  // namespace lcal
