#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include <lcal/error.hpp>
#include <lcal/geom/camera.hpp>

namespace lcal {

/// Parses {"model", "width", "height", "intrinsics": [fx,fy,cx,cy], "distortion": [k1,k2,p1,p2,k3]}.
inline CameraModel camera_from_json(const nlohmann::json& j) {
  try {
    const std::string model = j.at("model").get<std::string>();
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();

    CameraModel cam;
    if (model == "pinhole") {
      const auto intrinsics = j.at("intrinsics").get<std::vector<double>>();
      if (intrinsics.size() != 4) {
        throw FormatError("pinhole intrinsics must be [fx, fy, cx, cy]");
      }
      std::vector<double> dist = j.value("distortion", std::vector<double>{});
      if (dist.size() > 5) {
        throw FormatError("distortion must be [k1, k2, p1, p2, k3]");
      }
      dist.resize(5, 0.0);

      PinholeCamera pinhole;
      pinhole.fx = intrinsics[0];
      pinhole.fy = intrinsics[1];
      pinhole.cx = intrinsics[2];
      pinhole.cy = intrinsics[3];
      pinhole.k1 = dist[0];
      pinhole.k2 = dist[1];
      pinhole.p1 = dist[2];
      pinhole.p2 = dist[3];
      pinhole.k3 = dist[4];
      pinhole.width = width;
      pinhole.height = height;
      cam = pinhole;
    } else if (model == "equirectangular") {
      cam = EquirectCamera{width, height};
    } else {
      throw FormatError("unknown camera model \"" + model + "\"");
    }

    validate(cam);
    return cam;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid camera intrinsics: ") + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid camera intrinsics: ") + e.what());
  }
}

inline nlohmann::json camera_to_json(const CameraModel& cam) {
  nlohmann::json j;
  j["width"] = image_width(cam);
  j["height"] = image_height(cam);
  if (const auto* pinhole = std::get_if<PinholeCamera>(&cam)) {
    j["model"] = "pinhole";
    j["intrinsics"] = {pinhole->fx, pinhole->fy, pinhole->cx, pinhole->cy};
    j["distortion"] = {pinhole->k1, pinhole->k2, pinhole->p1, pinhole->p2, pinhole->k3};
  } else {
    j["model"] = "equirectangular";
    j["intrinsics"] = nlohmann::json::array();
    j["distortion"] = nlohmann::json::array();
  }
  return j;
}

inline CameraModel load_camera(const std::string& path) {
  std::ifstream ifs(path);
  if (!ifs) {
    throw IoError("failed to open camera intrinsics " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ifs);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  return camera_from_json(j);
}

inline void save_camera(const std::string& path, const CameraModel& cam) {
  std::ofstream ofs(path);
  if (!ofs) {
    throw IoError("failed to write " + path);
  }
  ofs << camera_to_json(cam).dump(2) << std::endl;
}

}  // namespace lcal
