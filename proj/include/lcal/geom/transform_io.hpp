#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include <lcal/error.hpp>
#include <lcal/geom/rigid_transform.hpp>

namespace lcal {

inline nlohmann::json transform_to_json(const RigidTransform& T) {
  const Eigen::Quaterniond q = T.rotation();
  const Eigen::Matrix4d M = T.matrix();
  nlohmann::json j;
  j["translation"] = {T.translation().x(), T.translation().y(), T.translation().z()};
  j["quaternion_xyzw"] = {q.x(), q.y(), q.z(), q.w()};
  std::vector<double> rows;
  for (int r = 0; r < 4; r++) {
    for (int c = 0; c < 4; c++) rows.push_back(M(r, c));
  }
  j["matrix_row_major_4x4"] = rows;
  return j;
}

/// Accepts translation + quaternion_xyzw, or a row-major 4x4 matrix alone.
inline RigidTransform transform_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("quaternion_xyzw")) {
      const auto t = j.at("translation").get<std::vector<double>>();
      const auto q = j.at("quaternion_xyzw").get<std::vector<double>>();
      if (t.size() != 3 || q.size() != 4) {
        throw FormatError("transform needs a 3-element translation and a 4-element quaternion");
      }
      const Eigen::Quaterniond quat(q[3], q[0], q[1], q[2]);
      if (!(quat.norm() > 1e-9)) {
        throw FormatError("transform quaternion has zero norm");
      }
      return RigidTransform(quat, Eigen::Vector3d(t[0], t[1], t[2]));
    }
    const auto m = j.at("matrix_row_major_4x4").get<std::vector<double>>();
    if (m.size() != 16) {
      throw FormatError("matrix_row_major_4x4 must have 16 elements");
    }
    Eigen::Matrix4d M;
    for (int r = 0; r < 4; r++) {
      for (int c = 0; c < 4; c++) M(r, c) = m[4 * r + c];
    }
    return RigidTransform::from_matrix(M);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid transform: ") + e.what());
  }
}

}  // namespace lcal
