#pragma once

#include <string>
#include <vector>

#include <lcal/cloud/point_cloud.hpp>
#include <lcal/dynamic/ct_icp.hpp>
#include <lcal/dynamic/linear_ivox.hpp>
#include <lcal/error.hpp>

namespace lcal {

struct DynamicIntegrationParams {
  IVoxParams ivox;
  CtIcpParams ct_icp;
  bool deskew = true;  ///< false: rigid per-scan alignment, points moved with the scan-begin pose
};

struct DynamicIntegrationResult {
  PointCloud cloud;                  ///< all points in the frame of the first scan
  std::vector<ScanPosePair> poses;   ///< per-scan begin/end poses in the first-scan frame
  std::vector<std::string> warnings;
};

/// Densifies a sequence of moving spinning-LiDAR scans.
///
/// The first scan seeds the map at identity. Every following scan is aligned with CT-ICP,
/// initialized by constant-velocity extrapolation of the previous pose pair, then deskewed,
/// moved into the first-scan frame, inserted into the map and appended to the output.
/// Scans without timestamps fall back to static accumulation.
inline DynamicIntegrationResult integrate_dynamic(const std::vector<PointCloud>& scans, const DynamicIntegrationParams& params = {}) {
  if (scans.size() < 2) {
    throw ArgumentError("dynamic integration requires at least two scans");
  }

  DynamicIntegrationResult result;
  for (const auto& scan : scans) {
    if (!scan.has_times()) {
      result.warnings.push_back("scans without per-point time fields; falling back to static accumulation");
      result.cloud = accumulate_static(scans);
      result.poses.assign(scans.size(), ScanPosePair{});
      return result;
    }
  }

  LinearIVox map(params.ivox);
  CtIcpParams icp_params = params.ct_icp;

  const auto append = [&](const PointCloud& scan, const std::vector<Eigen::Vector3d>& points) {
    map.insert(points);
    result.cloud.points.insert(result.cloud.points.end(), points.begin(), points.end());
    result.cloud.intensities.insert(result.cloud.intensities.end(), scan.intensities.begin(), scan.intensities.end());
  };

  scans.front().validate();
  append(scans.front(), scans.front().points);
  result.poses.push_back(ScanPosePair{});

  for (std::size_t k = 1; k < scans.size(); k++) {
    const ScanPosePair& previous = result.poses.back();
    // constant velocity: continue from where the previous scan ended with the same intra-scan motion
    const RigidTransform motion = previous.begin.inverse() * previous.end;
    const ScanPosePair init{previous.end, previous.end * motion};

    ScanPosePair poses;
    if (params.deskew) {
      try {
        poses = ct_icp_align(scans[k], map, init, icp_params).poses;
      } catch (const InsufficientOverlapError& e) {
        throw InsufficientOverlapError("scan " + std::to_string(k) + ": " + e.what());
      }
    } else {
      PointCloud rigid = scans[k];
      std::fill(rigid.times->begin(), rigid.times->end(), 0.0);
      try {
        const auto aligned = ct_icp_align(rigid, map, {init.begin, init.begin}, icp_params).poses;
        poses = {aligned.begin, aligned.begin};
      } catch (const InsufficientOverlapError& e) {
        throw InsufficientOverlapError("scan " + std::to_string(k) + ": " + e.what());
      }
    }

    append(scans[k], deskew(scans[k], poses));
    result.poses.push_back(poses);
  }

  return result;
}

}  // namespace lcal
