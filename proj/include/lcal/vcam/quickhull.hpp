#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <lcal/error.hpp>

namespace lcal {

/// Raised when the input points are (numerically) collinear or coplanar.
class DegenerateHullError : public Error {
public:
  using Error::Error;
};

struct ConvexHull {
  std::vector<std::size_t> vertices;                ///< indices into the input, ascending
  std::vector<std::array<std::size_t, 3>> faces;    ///< counter-clockwise seen from outside
};

namespace quickhull_detail {

struct Face {
  std::array<int, 3> v;
  Eigen::Vector3d normal;
  double offset = 0.0;
  std::vector<int> outside;
  bool alive = true;

  double distance(const Eigen::Vector3d& p) const { return normal.dot(p) - offset; }
};

inline std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace quickhull_detail

/// 3D convex hull by quickhull. Throws DegenerateHullError for inputs without volume.
inline ConvexHull quickhull(std::span<const Eigen::Vector3d> points) {
  using quickhull_detail::Face;
  using quickhull_detail::edge_key;

  const int n = static_cast<int>(points.size());
  if (n < 4) {
    throw DegenerateHullError("convex hull needs at least 4 points");
  }

  double scale = 0.0;
  for (const auto& p : points) {
    scale = std::max(scale, p.cwiseAbs().maxCoeff());
  }
  const double eps = 1e-10 * std::max(scale, 1e-300) * 3.0;

  // initial tetrahedron from the extreme points
  std::array<int, 6> extremes{};
  for (int i = 0; i < n; i++) {
    for (int k = 0; k < 3; k++) {
      if (points[i][k] < points[extremes[2 * k]][k]) extremes[2 * k] = i;
      if (points[i][k] > points[extremes[2 * k + 1]][k]) extremes[2 * k + 1] = i;
    }
  }
  int i0 = extremes[0], i1 = extremes[1];
  double best = -1.0;
  for (int a = 0; a < 6; a++) {
    for (int b = a + 1; b < 6; b++) {
      const double d = (points[extremes[a]] - points[extremes[b]]).squaredNorm();
      if (d > best) {
        best = d;
        i0 = extremes[a];
        i1 = extremes[b];
      }
    }
  }
  if (std::sqrt(best) <= eps) {
    throw DegenerateHullError("all points coincide");
  }

  const Eigen::Vector3d line = (points[i1] - points[i0]).normalized();
  int i2 = -1;
  best = eps;
  for (int i = 0; i < n; i++) {
    const double d = (points[i] - points[i0]).cross(line).norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (i2 < 0) {
    throw DegenerateHullError("points are collinear");
  }

  const Eigen::Vector3d plane_normal = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
  int i3 = -1;
  best = eps;
  for (int i = 0; i < n; i++) {
    const double d = std::abs(plane_normal.dot(points[i] - points[i0]));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (i3 < 0) {
    throw DegenerateHullError("points are coplanar");
  }

  std::vector<Face> faces;
  std::unordered_map<std::uint64_t, int> edges;

  const auto make_face = [&](int a, int b, int c) {
    Face face;
    face.v = {a, b, c};
    face.normal = (points[b] - points[a]).cross(points[c] - points[a]).normalized();
    face.offset = face.normal.dot(points[a]);
    const int id = static_cast<int>(faces.size());
    faces.push_back(std::move(face));
    edges[edge_key(a, b)] = id;
    edges[edge_key(b, c)] = id;
    edges[edge_key(c, a)] = id;
    return id;
  };

  // orient the tetrahedron so that i3 lies behind the base face
  if (plane_normal.dot(points[i3] - points[i0]) > 0.0) {
    std::swap(i1, i2);
  }
  make_face(i0, i1, i2);
  make_face(i0, i3, i1);
  make_face(i1, i3, i2);
  make_face(i2, i3, i0);

  const auto assign = [&](const std::vector<int>& candidates, const std::vector<int>& target_faces) {
    for (const int p : candidates) {
      for (const int f : target_faces) {
        if (faces[f].distance(points[p]) > eps) {
          faces[f].outside.push_back(p);
          break;
        }
      }
    }
  };

  {
    std::vector<int> all;
    all.reserve(n);
    for (int i = 0; i < n; i++) {
      if (i != i0 && i != i1 && i != i2 && i != i3) all.push_back(i);
    }
    assign(all, {0, 1, 2, 3});
  }

  std::vector<int> pending = {0, 1, 2, 3};
  std::vector<int> visible;
  std::vector<char> is_visible;
  std::vector<std::pair<int, int>> horizon;
  while (!pending.empty()) {
    const int fid = pending.back();
    pending.pop_back();
    if (!faces[fid].alive || faces[fid].outside.empty()) {
      continue;
    }

    int eye = faces[fid].outside.front();
    double eye_dist = faces[fid].distance(points[eye]);
    for (const int p : faces[fid].outside) {
      const double d = faces[fid].distance(points[p]);
      if (d > eye_dist) {
        eye_dist = d;
        eye = p;
      }
    }

    // flood fill the faces visible from the eye point
    visible.clear();
    is_visible.assign(faces.size(), 0);
    std::vector<int> stack = {fid};
    is_visible[fid] = 1;
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      visible.push_back(f);
      for (int e = 0; e < 3; e++) {
        const int a = faces[f].v[e];
        const int b = faces[f].v[(e + 1) % 3];
        const auto found = edges.find(edge_key(b, a));
        if (found == edges.end()) continue;
        const int g = found->second;
        if (!is_visible[g] && faces[g].alive && faces[g].distance(points[eye]) > eps) {
          is_visible[g] = 1;
          stack.push_back(g);
        }
      }
    }

    horizon.clear();
    std::vector<int> orphans;
    for (const int f : visible) {
      for (int e = 0; e < 3; e++) {
        const int a = faces[f].v[e];
        const int b = faces[f].v[(e + 1) % 3];
        const auto found = edges.find(edge_key(b, a));
        if (found == edges.end() || !is_visible[found->second]) {
          horizon.emplace_back(a, b);
        }
      }
      for (const int p : faces[f].outside) {
        if (p != eye) orphans.push_back(p);
      }
      faces[f].outside.clear();
      faces[f].outside.shrink_to_fit();
      faces[f].alive = false;
    }
    for (const int f : visible) {
      for (int e = 0; e < 3; e++) {
        const auto key = edge_key(faces[f].v[e], faces[f].v[(e + 1) % 3]);
        const auto found = edges.find(key);
        if (found != edges.end() && found->second == f) {
          edges.erase(found);
        }
      }
    }

    std::vector<int> created;
    created.reserve(horizon.size());
    for (const auto& [a, b] : horizon) {
      created.push_back(make_face(a, b, eye));
    }
    assign(orphans, created);
    for (const int f : created) {
      if (!faces[f].outside.empty()) pending.push_back(f);
    }
  }

  ConvexHull hull;
  std::vector<char> used(n, 0);
  for (const auto& face : faces) {
    if (!face.alive) continue;
    hull.faces.push_back({static_cast<std::size_t>(face.v[0]), static_cast<std::size_t>(face.v[1]), static_cast<std::size_t>(face.v[2])});
    for (const int v : face.v) used[v] = 1;
  }
  for (int i = 0; i < n; i++) {
    if (used[i]) hull.vertices.push_back(i);
  }
  return hull;
}

}  // namespace lcal
