#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "refid/errors.hpp"

namespace refid::grasp {

using PointCloud = std::vector<Eigen::Vector3d>;

struct GraspDirection {
  Eigen::Vector2d direction;  // unit, horizontal plane
  double width = 0.0;         // extent of the cloud along direction
};

struct GraspPose {
  Eigen::Vector3d position;
  Eigen::Vector2d direction;
  double width = 0.0;
};

namespace detail {

inline double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace detail

/// Counter-clockwise convex hull (monotone chain) without collinear points.
inline std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

/// d and -d are equally optimal; keep the one with x > 0 (or x == 0, y >= 0).
inline Eigen::Vector2d canonical_direction(Eigen::Vector2d d) {
  if (d.x() < 0.0 || (d.x() == 0.0 && d.y() < 0.0)) d = -d;
  return d + Eigen::Vector2d::Zero();  // turns -0.0 into +0.0
}

/// Extent max d.p - min d.p of the cloud's horizontal projection.
inline double width_along(const PointCloud& cloud, const Eigen::Vector2d& d) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : cloud) {
    const double t = d.x() * p.x() + d.y() * p.y();
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  return hi - lo;
}

/// Horizontal direction of minimal thickness of the cloud's projection onto
/// the xy plane (z is vertical). The optimum lies along the normal of a hull
/// edge, so rotating calipers over the hull gives the exact minimum.
inline GraspDirection grasp_direction(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(Errc::degenerate_cloud, "empty point cloud");
  std::vector<Eigen::Vector2d> flat;
  flat.reserve(cloud.size());
  for (const auto& p : cloud) {
    if (!p.allFinite()) throw Error(Errc::degenerate_cloud, "non-finite point");
    flat.emplace_back(p.x(), p.y());
  }
  const auto hull = convex_hull(std::move(flat));
  if (hull.size() < 2) throw Error(Errc::degenerate_cloud, "all horizontal projections coincide");

  // a zero-width squeeze across a line of points is no grasp
  if (hull.size() == 2) throw Error(Errc::degenerate_cloud, "horizontal projections are collinear");

  const std::size_t n = hull.size();
  auto edge_distance = [&](std::size_t i, std::size_t j) {
    const Eigen::Vector2d& a = hull[i];
    const Eigen::Vector2d& b = hull[(i + 1) % n];
    return std::abs(detail::cross(a, b, hull[j])) / (b - a).norm();
  };

  GraspDirection best{{0.0, 0.0}, std::numeric_limits<double>::infinity()};
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    // advance the antipodal vertex while it gets farther from edge i
    while (edge_distance(i, (j + 1) % n) > edge_distance(i, j)) j = (j + 1) % n;
    const double w = edge_distance(i, j);
    if (w < best.width) {
      const Eigen::Vector2d e = (hull[(i + 1) % n] - hull[i]).normalized();
      best = {canonical_direction(Eigen::Vector2d(-e.y(), e.x())), w};
    }
  }
  return best;
}

inline GraspPose grasp_pose(const PointCloud& cloud) {
  const GraspDirection d = grasp_direction(cloud);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : cloud) mean += p;
  mean /= static_cast<double>(cloud.size());
  return {mean, d.direction, d.width};
}

/// Whitespace-separated "x y z" lines; blank lines and '#' comments skipped.
inline PointCloud read_cloud(std::istream& in) {
  PointCloud cloud;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x)) continue;
    if (!(ss >> y >> z)) throw Error(Errc::schema_error, "line " + std::to_string(lineno) + ": expected x y z");
    std::string extra;
    if (ss >> extra) throw Error(Errc::schema_error, "line " + std::to_string(lineno) + ": trailing data");
    cloud.emplace_back(x, y, z);
  }
  return cloud;
}

}  // namespace refid::grasp
