#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "refid/grasp.hpp"
#include "refid/random.hpp"
#include "test_util.hpp"

using namespace refid;
using namespace refid::grasp;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

// brute-force oracle: minimum width over evenly spaced directions in [0, pi)
double sweep_width(const PointCloud& cloud, int steps) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < steps; ++k) {
    const double t = std::numbers::pi * k / steps;
    best = std::min(best, width_along(cloud, Vector2d(std::cos(t), std::sin(t))));
  }
  return best;
}

PointCloud random_cloud(Rng& rng, int n) {
  PointCloud c;
  const double sx = rng.uniform(0.02, 0.3), sy = rng.uniform(0.02, 0.3), rot = rng.uniform(0.0, 3.2);
  for (int i = 0; i < n; ++i) {
    const double u = rng.normal(0.0, sx), v = rng.normal(0.0, sy);
    c.emplace_back(std::cos(rot) * u - std::sin(rot) * v + 0.4, std::sin(rot) * u + std::cos(rot) * v - 0.1,
                   rng.uniform(0.0, 0.2));
  }
  return c;
}

PointCloud rotate(const PointCloud& c, double theta) {
  PointCloud out;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(theta, Vector3d::UnitZ()).toRotationMatrix();
  for (const auto& p : c) out.push_back(r * p);
  return out;
}

bool same_axis(const Vector2d& a, const Vector2d& b, double tol) { return std::abs(std::abs(a.dot(b)) - 1.0) <= tol; }

}  // namespace

TEST(Grasp, RectangleCorners) {
  const PointCloud rect{{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {2, 1, 0}};
  const auto g = grasp_direction(rect);
  EXPECT_NEAR(g.width, 1.0, 1e-15);
  EXPECT_EQ(g.direction, Vector2d(0, 1));
  EXPECT_FALSE(std::signbit(g.direction.x()));
}

TEST(Grasp, CircleIsIsotropic) {
  PointCloud circle;
  for (int k = 0; k < 360; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 360;
    circle.emplace_back(std::cos(t), std::sin(t), 0.0);
  }
  const auto g = grasp_direction(circle);
  EXPECT_NEAR(g.width, 2.0, 1e-9 + 2.0 * (1.0 - std::cos(std::numbers::pi / 360)));
  EXPECT_NEAR(g.direction.norm(), 1.0, 1e-15);
  EXPECT_GE(g.direction.x(), 0.0);
}

TEST(Grasp, MatchesAngleSweep) {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud cloud = random_cloud(rng, 200);
    const auto g = grasp_direction(cloud);
    // never worse than any probed direction
    EXPECT_LE(g.width, sweep_width(cloud, 7200) * (1.0 + 1e-12));
    const double sweep = refid::testing::sweep_min_width(cloud, 7200);
    EXPECT_NEAR(g.width, sweep, 1e-6 * sweep);
    EXPECT_NEAR(width_along(cloud, g.direction), g.width, 1e-12);
  }
}

TEST(Grasp, MinimalAgainstRandomProbes) {
  Rng rng(42);
  const PointCloud cloud = random_cloud(rng, 300);
  const auto g = grasp_direction(cloud);
  for (int k = 0; k < 1000; ++k) {
    const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
    EXPECT_LE(g.width, width_along(cloud, Vector2d(std::cos(t), std::sin(t))) + 1e-12);
  }
}

TEST(Grasp, RotationEquivariance) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud cloud = random_cloud(rng, 100);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto a = grasp_direction(cloud);
    const auto b = grasp_direction(rotate(cloud, theta));
    EXPECT_NEAR(a.width, b.width, 1e-9);
    const Vector2d expected = Eigen::Rotation2Dd(theta) * a.direction;
    EXPECT_TRUE(same_axis(expected, b.direction, 1e-9)) << expected.transpose() << " vs " << b.direction.transpose();
    EXPECT_EQ(b.direction, canonical_direction(b.direction));
  }
}

TEST(Grasp, ScalingAndTranslation) {
  Rng rng(44);
  const PointCloud cloud = random_cloud(rng, 80);
  const auto a = grasp_pose(cloud);
  PointCloud scaled, moved;
  const Vector3d shift(1.5, -2.0, 0.7);
  for (const auto& p : cloud) {
    scaled.push_back(3.0 * p);
    moved.push_back(p + shift);
  }
  const auto s = grasp_pose(scaled);
  EXPECT_NEAR(s.width, 3.0 * a.width, 1e-12);
  EXPECT_TRUE(same_axis(s.direction, a.direction, 1e-12));
  const auto m = grasp_pose(moved);
  EXPECT_LT((m.position - (a.position + shift)).norm(), 1e-12);
  EXPECT_TRUE(same_axis(m.direction, a.direction, 1e-12));
  EXPECT_NEAR(m.width, a.width, 1e-12);
}

TEST(Grasp, PoseExamples) {
  PointCloud cube;
  for (int i = 0; i < 8; ++i) cube.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const auto p = grasp_pose(cube);
  EXPECT_LT((p.position - Vector3d(0.5, 0.5, 0.5)).norm(), 1e-15);
  EXPECT_NEAR(p.width, 1.0, 1e-15);

  // a thin vertical slab along the x axis: squeeze across it, along y
  PointCloud slab;
  for (int i = 0; i <= 20; ++i)
    for (int k = 0; k <= 5; ++k) {
      slab.emplace_back(0.01 * i, 0.0, 0.02 * k);
      slab.emplace_back(0.01 * i, 0.015, 0.02 * k);
    }
  const auto s = grasp_pose(slab);
  EXPECT_TRUE(same_axis(s.direction, Vector2d(0, 1), 1e-12));
  EXPECT_NEAR(s.width, 0.015, 1e-12);
  EXPECT_NEAR(s.width, sweep_width(slab, 7200), 1e-9);
}

TEST(Grasp, DegenerateClouds) {
  try {
    grasp_direction({{1, 2, 0}, {1, 2, 5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_cloud);
  }
  EXPECT_THROW(grasp_direction({}), Error);
  EXPECT_THROW(grasp_direction({{0, 0, 0}, {std::nan(""), 1, 0}}), Error);
  EXPECT_THROW(grasp_direction({{0, 0, 0}, {1, 1, 0}, {2, 2, 1}}), Error);  // collinear
  EXPECT_THROW(grasp_direction({{0, 0, 0}, {1, 0, 0}}), Error);
}

TEST(Grasp, ConvexHull) {
  const auto hull = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}, {1, 1}});
  EXPECT_EQ(hull.size(), 4u);
  double area = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    area += a.x() * b.y() - a.y() * b.x();
  }
  EXPECT_NEAR(area / 2, 1.0, 1e-15);  // counter-clockwise
}

TEST(Grasp, ReadCloud) {
  std::istringstream ok("# header\n0 0 0\n\n1 2 3   # trailing comment\n");
  const auto c = read_cloud(ok);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1], Vector3d(1, 2, 3));
  std::istringstream short_line("1 2\n");
  EXPECT_THROW(read_cloud(short_line), Error);
  std::istringstream extra("1 2 3 4\n");
  EXPECT_THROW(read_cloud(extra), Error);
}
