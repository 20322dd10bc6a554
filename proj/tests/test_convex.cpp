#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "femchp/convex.hpp"
#include "test_util.hpp"

using namespace femchp;
using Eigen::VectorXd;

namespace {

double segment_distance(const VectorXd& x, const VectorXd& a, const VectorXd& b) {
  const VectorXd d = b - a;
  const double len2 = d.squaredNorm();
  const double s = len2 > 0 ? std::clamp((x - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (x - a - s * d).norm();
}

bool in_triangle_2d(const VectorXd& x, const VectorXd& a, const VectorXd& b, const VectorXd& c) {
  const auto cross = [](const VectorXd& u, const VectorXd& v) { return u(0) * v(1) - u(1) * v(0); };
  const double area = cross(b - a, c - a);
  if (std::abs(area) < 1e-14) return false;
  const double l1 = cross(x - a, c - a) / area, l2 = cross(b - a, x - a) / area;
  return l1 >= 0 && l2 >= 0 && l1 + l2 <= 1;
}

// Exact distance to conv(points) in 1D/2D: zero inside some generator
// triangle, else the nearest generator segment.
double exact_distance_low_dim(const std::vector<VectorXd>& pts, const VectorXd& x) {
  if (x.size() == 1) {
    double lo = pts[0](0), hi = pts[0](0);
    for (const auto& p : pts) lo = std::min(lo, p(0)), hi = std::max(hi, p(0));
    return std::max({lo - x(0), x(0) - hi, 0.0});
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k)
        if (in_triangle_2d(x, pts[i], pts[j], pts[k])) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i; j < pts.size(); ++j) d = std::min(d, segment_distance(x, pts[i], pts[j]));
  return d;
}

// Upper bound on the distance from random barycentric combinations.
double sampled_distance(const std::vector<VectorXd>& pts, const VectorXd& x, std::mt19937_64& rng, int samples) {
  std::exponential_distribution<double> ex(1.0);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) best = std::min(best, (x - p).norm());
  for (int s = 0; s < samples; ++s) {
    VectorXd y = VectorXd::Zero(x.size());
    double total = 0.0;
    for (const auto& p : pts) {
      const double w = std::pow(ex(rng), 3.0);  // skewed toward faces
      y += w * p;
      total += w;
    }
    best = std::min(best, (x - y / total).norm());
  }
  return best;
}

}  // namespace

TEST(Projection, MatchesExactOracleInLowDimensions) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3000; ++trial) {
    const Eigen::Index m = 1 + trial % 2;
    const int k = 1 + static_cast<int>(rng() % 8);
    std::vector<VectorXd> pts;
    for (int i = 0; i < k; ++i) pts.push_back(test_support::random_vector(rng, m));
    const VectorXd x = test_support::random_vector(rng, m, -2, 2);
    const ConvexSet hull = ConvexSet::finite_hull(pts);
    const VectorXd p = project_point(hull, x);
    EXPECT_NEAR((x - p).norm(), exact_distance_low_dim(pts, x), 1e-9) << "trial " << trial;
    EXPECT_LE(projection_certificate(hull, x, p), projection_tolerance(x));
  }
}

TEST(Projection, NoWorseThanSampledCombinationsInThreeDimensions) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<VectorXd> pts;
    for (int i = 0; i < 2 + trial % 7; ++i) pts.push_back(test_support::random_vector(rng, 3));
    const VectorXd x = test_support::random_vector(rng, 3, -2, 2);
    const ConvexSet hull = ConvexSet::finite_hull(pts);
    const VectorXd p = project_point(hull, x);
    EXPECT_LE((x - p).norm(), sampled_distance(pts, x, rng, 2000) + 1e-12);
    EXPECT_LE(projection_certificate(hull, x, p), projection_tolerance(x));
  }
}

TEST(Projection, PointsInsideAreFixed) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VectorXd> pts;
    for (int i = 0; i < 6; ++i) pts.push_back(test_support::random_vector(rng, 3));
    VectorXd x = VectorXd::Zero(3);
    for (const auto& p : pts) x += p / 6.0;
    EXPECT_LT((project_point(ConvexSet::finite_hull(pts), x) - x).norm(), 1e-12);
  }
}

TEST(Projection, DegenerateHulls) {
  // Collinear generators in R^3, and duplicates.
  std::vector<VectorXd> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(VectorXd::Constant(3, double(i)));
  pts.push_back(pts[1]);
  const ConvexSet hull = ConvexSet::finite_hull(pts);
  EXPECT_EQ(hull.generators().size(), 4u);
  VectorXd x(3);
  x << 1, 2, 3;
  EXPECT_LT((project_point(hull, x) - VectorXd::Constant(3, 2.0)).norm(), 1e-12);
}

TEST(Projection, HalfLine) {
  const ConvexSet k = ConvexSet::half_line(1.5);
  EXPECT_EQ(project_point(k, VectorXd::Constant(1, 3.0))(0), 1.5);
  EXPECT_EQ(project_point(k, VectorXd::Constant(1, -3.0))(0), -3.0);
}

TEST(Projection, HullWithOrigin) {
  const ConvexSet k = ConvexSet::hull_with_origin({VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 3.0)});
  EXPECT_TRUE(contains(k, VectorXd::Constant(1, 0.5), 1e-12));
  EXPECT_NEAR(distance_to(k, VectorXd::Constant(1, -0.5)), 0.5, 1e-15);
  EXPECT_NEAR(distance_to(ConvexSet::finite_hull({VectorXd::Constant(1, 2.0)}), VectorXd::Constant(1, 0.5)), 1.5,
              1e-15);
}

TEST(Projection, Errors) {
  const ConvexSet k = ConvexSet::finite_hull({VectorXd::Zero(2)});
  EXPECT_THROW(project_point(k, VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(contains(k, VectorXd::Zero(2), -1.0), Error);
  EXPECT_THROW(ConvexSet::finite_hull({}), Error);
  EXPECT_THROW(ConvexSet::finite_hull({VectorXd::Zero(2), VectorXd::Zero(3)}), DimensionError);
}

// The variational inequality characterizing the projection, against random
// members of K.
TEST(Projection, VariationalInequality) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<VectorXd> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(test_support::random_vector(rng, 2));
    const ConvexSet hull = ConvexSet::finite_hull(pts);
    const VectorXd x = test_support::random_vector(rng, 2, -3, 3);
    VectorXd z = VectorXd::Zero(2);
    double total = 0.0;
    for (const auto& p : pts) {
      const double w = u(rng);
      z += w * p;
      total += w;
    }
    z /= total;
    EXPECT_LE(check_variational_inequality(hull, x, z), projection_tolerance(x));
  }
  const ConvexSet unit = ConvexSet::finite_hull({VectorXd::Zero(1), VectorXd::Ones(1)});
  EXPECT_THROW(check_variational_inequality(unit, VectorXd::Zero(1), VectorXd::Constant(1, 2.0)), Error);
}

TEST(Projection, ExtremePoints) {
  std::vector<VectorXd> square;
  for (double a : {0.0, 1.0})
    for (double b : {0.0, 1.0}) square.push_back((VectorXd(2) << a, b).finished());
  square.push_back((VectorXd(2) << 0.5, 0.5).finished());
  square.push_back((VectorXd(2) << 0.5, 0.0).finished());
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(is_extreme(square, i, 1e-9));
  }
  EXPECT_FALSE(is_extreme(square, 4, 1e-9));
  EXPECT_FALSE(is_extreme(square, 5, 1e-9));
  EXPECT_THROW(is_extreme(square, 6, 1e-9), Error);
}

TEST(Projection, AuditRecordsEveryProjection) {
  std::ostringstream csv;
  {
    ProjectionAudit audit(&csv);
    const ConvexSet k = ConvexSet::finite_hull({VectorXd::Zero(2), VectorXd::Ones(2)});
    for (int i = 0; i < 5; ++i) project_point(k, VectorXd::Constant(2, double(i)));
    EXPECT_EQ(audit.count(), 5u);
    EXPECT_EQ(audit.failures(), 0u);
    EXPECT_LE(audit.worst_ratio(), 1.0);
    {
      ProjectionAudit inner;
      project_point(k, VectorXd::Zero(2));
      EXPECT_EQ(inner.count(), 1u);
    }
    project_point(k, VectorXd::Zero(2));
    EXPECT_EQ(audit.count(), 6u);
  }
  EXPECT_EQ(ProjectionAudit::current(), nullptr);
  std::istringstream lines(csv.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_EQ(n, 7);
}
