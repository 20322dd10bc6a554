#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "femchp/generators.hpp"
#include "femchp/mesh.hpp"
#include "femchp/mesh_io.hpp"
#include "test_util.hpp"

using namespace femchp;

namespace {

Mesh unit_square_two_triangles() { return Mesh(2, {0, 0, 1, 0, 1, 1, 0, 1}, {0, 1, 2, 0, 2, 3}); }

// Angle at vertex a of triangle (a, b, c), from edge vectors only.
double corner_angle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return std::acos((b - a).dot(c - a) / ((b - a).norm() * (c - a).norm()));
}

}  // namespace

TEST(Mesh, UnitSquareBasics) {
  const Mesh m = unit_square_two_triangles();
  EXPECT_EQ(m.dim(), 2);
  EXPECT_EQ(m.num_vertices(), 4u);
  EXPECT_EQ(m.num_elements(), 2u);
  EXPECT_NEAR(m.total_volume(), 1.0, 1e-15);
  EXPECT_EQ(m.boundary_nodes().size(), 4u);
  EXPECT_TRUE(m.interior_nodes().empty());
  EXPECT_NEAR(m.diameter(), std::sqrt(2.0), 1e-15);
}

TEST(Mesh, NegativeOrientationIsRepaired) {
  const Mesh m(2, {0, 0, 1, 0, 0, 1}, {0, 2, 1});
  EXPECT_NEAR(m.geometry(0).volume, 0.5, 1e-15);
}

TEST(Mesh, BasisGradientsInterpolateKroneckerDelta) {
  std::mt19937_64 rng(3);
  for (int dim : {2, 3}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Eigen::VectorXd> verts;
      for (int i = 0; i <= dim; ++i) verts.push_back(test_support::random_vector(rng, dim));
      Mesh mesh = [&] {
        try {
          return test_support::simplex_mesh(verts);
        } catch (const ConformityError&) {
          std::vector<Eigen::VectorXd> fallback{Eigen::VectorXd::Zero(dim)};
          for (int i = 0; i < dim; ++i) fallback.push_back(Eigen::VectorXd::Unit(dim, i));
          return test_support::simplex_mesh(fallback);
        }
      }();
      const auto& g = basis_gradients(mesh, 0);
      const auto idx = mesh.element(0);
      // phi_i affine with phi_i(x_j) = delta_ij  =>  grad phi_i . (x_j - x_k) = delta_ij - delta_ik
      for (int i = 0; i <= dim; ++i)
        for (int j = 0; j <= dim; ++j)
          for (int k = 0; k <= dim; ++k) {
            const double lhs = g.basis_gradients.col(i).dot(mesh.vertex_vector(idx[j]) - mesh.vertex_vector(idx[k]));
            EXPECT_NEAR(lhs, double(i == j) - double(i == k), 1e-9);
          }
      EXPECT_LT(g.basis_gradients.rowwise().sum().norm(), 1e-9);
    }
  }
}

TEST(Mesh, BasisGradientsRejectBadIndex) {
  const Mesh m = unit_square_two_triangles();
  EXPECT_THROW(basis_gradients(m, 2), Error);
}

TEST(Mesh, RejectsRepeatedVertex) {
  try {
    Mesh(2, {0, 0, 1, 0, 0, 1}, {0, 1, 1});
    FAIL();
  } catch (const ConformityError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
}

TEST(Mesh, RejectsCollinearTriangle) { EXPECT_THROW(Mesh(2, {0, 0, 1, 0, 2, 0}, {0, 1, 2}), ConformityError); }

TEST(Mesh, RejectsIndexOutOfRange) { EXPECT_THROW(Mesh(2, {0, 0, 1, 0, 0, 1}, {0, 1, 3}), ConformityError); }

TEST(Mesh, RejectsUnusedVertex) { EXPECT_THROW(Mesh(2, {0, 0, 1, 0, 0, 1, 5, 5}, {0, 1, 2}), ConformityError); }

TEST(Mesh, RejectsBadDimension) { EXPECT_THROW(Mesh(1, {0, 1}, {0, 1}), ConformityError); }

TEST(Mesh, RejectsEdgeSharedByThreeTriangles) {
  EXPECT_THROW(Mesh(2, {0, 0, 1, 0, 0.5, 1, 0.5, -1, 0.2, 2}, {0, 1, 2, 0, 3, 1, 0, 1, 4}), ConformityError);
}

TEST(Mesh, RejectsHangingNode) {
  // Vertex 4 sits on the midpoint of edge (0,1) of the lower triangle only.
  EXPECT_THROW(Mesh(2, {0, 0, 2, 0, 1, 1, 1, -1, 1, 0}, {0, 1, 2, 0, 4, 3, 4, 1, 3}), ConformityError);
}

TEST(Mesh, ElementsOfAndNeighbors) {
  const Mesh m = build_structured_mesh("right2d", 2);
  // Centre vertex (1,1) -> index 4, six triangles around it in this pattern.
  EXPECT_EQ(m.elements_of(4).size(), 6u);
  EXPECT_EQ(node_neighbors(m, 4).size(), 6u);
  EXPECT_FALSE(m.is_boundary(4));
  EXPECT_THROW(node_neighbors(m, 99), Error);
}

struct GeneratorCase {
  std::string name;
  std::size_t n;
  std::size_t vertices, elements, boundary;
  double volume;
  bool non_obtuse, acute, interior_vertex;
};

class Generators : public ::testing::TestWithParam<GeneratorCase> {};

TEST_P(Generators, CountsAndClassification) {
  const auto& c = GetParam();
  const Mesh m = build_structured_mesh(c.name, c.n);
  EXPECT_EQ(m.num_vertices(), c.vertices);
  EXPECT_EQ(m.num_elements(), c.elements);
  EXPECT_EQ(m.boundary_nodes().size(), c.boundary);
  EXPECT_NEAR(m.total_volume(), c.volume, 1e-12);
  const AngleReport r = classify_mesh(m);
  EXPECT_EQ(r.is_non_obtuse, c.non_obtuse);
  EXPECT_EQ(r.is_acute, c.acute);
  EXPECT_EQ(r.satisfies_interior_vertex_assumption, c.interior_vertex);
}

INSTANTIATE_TEST_SUITE_P(
    Catalog, Generators,
    ::testing::Values(GeneratorCase{"right2d", 8, 81, 128, 32, 1.0, true, false, false},
                      GeneratorCase{"crisscross2d", 8, 145, 256, 32, 1.0, true, false, true},
                      GeneratorCase{"equilateral2d", 8, 217, 384, 48, 1.5 * std::sqrt(3.0), true, true, true},
                      GeneratorCase{"equilateral2d", 4, 61, 96, 24, 1.5 * std::sqrt(3.0), true, true, true},
                      GeneratorCase{"obtuse2d", 4, 25, 32, 16, 1.0, false, false, false},
                      GeneratorCase{"kuhn3d", 3, 64, 162, 56, 1.0, true, false, false}),
    [](const auto& info) { return info.param.name + "_" + std::to_string(info.param.n); });

TEST(Generators, RightTriangleClassIsNonObtuseNotAcute) {
  const Mesh m = build_structured_mesh("right2d", 2);
  EXPECT_STREQ(to_string(classify_element(m.geometry(0))), "non-obtuse-not-acute");
  EXPECT_NEAR(classify_mesh(m).max_facet_angle_deg, 90.0, 1e-9);
}

TEST(Generators, KuhnTetrahedraHaveEqualVolume) {
  const Mesh m = build_structured_mesh("kuhn3d", 2);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    EXPECT_NEAR(m.geometry(e).volume, 1.0 / 48.0, 1e-15);
  }
}

TEST(Generators, RejectsUnknownAndZero) {
  EXPECT_THROW(build_structured_mesh("nope", 3), Error);
  EXPECT_THROW(build_structured_mesh("right2d", 0), Error);
  EXPECT_THROW(build_structured_mesh("obtuse2d", 1), Error);
}

// Sign of the basis-gradient dot product against the geometric angle, computed
// from edge vectors: in 2D grad phi_i . grad phi_j has the sign of -cos of the
// angle at the third vertex.
TEST(AngleProperty, TwoDimensionalSignsMatchCornerAngles) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Eigen::VectorXd> v(3, Eigen::VectorXd(2));
    for (auto& x : v) x << u(rng), u(rng);
    const double area = 0.5 * std::abs((v[1] - v[0])(0) * (v[2] - v[0])(1) - (v[1] - v[0])(1) * (v[2] - v[0])(0));
    if (area < 1e-3) continue;
    const Mesh m = test_support::simplex_mesh(v);
    const auto idx = m.element(0);
    const auto& g = m.geometry(0).basis_gradients;
    bool any_obtuse = false, all_acute = true;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const int k = 3 - i - j;
        const double angle = corner_angle(m.vertex_vector(idx[k]), m.vertex_vector(idx[i]), m.vertex_vector(idx[j]));
        const double dot = g.col(i).dot(g.col(j));
        if (std::abs(angle - std::numbers::pi / 2) > 1e-9) {
          EXPECT_EQ(dot < 0.0, angle < std::numbers::pi / 2);
        }
        any_obtuse = any_obtuse || angle > std::numbers::pi / 2 + 1e-9;
        all_acute = all_acute && angle < std::numbers::pi / 2 - 1e-9;
      }
    const ElementClass c = classify_element(m.geometry(0));
    if (any_obtuse) {
      EXPECT_EQ(c, ElementClass::obtuse);
    }
    if (all_acute) {
      EXPECT_EQ(c, ElementClass::acute);
    }
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

// 3D: grad phi_i is an inward normal of the facet opposite vertex i, so the
// dihedral angle between facets i and j is obtuse iff the dot product is > 0.
// Oracle normals come from cross products of facet edges.
TEST(AngleProperty, ThreeDimensionalSignsMatchDihedralAngles) {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Eigen::VectorXd> v;
    for (int i = 0; i < 4; ++i) v.push_back(test_support::random_vector(rng, 3));
    const Eigen::Vector3d a = v[1] - v[0], b = v[2] - v[0], c = v[3] - v[0];
    if (std::abs(a.cross(b).dot(c)) / 6.0 < 1e-3) continue;
    const Mesh m = test_support::simplex_mesh(v);
    const auto idx = m.element(0);
    const auto& g = m.geometry(0).basis_gradients;
    auto inward_normal = [&](int i) {
      std::vector<Eigen::Vector3d> f;
      for (int k = 0; k < 4; ++k)
        if (k != i) f.push_back(m.vertex_vector(idx[k]));
      Eigen::Vector3d n = (f[1] - f[0]).cross(f[2] - f[0]);
      if (n.dot(Eigen::Vector3d(m.vertex_vector(idx[i])) - f[0]) < 0) n = -n;
      return n.normalized();
    };
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        // Interior dihedral angle between facets i and j is pi - angle(n_i, n_j).
        const double dihedral = std::numbers::pi - std::acos(std::clamp(inward_normal(i).dot(inward_normal(j)), -1.0, 1.0));
        const double dot = g.col(i).dot(g.col(j));
        if (std::abs(dihedral - std::numbers::pi / 2) > 1e-9) {
          EXPECT_EQ(dot > 0.0, dihedral > std::numbers::pi / 2);
        }
      }
    ++checked;
  }
  EXPECT_GT(checked, 500);
}

TEST(MeshIo, RoundTrip) {
  for (const auto& name : generator_names()) {
    const Mesh m = build_structured_mesh(name, name == "kuhn3d" ? 2 : 3);
    std::stringstream s;
    write_mesh(m, s);
    const Mesh back = read_mesh(s);
    EXPECT_EQ(back.dim(), m.dim());
    EXPECT_EQ(back.simplices(), m.simplices());
    EXPECT_EQ(back.coordinates(), m.coordinates());
  }
}

TEST(MeshIo, ParseErrorsCarryLineNumbers) {
  std::istringstream bad("dim 2\nvertices 3\n0 0\n1 x\n0 1\nsimplices 1\n0 1 2\n");
  try {
    read_mesh(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  std::istringstream trailing("dim 2\nvertices 3\n0 0\n1 0\n0 1\nsimplices 1\n0 1 2\nextra\n");
  EXPECT_THROW(read_mesh(trailing), ParseError);
  std::istringstream truncated("dim 2\nvertices 3\n0 0\n1 0\n");
  EXPECT_THROW(read_mesh(truncated), ParseError);
  EXPECT_THROW(load_mesh("/nonexistent/mesh.txt"), IoError);
}
