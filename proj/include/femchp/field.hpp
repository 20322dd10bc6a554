#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "femchp/error.hpp"
#include "femchp/mesh.hpp"
#include "femchp/mesh_io.hpp"

namespace femchp {

/// Continuous piecewise-linear R^m-valued function on a mesh, stored as one
/// m-vector per vertex (vertex-major, components contiguous).
class NodalField {
 public:
  NodalField() = default;
  NodalField(std::size_t num_vertices, std::size_t m) : m_(m), values_(num_vertices * m, 0.0) {
    if (m == 0) throw DimensionError("field codomain dimension must be >= 1");
  }
  NodalField(std::size_t m, std::vector<double> values) : m_(m), values_(std::move(values)) {
    if (m == 0) throw DimensionError("field codomain dimension must be >= 1");
    if (values_.size() % m != 0) throw DimensionError("field value array length is not a multiple of m");
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t num_vertices() const noexcept { return m_ == 0 ? 0 : values_.size() / m_; }

  std::span<const double> value(std::size_t v) const { return {values_.data() + v * m_, m_}; }
  std::span<double> value(std::size_t v) { return {values_.data() + v * m_, m_}; }
  Eigen::VectorXd value_vector(std::size_t v) const {
    return Eigen::Map<const Eigen::VectorXd>(values_.data() + v * m_, static_cast<Eigen::Index>(m_));
  }
  void set_value(std::size_t v, const Eigen::VectorXd& x) {
    for (std::size_t j = 0; j < m_; ++j) values_[v * m_ + j] = x(static_cast<Eigen::Index>(j));
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  friend bool operator==(const NodalField&, const NodalField&) = default;

 private:
  std::size_t m_ = 1;
  std::vector<double> values_;
};

inline void require_compatible(const Mesh& mesh, const NodalField& field) {
  if (field.num_vertices() != mesh.num_vertices())
    throw DimensionError("field has " + std::to_string(field.num_vertices()) + " vertices, mesh has " +
                         std::to_string(mesh.num_vertices()));
}

// ---------------------------------------------------------------------------
// Boundary data catalog

/// Component j: a0[j] + a[j].x. Coefficients are stored per component as
/// (a0, a_1, ..., a_n).
struct AffineData {
  std::vector<double> coefficients;
};
/// Component j: prod_k sin(w x_k + 1 + j).
struct SinProductData {
  double frequency = 2.0;
};
/// Component j: (j + 1) |x - c|.
struct AbsDistanceData {
  std::vector<double> center;  // empty: origin
};
/// Independent uniform draws in [lo, hi] per boundary vertex and component,
/// in ascending vertex order.
struct RandomUniformData {
  std::uint64_t seed = 0;
  double lo = -1.0;
  double hi = 1.0;
};
/// Explicit per-vertex values (only boundary entries are read).
struct NodalData {
  NodalField values;
};

using BoundaryData = std::variant<AffineData, SinProductData, AbsDistanceData, RandomUniformData, NodalData>;

namespace detail {

// 53-bit uniform double in [0, 1) from the raw engine output; independent of
// the standard library's distribution implementation.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Representative of G + V_0^m: boundary vertices carry the data, interior
/// vertices carry zero.
inline NodalField interpolate_boundary(const Mesh& mesh, const BoundaryData& data, std::size_t m) {
  NodalField field(mesh.num_vertices(), m);
  const auto n = static_cast<std::size_t>(mesh.dim());
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, AffineData>) {
          if (d.coefficients.size() != (n + 1) * m)
            throw DimensionError("affine data needs (dim+1)*m = " + std::to_string((n + 1) * m) + " coefficients, got " +
                                 std::to_string(d.coefficients.size()));
          for (const auto v : mesh.boundary_nodes()) {
            const auto x = mesh.vertex(v);
            for (std::size_t j = 0; j < m; ++j) {
              const double* c = d.coefficients.data() + j * (n + 1);
              double s = c[0];
              for (std::size_t k = 0; k < n; ++k) s += c[k + 1] * x[k];
              field.value(v)[j] = s;
            }
          }
        } else if constexpr (std::is_same_v<T, SinProductData>) {
          for (const auto v : mesh.boundary_nodes()) {
            const auto x = mesh.vertex(v);
            for (std::size_t j = 0; j < m; ++j) {
              double s = 1.0;
              for (std::size_t k = 0; k < n; ++k) s *= std::sin(d.frequency * x[k] + 1.0 + static_cast<double>(j));
              field.value(v)[j] = s;
            }
          }
        } else if constexpr (std::is_same_v<T, AbsDistanceData>) {
          if (!d.center.empty() && d.center.size() != n)
            throw DimensionError("abs-distance centre must have " + std::to_string(n) + " coordinates");
          for (const auto v : mesh.boundary_nodes()) {
            const auto x = mesh.vertex(v);
            double r2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
              const double dx = x[k] - (d.center.empty() ? 0.0 : d.center[k]);
              r2 += dx * dx;
            }
            for (std::size_t j = 0; j < m; ++j) field.value(v)[j] = static_cast<double>(j + 1) * std::sqrt(r2);
          }
        } else if constexpr (std::is_same_v<T, RandomUniformData>) {
          std::mt19937_64 rng(d.seed);
          for (const auto v : mesh.boundary_nodes())
            for (std::size_t j = 0; j < m; ++j) field.value(v)[j] = d.lo + (d.hi - d.lo) * detail::unit_draw(rng);
        } else {
          if (d.values.m() != m)
            throw DimensionError("nodal boundary file has m=" + std::to_string(d.values.m()) + ", expected " +
                                 std::to_string(m));
          for (const auto v : mesh.boundary_nodes())
            if (v >= d.values.num_vertices())
              throw DimensionError("nodal boundary file has no value for boundary vertex " + std::to_string(v));
          if (d.values.num_vertices() != mesh.num_vertices())
            throw DimensionError("nodal boundary file has " + std::to_string(d.values.num_vertices()) +
                                 " vertices, mesh has " + std::to_string(mesh.num_vertices()));
          for (const auto v : mesh.boundary_nodes())
            for (std::size_t j = 0; j < m; ++j) field.value(v)[j] = d.values.value(v)[j];
        }
      },
      data);
  return field;
}

/// n x m matrix whose column j is the gradient of component j on element e.
inline Eigen::MatrixXd gradient_on_element(const Mesh& mesh, const NodalField& field, std::size_t e) {
  const ElementGeometry& g = basis_gradients(mesh, e);
  const auto idx = mesh.element(e);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(mesh.dim(), static_cast<Eigen::Index>(field.m()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < field.m(); ++j)
      grad.col(static_cast<Eigen::Index>(j)) += field.value(idx[i])[j] * g.basis_gradients.col(static_cast<Eigen::Index>(i));
  return grad;
}

/// Barycentric interpolation at an arbitrary point. Linear scan over
/// elements, O(#elements).
inline Eigen::VectorXd eval_at_point(const Mesh& mesh, const NodalField& field, const Eigen::VectorXd& point) {
  require_compatible(mesh, field);
  if (point.size() != mesh.dim()) throw DimensionError("point dimension does not match the mesh");
  Eigen::MatrixXd verts(mesh.dim(), static_cast<Eigen::Index>(mesh.nodes_per_element()));
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto idx = mesh.element(e);
    for (std::size_t i = 0; i < idx.size(); ++i) verts.col(static_cast<Eigen::Index>(i)) = mesh.vertex_vector(idx[i]);
    const Eigen::VectorXd lambda = detail::barycentric(verts, point);
    if (lambda.minCoeff() < -1e-10) continue;
    // Exact nodal reproduction at vertices.
    for (std::size_t i = 0; i < idx.size(); ++i)
      if ((mesh.vertex_vector(idx[i]) - point).squaredNorm() == 0.0) return field.value_vector(idx[i]);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(field.m()));
    for (std::size_t i = 0; i < idx.size(); ++i) out += lambda(static_cast<Eigen::Index>(i)) * field.value_vector(idx[i]);
    return out;
  }
  throw Error("point lies outside the mesh");
}

/// Nodal values on a vertex subset; duplicates retained.
inline std::vector<Eigen::VectorXd> field_range(const NodalField& field, std::span<const std::size_t> nodes) {
  if (nodes.empty()) throw Error("field_range: empty node subset");
  std::vector<Eigen::VectorXd> out;
  out.reserve(nodes.size());
  for (const auto v : nodes) out.push_back(field.value_vector(v));
  return out;
}

// ---------------------------------------------------------------------------
// Nodal value file: "field m V" followed by V lines of m numbers.

inline NodalField read_field(std::istream& in) {
  detail::LineReader reader(in);
  auto t = reader.expect(3, "'field m V'");
  detail::expect_keyword(t, "field", reader.line());
  const auto m = detail::parse_count(t[1], reader.line());
  const auto nv = detail::parse_count(t[2], reader.line());
  if (m == 0) throw ParseError(reader.line(), "m must be >= 1");
  std::vector<double> values;
  values.reserve(m * nv);
  for (std::size_t v = 0; v < nv; ++v) {
    t = reader.expect(m, "values of vertex " + std::to_string(v));
    for (const auto& s : t) values.push_back(detail::parse_double(s, reader.line()));
  }
  if (!reader.next().empty()) throw ParseError(reader.line(), "trailing content after the value list");
  return NodalField(m, std::move(values));
}

inline NodalField load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open field file '" + path + "'");
  return read_field(in);
}

inline void write_field(const NodalField& field, std::ostream& out) {
  out << "field " << field.m() << ' ' << field.num_vertices() << '\n' << std::setprecision(17);
  for (std::size_t v = 0; v < field.num_vertices(); ++v) {
    const auto x = field.value(v);
    for (std::size_t j = 0; j < x.size(); ++j) out << (j ? " " : "") << x[j];
    out << '\n';
  }
}

inline void save_field(const NodalField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_field(field, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// One float per element (coefficient tables and source terms).
inline std::vector<double> load_element_values(const std::string& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open element value file '" + path + "'");
  std::vector<double> out;
  std::size_t line = 0;
  for (std::string s; in >> s;) out.push_back(detail::parse_double(s, ++line));
  if (out.size() != expected)
    throw DimensionError("element value file '" + path + "' has " + std::to_string(out.size()) + " entries, mesh has " +
                         std::to_string(expected) + " elements");
  return out;
}

}  // namespace femchp
