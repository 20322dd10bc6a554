#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "femchp/error.hpp"

namespace femchp {

/// Volume and P1 basis gradients of one simplex. Column i of
/// `basis_gradients` is the (constant) gradient of the hat function of the
/// element's i-th local vertex.
struct ElementGeometry {
  std::size_t element_index = 0;
  double volume = 0.0;
  Eigen::MatrixXd basis_gradients;
};

/// Conforming simplicial triangulation of a polyhedral domain in 2D or 3D.
///
/// Construction validates conformity and derives the boundary/interior node
/// split from face incidence. Instances are immutable afterwards.
class Mesh {
 public:
  Mesh(int dim, std::vector<double> coordinates, std::vector<std::size_t> simplices)
      : dim_(dim), coords_(std::move(coordinates)), simplices_(std::move(simplices)) {
    validate_and_derive();
  }

  int dim() const noexcept { return dim_; }
  std::size_t nodes_per_element() const noexcept { return static_cast<std::size_t>(dim_) + 1; }
  std::size_t num_vertices() const noexcept { return coords_.size() / static_cast<std::size_t>(dim_); }
  std::size_t num_elements() const noexcept { return simplices_.size() / nodes_per_element(); }

  std::span<const double> vertex(std::size_t v) const {
    return {coords_.data() + v * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  Eigen::VectorXd vertex_vector(std::size_t v) const {
    return Eigen::Map<const Eigen::VectorXd>(coords_.data() + v * static_cast<std::size_t>(dim_), dim_);
  }
  std::span<const std::size_t> element(std::size_t e) const {
    return {simplices_.data() + e * nodes_per_element(), nodes_per_element()};
  }

  const std::vector<double>& coordinates() const noexcept { return coords_; }
  const std::vector<std::size_t>& simplices() const noexcept { return simplices_; }

  const std::vector<std::size_t>& boundary_nodes() const noexcept { return boundary_; }
  const std::vector<std::size_t>& interior_nodes() const noexcept { return interior_; }
  bool is_boundary(std::size_t v) const { return on_boundary_[v] != 0; }

  /// Elements containing vertex `v`, ascending.
  const std::vector<std::size_t>& elements_of(std::size_t v) const { return vertex_elements_[v]; }

  const ElementGeometry& geometry(std::size_t e) const { return geometry_.at(e); }

  double total_volume() const noexcept { return total_volume_; }
  /// Diagonal of the axis-aligned bounding box.
  double diameter() const noexcept { return diameter_; }

 private:
  void validate_and_derive();
  void check_no_hanging_nodes() const;

  int dim_;
  std::vector<double> coords_;
  std::vector<std::size_t> simplices_;
  std::vector<ElementGeometry> geometry_;
  std::vector<char> on_boundary_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> interior_;
  std::vector<std::vector<std::size_t>> vertex_elements_;
  double total_volume_ = 0.0;
  double diameter_ = 0.0;
};

namespace detail {

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// Barycentric coordinates of `x` with respect to the simplex with vertex
// columns `verts` (dim x dim+1).
inline Eigen::VectorXd barycentric(const Eigen::MatrixXd& verts, const Eigen::VectorXd& x) {
  const auto n = verts.rows();
  Eigen::MatrixXd jac(n, n);
  for (Eigen::Index k = 0; k < n; ++k) jac.col(k) = verts.col(k + 1) - verts.col(0);
  const Eigen::VectorXd tail = jac.partialPivLu().solve(x - verts.col(0));
  Eigen::VectorXd lambda(n + 1);
  lambda(0) = 1.0 - tail.sum();
  lambda.tail(n) = tail;
  return lambda;
}

}  // namespace detail

inline void Mesh::validate_and_derive() {
  if (dim_ != 2 && dim_ != 3) throw ConformityError("mesh dimension must be 2 or 3, got " + std::to_string(dim_));
  const auto d = static_cast<std::size_t>(dim_);
  const std::size_t npe = nodes_per_element();
  if (coords_.size() % d != 0) throw ConformityError("coordinate array length is not a multiple of the dimension");
  if (simplices_.size() % npe != 0) throw ConformityError("simplex array length is not a multiple of dim+1");
  const std::size_t nv = num_vertices();
  const std::size_t ne = num_elements();
  if (ne == 0) throw ConformityError("mesh has no elements");

  // Bounding box.
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim_, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (std::size_t v = 0; v < nv; ++v) {
    const Eigen::VectorXd x = vertex_vector(v);
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  diameter_ = (hi - lo).norm();

  geometry_.resize(ne);
  vertex_elements_.assign(nv, {});
  total_volume_ = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    std::size_t* idx = simplices_.data() + e * npe;
    for (std::size_t i = 0; i < npe; ++i) {
      if (idx[i] >= nv)
        throw ConformityError("element " + std::to_string(e) + ": vertex index " + std::to_string(idx[i]) +
                              " out of range");
      for (std::size_t j = 0; j < i; ++j)
        if (idx[i] == idx[j])
          throw ConformityError("element " + std::to_string(e) + ": degenerate (repeated vertex index " +
                                std::to_string(idx[i]) + ")");
    }
    Eigen::MatrixXd jac(dim_, dim_);
    double elem_diam = 0.0;
    for (std::size_t i = 0; i < npe; ++i)
      for (std::size_t j = 0; j < i; ++j)
        elem_diam = std::max(elem_diam, (vertex_vector(idx[i]) - vertex_vector(idx[j])).norm());
    for (int k = 0; k < dim_; ++k) jac.col(k) = vertex_vector(idx[k + 1]) - vertex_vector(idx[0]);
    double det = jac.determinant();
    const double volume = std::abs(det) / detail::factorial(dim_);
    if (!(volume >= 1e-14 * std::pow(elem_diam, dim_)))
      throw ConformityError("element " + std::to_string(e) + ": degenerate (volume " + std::to_string(volume) + ")");
    if (det < 0) {
      std::swap(idx[d - 1], idx[d]);
      jac.col(dim_ - 1).swap(jac.col(dim_ - 2));
    }
    // Rows of jac^{-1} are the gradients of the barycentric coordinates 1..n.
    const Eigen::MatrixXd inv = jac.inverse();
    ElementGeometry& g = geometry_[e];
    g.element_index = e;
    g.volume = volume;
    g.basis_gradients.resize(dim_, dim_ + 1);
    g.basis_gradients.rightCols(dim_) = inv.transpose();
    g.basis_gradients.col(0) = -g.basis_gradients.rightCols(dim_).rowwise().sum();
    total_volume_ += volume;
    for (std::size_t i = 0; i < npe; ++i) vertex_elements_[idx[i]].push_back(e);
  }

  for (std::size_t v = 0; v < nv; ++v)
    if (vertex_elements_[v].empty()) throw ConformityError("vertex " + std::to_string(v) + " belongs to no element");

  // Face incidence: (n-1)-faces keyed by their sorted vertex tuple.
  std::map<std::array<std::size_t, 3>, int> faces;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto idx = element(e);
    for (std::size_t skip = 0; skip < npe; ++skip) {
      std::array<std::size_t, 3> key{0, 0, 0};
      std::size_t k = 0;
      for (std::size_t i = 0; i < npe; ++i)
        if (i != skip) key[k++] = idx[i];
      std::sort(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(d));
      if (++faces[key] > 2) {
        std::string name;
        for (std::size_t i = 0; i < d; ++i) name += (i ? " " : "") + std::to_string(key[i]);
        throw ConformityError("face (" + name + ") is shared by more than two elements");
      }
    }
  }
  on_boundary_.assign(nv, 0);
  for (const auto& [key, count] : faces)
    if (count == 1)
      for (std::size_t i = 0; i < d; ++i) on_boundary_[key[i]] = 1;
  boundary_.clear();
  interior_.clear();
  for (std::size_t v = 0; v < nv; ++v) (on_boundary_[v] ? boundary_ : interior_).push_back(v);

  check_no_hanging_nodes();
}

inline void Mesh::check_no_hanging_nodes() const {
  // Uniform bucket grid over the bounding box; each element is registered in
  // every cell its (slightly inflated) bounding box touches.
  const std::size_t nv = num_vertices();
  const std::size_t ne = num_elements();
  const double slack = 1e-12 * std::max(diameter_, std::numeric_limits<double>::min());
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim_, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (std::size_t v = 0; v < nv; ++v) {
    lo = lo.cwiseMin(vertex_vector(v));
    hi = hi.cwiseMax(vertex_vector(v));
  }
  const auto cells = static_cast<long>(std::max(1.0, std::floor(std::pow(static_cast<double>(ne), 1.0 / dim_))));
  const Eigen::VectorXd width = ((hi - lo) / static_cast<double>(cells)).cwiseMax(slack);
  auto cell_of = [&](const Eigen::VectorXd& x) {
    std::array<long, 3> c{0, 0, 0};
    for (int k = 0; k < dim_; ++k)
      c[static_cast<std::size_t>(k)] = std::clamp(static_cast<long>(std::floor((x(k) - lo(k)) / width(k))), 0L, cells - 1);
    return c;
  };
  auto flat = [&](const std::array<long, 3>& c) {
    return static_cast<std::size_t>(c[0] + cells * (c[1] + cells * c[2]));
  };
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(std::pow(cells, dim_)));
  const std::size_t npe = nodes_per_element();
  for (std::size_t e = 0; e < ne; ++e) {
    Eigen::VectorXd elo = Eigen::VectorXd::Constant(dim_, std::numeric_limits<double>::infinity());
    Eigen::VectorXd ehi = -elo;
    for (const auto v : element(e)) {
      elo = elo.cwiseMin(vertex_vector(v));
      ehi = ehi.cwiseMax(vertex_vector(v));
    }
    const auto a = cell_of(elo.array() - slack);
    const auto b = cell_of(ehi.array() + slack);
    for (long k = a[2]; k <= b[2]; ++k)
      for (long j = a[1]; j <= b[1]; ++j)
        for (long i = a[0]; i <= b[0]; ++i) buckets[flat({i, j, k})].push_back(e);
  }
  Eigen::MatrixXd verts(dim_, static_cast<Eigen::Index>(npe));
  for (std::size_t v = 0; v < nv; ++v) {
    const Eigen::VectorXd x = vertex_vector(v);
    for (const auto e : buckets[flat(cell_of(x))]) {
      const auto idx = element(e);
      if (std::find(idx.begin(), idx.end(), v) != idx.end()) continue;
      for (std::size_t i = 0; i < npe; ++i) verts.col(static_cast<Eigen::Index>(i)) = vertex_vector(idx[i]);
      const Eigen::VectorXd lambda = detail::barycentric(verts, x);
      // Scale the barycentric slack so it corresponds to ~1e-12 of the mesh diameter.
      double elem_scale = 0.0;
      for (std::size_t i = 1; i < npe; ++i)
        elem_scale = std::max(elem_scale, (verts.col(static_cast<Eigen::Index>(i)) - verts.col(0)).norm());
      if (lambda.minCoeff() >= -slack / elem_scale)
        throw ConformityError("vertex " + std::to_string(v) + " lies on the closure of element " + std::to_string(e) +
                              " without being one of its vertices (hanging node or overlap)");
    }
  }
}

/// Gradients of the local hat functions on element `e`.
inline const ElementGeometry& basis_gradients(const Mesh& mesh, std::size_t e) {
  if (e >= mesh.num_elements()) throw Error("element index " + std::to_string(e) + " out of range");
  return mesh.geometry(e);
}

enum class ElementClass { acute, non_obtuse, obtuse };

inline const char* to_string(ElementClass c) {
  switch (c) {
    case ElementClass::acute: return "acute";
    case ElementClass::non_obtuse: return "non-obtuse-not-acute";
    case ElementClass::obtuse: return "obtuse";
  }
  return "?";
}

/// Angle classification of a mesh through the signs of pairwise basis
/// gradient dot products: a simplex is non-obtuse iff all of them are <= 0,
/// acute iff all are < 0.
struct AngleReport {
  std::vector<ElementClass> element_class;
  /// Largest normalized dot product g_i.g_j / (|g_i||g_j|) over all pairs,
  /// with the element and local pair attaining it.
  double worst_cosine = -1.0;
  std::size_t worst_element = 0;
  std::array<std::size_t, 2> worst_pair{0, 1};
  /// Largest angle between two facets (degrees); > 90 means obtuse.
  double max_facet_angle_deg = 0.0;
  bool is_non_obtuse = true;
  bool is_acute = true;
  /// Every element has at least one interior vertex.
  bool satisfies_interior_vertex_assumption = true;
  /// 2D only: the largest sum of the two angles opposite an interior edge
  /// (Delaunay iff <= pi). Negative when not computed.
  double max_opposite_angle_sum = -1.0;
};

inline ElementClass classify_element(const ElementGeometry& g) {
  const auto n = g.basis_gradients.cols();
  double max_abs = 0.0;
  double max_dot = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dot = g.basis_gradients.col(i).dot(g.basis_gradients.col(j));
      max_abs = std::max(max_abs, std::abs(dot));
      max_dot = std::max(max_dot, dot);
    }
  const double tau = 1e-12 * max_abs;
  if (max_dot < -tau) return ElementClass::acute;
  if (max_dot <= tau) return ElementClass::non_obtuse;
  return ElementClass::obtuse;
}

namespace detail {

inline double vertex_angle(const Eigen::VectorXd& apex, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd u = a - apex;
  const Eigen::VectorXd v = b - apex;
  return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
}

}  // namespace detail

inline AngleReport classify_mesh(const Mesh& mesh) {
  AngleReport r;
  const std::size_t ne = mesh.num_elements();
  r.element_class.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const ElementGeometry& g = mesh.geometry(e);
    r.element_class[e] = classify_element(g);
    r.is_non_obtuse = r.is_non_obtuse && r.element_class[e] != ElementClass::obtuse;
    r.is_acute = r.is_acute && r.element_class[e] == ElementClass::acute;
    const auto n = g.basis_gradients.cols();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const auto gi = g.basis_gradients.col(i);
        const auto gj = g.basis_gradients.col(j);
        const double c = gi.dot(gj) / (gi.norm() * gj.norm());
        if (c > r.worst_cosine) {
          r.worst_cosine = c;
          r.worst_element = e;
          r.worst_pair = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
        }
      }
    const auto idx = mesh.element(e);
    const bool has_interior =
        std::any_of(idx.begin(), idx.end(), [&](std::size_t v) { return !mesh.is_boundary(v); });
    r.satisfies_interior_vertex_assumption = r.satisfies_interior_vertex_assumption && has_interior;
  }
  // Facets opposite vertices i and j meet at the angle pi - angle(g_i, g_j).
  r.max_facet_angle_deg = 180.0 - std::acos(std::clamp(r.worst_cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi;

  if (mesh.dim() == 2) {
    std::map<std::pair<std::size_t, std::size_t>, double> edge_sum;
    std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
    for (std::size_t e = 0; e < ne; ++e) {
      const auto idx = mesh.element(e);
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t a = idx[(k + 1) % 3];
        const std::size_t b = idx[(k + 2) % 3];
        const auto key = std::minmax(a, b);
        edge_sum[key] += detail::vertex_angle(mesh.vertex_vector(idx[k]), mesh.vertex_vector(a), mesh.vertex_vector(b));
        ++edge_count[key];
      }
    }
    r.max_opposite_angle_sum = 0.0;
    for (const auto& [key, sum] : edge_sum)
      if (edge_count[key] == 2) r.max_opposite_angle_sum = std::max(r.max_opposite_angle_sum, sum);
  }
  return r;
}

/// Vertices sharing an element with `node`, excluding `node`; ascending.
inline std::vector<std::size_t> node_neighbors(const Mesh& mesh, std::size_t node) {
  if (node >= mesh.num_vertices()) throw Error("node index " + std::to_string(node) + " out of range");
  std::set<std::size_t> out;
  for (const auto e : mesh.elements_of(node))
    for (const auto v : mesh.element(e))
      if (v != node) out.insert(v);
  return {out.begin(), out.end()};
}

}  // namespace femchp
