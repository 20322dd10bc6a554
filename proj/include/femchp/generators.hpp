#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "femchp/error.hpp"
#include "femchp/mesh.hpp"

namespace femchp {

/// Names accepted by build_structured_mesh.
inline const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names{"right2d", "crisscross2d", "equilateral2d", "obtuse2d", "kuhn3d"};
  return names;
}

namespace detail {

inline std::size_t grid_index(std::size_t i, std::size_t j, std::size_t n) { return j * (n + 1) + i; }

inline Mesh right_triangle_grid(std::size_t n) {
  std::vector<double> coords;
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t i = 0; i <= n; ++i) {
      coords.push_back(static_cast<double>(i) / static_cast<double>(n));
      coords.push_back(static_cast<double>(j) / static_cast<double>(n));
    }
  std::vector<std::size_t> simplices;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const auto v00 = grid_index(i, j, n), v10 = grid_index(i + 1, j, n);
      const auto v01 = grid_index(i, j + 1, n), v11 = grid_index(i + 1, j + 1, n);
      simplices.insert(simplices.end(), {v00, v10, v11, v00, v11, v01});
    }
  return Mesh(2, std::move(coords), std::move(simplices));
}

inline Mesh crisscross_grid(std::size_t n) {
  std::vector<double> coords;
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t i = 0; i <= n; ++i) {
      coords.push_back(static_cast<double>(i) / static_cast<double>(n));
      coords.push_back(static_cast<double>(j) / static_cast<double>(n));
    }
  std::vector<std::size_t> simplices;
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = coords.size() / 2;
      coords.push_back((static_cast<double>(i) + 0.5) * h);
      coords.push_back((static_cast<double>(j) + 0.5) * h);
      const auto v00 = grid_index(i, j, n), v10 = grid_index(i + 1, j, n);
      const auto v01 = grid_index(i, j + 1, n), v11 = grid_index(i + 1, j + 1, n);
      simplices.insert(simplices.end(), {v00, v10, c, v10, v11, c, v11, v01, c, v01, v00, c});
    }
  return Mesh(2, std::move(coords), std::move(simplices));
}

// Regular hexagon of circumradius 1 centred at the origin, cut into 6 n^2
// equilateral triangles of side 1/n.
inline Mesh equilateral_hexagon(std::size_t n) {
  const long r = static_cast<long>(n);
  const double h = 1.0 / static_cast<double>(n);
  const double s3 = std::sqrt(3.0) / 2.0;
  auto inside = [r](long a, long b) { return std::abs(a) <= r && std::abs(b) <= r && std::abs(a + b) <= r; };
  std::map<std::pair<long, long>, std::size_t> index;
  std::vector<double> coords;
  for (long b = -r; b <= r; ++b)
    for (long a = -r; a <= r; ++a)
      if (inside(a, b)) {
        index[{a, b}] = coords.size() / 2;
        coords.push_back((static_cast<double>(a) + 0.5 * static_cast<double>(b)) * h);
        coords.push_back(s3 * static_cast<double>(b) * h);
      }
  std::vector<std::size_t> simplices;
  for (long b = -r; b < r; ++b)
    for (long a = -r; a < r; ++a) {
      if (inside(a, b) && inside(a + 1, b) && inside(a, b + 1))
        simplices.insert(simplices.end(), {index[{a, b}], index[{a + 1, b}], index[{a, b + 1}]});
      if (inside(a + 1, b) && inside(a + 1, b + 1) && inside(a, b + 1))
        simplices.insert(simplices.end(), {index[{a + 1, b}], index[{a + 1, b + 1}], index[{a, b + 1}]});
    }
  return Mesh(2, std::move(coords), std::move(simplices));
}

// right2d with the interior vertex nearest the centre moved by (+0.3h, +0.1h).
inline Mesh obtuse_grid(std::size_t n) {
  if (n < 2) throw Error("obtuse2d needs resolution >= 2 (no interior vertex otherwise)");
  const Mesh base = right_triangle_grid(n);
  std::vector<double> coords = base.coordinates();
  const double h = 1.0 / static_cast<double>(n);
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto v : base.interior_nodes()) {
    const double dx = coords[2 * v] - 0.5, dy = coords[2 * v + 1] - 0.5;
    const double d = dx * dx + dy * dy;
    if (d < best_dist) {
      best_dist = d;
      best = v;
    }
  }
  coords[2 * best] += 0.3 * h;
  coords[2 * best + 1] += 0.1 * h;
  return Mesh(2, std::move(coords), base.simplices());
}

// Unit cube, n^3 cells, each cut into the 6 Kuhn simplices along monotone
// lattice paths from its lowest to its highest corner.
inline Mesh kuhn_cube(std::size_t n) {
  auto idx = [n](std::size_t i, std::size_t j, std::size_t k) { return i + (n + 1) * (j + (n + 1) * k); };
  std::vector<double> coords;
  for (std::size_t k = 0; k <= n; ++k)
    for (std::size_t j = 0; j <= n; ++j)
      for (std::size_t i = 0; i <= n; ++i)
        for (const auto c : {i, j, k}) coords.push_back(static_cast<double>(c) / static_cast<double>(n));
  std::array<int, 3> perm{0, 1, 2};
  std::vector<std::array<int, 3>> perms;
  do perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<std::size_t> simplices;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& p : perms) {
          std::array<std::size_t, 3> c{i, j, k};
          simplices.push_back(idx(c[0], c[1], c[2]));
          for (const int axis : p) {
            ++c[static_cast<std::size_t>(axis)];
            simplices.push_back(idx(c[0], c[1], c[2]));
          }
        }
  return Mesh(3, std::move(coords), std::move(simplices));
}

}  // namespace detail

/// Structured test meshes:
///  - right2d:       unit square, n x n cells, two right triangles each
///  - crisscross2d:  unit square, n x n cells, four triangles about the cell centre
///  - equilateral2d: regular hexagon tiled by equilateral triangles (acute)
///  - obtuse2d:      right2d with one interior vertex displaced
///  - kuhn3d:        unit cube, n^3 cells, six Kuhn tetrahedra each
inline Mesh build_structured_mesh(const std::string& name, std::size_t resolution) {
  if (resolution == 0) throw Error("mesh resolution must be >= 1");
  if (name == "right2d") return detail::right_triangle_grid(resolution);
  if (name == "crisscross2d") return detail::crisscross_grid(resolution);
  if (name == "equilateral2d") return detail::equilateral_hexagon(resolution);
  if (name == "obtuse2d") return detail::obtuse_grid(resolution);
  if (name == "kuhn3d") return detail::kuhn_cube(resolution);
  throw Error("unknown mesh generator '" + name + "'");
}

}  // namespace femchp
