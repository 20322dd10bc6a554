#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "femchp/error.hpp"

namespace femchp {

/// Compressed sparse row matrix, assembled from (row, col, value) additions.
class CsrMatrix {
 public:
  explicit CsrMatrix(std::size_t n) : n_(n), rows_(n) {}

  void add(std::size_t i, std::size_t j, double value) { rows_.at(i)[j] += value; }

  /// Freezes the assembled entries into CSR arrays.
  void compress() {
    offsets_.assign(n_ + 1, 0);
    cols_.clear();
    vals_.clear();
    for (std::size_t i = 0; i < n_; ++i) {
      for (const auto& [j, v] : rows_[i]) {
        cols_.push_back(j);
        vals_.push_back(v);
      }
      offsets_[i + 1] = cols_.size();
    }
    rows_.clear();
  }

  std::size_t size() const noexcept { return n_; }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
      y[i] = s;
    }
  }

  double diagonal(std::size_t i) const {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k)
      if (cols_[k] == i) return vals_[k];
    return 0.0;
  }

 private:
  std::size_t n_;
  std::vector<std::map<std::size_t, double>> rows_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
};

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

namespace detail {
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace detail

/// Jacobi-preconditioned conjugate gradients for SPD systems. Throws when a
/// non-positive curvature p.Ap is met (the matrix is not SPD).
inline CgResult conjugate_gradient(const CsrMatrix& a, const std::vector<double>& b, std::vector<double>& x,
                                   double relative_tolerance, std::size_t max_iterations) {
  const std::size_t n = a.size();
  x.resize(n, 0.0);
  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.diagonal(i);
    if (!(d > 0.0)) throw Error("conjugate_gradient: non-positive diagonal entry, matrix is not SPD");
    inv_diag[i] = 1.0 / d;
  }
  std::vector<double> r, q;
  a.apply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  const double b_norm = std::sqrt(detail::dot(b, b));
  const double scale = b_norm > 0.0 ? b_norm : 1.0;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  std::vector<double> p = z;
  double rz = detail::dot(r, z);
  CgResult result;
  result.relative_residual = std::sqrt(detail::dot(r, r)) / scale;
  while (result.relative_residual > relative_tolerance && result.iterations < max_iterations) {
    a.apply(p, q);
    const double curvature = detail::dot(p, q);
    if (!(curvature > 0.0)) throw Error("conjugate_gradient: non-positive curvature, matrix is not SPD");
    const double alpha = rz / curvature;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    ++result.iterations;
    result.relative_residual = std::sqrt(detail::dot(r, r)) / scale;
  }
  return result;
}

}  // namespace femchp
