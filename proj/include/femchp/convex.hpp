#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "femchp/error.hpp"
#include "femchp/field.hpp"
#include "femchp/mesh.hpp"

namespace femchp {

enum class ConvexKind { finite_hull, half_line, hull_with_origin };

/// Closed convex target set in R^m: the convex hull of finitely many points
/// (optionally with the origin added), or the scalar half-line (-inf, b].
class ConvexSet {
 public:
  /// Generators are deduplicated within 1e-14 but not reduced to extreme points.
  static ConvexSet finite_hull(const std::vector<Eigen::VectorXd>& points) {
    return ConvexSet(ConvexKind::finite_hull, points);
  }
  static ConvexSet hull_with_origin(std::vector<Eigen::VectorXd> points) {
    if (points.empty()) throw Error("convex hull needs at least one point");
    points.push_back(Eigen::VectorXd::Zero(points.front().size()));
    return ConvexSet(ConvexKind::hull_with_origin, points);
  }
  static ConvexSet half_line(double upper) {
    ConvexSet k;
    k.kind_ = ConvexKind::half_line;
    k.m_ = 1;
    k.generators_ = {Eigen::VectorXd::Constant(1, upper)};
    return k;
  }

  ConvexKind kind() const noexcept { return kind_; }
  std::size_t m() const noexcept { return m_; }
  const std::vector<Eigen::VectorXd>& generators() const noexcept { return generators_; }
  double upper_bound() const { return generators_.front()(0); }

 private:
  ConvexSet() = default;
  ConvexSet(ConvexKind kind, const std::vector<Eigen::VectorXd>& points) : kind_(kind) {
    if (points.empty()) throw Error("convex hull needs at least one point");
    m_ = static_cast<std::size_t>(points.front().size());
    if (m_ == 0) throw DimensionError("convex set dimension must be >= 1");
    for (const auto& p : points) {
      if (static_cast<std::size_t>(p.size()) != m_) throw DimensionError("hull points have inconsistent dimensions");
      const bool dup = std::any_of(generators_.begin(), generators_.end(),
                                   [&](const Eigen::VectorXd& g) { return (g - p).lpNorm<Eigen::Infinity>() <= 1e-14; });
      if (!dup) generators_.push_back(p);
    }
  }

  ConvexKind kind_ = ConvexKind::finite_hull;
  std::size_t m_ = 0;
  std::vector<Eigen::VectorXd> generators_;
};

/// Tolerance of the projection optimality certificate, 1e-10 (1 + |x|^2).
inline double projection_tolerance(const Eigen::VectorXd& x) { return 1e-10 * (1.0 + x.squaredNorm()); }

/// max over generators z of (x - p).(z - p); <= 0 characterizes p = Pi_K x.
inline double projection_certificate(const ConvexSet& k, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& z : k.generators()) worst = std::max(worst, (x - p).dot(z - p));
  return worst;
}

/// Thread-local record of every projection performed while an instance is
/// alive, optionally streamed as CSV rows `x_norm,certificate,tolerance,ok`.
class ProjectionAudit {
 public:
  explicit ProjectionAudit(std::ostream* csv = nullptr) : csv_(csv), previous_(current()) {
    current() = this;
    if (csv_) *csv_ << "x_norm,certificate,tolerance,ok\n";
  }
  ~ProjectionAudit() { current() = previous_; }
  ProjectionAudit(const ProjectionAudit&) = delete;
  ProjectionAudit& operator=(const ProjectionAudit&) = delete;

  std::size_t count() const noexcept { return count_; }
  std::size_t failures() const noexcept { return failures_; }
  /// Largest certificate / tolerance seen (<= 1 means every check held).
  double worst_ratio() const noexcept { return worst_ratio_; }

  void record(double x_norm, double certificate, double tolerance) {
    ++count_;
    const bool ok = certificate <= tolerance;
    if (!ok) ++failures_;
    worst_ratio_ = std::max(worst_ratio_, certificate / tolerance);
    if (csv_) *csv_ << x_norm << ',' << certificate << ',' << tolerance << ',' << (ok ? 1 : 0) << '\n';
  }

  static ProjectionAudit*& current() {
    thread_local ProjectionAudit* active = nullptr;
    return active;
  }

 private:
  std::ostream* csv_;
  ProjectionAudit* previous_;
  std::size_t count_ = 0;
  std::size_t failures_ = 0;
  double worst_ratio_ = -std::numeric_limits<double>::infinity();
};

namespace detail {

// Weights alpha (sum 1) minimizing |sum alpha_i q_i| over the affine hull of
// the corral. Rank-deficient systems get the minimum-norm pseudo-solution.
inline Eigen::VectorXd affine_minimizer(const std::vector<Eigen::VectorXd>& q, const std::vector<std::size_t>& corral) {
  const auto s = static_cast<Eigen::Index>(corral.size());
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(s);
  if (s == 1) {
    alpha(0) = 1.0;
    return alpha;
  }
  const Eigen::VectorXd& base = q[corral[0]];
  Eigen::MatrixXd diff(base.size(), s - 1);
  for (Eigen::Index i = 1; i < s; ++i) diff.col(i - 1) = q[corral[static_cast<std::size_t>(i)]] - base;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(diff);
  cod.setThreshold(1e-13);
  const Eigen::VectorXd mu = cod.solve(-base);
  alpha(0) = 1.0 - mu.sum();
  alpha.tail(s - 1) = mu;
  return alpha;
}

// Minimum-norm point of conv{p_i - x} by an active-set iteration over
// barycentric weights: add the generator that most violates the optimality
// certificate, minimize over the affine hull of the active set, and prune
// generators whose weight would turn negative.
inline Eigen::VectorXd nearest_point_in_hull(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& x) {
  const std::size_t k = points.size();
  if (k == 1) return points.front();
  std::vector<Eigen::VectorXd> q(k);
  std::size_t start = 0;
  for (std::size_t i = 0; i < k; ++i) {
    q[i] = points[i] - x;
    if (q[i].squaredNorm() < q[start].squaredNorm()) start = i;
  }
  const double tau = projection_tolerance(x);
  std::vector<std::size_t> corral{start};
  std::vector<double> lambda{1.0};
  Eigen::VectorXd y = q[start];
  const std::size_t max_major = 50 * (k + static_cast<std::size_t>(x.size()) + 1);
  for (std::size_t major = 0; major < max_major; ++major) {
    // Certificate of the current point: |y|^2 - y.q_j = (x - p).(z_j - p).
    std::size_t enter = k;
    double violation = tau;
    const double yy = y.squaredNorm();
    for (std::size_t j = 0; j < k; ++j) {
      const double v = yy - y.dot(q[j]);
      if (v > violation) {
        violation = v;
        enter = j;
      }
    }
    if (enter == k) break;
    if (std::find(corral.begin(), corral.end(), enter) != corral.end()) break;
    corral.push_back(enter);
    lambda.push_back(0.0);
    for (std::size_t minor = 0; minor <= k + 1; ++minor) {
      const Eigen::VectorXd alpha = affine_minimizer(q, corral);
      if (alpha.minCoeff() > 0.0) {
        for (std::size_t i = 0; i < corral.size(); ++i) lambda[i] = alpha(static_cast<Eigen::Index>(i));
        break;
      }
      double theta = 1.0;
      std::size_t leave = 0;
      for (std::size_t i = 0; i < corral.size(); ++i) {
        const double a = alpha(static_cast<Eigen::Index>(i));
        if (a <= 0.0) {
          const double th = lambda[i] / (lambda[i] - a);
          if (th < theta) {
            theta = th;
            leave = i;
          }
        }
      }
      for (std::size_t i = 0; i < corral.size(); ++i)
        lambda[i] = theta * alpha(static_cast<Eigen::Index>(i)) + (1.0 - theta) * lambda[i];
      lambda[leave] = 0.0;
      std::vector<std::size_t> kept;
      std::vector<double> kept_lambda;
      for (std::size_t i = 0; i < corral.size(); ++i)
        if (lambda[i] > 0.0) {
          kept.push_back(corral[i]);
          kept_lambda.push_back(lambda[i]);
        }
      corral = std::move(kept);
      lambda = std::move(kept_lambda);
      if (corral.size() == 1) {
        lambda = {1.0};
        break;
      }
    }
    double total = 0.0;
    for (const double l : lambda) total += l;
    y.setZero();
    for (std::size_t i = 0; i < corral.size(); ++i) y += (lambda[i] / total) * q[corral[i]];
  }
  return x + y;
}

}  // namespace detail

/// Euclidean projection Pi_K x.
inline Eigen::VectorXd project_point(const ConvexSet& k, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != k.m())
    throw DimensionError("point has dimension " + std::to_string(x.size()) + ", convex set has " +
                         std::to_string(k.m()));
  Eigen::VectorXd p;
  if (k.kind() == ConvexKind::half_line)
    p = Eigen::VectorXd::Constant(1, std::min(x(0), k.upper_bound()));
  else
    p = detail::nearest_point_in_hull(k.generators(), x);
  const double tau = projection_tolerance(x);
#ifndef NDEBUG
  const double cert = projection_certificate(k, x, p);
  assert(cert <= tau);
#endif
  if (ProjectionAudit* audit = ProjectionAudit::current()) {
#ifdef NDEBUG
    const double cert = projection_certificate(k, x, p);
#endif
    audit->record(x.norm(), cert, tau);
  }
  return p;
}

inline double distance_to(const ConvexSet& k, const Eigen::VectorXd& x) { return (x - project_point(k, x)).norm(); }

/// Membership up to distance `tol`.
inline bool contains(const ConvexSet& k, const Eigen::VectorXd& x, double tol) {
  if (tol < 0.0) throw Error("membership tolerance must be non-negative");
  return distance_to(k, x) <= tol;
}

/// Nodal projection: (P_K V)(z) = Pi_K V(z) at every vertex.
inline NodalField project_field(const ConvexSet& k, const NodalField& field) {
  if (field.m() != k.m()) throw DimensionError("field and convex set dimensions differ");
  NodalField out = field;
  for (std::size_t v = 0; v < field.num_vertices(); ++v) out.set_value(v, project_point(k, field.value_vector(v)));
  return out;
}

/// Finite hull of the boundary nodal values, with the origin added on request.
inline ConvexSet boundary_hull(const Mesh& mesh, const NodalField& field, bool include_origin) {
  require_compatible(mesh, field);
  if (mesh.boundary_nodes().empty()) throw Error("internal error: mesh has an empty boundary");
  auto values = field_range(field, mesh.boundary_nodes());
  return include_origin ? ConvexSet::hull_with_origin(std::move(values)) : ConvexSet::finite_hull(values);
}

/// Whether points[index] is an extreme point of conv(points): its distance to
/// the hull of the points differing from it by more than `tol` exceeds `tol`.
inline bool is_extreme(const std::vector<Eigen::VectorXd>& points, std::size_t index, double tol) {
  if (points.empty()) throw Error("is_extreme: empty point list");
  if (index >= points.size()) throw Error("is_extreme: index out of range");
  const Eigen::VectorXd& p = points[index];
  std::vector<Eigen::VectorXd> others;
  for (const auto& q : points)
    if ((q - p).norm() > tol) others.push_back(q);
  if (others.empty()) return true;
  return distance_to(ConvexSet::finite_hull(others), p) > tol;
}

/// (x - Pi_K x).(z - Pi_K x) for a member z of K.
inline double check_variational_inequality(const ConvexSet& k, const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
  if (!contains(k, z, 1e-12)) throw Error("variational inequality: z is not in K");
  const Eigen::VectorXd p = project_point(k, x);
  return (x - p).dot(z - p);
}

}  // namespace femchp
