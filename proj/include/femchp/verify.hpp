#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "femchp/convex.hpp"
#include "femchp/energy.hpp"
#include "femchp/error.hpp"
#include "femchp/field.hpp"
#include "femchp/mesh.hpp"

namespace femchp {

enum class Theorem { chp, dmp, hull_with_zero, strong_chp, lemma_pos };

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::chp: return "CHP";
    case Theorem::dmp: return "DMP";
    case Theorem::hull_with_zero: return "HULL_WITH_ZERO";
    case Theorem::strong_chp: return "STRONG_CHP";
    case Theorem::lemma_pos: return "LEMMA_POS";
  }
  return "?";
}

enum class Verdict { pass, fail, hypothesis_not_met };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::hypothesis_not_met: return "hypothesis-not-met";
  }
  return "?";
}

/// One entry of a theorem's hypothesis checklist. Unchecked entries (no data
/// to decide them) never count as failures.
struct Hypothesis {
  std::string name;
  bool checked = true;
  bool ok = true;
};

struct VerifyReport {
  Theorem theorem = Theorem::chp;
  Verdict verdict = Verdict::pass;
  /// Whether the theorem's conclusion holds on the data, independent of the
  /// hypotheses.
  bool conclusion_holds = true;
  /// Non-negative, except for LEMMA_POS where it is signed and relative to the
  /// per-element allowance. The conclusion holds iff violation <= tol.
  double violation = 0.0;
  long node = -1;
  long element = -1;
  double tol = 0.0;
  std::string mesh_class;
  std::vector<Hypothesis> hypotheses;
  /// Theorem-specific extra observations, e.g. the extreme-point census.
  std::vector<std::pair<std::string, double>> metrics;

  bool pass() const noexcept { return verdict == Verdict::pass; }
  bool hypotheses_ok() const {
    return std::all_of(hypotheses.begin(), hypotheses.end(), [](const Hypothesis& h) { return !h.checked || h.ok; });
  }
  double metric(const std::string& key) const {
    for (const auto& [k, v] : metrics)
      if (k == key) return v;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

/// What the caller knows about how the field was produced. Everything is
/// optional; missing information leaves the matching hypothesis unchecked.
struct VerifyContext {
  const EnergyModel* model = nullptr;
  const SourceTerm* source = nullptr;
  const LumpedTerm* lumped = nullptr;
  /// Set when the producing energy is known, so a null source/lumped pointer
  /// means "term absent" rather than "unknown".
  bool terms_known = false;
};

namespace detail {

inline std::string mesh_class_name(const AngleReport& a) {
  return a.is_acute ? "acute" : (a.is_non_obtuse ? "non-obtuse" : "obtuse");
}

inline void finish(VerifyReport& r) {
  r.conclusion_holds = r.conclusion_holds && r.violation <= r.tol;
  if (!r.hypotheses_ok())
    r.verdict = Verdict::hypothesis_not_met;
  else
    r.verdict = r.conclusion_holds ? Verdict::pass : Verdict::fail;
}

inline void add_model_flags(VerifyReport& r, const VerifyContext& ctx) {
  if (ctx.model)
    r.hypotheses.push_back({"energy monotone and strictly convex in t", true, ctx.model->flags_ok()});
  else
    r.hypotheses.push_back({"energy monotone and strictly convex in t", false, true});
}

inline VerifyReport hull_check(Theorem theorem, const Mesh& mesh, const NodalField& field, double tol,
                               bool include_origin) {
  require_compatible(mesh, field);
  VerifyReport r;
  r.theorem = theorem;
  r.tol = tol;
  const AngleReport angles = classify_mesh(mesh);
  r.mesh_class = mesh_class_name(angles);
  r.hypotheses.push_back({"mesh non-obtuse", true, angles.is_non_obtuse});
  const ConvexSet hull = boundary_hull(mesh, field, include_origin);
  r.violation = 0.0;
  for (const auto v : mesh.interior_nodes()) {
    const double d = distance_to(hull, field.value_vector(v));
    if (d > r.violation || r.node < 0) {
      r.violation = std::max(r.violation, d);
      r.node = static_cast<long>(v);
    }
  }
  return r;
}

}  // namespace detail

/// Convex hull property: every interior nodal value lies in the hull of the
/// boundary nodal values (nodal containment is equivalent to containment on
/// the whole domain for piecewise-linear fields).
inline VerifyReport verify_chp(const Mesh& mesh, const NodalField& field, double tol, const VerifyContext& ctx = {}) {
  VerifyReport r = detail::hull_check(Theorem::chp, mesh, field, tol, false);
  detail::add_model_flags(r, ctx);
  if (ctx.terms_known)
    r.hypotheses.push_back({"pure gradient energy (no source or lumped term)", true, !ctx.source && !ctx.lumped});
  detail::finish(r);
  return r;
}

/// Scalar maximum principle max U(interior) <= max U(boundary) for f <= 0.
inline VerifyReport verify_dmp(const Mesh& mesh, const NodalField& field, const SourceTerm* source, double tol,
                               const VerifyContext& ctx = {}) {
  require_compatible(mesh, field);
  if (field.m() != 1) throw DimensionError("the maximum principle check needs a scalar field (m = 1)");
  VerifyReport r;
  r.theorem = Theorem::dmp;
  r.tol = tol;
  const AngleReport angles = classify_mesh(mesh);
  r.mesh_class = detail::mesh_class_name(angles);
  r.hypotheses.push_back({"mesh non-obtuse", true, angles.is_non_obtuse});
  r.hypotheses.push_back({"source f <= 0", true, source == nullptr || source->nonpositive()});
  detail::add_model_flags(r, ctx);
  if (ctx.model && ctx.model->kind() == EnergyKind::mean_curvature && source)
    r.hypotheses.push_back({"coercivity of mean-curvature energy with source", false, true});
  double max_boundary = -std::numeric_limits<double>::infinity();
  for (const auto v : mesh.boundary_nodes()) max_boundary = std::max(max_boundary, field.value(v)[0]);
  double max_interior = -std::numeric_limits<double>::infinity();
  for (const auto v : mesh.interior_nodes())
    if (field.value(v)[0] > max_interior) {
      max_interior = field.value(v)[0];
      r.node = static_cast<long>(v);
    }
  // Only an excess over the boundary maximum counts as a violation.
  r.violation = mesh.interior_nodes().empty() ? 0.0 : std::max(0.0, max_interior - max_boundary);
  r.metrics = {{"max_interior", max_interior}, {"max_boundary", max_boundary}};
  detail::finish(r);
  return r;
}

/// Max hull property of lumped energies: values lie in the hull of the
/// boundary values together with the origin.
inline VerifyReport verify_hull_with_zero(const Mesh& mesh, const NodalField& field, double tol,
                                          const VerifyContext& ctx = {}) {
  VerifyReport r = detail::hull_check(Theorem::hull_with_zero, mesh, field, tol, true);
  detail::add_model_flags(r, ctx);
  if (ctx.terms_known) r.hypotheses.push_back({"energy carries a lumped term", true, ctx.lumped != nullptr});
  // How far the values leave the plain boundary hull (origin augmentation needed).
  const ConvexSet plain = boundary_hull(mesh, field, false);
  double outside = 0.0;
  for (const auto v : mesh.interior_nodes()) outside = std::max(outside, distance_to(plain, field.value_vector(v)));
  r.metrics.push_back({"max_distance_to_plain_hull", outside});
  detail::finish(r);
  return r;
}

/// Euler-Lagrange weights at an interior node z0:
///   beta_0 = sum_T |T| c_T a(t_T) |grad phi_z0|^2,
///   beta_y = sum_T |T| c_T a(t_T) (-grad phi_y . grad phi_z0),  y a neighbour.
struct BetaWeights {
  double beta0 = 0.0;
  std::vector<std::size_t> neighbors;
  std::vector<double> beta;
  /// |beta_0 - sum beta_y| / beta_0.
  double identity_error = 0.0;
  /// |U(z0) - sum (beta_y / beta_0) U(y)|.
  double representation_error = 0.0;
  bool defined = true;
};

inline BetaWeights beta_weights(const Mesh& mesh, const NodalField& field, const EnergyModel& model, std::size_t z0) {
  BetaWeights w;
  w.neighbors = node_neighbors(mesh, z0);
  w.beta.assign(w.neighbors.size(), 0.0);
  for (const auto e : mesh.elements_of(z0)) {
    const ElementGeometry& g = mesh.geometry(e);
    const double a = model.weight(gradient_on_element(mesh, field, e).norm());
    if (!std::isfinite(a)) {
      w.defined = false;
      return w;
    }
    const double c = g.volume * model.coefficient(e) * a;
    const auto idx = mesh.element(e);
    const auto local = static_cast<Eigen::Index>(std::find(idx.begin(), idx.end(), z0) - idx.begin());
    const auto g0 = g.basis_gradients.col(local);
    w.beta0 += c * g0.squaredNorm();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (static_cast<Eigen::Index>(i) == local) continue;
      const auto pos = static_cast<std::size_t>(std::lower_bound(w.neighbors.begin(), w.neighbors.end(), idx[i]) -
                                                w.neighbors.begin());
      w.beta[pos] += c * -g.basis_gradients.col(static_cast<Eigen::Index>(i)).dot(g0);
    }
  }
  double sum = 0.0;
  for (const double b : w.beta) sum += b;
  if (w.beta0 > 0.0) {
    w.identity_error = std::abs(w.beta0 - sum) / w.beta0;
    Eigen::VectorXd combo = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(field.m()));
    for (std::size_t k = 0; k < w.neighbors.size(); ++k) combo += (w.beta[k] / w.beta0) * field.value_vector(w.neighbors[k]);
    w.representation_error = (field.value_vector(z0) - combo).norm();
  }
  return w;
}

/// Strong convex hull property on acute meshes: an interior nodal value that
/// is an extreme point of the hull of all nodal values forces a constant
/// field. Also checks the beta-weight partition identity at every interior
/// node.
inline VerifyReport verify_strong_chp(const Mesh& mesh, const NodalField& field, const EnergyModel& model, double tol,
                                      const VerifyContext& ctx = {}) {
  require_compatible(mesh, field);
  VerifyReport r;
  r.theorem = Theorem::strong_chp;
  r.tol = tol;
  const AngleReport angles = classify_mesh(mesh);
  r.mesh_class = detail::mesh_class_name(angles);
  r.hypotheses.push_back({"mesh acute", true, angles.is_acute});
  r.hypotheses.push_back({"every element has an interior vertex", true, angles.satisfies_interior_vertex_assumption});
  r.hypotheses.push_back({"energy monotone and strictly convex in t", true, model.flags_ok()});
  r.hypotheses.push_back({"no source or lumped term", ctx.terms_known || ctx.source || ctx.lumped,
                          !ctx.source && !ctx.lumped});

  std::vector<Eigen::VectorXd> values;
  values.reserve(field.num_vertices());
  double scale = 0.0;
  for (std::size_t v = 0; v < field.num_vertices(); ++v) {
    values.push_back(field.value_vector(v));
    scale = std::max(scale, values.back().lpNorm<Eigen::Infinity>());
  }
  std::size_t extreme = 0;
  long first_extreme = -1;
  for (const auto v : mesh.interior_nodes())
    if (is_extreme(values, v, tol)) {
      ++extreme;
      if (first_extreme < 0) first_extreme = static_cast<long>(v);
    }
  double spread = 0.0;
  for (const auto& x : values) spread = std::max(spread, (x - values.front()).norm());
  const bool constant = spread <= tol * (1.0 + scale);

  double worst_identity = 0.0, worst_representation = 0.0;
  std::size_t undefined = 0;
  for (const auto v : mesh.interior_nodes()) {
    const BetaWeights w = beta_weights(mesh, field, model, v);
    if (!w.defined) {
      ++undefined;
      continue;
    }
    worst_identity = std::max(worst_identity, w.identity_error);
    worst_representation = std::max(worst_representation, w.representation_error);
  }
  r.metrics = {{"interior_extreme_nodes", static_cast<double>(extreme)},
               {"value_spread", spread},
               {"beta_identity_worst_rel", worst_identity},
               {"representation_error_worst", worst_representation},
               {"beta_undefined_nodes", static_cast<double>(undefined)}};
  r.node = first_extreme;
  // Violation: the spread when an extreme interior value exists, else none.
  r.violation = (extreme > 0 && !constant) ? spread : 0.0;
  r.conclusion_holds = (extreme == 0 || constant) && worst_identity <= 1e-10;
  detail::finish(r);
  return r;
}

/// Elementwise key estimate for the nodal projection on non-obtuse meshes:
///   grad V : grad P_K V >= |grad P_K V|^2   and   |grad V| >= |grad P_K V|,
/// each up to 1e-10 (1 + |grad V|^2).
inline VerifyReport verify_lemma_pos(const Mesh& mesh, const NodalField& field, const ConvexSet& k) {
  require_compatible(mesh, field);
  if (field.m() != k.m()) throw DimensionError("field and convex set dimensions differ");
  VerifyReport r;
  r.theorem = Theorem::lemma_pos;
  const AngleReport angles = classify_mesh(mesh);
  r.mesh_class = detail::mesh_class_name(angles);
  r.hypotheses.push_back({"mesh non-obtuse", true, angles.is_non_obtuse});
  const NodalField projected = project_field(k, field);
  // Violations are reported relative to the per-element tolerance, so the
  // common threshold is 1.
  r.tol = 1.0;
  r.violation = -std::numeric_limits<double>::infinity();
  std::size_t violating = 0;
  double worst_ratio_norm = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const Eigen::MatrixXd g = gradient_on_element(mesh, field, e);
    const Eigen::MatrixXd p = gradient_on_element(mesh, projected, e);
    const double allowance = 1e-10 * (1.0 + g.squaredNorm());
    const double inner_gap = p.squaredNorm() - (g.array() * p.array()).sum();
    const double norm_gap = p.norm() - g.norm();
    const double worst = std::max(inner_gap, norm_gap) / allowance;
    if (worst > 1.0) ++violating;
    if (g.norm() > 0.0) worst_ratio_norm = std::max(worst_ratio_norm, p.norm() / g.norm());
    if (worst > r.violation) {
      r.violation = worst;
      r.element = static_cast<long>(e);
    }
  }
  r.metrics = {{"violating_elements", static_cast<double>(violating)},
               {"max_gradient_norm_ratio", worst_ratio_norm}};
  detail::finish(r);
  return r;
}

/// key=value text block.
inline void write_verify_report(const VerifyReport& r, std::ostream& out) {
  out << "theorem=" << to_string(r.theorem) << '\n'
      << "verdict=" << to_string(r.verdict) << '\n'
      << "pass=" << (r.pass() ? "true" : "false") << '\n'
      << "conclusion_holds=" << (r.conclusion_holds ? "true" : "false") << '\n'
      << "violation=" << r.violation << '\n'
      << "node=" << r.node << '\n'
      << "element=" << r.element << '\n'
      << "tol=" << r.tol << '\n'
      << "mesh_class=" << r.mesh_class << '\n'
      << "hypotheses_ok=" << (r.hypotheses_ok() ? "true" : "false") << '\n';
  for (const auto& h : r.hypotheses)
    out << "hypothesis[" << h.name << "]=" << (!h.checked ? "unchecked" : (h.ok ? "ok" : "FAILED")) << '\n';
  for (const auto& [k, v] : r.metrics) out << "metric[" << k << "]=" << v << '\n';
}

inline const char* verify_csv_header() { return "theorem,pass,violation,node,tol,mesh_class,hypotheses_ok"; }

inline void write_verify_csv_row(const VerifyReport& r, std::ostream& out) {
  out << to_string(r.theorem) << ',' << (r.pass() ? "true" : "false") << ',' << r.violation << ','
      << (r.element >= 0 && r.node < 0 ? r.element : r.node) << ',' << r.tol << ',' << r.mesh_class << ','
      << (r.hypotheses_ok() ? "true" : "false") << '\n';
}

}  // namespace femchp
