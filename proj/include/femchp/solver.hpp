#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "femchp/cg.hpp"
#include "femchp/energy.hpp"
#include "femchp/error.hpp"
#include "femchp/field.hpp"
#include "femchp/mesh.hpp"

namespace femchp {

struct SolveOptions {
  double tol = 1e-10;
  std::size_t max_iters = 10000;
  /// Second stopping condition: relative energy decrease of the last step.
  double energy_rtol = 1e-15;
  /// Compare the residual against tol * max(1, residual_scale) instead of tol.
  /// For strongly nonlinear energies (large p) the individual residual terms
  /// can be so large that an absolute tolerance is below double precision.
  bool relative_tol = false;
  bool record_history = false;
};

struct LineSearchStats {
  std::size_t newton_steps = 0;
  std::size_t gradient_steps = 0;
  std::size_t backtracks = 0;
  double min_step = 1.0;
};

struct SolveReport {
  std::size_t iterations = 0;
  double final_energy = 0.0;
  double residual_sup = 0.0;
  /// Magnitude of the terms summed into the residual (see residual_scale).
  double residual_scale = 0.0;
  bool converged = false;
  std::string stop_reason;
  LineSearchStats line_search;
  double wall_time_s = 0.0;
  /// The model declared monotone + strictly convex; otherwise the theorems
  /// are not guaranteed for the result.
  bool model_flags_ok = true;
  std::vector<double> energy_history;
};

/// Armijo backtracking from step 1, factor 1/2:
///   E(x + s d) - E(x) <= 1e-4 s (g.d).
/// The energy change is evaluated by energy_difference, so the test stays
/// meaningful when the decrease is far below the rounding level of E itself.
struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double energy = 0.0;
  double decrease = 0.0;
  std::size_t backtracks = 0;
};

struct EnergyTerms {
  const SourceTerm* source = nullptr;
  const LumpedTerm* lumped = nullptr;
};

namespace detail {

// psi(t0 + delta) - psi(t0) without cancellation: Simpson's rule on psi' for
// small relative increments, direct difference otherwise.
template <typename Value, typename Derivative>
double profile_increment(double t0, double t1, double delta, Value&& value, Derivative&& derivative) {
  if (t0 > 0.0 && std::abs(delta) <= 1e-3 * t0)
    return delta / 6.0 * (derivative(t0) + 4.0 * derivative(t0 + 0.5 * delta) + derivative(t1));
  return value(t1) - value(t0);
}

}  // namespace detail

/// E(field + s direction) - E(field), accurate to rounding of the change
/// rather than of E.
inline double energy_difference(const Mesh& mesh, const EnergyModel& model, const NodalField& field,
                                const NodalField& direction, double step, EnergyTerms terms = {}) {
  double total = 0.0;
  const double inv_npe = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double vol = mesh.geometry(e).volume;
    const Eigen::MatrixXd g0 = gradient_on_element(mesh, field, e);
    const Eigen::MatrixXd dg = step * gradient_on_element(mesh, direction, e);
    if (dg.squaredNorm() == 0.0) continue;
    const Eigen::MatrixXd g1 = g0 + dg;
    const double t0 = g0.norm(), t1 = g1.norm();
    const double delta = (t0 + t1) > 0.0 ? (2.0 * (g0.array() * dg.array()).sum() + dg.squaredNorm()) / (t0 + t1) : 0.0;
    total += vol * model.coefficient(e) *
             detail::profile_increment(
                 t0, t1, delta, [&](double t) { return model.value(t); },
                 [&](double t) { return model.derivative(t); });
    if (terms.source) {
      double mean = 0.0;
      for (const auto v : mesh.element(e)) mean += step * direction.value(v)[0];
      total -= terms.source->values[e] * vol * mean * inv_npe;
    }
  }
  if (const LumpedTerm* lumped = terms.lumped) {
    const double q = lumped->q;
    for (const auto v : mesh.interior_nodes()) {
      const Eigen::VectorXd x0 = field.value_vector(v);
      const Eigen::VectorXd dx = step * direction.value_vector(v);
      if (dx.squaredNorm() == 0.0) continue;
      const double r0 = x0.norm(), r1 = (x0 + dx).norm();
      const double delta = (r0 + r1) > 0.0 ? (2.0 * x0.dot(dx) + dx.squaredNorm()) / (r0 + r1) : 0.0;
      total += lumped->weights[v] * detail::profile_increment(
                                        r0, r1, delta, [q](double r) { return std::pow(r, q) / q; },
                                        [q](double r) { return std::pow(r, q - 1.0); });
    }
  }
  return total;
}

inline LineSearchResult line_search(const Mesh& mesh, const EnergyModel& model, const NodalField& field,
                                    const NodalField& direction, const NodalField& gradient, double current_energy,
                                    EnergyTerms terms = {}) {
  if (direction.m() != field.m() || direction.num_vertices() != field.num_vertices())
    throw DimensionError("line search direction does not match the field layout");
  for (const auto v : mesh.boundary_nodes())
    for (const double d : direction.value(v))
      if (d != 0.0) throw Error("line search direction must vanish on boundary nodes");
  double slope = 0.0;
  for (std::size_t i = 0; i < field.values().size(); ++i) slope += gradient.values()[i] * direction.values()[i];
  LineSearchResult r;
  if (!(slope < 0.0)) return r;  // not a descent direction
  for (double s = 1.0; s >= 1e-16; s *= 0.5) {
    const double change = energy_difference(mesh, model, field, direction, s, terms);
    if (change <= 1e-4 * s * slope) {
      r.ok = true;
      r.step = s;
      r.decrease = -change;
      r.energy = current_energy + change;
      return r;
    }
    ++r.backtracks;
  }
  return r;
}

/// sup over interior (node, component) of the sum of absolute values of the
/// element, source and lumped contributions entering the residual.
inline double residual_scale(const Mesh& mesh, const EnergyModel& model, const NodalField& field,
                             EnergyTerms terms = {}) {
  std::vector<double> s(mesh.num_vertices(), 0.0);
  const double inv_npe = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = mesh.geometry(e);
    const double t = gradient_on_element(mesh, field, e).norm();
    const double flux = t > 0.0 ? g.volume * model.coefficient(e) * model.derivative(t) : 0.0;
    const auto idx = mesh.element(e);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s[idx[i]] += flux * g.basis_gradients.col(static_cast<Eigen::Index>(i)).norm();
      if (terms.source) s[idx[i]] += std::abs(terms.source->values[e]) * g.volume * inv_npe;
    }
  }
  if (terms.lumped)
    for (std::size_t v = 0; v < s.size(); ++v)
      s[v] += terms.lumped->weights[v] * std::pow(field.value_vector(v).norm(), terms.lumped->q - 1.0);
  double out = 0.0;
  for (const auto v : mesh.interior_nodes()) out = std::max(out, s[v]);
  return out;
}

namespace detail {

// Diagonal scaling for the first-order fallback: sum_T c_T |T| a~(t_T) |grad phi_i|^2
// (+ lumped weight), with a~ = a where finite and positive, 1 otherwise.
inline std::vector<double> gradient_preconditioner(const Mesh& mesh, const EnergyModel& model, const NodalField& field,
                                                   const LumpedTerm* lumped) {
  std::vector<double> d(mesh.num_vertices(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = mesh.geometry(e);
    double a = model.weight(gradient_on_element(mesh, field, e).norm());
    if (!std::isfinite(a) || !(a > 0.0)) a = 1.0;
    const auto idx = mesh.element(e);
    for (std::size_t i = 0; i < idx.size(); ++i)
      d[idx[i]] += model.coefficient(e) * g.volume * a * g.basis_gradients.col(static_cast<Eigen::Index>(i)).squaredNorm();
  }
  if (lumped)
    for (std::size_t v = 0; v < d.size(); ++v) d[v] += lumped->weights[v];
  return d;
}

}  // namespace detail

/// Minimizes the configured energy over G + V_0^m starting from `initial`
/// (whose boundary values are kept bit-exactly).
///
/// Each iteration takes a Newton step when the energy Hessian exists at the
/// iterate and is positive definite, and a diagonally scaled gradient step
/// otherwise; both are globalized by the Armijo line search.
inline std::pair<NodalField, SolveReport> minimize(const Mesh& mesh, const EnergyModel& model, NodalField initial,
                                                   const SolveOptions& options = {}, EnergyTerms terms = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  require_compatible(mesh, initial);
  NodalField field = std::move(initial);
  const std::size_t m = field.m();
  const DofMap dofs(mesh, m);
  SolveReport report;
  report.model_flags_ok = model.flags_ok();

  double energy = energy_value(mesh, model, field, terms.source, terms.lumped);
  if (options.record_history) report.energy_history.push_back(energy);
  NodalField grad = residual(mesh, model, field, terms.source, terms.lumped);
  bool stepped = false;
  double last_rel_decrease = std::numeric_limits<double>::infinity();

  for (;;) {
    report.residual_sup = sup_norm(grad);
    double threshold = options.tol;
    if (options.relative_tol) {
      report.residual_scale = residual_scale(mesh, model, field, terms);
      threshold *= std::max(1.0, report.residual_scale);
    }
    if (report.residual_sup <= threshold && (!stepped || last_rel_decrease < options.energy_rtol)) {
      report.converged = true;
      report.stop_reason = "residual tolerance reached";
      break;
    }
    if (report.iterations >= options.max_iters) {
      report.stop_reason = "iteration cap reached";
      break;
    }
    if (dofs.size == 0) {
      report.converged = true;
      report.stop_reason = "no interior unknowns";
      break;
    }

    NodalField direction(mesh.num_vertices(), m);
    bool newton = false;
    if (auto hessian = assemble_hessian(mesh, model, field, dofs, terms.lumped)) {
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol(*hessian);
      if (chol.info() == Eigen::Success) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(dofs.size));
        for (const auto v : mesh.interior_nodes())
          for (std::size_t j = 0; j < m; ++j) g(dofs.dof(v, j)) = grad.value(v)[j];
        const Eigen::VectorXd step = chol.solve(-g);
        if (chol.info() == Eigen::Success && step.allFinite() && step.dot(g) < 0.0) {
          for (const auto v : mesh.interior_nodes())
            for (std::size_t j = 0; j < m; ++j) direction.value(v)[j] = step(dofs.dof(v, j));
          newton = true;
        }
      }
    }
    if (!newton) {
      const auto scale = detail::gradient_preconditioner(mesh, model, field, terms.lumped);
      for (const auto v : mesh.interior_nodes())
        for (std::size_t j = 0; j < m; ++j) direction.value(v)[j] = -grad.value(v)[j] / scale[v];
    }

    const LineSearchResult ls = line_search(mesh, model, field, direction, grad, energy, terms);
    report.line_search.backtracks += ls.backtracks;
    if (!ls.ok) {
      if (report.residual_sup <= threshold) {
        report.converged = true;
        report.stop_reason = "residual tolerance reached (no further decrease representable)";
      } else {
        report.stop_reason = "line search failed";
      }
      break;
    }
    ++report.iterations;
    (newton ? report.line_search.newton_steps : report.line_search.gradient_steps)++;
    report.line_search.min_step = std::min(report.line_search.min_step, ls.step);
    for (const auto v : mesh.interior_nodes())
      for (std::size_t j = 0; j < m; ++j) field.value(v)[j] += ls.step * direction.value(v)[j];
    last_rel_decrease = ls.decrease / std::max(std::abs(energy), 1.0);
    energy = ls.energy;
    stepped = true;
    if (options.record_history) report.energy_history.push_back(energy);
    grad = residual(mesh, model, field, terms.source, terms.lumped);
  }
  report.final_energy = energy;
  report.residual_scale = residual_scale(mesh, model, field, terms);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(field), std::move(report)};
}

inline std::pair<NodalField, SolveReport> minimize(const Mesh& mesh, const EnergyModel& model,
                                                   const BoundaryData& boundary, std::size_t m,
                                                   const SolveOptions& options = {}, EnergyTerms terms = {}) {
  return minimize(mesh, model, interpolate_boundary(mesh, boundary, m), options, terms);
}

/// Independent p = 2 solve: assembles the P1 stiffness system
/// sum_T c_T |T| grad(phi_i).grad(phi_j) on the interior unknowns and solves
/// each component by conjugate gradients to relative residual 1e-13.
inline NodalField solve_quadratic_oracle(const Mesh& mesh, const NodalField& boundary, const SourceTerm* source = nullptr,
                                         const std::vector<double>& coefficients = {}) {
  require_compatible(mesh, boundary);
  const std::size_t m = boundary.m();
  if (source && m != 1) throw DimensionError("source terms are only supported for scalar fields (m = 1)");
  if (!coefficients.empty() && coefficients.size() != mesh.num_elements())
    throw DimensionError("coefficient table size does not match the element count");
  std::vector<long> pos(mesh.num_vertices(), -1);
  std::size_t n = 0;
  for (const auto v : mesh.interior_nodes()) pos[v] = static_cast<long>(n++);

  CsrMatrix k(n);
  std::vector<std::vector<double>> rhs(m, std::vector<double>(n, 0.0));
  const double inv_npe = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = mesh.geometry(e);
    const double c = (coefficients.empty() ? 1.0 : coefficients[e]) * g.volume;
    const auto idx = mesh.element(e);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      if (pos[idx[a]] < 0) continue;
      const auto row = static_cast<std::size_t>(pos[idx[a]]);
      if (source) rhs[0][row] += source->values.at(e) * g.volume * inv_npe;
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const double kab = c * g.basis_gradients.col(static_cast<Eigen::Index>(a))
                                   .dot(g.basis_gradients.col(static_cast<Eigen::Index>(b)));
        if (pos[idx[b]] >= 0)
          k.add(row, static_cast<std::size_t>(pos[idx[b]]), kab);
        else
          for (std::size_t j = 0; j < m; ++j) rhs[j][row] -= kab * boundary.value(idx[b])[j];
      }
    }
  }
  k.compress();

  NodalField out = boundary;
  for (const auto v : mesh.interior_nodes())
    for (std::size_t j = 0; j < m; ++j) out.value(v)[j] = 0.0;
  if (n == 0) return out;
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> x(n, 0.0);
    conjugate_gradient(k, rhs[j], x, 1e-13, 20 * n + 100);
    for (const auto v : mesh.interior_nodes()) out.value(v)[j] = x[static_cast<std::size_t>(pos[v])];
  }
  return out;
}

/// key=value text block.
inline void write_solve_report(const SolveReport& r, std::ostream& out) {
  out << "iterations=" << r.iterations << '\n'
      << "final_energy=" << r.final_energy << '\n'
      << "residual_sup=" << r.residual_sup << '\n'
      << "residual_scale=" << r.residual_scale << '\n'
      << "converged=" << (r.converged ? "true" : "false") << '\n'
      << "stop_reason=" << r.stop_reason << '\n'
      << "newton_steps=" << r.line_search.newton_steps << '\n'
      << "gradient_steps=" << r.line_search.gradient_steps << '\n'
      << "backtracks=" << r.line_search.backtracks << '\n'
      << "min_step=" << r.line_search.min_step << '\n'
      << "model_flags_ok=" << (r.model_flags_ok ? "true" : "false") << '\n'
      << "wall_time_s=" << r.wall_time_s << '\n';
}

}  // namespace femchp
