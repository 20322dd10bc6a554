#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "femchp/error.hpp"
#include "femchp/field.hpp"
#include "femchp/mesh.hpp"

namespace femchp {

enum class EnergyKind { p_dirichlet, mean_curvature, orlicz_log_cosh, orlicz_power_log, custom };

/// User-supplied integrand profile t -> psi(t). `second` may be empty, in
/// which case no Hessian is available and the solver stays first order.
struct ScalarProfile {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> second;
};

/// Convex gradient energy density F(x, t) = c_T psi(t), t = |grad V| (Frobenius),
/// with c_T > 0 constant per element.
///
/// Catalog:
///   p-dirichlet   psi(t) = t^p / p,                 1 < p < inf
///   mean-curvature psi(t) = sqrt(1 + t^2)
///   log-cosh      psi(t) = log cosh t
///   power-log     psi(t) = (1 + t) log(1 + t) - t
class EnergyModel {
 public:
  static EnergyModel p_dirichlet(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw Error("p-dirichlet needs 1 < p < inf, got " + std::to_string(p));
    EnergyModel m(EnergyKind::p_dirichlet);
    m.p_ = p;
    return m;
  }
  static EnergyModel mean_curvature() { return EnergyModel(EnergyKind::mean_curvature); }
  static EnergyModel orlicz(const std::string& name) {
    if (name == "log-cosh") return EnergyModel(EnergyKind::orlicz_log_cosh);
    if (name == "power-log") return EnergyModel(EnergyKind::orlicz_power_log);
    throw Error("unknown Orlicz function '" + name + "' (known: log-cosh, power-log)");
  }
  static EnergyModel custom(std::string name, ScalarProfile profile, bool is_monotone, bool is_strictly_convex) {
    EnergyModel m(EnergyKind::custom);
    m.custom_name_ = std::move(name);
    m.profile_ = std::move(profile);
    m.monotone_ = is_monotone;
    m.strictly_convex_ = is_strictly_convex;
    return m;
  }

  /// Same model with a per-element positive coefficient table.
  EnergyModel with_coefficients(std::vector<double> coefficients) const {
    for (std::size_t e = 0; e < coefficients.size(); ++e)
      if (!(coefficients[e] > 0.0)) throw Error("coefficient of element " + std::to_string(e) + " is not positive");
    EnergyModel m = *this;
    m.coefficients_ = std::move(coefficients);
    return m;
  }

  EnergyKind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }
  bool is_monotone_in_t() const noexcept { return monotone_; }
  bool is_strictly_convex_in_t() const noexcept { return strictly_convex_; }
  bool flags_ok() const noexcept { return monotone_ && strictly_convex_; }
  bool has_coefficients() const noexcept { return !coefficients_.empty(); }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  double coefficient(std::size_t e) const { return coefficients_.empty() ? 1.0 : coefficients_.at(e); }

  /// Canonical CLI spelling.
  std::string name() const {
    switch (kind_) {
      case EnergyKind::p_dirichlet: {
        std::ostringstream s;
        s << "p-laplace:p=" << p_;
        return s.str();
      }
      case EnergyKind::mean_curvature: return "mean-curvature";
      case EnergyKind::orlicz_log_cosh: return "orlicz:log-cosh";
      case EnergyKind::orlicz_power_log: return "orlicz:power-log";
      case EnergyKind::custom: return "custom:" + custom_name_;
    }
    return "?";
  }

  /// psi(t)
  double value(double t) const {
    switch (kind_) {
      case EnergyKind::p_dirichlet: return std::pow(t, p_) / p_;
      case EnergyKind::mean_curvature: return std::hypot(1.0, t);
      case EnergyKind::orlicz_log_cosh:
        // log cosh t = log1p(2 sinh^2(t/2)); asymptotic form avoids overflow.
        if (t > 20.0) return t + std::log1p(std::exp(-2.0 * t)) - std::log(2.0);
        return std::log1p(2.0 * std::pow(std::sinh(0.5 * t), 2));
      case EnergyKind::orlicz_power_log: return (1.0 + t) * std::log1p(t) - t;
      case EnergyKind::custom: return profile_.value(t);
    }
    return 0.0;
  }

  /// psi'(t)
  double derivative(double t) const {
    switch (kind_) {
      case EnergyKind::p_dirichlet: return std::pow(t, p_ - 1.0);
      case EnergyKind::mean_curvature: return t / std::hypot(1.0, t);
      case EnergyKind::orlicz_log_cosh: return std::tanh(t);
      case EnergyKind::orlicz_power_log: return std::log1p(t);
      case EnergyKind::custom: return profile_.derivative(t);
    }
    return 0.0;
  }

  /// a(t) = psi'(t) / t, continuously extended to t = 0 (+inf for p < 2).
  double weight(double t) const {
    switch (kind_) {
      case EnergyKind::p_dirichlet:
        if (t == 0.0) return p_ > 2.0 ? 0.0 : (p_ == 2.0 ? 1.0 : std::numeric_limits<double>::infinity());
        return std::pow(t, p_ - 2.0);
      case EnergyKind::mean_curvature: return 1.0 / std::hypot(1.0, t);
      case EnergyKind::orlicz_log_cosh: {
        if (t < 1e-4) {
          const double t2 = t * t;
          return 1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0;
        }
        return std::tanh(t) / t;
      }
      case EnergyKind::orlicz_power_log:
        if (t < 1e-4) return 1.0 - t / 2.0 + t * t / 3.0 - t * t * t / 4.0;
        return std::log1p(t) / t;
      case EnergyKind::custom:
        if (t == 0.0) return std::numeric_limits<double>::infinity();
        return profile_.derivative(t) / t;
    }
    return 0.0;
  }

  /// psi''(t); NaN when unavailable.
  double second(double t) const {
    switch (kind_) {
      case EnergyKind::p_dirichlet:
        if (t == 0.0) return p_ > 2.0 ? 0.0 : (p_ == 2.0 ? 1.0 : std::numeric_limits<double>::infinity());
        return (p_ - 1.0) * std::pow(t, p_ - 2.0);
      case EnergyKind::mean_curvature: return std::pow(1.0 + t * t, -1.5);
      case EnergyKind::orlicz_log_cosh: {
        const double c = std::cosh(std::min(t, 350.0));
        return 1.0 / (c * c);
      }
      case EnergyKind::orlicz_power_log: return 1.0 / (1.0 + t);
      case EnergyKind::custom:
        return profile_.second ? profile_.second(t) : std::numeric_limits<double>::quiet_NaN();
    }
    return 0.0;
  }

  /// True when the second derivative of V -> psi(|grad V|) exists at gradient
  /// magnitude t.
  bool hessian_defined(double t) const {
    return std::isfinite(weight(t)) && std::isfinite(second(t));
  }

 private:
  explicit EnergyModel(EnergyKind kind) : kind_(kind) {}

  EnergyKind kind_;
  double p_ = 2.0;
  bool monotone_ = true;
  bool strictly_convex_ = true;
  std::vector<double> coefficients_;
  std::string custom_name_;
  ScalarProfile profile_;
};

/// Parses "p-laplace:p=3.0" (alias "p-dirichlet:p=..."), "mean-curvature",
/// "orlicz:log-cosh", "orlicz:power-log".
inline EnergyModel parse_energy(const std::string& text) {
  if (text == "mean-curvature") return EnergyModel::mean_curvature();
  if (text.rfind("orlicz:", 0) == 0) return EnergyModel::orlicz(text.substr(7));
  for (const std::string prefix : {"p-laplace:p=", "p-dirichlet:p="})
    if (text.rfind(prefix, 0) == 0) {
      const std::string num = text.substr(prefix.size());
      double p = 0.0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), p);
      if (ec != std::errc() || ptr != num.data() + num.size() || num.empty())
        throw Error("invalid exponent in energy '" + text + "'");
      return EnergyModel::p_dirichlet(p);
    }
  throw Error("unknown energy '" + text + "'");
}

/// Per-element constant source f_T (scalar fields only).
struct SourceTerm {
  std::vector<double> values;

  bool nonpositive() const {
    return std::all_of(values.begin(), values.end(), [](double f) { return f <= 0.0; });
  }
};

/// Lumped lower-order term sum_z w_z |V(z)|^q / q.
struct LumpedTerm {
  double q = 2.0;
  std::vector<double> weights;
};

/// w_z = |supp phi_z| / (n + 1).
inline std::vector<double> lumped_weights(const Mesh& mesh) {
  std::vector<double> w(mesh.num_vertices(), 0.0);
  const double share = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    for (const auto v : mesh.element(e)) w[v] += share * mesh.geometry(e).volume;
  return w;
}

inline LumpedTerm make_lumped_term(const Mesh& mesh, double q) {
  if (!(q > 1.0) || !std::isfinite(q)) throw Error("lumped exponent needs 1 < q < inf");
  return {q, lumped_weights(mesh)};
}

namespace detail {

inline void check_terms(const Mesh& mesh, const EnergyModel& model, const NodalField& field, const SourceTerm* source,
                        const LumpedTerm* lumped) {
  require_compatible(mesh, field);
  if (model.has_coefficients() && model.coefficients().size() != mesh.num_elements())
    throw DimensionError("coefficient table size does not match the element count");
  if (source) {
    if (field.m() != 1) throw DimensionError("source terms are only supported for scalar fields (m = 1)");
    if (source->values.size() != mesh.num_elements())
      throw DimensionError("source table size does not match the element count");
  }
  if (lumped && lumped->weights.size() != mesh.num_vertices())
    throw DimensionError("lumped weight table size does not match the vertex count");
}

}  // namespace detail

/// J(V) = sum_T |T| c_T psi(|grad V|_T) - sum_T f_T |T| mean_T(V) + sum_z w_z |V(z)|^q / q.
/// Element contributions are accumulated in ascending element order.
inline double energy_value(const Mesh& mesh, const EnergyModel& model, const NodalField& field,
                           const SourceTerm* source = nullptr, const LumpedTerm* lumped = nullptr) {
  detail::check_terms(mesh, model, field, source, lumped);
  double total = 0.0;
  const double inv_npe = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double vol = mesh.geometry(e).volume;
    const double t = gradient_on_element(mesh, field, e).norm();
    total += vol * model.coefficient(e) * model.value(t);
    if (source) {
      double mean = 0.0;
      for (const auto v : mesh.element(e)) mean += field.value(v)[0];
      total -= source->values[e] * vol * mean * inv_npe;
    }
  }
  if (lumped)
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
      total += lumped->weights[v] * std::pow(field.value_vector(v).norm(), lumped->q) / lumped->q;
  return total;
}

/// Gradient of energy_value with respect to the interior nodal values.
/// Returned with the field's layout; boundary rows are zero.
inline NodalField residual(const Mesh& mesh, const EnergyModel& model, const NodalField& field,
                           const SourceTerm* source = nullptr, const LumpedTerm* lumped = nullptr) {
  detail::check_terms(mesh, model, field, source, lumped);
  const std::size_t m = field.m();
  NodalField out(mesh.num_vertices(), m);
  const double inv_npe = 1.0 / static_cast<double>(mesh.nodes_per_element());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = mesh.geometry(e);
    const Eigen::MatrixXd grad = gradient_on_element(mesh, field, e);
    const double t = grad.norm();
    const auto idx = mesh.element(e);
    if (t > 0.0) {
      // |T| c_T a(t) grad^T grad(phi_i), one m-vector per local vertex.
      const double scale = g.volume * model.coefficient(e) * model.weight(t);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (mesh.is_boundary(idx[i])) continue;
        const Eigen::VectorXd contrib = scale * grad.transpose() * g.basis_gradients.col(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < m; ++j) out.value(idx[i])[j] += contrib(static_cast<Eigen::Index>(j));
      }
    }
    if (source)
      for (const auto v : idx)
        if (!mesh.is_boundary(v)) out.value(v)[0] -= source->values[e] * g.volume * inv_npe;
  }
  if (lumped)
    for (const auto v : mesh.interior_nodes()) {
      const Eigen::VectorXd x = field.value_vector(v);
      const double r = x.norm();
      if (r == 0.0) continue;
      const double scale = lumped->weights[v] * std::pow(r, lumped->q - 2.0);
      for (std::size_t j = 0; j < m; ++j) out.value(v)[j] += scale * x(static_cast<Eigen::Index>(j));
    }
  return out;
}

inline double sup_norm(const NodalField& f) {
  double s = 0.0;
  for (const double x : f.values()) s = std::max(s, std::abs(x));
  return s;
}

/// Unknown numbering for the interior degrees of freedom: dof(v, j) =
/// position(v) * m + j, positions ascending in vertex index.
struct DofMap {
  std::vector<long> position;  // -1 on boundary vertices
  std::size_t m = 1;
  std::size_t size = 0;

  DofMap(const Mesh& mesh, std::size_t components) : position(mesh.num_vertices(), -1), m(components) {
    long next = 0;
    for (const auto v : mesh.interior_nodes()) position[v] = next++;
    size = static_cast<std::size_t>(next) * m;
  }
  long dof(std::size_t v, std::size_t j) const {
    return position[v] < 0 ? -1 : position[v] * static_cast<long>(m) + static_cast<long>(j);
  }
};

/// Hessian of energy_value with respect to the interior unknowns, or nullopt
/// where it does not exist (p < 2 with a vanishing element gradient, lumped
/// q < 2 at a zero nodal value, custom models without psi'').
inline std::optional<Eigen::SparseMatrix<double>> assemble_hessian(const Mesh& mesh, const EnergyModel& model,
                                                                   const NodalField& field, const DofMap& dofs,
                                                                   const LumpedTerm* lumped = nullptr) {
  const std::size_t m = field.m();
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry& g = mesh.geometry(e);
    const Eigen::MatrixXd grad = gradient_on_element(mesh, field, e);
    const double t = grad.norm();
    if (!model.hessian_defined(t)) return std::nullopt;
    const double c = g.volume * model.coefficient(e);
    const double a = model.weight(t);
    const double curvature = t > 0.0 ? model.second(t) - a : 0.0;
    const auto idx = mesh.element(e);
    // d^2/du_ij du_kl = c [a d_jl (g_i.g_k) + (psi'' - a) (n_j.g_i)(n_l.g_k)], n = grad / t
    Eigen::MatrixXd proj;
    if (t > 0.0) proj = (grad / t).transpose() * g.basis_gradients;  // m x (n+1)
    const Eigen::MatrixXd gram = g.basis_gradients.transpose() * g.basis_gradients;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < m; ++j) {
          const long row = dofs.dof(idx[i], j);
          if (row < 0) continue;
          for (std::size_t l = 0; l < m; ++l) {
            const long col = dofs.dof(idx[k], l);
            if (col < 0) continue;
            double h = (j == l) ? a * gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) : 0.0;
            if (t > 0.0)
              h += curvature * proj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
                   proj(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
            if (h != 0.0) entries.emplace_back(row, col, c * h);
          }
        }
  }
  if (lumped)
    for (const auto v : mesh.interior_nodes()) {
      const Eigen::VectorXd x = field.value_vector(v);
      const double r = x.norm();
      const double q = lumped->q;
      if (r == 0.0) {
        if (q < 2.0) return std::nullopt;
        if (q == 2.0)
          for (std::size_t j = 0; j < m; ++j) entries.emplace_back(dofs.dof(v, j), dofs.dof(v, j), lumped->weights[v]);
        continue;
      }
      const double w = lumped->weights[v];
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t l = 0; l < m; ++l) {
          double h = (j == l) ? std::pow(r, q - 2.0) : 0.0;
          h += (q - 2.0) * std::pow(r, q - 4.0) * x(static_cast<Eigen::Index>(j)) * x(static_cast<Eigen::Index>(l));
          entries.emplace_back(dofs.dof(v, j), dofs.dof(v, l), w * h);
        }
    }
  Eigen::SparseMatrix<double> h(static_cast<Eigen::Index>(dofs.size), static_cast<Eigen::Index>(dofs.size));
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

/// Outcome of a numeric convexity/monotonicity scan of psi.
struct ConvexityReport {
  bool convex = true;
  bool monotone = true;
  /// min over checks of theta psi(s) + (1 - theta) psi(t) - psi(theta s + (1 - theta) t);
  /// negative means a convexity violation.
  double worst_convexity_margin = std::numeric_limits<double>::infinity();
  double worst_s = 0.0, worst_t = 0.0, worst_theta = 0.0;
  /// min over the grid of psi(t_{k+1}) - psi(t_k).
  double worst_monotone_margin = std::numeric_limits<double>::infinity();
  std::size_t checks = 0;
};

/// Checks midpoint-type convexity for all sample pairs (theta in {1/4, 1/2,
/// 3/4} plus seeded random thetas) and monotonicity along the sorted samples.
/// Rounding slack is 1e-12 relative to the values involved.
inline ConvexityReport convexity_probe(const EnergyModel& model, std::vector<double> samples,
                                       std::size_t random_thetas = 4, std::uint64_t seed = 0) {
  std::sort(samples.begin(), samples.end());
  ConvexityReport r;
  std::mt19937_64 rng(seed);
  std::vector<double> thetas{0.25, 0.5, 0.75};
  for (std::size_t k = 0; k < random_thetas; ++k) thetas.push_back(detail::unit_draw(rng));
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      const double s = samples[a], t = samples[b];
      if (s == t) continue;
      const double fs = model.value(s), ft = model.value(t);
      for (const double th : thetas) {
        const double fm = model.value(th * s + (1.0 - th) * t);
        const double margin = th * fs + (1.0 - th) * ft - fm;
        ++r.checks;
        if (margin < r.worst_convexity_margin) {
          r.worst_convexity_margin = margin;
          r.worst_s = s;
          r.worst_t = t;
          r.worst_theta = th;
        }
        if (margin < -1e-12 * (std::abs(fs) + std::abs(ft) + 1.0)) r.convex = false;
      }
    }
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double f0 = model.value(samples[k]), f1 = model.value(samples[k + 1]);
    r.worst_monotone_margin = std::min(r.worst_monotone_margin, f1 - f0);
    if (f1 - f0 < -1e-12 * (std::abs(f0) + 1.0)) r.monotone = false;
  }
  return r;
}

}  // namespace femchp
