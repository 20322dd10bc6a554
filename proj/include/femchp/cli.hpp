#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "femchp/convex.hpp"
#include "femchp/energy.hpp"
#include "femchp/error.hpp"
#include "femchp/field.hpp"
#include "femchp/generators.hpp"
#include "femchp/mesh.hpp"
#include "femchp/mesh_io.hpp"
#include "femchp/solver.hpp"
#include "femchp/verify.hpp"

namespace femchp::cli {

enum ExitCode : int { ok = 0, theorem_fail = 1, input_error = 2, no_convergence = 3, hypothesis_not_met = 4 };

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw Error("invalid number '" + s + "' in " + what);
  return v;
}

inline std::uint64_t to_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw Error("invalid integer '" + s + "' in " + what);
  return v;
}

inline std::vector<double> to_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& t : split(s, ',')) out.push_back(to_double(trim(t), what));
  return out;
}

// "k1=v1,k2=v2" -> map; rejects keys outside `allowed`.
inline std::map<std::string, std::string> key_values(const std::string& s, const std::vector<std::string>& allowed,
                                                     const std::string& what) {
  std::map<std::string, std::string> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("expected key=value in " + what + ", got '" + item + "'");
    const std::string key = item.substr(0, eq);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error("unknown key '" + key + "' in " + what);
    out[key] = item.substr(eq + 1);
  }
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

}  // namespace detail

/// Mesh argument: a mesh file path, or "gen:<generator>:<N>".
inline Mesh load_mesh_arg(const std::string& arg) {
  if (arg.rfind("gen:", 0) == 0) {
    const auto parts = detail::split(arg.substr(4), ':');
    if (parts.size() != 2) throw Error("generator mesh must be written gen:<name>:<N>, got '" + arg + "'");
    return build_structured_mesh(parts[0], detail::to_u64(parts[1], "mesh resolution"));
  }
  return load_mesh(arg);
}

/// Boundary-condition mini-language:
///   affine:a0,a1,..          (dim+1)*m coefficients, per component
///   constant:c1,..,cm        constant data
///   sin-product[:w=2]
///   abs-distance[:center=x,y(,z)]
///   random[:seed=7,lo=-1,hi=1]   (alias random-uniform)
///   file:path                nodal field file
/// `default_seed` is used by random data that names no seed.
inline BoundaryData parse_boundary(const std::string& text, int dim, std::size_t m, std::uint64_t default_seed = 0) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? std::string() : text.substr(colon + 1);
  if (head == "affine") {
    if (rest.empty()) throw Error("affine boundary data needs coefficients");
    return AffineData{detail::to_doubles(rest, "affine boundary data")};
  }
  if (head == "constant") {
    const auto c = detail::to_doubles(rest, "constant boundary data");
    if (c.size() != m)
      throw DimensionError("constant boundary data needs m = " + std::to_string(m) + " values, got " +
                           std::to_string(c.size()));
    AffineData a;
    for (const double v : c) {
      a.coefficients.push_back(v);
      a.coefficients.insert(a.coefficients.end(), static_cast<std::size_t>(dim), 0.0);
    }
    return a;
  }
  if (head == "sin-product") {
    SinProductData d;
    const auto kv = detail::key_values(rest, {"w"}, "sin-product boundary data");
    if (kv.count("w")) d.frequency = detail::to_double(kv.at("w"), "sin-product frequency");
    return d;
  }
  if (head == "abs-distance") {
    AbsDistanceData d;
    if (rest.rfind("center=", 0) == 0)
      d.center = detail::to_doubles(rest.substr(7), "abs-distance centre");
    else if (!rest.empty())
      throw Error("abs-distance accepts only center=x,y(,z)");
    return d;
  }
  if (head == "random" || head == "random-uniform") {
    RandomUniformData d;
    d.seed = default_seed;
    const auto kv = detail::key_values(rest, {"seed", "lo", "hi"}, "random boundary data");
    if (kv.count("seed")) d.seed = detail::to_u64(kv.at("seed"), "random seed");
    if (kv.count("lo")) d.lo = detail::to_double(kv.at("lo"), "random lower bound");
    if (kv.count("hi")) d.hi = detail::to_double(kv.at("hi"), "random upper bound");
    if (!(d.lo <= d.hi)) throw Error("random boundary data needs lo <= hi");
    return d;
  }
  if (head == "file") {
    if (rest.empty()) throw Error("file boundary data needs a path");
    return NodalData{load_field(rest)};
  }
  throw Error("unknown boundary data '" + text + "'");
}

/// "x1,y1;x2,y2;..." -> hull generators.
inline std::vector<Eigen::VectorXd> parse_points(const std::string& text) {
  std::vector<Eigen::VectorXd> pts;
  for (const auto& item : detail::split(text, ';')) {
    const auto v = detail::to_doubles(detail::trim(item), "point list");
    pts.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (pts.empty()) throw Error("empty point list");
  return pts;
}

/// Worker count: FEMCHP_THREADS when set, else the hardware concurrency.
inline std::size_t thread_limit() {
  if (const char* env = std::getenv("FEMCHP_THREADS")) {
    const auto n = detail::to_u64(env, "FEMCHP_THREADS");
    if (n == 0) throw Error("FEMCHP_THREADS must be >= 1");
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string name;
  std::size_t resolution = 4;
  std::string out;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const Mesh mesh = build_structured_mesh(a.name, a.resolution);
  if (a.out.empty())
    write_mesh(mesh, out);
  else
    save_mesh(mesh, a.out);
  return ok;
}

struct MeshInfoArgs {
  std::string mesh;
};

inline int cmd_mesh_info(const MeshInfoArgs& a, std::ostream& out) {
  const Mesh mesh = load_mesh_arg(a.mesh);
  const AngleReport r = classify_mesh(mesh);
  out << "dimension: " << mesh.dim() << '\n'
      << "vertices: " << mesh.num_vertices() << '\n'
      << "elements: " << mesh.num_elements() << '\n'
      << "boundary vertices: " << mesh.boundary_nodes().size() << '\n'
      << "interior vertices: " << mesh.interior_nodes().size() << '\n'
      << "non-obtuse: " << (r.is_non_obtuse ? "yes" : "no") << ", acute: " << (r.is_acute ? "yes" : "no") << '\n'
      << "interior-vertex assumption: " << (r.satisfies_interior_vertex_assumption ? "yes" : "no") << '\n'
      << "worst cosine: " << detail::fmt(r.worst_cosine) << " (element " << r.worst_element << ", local pair "
      << r.worst_pair[0] << ',' << r.worst_pair[1] << ")\n"
      << "max facet angle (deg): " << detail::fmt(r.max_facet_angle_deg) << '\n';
  if (r.max_opposite_angle_sum >= 0.0)
    out << "max opposite angle sum (deg): " << detail::fmt(r.max_opposite_angle_sum * 180.0 / std::numbers::pi)
        << '\n';
  return ok;
}

struct SolveArgs {
  std::string mesh;
  std::string energy = "p-laplace:p=2";
  std::string bc;
  std::size_t m = 1;
  std::string source;                 // per-element file
  std::optional<double> source_value;  // constant source
  std::string coefficients;           // per-element file
  std::optional<double> lumped_q;
  double tol = 1e-10;
  bool relative_tol = false;
  std::size_t max_iters = 10000;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
  std::string csv;
};

inline int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const Mesh mesh = load_mesh_arg(a.mesh);
  EnergyModel model = parse_energy(a.energy);
  if (!a.coefficients.empty()) model = model.with_coefficients(load_element_values(a.coefficients, mesh.num_elements()));
  if (a.m == 0) throw DimensionError("m must be >= 1");
  std::optional<SourceTerm> source;
  if (!a.source.empty() && a.source_value) throw Error("--source and --source-value are exclusive");
  if (!a.source.empty()) source = SourceTerm{load_element_values(a.source, mesh.num_elements())};
  if (a.source_value) source = SourceTerm{std::vector<double>(mesh.num_elements(), *a.source_value)};
  std::optional<LumpedTerm> lumped;
  if (a.lumped_q) lumped = make_lumped_term(mesh, *a.lumped_q);
  const BoundaryData bc = parse_boundary(a.bc, mesh.dim(), a.m, a.seed);

  SolveOptions opt;
  opt.tol = a.tol;
  opt.relative_tol = a.relative_tol;
  opt.max_iters = a.max_iters;
  const auto [field, report] =
      minimize(mesh, model, bc, a.m, opt, {source ? &*source : nullptr, lumped ? &*lumped : nullptr});
  if (!a.out.empty()) save_field(field, a.out);
  out << "energy=" << model.name() << '\n';
  write_solve_report(report, out);
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw IoError("cannot write report file '" + a.report + "'");
    write_solve_report(report, f);
  }
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw IoError("cannot write CSV file '" + a.csv + "'");
    f << "energy,bc,m,iterations,converged,residual_sup,final_energy\n"
      << model.name() << ',' << a.bc << ',' << a.m << ',' << report.iterations << ','
      << (report.converged ? "true" : "false") << ',' << detail::fmt(report.residual_sup) << ','
      << detail::fmt(report.final_energy) << '\n';
  }
  return report.converged ? ok : no_convergence;
}

struct VerifyArgs {
  std::string mesh;
  std::string field;
  std::string theorem = "chp";
  double tol = 1e-8;
  std::string energy;  // producing energy, when known
  std::string source;
  std::optional<double> source_value;
  std::optional<double> lumped_q;
  std::string hull;  // lemma-pos target set; default: boundary hull of the field
  std::string report;
  std::string csv;
};

inline int exit_code_for(const VerifyReport& r) {
  switch (r.verdict) {
    case Verdict::pass: return ok;
    case Verdict::fail: return theorem_fail;
    case Verdict::hypothesis_not_met: return hypothesis_not_met;
  }
  return theorem_fail;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const Mesh mesh = load_mesh_arg(a.mesh);
  const NodalField field = load_field(a.field);
  require_compatible(mesh, field);
  std::optional<EnergyModel> model;
  if (!a.energy.empty()) model = parse_energy(a.energy);
  std::optional<SourceTerm> source;
  if (!a.source.empty()) source = SourceTerm{load_element_values(a.source, mesh.num_elements())};
  if (a.source_value) source = SourceTerm{std::vector<double>(mesh.num_elements(), *a.source_value)};
  std::optional<LumpedTerm> lumped;
  if (a.lumped_q) lumped = make_lumped_term(mesh, *a.lumped_q);
  VerifyContext ctx;
  ctx.model = model ? &*model : nullptr;
  ctx.source = source ? &*source : nullptr;
  ctx.lumped = lumped ? &*lumped : nullptr;
  ctx.terms_known = model.has_value();

  VerifyReport r;
  if (a.theorem == "chp") {
    r = verify_chp(mesh, field, a.tol, ctx);
  } else if (a.theorem == "dmp") {
    r = verify_dmp(mesh, field, ctx.source, a.tol, ctx);
  } else if (a.theorem == "hull0") {
    r = verify_hull_with_zero(mesh, field, a.tol, ctx);
  } else if (a.theorem == "strong") {
    const EnergyModel m = model ? *model : EnergyModel::p_dirichlet(2.0);
    r = verify_strong_chp(mesh, field, m, a.tol, ctx);
  } else if (a.theorem == "lemma-pos") {
    const ConvexSet k = a.hull.empty() ? boundary_hull(mesh, field, false) : ConvexSet::finite_hull(parse_points(a.hull));
    r = verify_lemma_pos(mesh, field, k);
  } else {
    throw Error("unknown theorem '" + a.theorem + "' (expected chp, dmp, hull0, strong, lemma-pos)");
  }
  write_verify_report(r, out);
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw IoError("cannot write report file '" + a.report + "'");
    write_verify_report(r, f);
  }
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw IoError("cannot write CSV file '" + a.csv + "'");
    f << verify_csv_header() << '\n';
    write_verify_csv_row(r, f);
  }
  return exit_code_for(r);
}

// ---------------------------------------------------------------------------
// Experiment sweeps

/// Flat `key = value` file, `#` comments. List values are whitespace
/// separated. Keys:
///   meshes      = right2d:8 kuhn3d:3      (generator:N, or a mesh file path)
///   energies    = p-laplace:p=2 mean-curvature
///   bcs         = random sin-product      (boundary mini-language)
///   seeds       = 1 2 3                   (default 0)
///   m           = 1 2                     (default 1)
///   theorems    = chp lemma-pos           (chp dmp hull0 strong lemma-pos; default chp)
///   tol, relative_tol, max_iters, verify_tol (default 100 tol), lumped_q, source, output
struct ExperimentSpec {
  std::vector<std::string> meshes;
  std::vector<std::string> energies;
  std::vector<std::string> bcs;
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::size_t> ms{1};
  std::vector<std::string> theorems{"chp"};
  double tol = 1e-10;
  bool relative_tol = false;
  std::size_t max_iters = 10000;
  std::optional<double> verify_tol;
  std::optional<double> lumped_q;
  std::optional<double> source;
  std::string output;

  std::size_t combinations() const { return meshes.size() * energies.size() * bcs.size() * ms.size() * seeds.size(); }
};

inline ExperimentSpec parse_experiment(std::istream& in) {
  ExperimentSpec s;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (seen[key]) throw ParseError(lineno, "duplicate key '" + key + "'");
    seen[key] = true;
    const auto list = detail::words(value);
    const auto need_list = [&] {
      if (list.empty()) throw ParseError(lineno, "list '" + key + "' is empty");
    };
    const auto scalar = [&] {
      if (list.size() != 1) throw ParseError(lineno, "'" + key + "' takes exactly one value");
      return list.front();
    };
    if (key == "meshes") {
      need_list();
      s.meshes = list;
    } else if (key == "energies") {
      need_list();
      s.energies = list;
    } else if (key == "bcs") {
      need_list();
      s.bcs = list;
    } else if (key == "theorems") {
      need_list();
      for (const auto& t : list)
        if (t != "chp" && t != "dmp" && t != "hull0" && t != "strong" && t != "lemma-pos")
          throw ParseError(lineno, "unknown theorem '" + t + "'");
      s.theorems = list;
    } else if (key == "seeds") {
      need_list();
      s.seeds.clear();
      for (const auto& w : list) s.seeds.push_back(detail::to_u64(w, "seeds"));
    } else if (key == "m") {
      need_list();
      s.ms.clear();
      for (const auto& w : list) {
        const auto m = detail::to_u64(w, "m");
        if (m == 0) throw ParseError(lineno, "m must be >= 1");
        s.ms.push_back(m);
      }
    } else if (key == "tol") {
      s.tol = detail::to_double(scalar(), "tol");
    } else if (key == "relative_tol") {
      const auto v = scalar();
      if (v != "true" && v != "false") throw ParseError(lineno, "relative_tol must be true or false");
      s.relative_tol = v == "true";
    } else if (key == "max_iters") {
      s.max_iters = detail::to_u64(scalar(), "max_iters");
    } else if (key == "verify_tol") {
      s.verify_tol = detail::to_double(scalar(), "verify_tol");
    } else if (key == "lumped_q") {
      s.lumped_q = detail::to_double(scalar(), "lumped_q");
    } else if (key == "source") {
      s.source = detail::to_double(scalar(), "source");
    } else if (key == "output") {
      s.output = scalar();
    } else {
      throw ParseError(lineno, "unknown key '" + key + "'");
    }
  }
  for (const auto& [name, list] : {std::pair{"meshes", &s.meshes}, {"energies", &s.energies}, {"bcs", &s.bcs}})
    if (list->empty()) throw Error(std::string("experiment spec: '") + name + "' is missing or empty");
  for (const auto& e : s.energies) parse_energy(e);
  return s;
}

inline const char* experiment_csv_version() { return "# femchp-experiment-csv v1"; }

namespace detail {

inline std::string column_prefix(const std::string& theorem) { return theorem == "lemma-pos" ? "lemma_pos" : theorem; }

inline std::string experiment_header(const ExperimentSpec& s) {
  std::string h = "mesh,energy,bc,seed,m,mesh_class,converged,iterations,residual_sup,final_energy";
  for (const auto& t : s.theorems) {
    const std::string c = column_prefix(t);
    h += "," + c + "_pass," + c + "_verdict," + c + "_violation," + c + "_hypotheses_ok";
  }
  return h + ",error";
}

// Target set for the nodal-projection check in sweeps: hull of four seeded
// points in [-1/2, 1/2]^m, so that typical field values get projected.
inline ConvexSet sweep_target_set(std::uint64_t seed, std::size_t m) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  std::vector<Eigen::VectorXd> pts(4, Eigen::VectorXd(static_cast<Eigen::Index>(m)));
  for (auto& p : pts)
    for (Eigen::Index j = 0; j < p.size(); ++j) p(j) = femchp::detail::unit_draw(rng) - 0.5;
  return ConvexSet::finite_hull(pts);
}

inline std::string csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace detail

/// Runs one combination and returns its CSV row (without newline).
inline std::string run_combination(const ExperimentSpec& s, const Mesh& mesh, const std::string& mesh_name,
                                   const std::string& energy, const std::string& bc, std::size_t m,
                                   std::uint64_t seed) {
  std::string row = detail::csv_field(mesh_name) + ',' + detail::csv_field(energy) + ',' + detail::csv_field(bc) +
                    ',' + std::to_string(seed) + ',' + std::to_string(m);
  const std::size_t cells = 5 + 4 * s.theorems.size();
  try {
    const EnergyModel model = parse_energy(energy);
    std::optional<SourceTerm> source;
    if (s.source) source = SourceTerm{std::vector<double>(mesh.num_elements(), *s.source)};
    std::optional<LumpedTerm> lumped;
    if (s.lumped_q) lumped = make_lumped_term(mesh, *s.lumped_q);
    SolveOptions opt;
    opt.tol = s.tol;
    opt.relative_tol = s.relative_tol;
    opt.max_iters = s.max_iters;
    const auto [field, report] = minimize(mesh, model, parse_boundary(bc, mesh.dim(), m, seed), m, opt,
                                          {source ? &*source : nullptr, lumped ? &*lumped : nullptr});
    VerifyContext ctx{&model, source ? &*source : nullptr, lumped ? &*lumped : nullptr, true};
    const double vtol = s.verify_tol.value_or(100.0 * s.tol);
    const AngleReport angles = classify_mesh(mesh);
    row += std::string(",") + femchp::detail::mesh_class_name(angles) + ',' + (report.converged ? "true" : "false") + ',' +
           std::to_string(report.iterations) + ',' + detail::fmt(report.residual_sup) + ',' +
           detail::fmt(report.final_energy);
    std::string errors;
    for (const auto& t : s.theorems) {
      try {
        VerifyReport r;
        if (t == "chp")
          r = verify_chp(mesh, field, vtol, ctx);
        else if (t == "dmp")
          r = verify_dmp(mesh, field, ctx.source, vtol, ctx);
        else if (t == "hull0")
          r = verify_hull_with_zero(mesh, field, vtol, ctx);
        else if (t == "strong")
          r = verify_strong_chp(mesh, field, model, vtol, ctx);
        else
          r = verify_lemma_pos(mesh, field, detail::sweep_target_set(seed, m));
        row += std::string(",") + (r.pass() ? "true" : "false") + ',' + to_string(r.verdict) + ',' +
               detail::fmt(r.violation) + ',' + (r.hypotheses_ok() ? "true" : "false");
      } catch (const std::exception& e) {
        row += ",false,error,,";
        errors += (errors.empty() ? "" : " | ") + t + ": " + e.what();
      }
    }
    return row + ',' + detail::csv_field(errors);
  } catch (const std::exception& e) {
    for (std::size_t i = 0; i < cells; ++i) row += ',';
    return row + ',' + detail::csv_field(e.what());
  }
}

/// Runs the sweep; rows come out in spec order (meshes, energies, bcs, m,
/// seeds; last varies fastest) whatever the worker count.
inline void run_experiment(const ExperimentSpec& s, std::ostream& csv, std::size_t threads) {
  struct Job {
    std::size_t mesh;
    std::string energy, bc;
    std::size_t m;
    std::uint64_t seed;
  };
  std::vector<Mesh> meshes;
  for (const auto& name : s.meshes) meshes.push_back(load_mesh_arg(name));
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < s.meshes.size(); ++i)
    for (const auto& e : s.energies)
      for (const auto& b : s.bcs)
        for (const auto m : s.ms)
          for (const auto seed : s.seeds) jobs.push_back({i, e, b, m, seed});
  std::vector<std::string> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k; (k = next++) < jobs.size();) {
      const Job& j = jobs[k];
      rows[k] = run_combination(s, meshes[j.mesh], s.meshes[j.mesh], j.energy, j.bc, j.m, j.seed);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  csv << experiment_csv_version() << '\n' << detail::experiment_header(s) << '\n';
  for (const auto& r : rows) csv << r << '\n';
}

struct ExperimentArgs {
  std::string spec;
  std::string output;  // overrides the spec's output key
};

inline int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
  std::ifstream in(a.spec);
  if (!in) throw IoError("cannot open experiment spec '" + a.spec + "'");
  const ExperimentSpec s = parse_experiment(in);
  const std::string path = a.output.empty() ? s.output : a.output;
  if (path.empty() || path == "-") {
    run_experiment(s, out, thread_limit());
  } else {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write CSV file '" + path + "'");
    run_experiment(s, f, thread_limit());
    out << "wrote " << s.combinations() << " rows to " << path << '\n';
  }
  return ok;
}

// ---------------------------------------------------------------------------

/// Full command line (args excludes the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"femchp: convex gradient energies on simplicial meshes, with hull-property checks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a structured mesh");
  g->add_option("--name", gen.name, "right2d, crisscross2d, equilateral2d, obtuse2d, kuhn3d")->required();
  g->add_option("--n", gen.resolution, "resolution")->required();
  g->add_option("--out", gen.out, "output mesh file (default stdout)");

  MeshInfoArgs info;
  auto* mi = app.add_subcommand("mesh-info", "print mesh statistics and angle classification");
  mi->add_option("--mesh", info.mesh, "mesh file or gen:<name>:<N>")->required();

  SolveArgs solve;
  double source_value = 0.0, lumped_q = 0.0;
  auto* so = app.add_subcommand("solve", "minimize an energy for given boundary data");
  so->add_option("--mesh", solve.mesh, "mesh file or gen:<name>:<N>")->required();
  so->add_option("--energy", solve.energy, "p-laplace:p=<p>, mean-curvature, orlicz:log-cosh, orlicz:power-log");
  so->add_option("--bc", solve.bc, "boundary data")->required();
  so->add_option("--m", solve.m, "number of field components");
  so->add_option("--source", solve.source, "per-element source file");
  auto* sv = so->add_option("--source-value", source_value, "constant source value");
  so->add_option("--coefficients", solve.coefficients, "per-element coefficient file");
  auto* lq = so->add_option("--lumped-q", lumped_q, "exponent of the lumped term");
  so->add_option("--tol", solve.tol, "residual tolerance");
  so->add_flag("--relative-tol", solve.relative_tol, "scale the tolerance by the residual term magnitude");
  so->add_option("--max-iters", solve.max_iters, "iteration cap");
  so->add_option("--seed", solve.seed, "seed for random boundary data that names none");
  so->add_option("--out", solve.out, "output field file");
  so->add_option("--report", solve.report, "report file");
  so->add_option("--csv", solve.csv, "CSV summary file");

  VerifyArgs ver;
  double vsource_value = 0.0, vlumped_q = 0.0;
  auto* ve = app.add_subcommand("verify", "check a theorem on a field");
  ve->add_option("--mesh", ver.mesh, "mesh file or gen:<name>:<N>")->required();
  ve->add_option("--field", ver.field, "field file")->required();
  ve->add_option("--theorem", ver.theorem, "chp, dmp, hull0, strong, lemma-pos");
  ve->add_option("--tol", ver.tol, "verification tolerance");
  ve->add_option("--energy", ver.energy, "energy that produced the field");
  ve->add_option("--source", ver.source, "per-element source file");
  auto* vsv = ve->add_option("--source-value", vsource_value, "constant source value");
  auto* vlq = ve->add_option("--lumped-q", vlumped_q, "exponent of the lumped term used");
  ve->add_option("--hull", ver.hull, "lemma-pos target hull 'x1,y1;x2,y2;...'");
  ve->add_option("--report", ver.report, "report file");
  ve->add_option("--csv", ver.csv, "CSV row file");

  ExperimentArgs exp;
  auto* ex = app.add_subcommand("experiment", "run a parameter sweep from a spec file");
  ex->add_option("spec", exp.spec, "experiment spec file")->required();
  ex->add_option("--out", exp.output, "CSV output path ('-' for stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : input_error;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*mi) return cmd_mesh_info(info, out);
    if (*so) {
      if (*sv) solve.source_value = source_value;
      if (*lq) solve.lumped_q = lumped_q;
      return cmd_solve(solve, out);
    }
    if (*ve) {
      if (*vsv) ver.source_value = vsource_value;
      if (*vlq) ver.lumped_q = vlumped_q;
      return cmd_verify(ver, out);
    }
    if (*ex) return cmd_experiment(exp, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return input_error;
  }
  return input_error;
}

}  // namespace femchp::cli
