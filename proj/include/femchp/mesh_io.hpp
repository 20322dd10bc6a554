#pragma once

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "femchp/error.hpp"
#include "femchp/mesh.hpp"

namespace femchp {

namespace detail {

// Line-oriented tokenizer that skips blank lines and tracks line numbers for
// error messages.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank line split on whitespace; empty when the stream ends.
  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (!tokens.empty()) return tokens;
    }
    return {};
  }

  std::vector<std::string> expect(std::size_t count, std::string_view what) {
    auto tokens = next();
    if (tokens.empty()) throw ParseError(line_no_ + 1, "unexpected end of file, expected " + std::string(what));
    if (tokens.size() != count)
      throw ParseError(line_no_, "expected " + std::to_string(count) + " tokens for " + std::string(what) + ", got " +
                                     std::to_string(tokens.size()));
    return tokens;
  }

  std::size_t line() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

inline double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(line, "invalid number '" + s + "'");
  return v;
}

inline std::size_t parse_count(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(line, "invalid non-negative integer '" + s + "'");
  return v;
}

inline void expect_keyword(const std::vector<std::string>& tokens, std::string_view keyword, std::size_t line) {
  if (tokens.front() != keyword)
    throw ParseError(line, "expected keyword '" + std::string(keyword) + "', got '" + tokens.front() + "'");
}

}  // namespace detail

inline Mesh read_mesh(std::istream& in) {
  detail::LineReader reader(in);
  auto t = reader.expect(2, "'dim n'");
  detail::expect_keyword(t, "dim", reader.line());
  const auto dim = detail::parse_count(t[1], reader.line());
  if (dim != 2 && dim != 3) throw ParseError(reader.line(), "dimension must be 2 or 3");

  t = reader.expect(2, "'vertices V'");
  detail::expect_keyword(t, "vertices", reader.line());
  const auto nv = detail::parse_count(t[1], reader.line());
  std::vector<double> coords;
  coords.reserve(nv * dim);
  for (std::size_t v = 0; v < nv; ++v) {
    t = reader.expect(dim, "vertex " + std::to_string(v));
    for (const auto& s : t) coords.push_back(detail::parse_double(s, reader.line()));
  }

  t = reader.expect(2, "'simplices E'");
  detail::expect_keyword(t, "simplices", reader.line());
  const auto ne = detail::parse_count(t[1], reader.line());
  std::vector<std::size_t> simplices;
  simplices.reserve(ne * (dim + 1));
  for (std::size_t e = 0; e < ne; ++e) {
    t = reader.expect(dim + 1, "simplex " + std::to_string(e));
    for (const auto& s : t) simplices.push_back(detail::parse_count(s, reader.line()));
  }
  if (!reader.next().empty()) throw ParseError(reader.line(), "trailing content after the simplex list");
  return Mesh(static_cast<int>(dim), std::move(coords), std::move(simplices));
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  return read_mesh(in);
}

inline void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << "dim " << mesh.dim() << '\n' << "vertices " << mesh.num_vertices() << '\n';
  out << std::setprecision(17);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const auto x = mesh.vertex(v);
    for (std::size_t k = 0; k < x.size(); ++k) out << (k ? " " : "") << x[k];
    out << '\n';
  }
  out << "simplices " << mesh.num_elements() << '\n';
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto idx = mesh.element(e);
    for (std::size_t k = 0; k < idx.size(); ++k) out << (k ? " " : "") << idx[k];
    out << '\n';
  }
}

inline void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_mesh(mesh, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace femchp
