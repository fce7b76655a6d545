#pragma once

/// \file gmsh.hpp
/// \brief Gmsh MSH 2.2 ASCII reader and a debug writer.
///
/// Supported element types: 1 (2-node line), 2 (3-node triangle),
/// 4 (4-node tetrahedron) and 15 (point, ignored). The mesh dimension is 3 if
/// any tetrahedron is present, else 2. Elements of dimension dim become cells,
/// elements of dimension dim-1 become boundary faces; the first tag
/// (physical group) is used as marker, 0 when the element carries no tags.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "mesh.hpp"

namespace pfem {

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank line, trimmed. False at end of stream.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      const auto e = line.find_last_not_of(" \t\r");
      line = line.substr(b, e - b + 1);
      return true;
    }
    return false;
  }

  std::string expect_line(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_no_);
    return line;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

struct RawElement {
  int type;
  int tag;
  std::vector<long long> nodes;
  std::size_t line;
};

inline int element_dim(int type) {
  switch (type) {
    case 15: return 0;
    case 1: return 1;
    case 2: return 2;
    case 4: return 3;
    default: return -1;
  }
}

inline int element_nodes(int type) {
  switch (type) {
    case 15: return 1;
    case 1: return 2;
    case 2: return 3;
    case 4: return 4;
    default: return -1;
  }
}

}  // namespace detail

/// Parses MSH 2.2 ASCII. Throws ParseError (with line number) on malformed
/// input. Negatively oriented cells are repaired by swapping their last two
/// vertices, with a warning.
inline Mesh read_gmsh(std::istream& in) {
  detail::LineReader reader(in);
  std::string line;
  bool have_format = false, have_nodes = false, have_elements = false;
  std::vector<Point> nodes;
  std::unordered_map<long long, Index> node_index;
  std::vector<detail::RawElement> elements;

  while (reader.next(line)) {
    if (line.empty() || line[0] != '$') throw ParseError("expected section header, got '" + line + "'", reader.line());
    const std::string section = line.substr(1);
    if (section.rfind("End", 0) == 0) throw ParseError("unmatched section terminator " + line, reader.line());
    const std::string terminator = "$End" + section;

    if (section == "MeshFormat") {
      std::istringstream ss(reader.expect_line("format line"));
      std::string version;
      int file_type = -1, data_size = 0;
      if (!(ss >> version >> file_type >> data_size)) throw ParseError("malformed $MeshFormat line", reader.line());
      if (version.rfind("2.", 0) != 0) throw ParseError("unsupported MSH version " + version + " (need 2.2)", reader.line());
      if (file_type != 0) throw ParseError("binary MSH files are not supported", reader.line());
      have_format = true;
      if (reader.expect_line("$EndMeshFormat") != terminator)
        throw ParseError("expected " + terminator, reader.line());
    } else if (section == "Nodes") {
      long long count = -1;
      {
        std::istringstream ss(reader.expect_line("node count"));
        if (!(ss >> count) || count < 0) throw ParseError("malformed node count", reader.line());
      }
      nodes.reserve(static_cast<std::size_t>(count));
      for (long long i = 0; i < count; ++i) {
        std::istringstream ss(reader.expect_line("node line"));
        long long id;
        Point p;
        if (!(ss >> id >> p[0] >> p[1] >> p[2])) throw ParseError("malformed node line", reader.line());
        if (!node_index.emplace(id, nodes.size()).second)
          throw ParseError("duplicate node id " + std::to_string(id), reader.line());
        nodes.push_back(p);
      }
      if (reader.expect_line("$EndNodes") != terminator) throw ParseError("expected " + terminator, reader.line());
      have_nodes = true;
    } else if (section == "Elements") {
      long long count = -1;
      {
        std::istringstream ss(reader.expect_line("element count"));
        if (!(ss >> count) || count < 0) throw ParseError("malformed element count", reader.line());
      }
      for (long long i = 0; i < count; ++i) {
        std::istringstream ss(reader.expect_line("element line"));
        long long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags) || ntags < 0) throw ParseError("malformed element line", reader.line());
        const int nn = detail::element_nodes(type);
        if (nn < 0) throw ParseError("unsupported element type " + std::to_string(type), reader.line());
        detail::RawElement el{type, 0, {}, reader.line()};
        for (int t = 0; t < ntags; ++t) {
          long long tag;
          if (!(ss >> tag)) throw ParseError("malformed element tags", reader.line());
          if (t == 0) el.tag = static_cast<int>(tag);
        }
        el.nodes.resize(static_cast<std::size_t>(nn));
        for (auto& n : el.nodes)
          if (!(ss >> n)) throw ParseError("element has too few nodes", reader.line());
        elements.push_back(std::move(el));
      }
      if (reader.expect_line("$EndElements") != terminator) throw ParseError("expected " + terminator, reader.line());
      have_elements = true;
    } else {
      // Unknown sections ($PhysicalNames, $NodeData, ...) are skipped.
      bool closed = false;
      while (reader.next(line)) {
        if (line == terminator) {
          closed = true;
          break;
        }
      }
      if (!closed) throw ParseError("section $" + section + " is not terminated", reader.line());
    }
  }
  if (!have_format) throw ParseError("missing $MeshFormat section", reader.line());
  if (!have_nodes) throw ParseError("missing $Nodes section", reader.line());
  if (!have_elements) throw ParseError("missing $Elements section", reader.line());

  int dim = 2;
  for (const auto& e : elements)
    if (e.type == 4) dim = 3;

  Mesh mesh;
  mesh.dim = dim;
  mesh.vertices = std::move(nodes);
  if (dim == 2)
    for (auto& p : mesh.vertices) p[2] = 0.0;

  std::vector<Index> buf;
  for (const auto& e : elements) {
    const int ed = detail::element_dim(e.type);
    if (ed != dim && ed != dim - 1) continue;
    buf.clear();
    for (auto id : e.nodes) {
      auto it = node_index.find(id);
      if (it == node_index.end()) throw ParseError("dangling node reference " + std::to_string(id), e.line);
      buf.push_back(it->second);
    }
    if (ed == dim) {
      mesh.add_cell(buf, e.tag);
      const Index c = mesh.n_cells() - 1;
      const double vol = signed_cell_volume(mesh, c);
      if (vol == 0.0) throw ParseError("degenerate cell", e.line);
      if (vol < 0.0) {
        auto cell = mesh.cell(c);
        std::swap(cell[static_cast<std::size_t>(dim - 1)], cell[static_cast<std::size_t>(dim)]);
        log().warn("gmsh: cell on line {} was negatively oriented; swapped two vertices", e.line);
      }
    } else {
      mesh.add_face(buf, e.tag);
    }
  }
  return mesh;
}

inline Mesh read_gmsh_string(const std::string& text) {
  std::istringstream in(text);
  return read_gmsh(in);
}

/// Writes MSH 2.2 ASCII: boundary faces first, then cells, 1-based ids.
inline void write_gmsh(const Mesh& mesh, std::ostream& out) {
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n" << mesh.n_vertices() << "\n";
  out.precision(17);
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    const auto& p = mesh.vertices[v];
    out << v + 1 << ' ' << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  }
  out << "$EndNodes\n$Elements\n" << mesh.n_boundary_faces() + mesh.n_cells() << "\n";
  Index id = 1;
  const int face_type = mesh.dim == 3 ? 2 : 1;
  const int cell_type = mesh.dim == 3 ? 4 : 2;
  for (Index f = 0; f < mesh.n_boundary_faces(); ++f) {
    out << id++ << ' ' << face_type << " 2 " << mesh.face_markers[f] << ' ' << mesh.face_markers[f];
    for (Index v : mesh.face(f)) out << ' ' << v + 1;
    out << '\n';
  }
  for (Index c = 0; c < mesh.n_cells(); ++c) {
    const int m = mesh.cell_markers.empty() ? 0 : mesh.cell_markers[c];
    out << id++ << ' ' << cell_type << " 2 " << m << ' ' << m;
    for (Index v : mesh.cell(c)) out << ' ' << v + 1;
    out << '\n';
  }
  out << "$EndElements\n";
}

}  // namespace pfem
