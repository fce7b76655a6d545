#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pfem/gmsh.hpp"
#include "pfem/mesh.hpp"

using namespace pfem;

namespace {

BoxSpec box3(int nx, int ny, int nz) {
  BoxSpec b;
  b.subdivisions = {nx, ny, nz};
  return b;
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

std::map<std::string, std::size_t> read_counts(const std::string& path) {
  std::ifstream in(path);
  std::map<std::string, std::size_t> out;
  std::string key;
  std::size_t v;
  while (in >> key >> v) out[key] = v;
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* single_tet = R"($MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
1
1 4 2 7 7 1 2 3 4
$EndElements
)";

}  // namespace

TEST(GenerateBox, UnitCubeSingleHex) {
  const Mesh m = generate_box(box3(1, 1, 1));
  EXPECT_EQ(m.n_vertices(), 8u);
  EXPECT_EQ(m.n_cells(), 6u);
  EXPECT_EQ(m.n_boundary_faces(), 12u);
  EXPECT_NO_THROW(validate(m));
}

TEST(GenerateBox, Rectangle2x3) {
  BoxSpec b;
  b.dim = 2;
  b.upper = {1.0, 2.0, 1.0};
  b.subdivisions = {2, 3, 1};
  const Mesh m = generate_box(b);
  EXPECT_EQ(m.n_vertices(), 12u);
  EXPECT_EQ(m.n_cells(), 12u);
  EXPECT_EQ(m.n_boundary_faces(), 10u);
  EXPECT_NO_THROW(validate(m));
  EXPECT_NEAR(total_volume(m), 2.0, 1e-14);
}

TEST(GenerateBox, LargeCubeVertexCount) {
  const Mesh m = generate_box(box3(55, 55, 55));
  EXPECT_EQ(m.n_vertices(), 175616u);
  EXPECT_EQ(m.n_cells(), 6u * 55 * 55 * 55);
}

TEST(GenerateBox, BoundaryMarkersMatchSides) {
  BoxSpec b = box3(2, 3, 2);
  b.face_markers = {11, 12, 13, 14, 15, 16};
  const Mesh m = generate_box(b);
  std::map<int, int> count;
  for (Index f = 0; f < m.n_boundary_faces(); ++f) {
    const int mk = m.face_markers[f];
    ++count[mk];
    const int axis = (mk - 11) / 2;
    const double plane = (mk - 11) % 2 == 0 ? 0.0 : 1.0;
    for (Index v : m.face(f)) EXPECT_DOUBLE_EQ(m.vertices[v][static_cast<std::size_t>(axis)], plane);
  }
  EXPECT_EQ(count[11], 2 * 3 * 2);
  EXPECT_EQ(count[12], 2 * 3 * 2);
  EXPECT_EQ(count[13], 2 * 2 * 2);
  EXPECT_EQ(count[15], 2 * 2 * 3);
}

TEST(GenerateBox, Deterministic) {
  const Mesh a = generate_box(box3(3, 2, 2)), b = generate_box(box3(3, 2, 2));
  EXPECT_EQ(a.cell_vertices, b.cell_vertices);
  EXPECT_EQ(a.face_vertices, b.face_vertices);
}

TEST(GenerateBox, InvalidSpecRejected) {
  BoxSpec b = box3(0, 1, 1);
  EXPECT_THROW(generate_box(b), ConfigError);
  b = box3(1, 1, 1);
  b.lower[1] = 2.0;
  EXPECT_THROW(generate_box(b), ConfigError);
}

TEST(GenerateBox, RandomFamilyPassesInvariants) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> n(1, 6);
  std::uniform_real_distribution<double> off(-2.0, 2.0), len(0.1, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    BoxSpec b;
    b.dim = trial % 2 ? 2 : 3;
    double expected = 1.0;
    for (std::size_t k = 0; k < 3; ++k) {
      b.lower[k] = off(rng);
      const double l = len(rng);
      b.upper[k] = b.lower[k] + l;
      b.subdivisions[k] = n(rng);
      if (static_cast<int>(k) < b.dim) expected *= l;
    }
    const Mesh m = generate_box(b);
    ASSERT_NO_THROW(validate(m));
    Index nv = 1;
    for (int k = 0; k < b.dim; ++k) nv *= static_cast<Index>(b.subdivisions[static_cast<std::size_t>(k)] + 1);
    EXPECT_EQ(m.n_vertices(), nv);
    EXPECT_NEAR(total_volume(m), expected, 1e-12 * expected);
  }
}

TEST(CellVolume, ReferenceSimplices) {
  Mesh tet;
  tet.dim = 3;
  tet.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  tet.cell_vertices = {0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(cell_volume(tet, 0), 1.0 / 6.0);
  Mesh tri;
  tri.dim = 2;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.cell_vertices = {0, 1, 2};
  EXPECT_DOUBLE_EQ(cell_volume(tri, 0), 0.5);
}

TEST(CellVolume, MatchesMonteCarlo) {
  Mesh m;
  m.dim = 3;
  m.vertices = {{0.1, -0.2, 0.3}, {1.3, 0.1, 0.2}, {0.4, 1.1, -0.1}, {0.2, 0.3, 0.9}};
  m.cell_vertices = {0, 1, 2, 3};
  // Oracle: fraction of uniform samples in the bounding box that land inside
  // the tetrahedron, via barycentric coordinates.
  Vec3 lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
  for (const auto& v : m.vertices)
    for (std::size_t k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], v[k]);
      hi[k] = std::max(hi[k], v[k]);
    }
  const Vec3 a = m.vertices[0];
  const Vec3 e1 = m.vertices[1] - a, e2 = m.vertices[2] - a, e3 = m.vertices[3] - a;
  const double det = dot(e1, cross(e2, e3));
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int samples = 4'000'000;
  int inside = 0;
  for (int s = 0; s < samples; ++s) {
    Vec3 x;
    for (std::size_t k = 0; k < 3; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
    const Vec3 d = x - a;
    const double l1 = dot(d, cross(e2, e3)) / det, l2 = dot(e1, cross(d, e3)) / det, l3 = dot(e1, cross(e2, d)) / det;
    if (l1 >= 0 && l2 >= 0 && l3 >= 0 && l1 + l2 + l3 <= 1) ++inside;
  }
  const double box = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  EXPECT_NEAR(cell_volume(m, 0), box * inside / samples, 1e-3);
}

TEST(ReadGmsh, SingleTetrahedron) {
  const Mesh m = read_gmsh_string(single_tet);
  EXPECT_EQ(m.dim, 3);
  EXPECT_EQ(m.n_vertices(), 4u);
  EXPECT_EQ(m.n_cells(), 1u);
  EXPECT_DOUBLE_EQ(cell_volume(m, 0), 1.0 / 6.0);
}

TEST(ReadGmsh, DanglingNodeReference) {
  const std::string text = R"($MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 1 1 0
$EndNodes
$Elements
1
1 2 2 0 0 1 2 99
$EndElements
)";
  try {
    read_gmsh_string(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("dangling node reference"), std::string::npos);
    EXPECT_EQ(e.line_number, 13u);
  }
}

TEST(ReadGmsh, MalformedInputsReportLines) {
  EXPECT_THROW(read_gmsh_string("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n"), ParseError);
  EXPECT_THROW(read_gmsh_string("garbage\n"), ParseError);
  const std::string bad_type = std::string(single_tet).replace(std::string(single_tet).find("1 4 2 7 7"), 9, "1 9 2 7 7");
  EXPECT_THROW(read_gmsh_string(bad_type), ParseError);
  try {
    read_gmsh_string("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number, 6u);
  }
}

TEST(ReadGmsh, NegativeCellRepaired) {
  std::string text = single_tet;
  text.replace(text.find("1 2 3 4\n$End"), 7, "1 3 2 4");
  const Mesh m = read_gmsh_string(text);
  EXPECT_GT(signed_cell_volume(m, 0), 0.0);
}

TEST(ReadGmsh, UnmarkedFacesGetZero) {
  std::string text = single_tet;
  text.replace(text.find("1\n1 4 2 7 7"), 11, "2\n2 2 0 1 2 3\n1 4 2 7 7");
  const Mesh m = read_gmsh_string(text);
  ASSERT_EQ(m.n_boundary_faces(), 1u);
  EXPECT_EQ(m.face_markers[0], 0);
}

// Fixtures exported by the Gmsh 4.15 mesher (MSH 2.2 ASCII) together with
// the node/element counts Gmsh reported through its API.
class GmshFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(GmshFixture, CountsMatchExporter) {
  const std::string base = std::string(PFEM_TEST_DATA) + "/" + GetParam();
  const auto counts = read_counts(base + ".counts");
  const Mesh m = read_gmsh_string(slurp(base + ".msh"));
  ASSERT_NO_THROW(validate(m));
  EXPECT_EQ(m.n_vertices(), counts.at("nodes"));
  EXPECT_EQ(m.n_cells(), counts.at("cells"));
  EXPECT_EQ(m.n_boundary_faces(), counts.at("boundary_faces"));
  EXPECT_NEAR(total_volume(m), 1.0, 1e-12);
  for (int mk : m.face_markers) EXPECT_GE(mk, 1);
}

TEST_P(GmshFixture, WriteBackIsIdempotentOnCounts) {
  const Mesh m = read_gmsh_string(slurp(std::string(PFEM_TEST_DATA) + "/" + GetParam() + ".msh"));
  std::ostringstream once;
  write_gmsh(m, once);
  const Mesh m2 = read_gmsh_string(once.str());
  std::ostringstream twice;
  write_gmsh(m2, twice);
  const Mesh m3 = read_gmsh_string(twice.str());
  EXPECT_EQ(m2.n_vertices(), m.n_vertices());
  EXPECT_EQ(m2.n_cells(), m.n_cells());
  EXPECT_EQ(m2.n_boundary_faces(), m.n_boundary_faces());
  EXPECT_EQ(once.str(), twice.str());
  EXPECT_EQ(m3.cell_vertices, m2.cell_vertices);
}

INSTANTIATE_TEST_SUITE_P(Exported, GmshFixture, ::testing::Values("unit_square", "unit_cube"));

TEST(ReadGmsh, GeneratedBoxRoundTrip) {
  const Mesh m = generate_box(box3(2, 2, 2));
  std::ostringstream out;
  write_gmsh(m, out);
  const Mesh r = read_gmsh_string(out.str());
  EXPECT_EQ(r.n_vertices(), m.n_vertices());
  EXPECT_EQ(r.cell_vertices, m.cell_vertices);
  EXPECT_EQ(r.face_markers, m.face_markers);
  EXPECT_EQ(r.vertices, m.vertices);
}
