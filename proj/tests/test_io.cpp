#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace pfem;
using namespace pfem::test;
namespace fs = std::filesystem;

namespace {

/// Minimal legacy-VTK reader: points, cells and POINT_DATA scalar/vector
/// blocks by name.
struct VtkData {
  std::vector<Point> points;
  std::vector<std::vector<Index>> cells;
  std::vector<int> types;
  std::map<std::string, std::vector<double>> fields;
};

VtkData read_vtk(std::istream& in) {
  VtkData d;
  std::string tok;
  Index n = 0;
  while (in >> tok) {
    if (tok == "POINTS") {
      in >> n >> tok;
      d.points.resize(n);
      for (auto& p : d.points) in >> p[0] >> p[1] >> p[2];
    } else if (tok == "CELLS") {
      Index total = 0;
      in >> n >> total;
      d.cells.resize(n);
      for (auto& c : d.cells) {
        Index k = 0;
        in >> k;
        c.resize(k);
        for (auto& v : c) in >> v;
      }
    } else if (tok == "CELL_TYPES") {
      in >> n;
      d.types.resize(n);
      for (auto& t : d.types) in >> t;
    } else if (tok == "SCALARS") {
      std::string name, type;
      int comps = 0;
      in >> name >> type >> comps >> tok >> tok;  // LOOKUP_TABLE default
      auto& v = d.fields[name];
      v.resize(d.points.size());
      for (auto& x : v) in >> x;
    } else if (tok == "VECTORS") {
      std::string name, type;
      in >> name >> type;
      auto& v = d.fields[name];
      v.resize(3 * d.points.size());
      for (auto& x : v) in >> x;
    }
  }
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the build tree.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / ("io_scratch_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = "cd '" + dir.string() + "' && '" PFEM_CLI_PATH "' " + args + " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(ParamTree, TypedLookupsAndDefaults) {
  const ParamTree p = ParamTree::parse(
      "# top comment\n"
      "name = \"cavity run\"\n"
      "[solver]\n"
      "tol = 1e-8   # trailing comment\n"
      "restart = 30\n"
      "verbose = yes\n"
      "[solver.schur]\n"
      "weights = 1.5, 2, -3\n"
      "markers = 1 2, 3\n");
  EXPECT_EQ(p.get_real("solver.tol"), 1e-8);
  EXPECT_EQ(p.get_int("solver.restart"), 30);
  EXPECT_EQ(p.get_int("solver.max_iters", 50), 50);
  EXPECT_TRUE(p.get_bool("solver.verbose"));
  EXPECT_EQ(p.get_string("name"), "cavity run");
  EXPECT_EQ(p.get_real_list("solver.schur.weights"), (std::vector<double>{1.5, 2.0, -3.0}));
  EXPECT_EQ(p.get_int_list("solver.schur.markers"), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(p.get_int_list("absent", {4}), std::vector<int>{4});
}

TEST(ParamTree, LookupsDoNotMutateAndUnusedKeysAreReported) {
  const ParamTree p = ParamTree::parse("[a]\nx = 1\ny = 2\n");
  const auto before = p.entries();
  EXPECT_EQ(p.get_int("a.x", 0), 1);
  EXPECT_EQ(p.get_int("a.z", 7), 7);
  EXPECT_EQ(p.entries().size(), before.size());
  EXPECT_EQ(p.unused_keys(), std::vector<std::string>{"a.y"});
}

TEST(ParamTree, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      ParamTree::parse(text);
    } catch (const ParseError& e) {
      return e.line_number;
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("[solver]\ntol = 1\ntol = 2\n"), 3u);
  EXPECT_EQ(line_of("a = 1\n\njust words\n"), 3u);
  EXPECT_EQ(line_of("[broken\n"), 1u);
  EXPECT_EQ(line_of("[s]\n = 4\n"), 2u);
  // Same key in different sections is fine.
  EXPECT_NO_THROW(ParamTree::parse("[a]\ntol = 1\n[b]\ntol = 2\n"));
}

TEST(ParamTree, BadValuesAreConfigErrors) {
  const ParamTree p = ParamTree::parse("x = abc\nn = 2.5\nb = maybe\nl = 1, 2.5\n");
  EXPECT_THROW(p.get_real("x"), ConfigError);
  EXPECT_THROW(p.get_int("n"), ConfigError);
  EXPECT_THROW(p.get_bool("b"), ConfigError);
  EXPECT_THROW(p.get_int_list("l"), ConfigError);
  EXPECT_THROW(p.get_real("missing"), ConfigError);
  EXPECT_THROW(ParamTree::load("/nonexistent/file.prm"), ConfigError);
}

TEST(ParamTree, ShippedParameterFilesParse) {
  for (const auto& e : fs::directory_iterator(PFEM_PARAMS_DIR))
    if (e.path().extension() == ".prm") EXPECT_NO_THROW(ParamTree::load(e.path().string())) << e.path();
}

TEST(Vtk, SingleTetScalarField) {
  Mesh m;
  m.dim = 3;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.cell_vertices = {0, 1, 2, 3};
  const DofMap V = build_dofmap(m, trivial_partition(1), FiniteElement(1, 3));
  const DistVector u = interpolate([](const Point& x) { return 1.0 + x[0] + 2.0 * x[2]; }, V);
  const VtkField f{"u", &V, &u};
  std::stringstream ss;
  write_vtk(m, std::span(&f, 1), ss);
  const VtkData d = read_vtk(ss);
  ASSERT_EQ(d.points.size(), 4u);
  ASSERT_EQ(d.cells.size(), 1u);
  EXPECT_EQ(d.cells[0], (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_EQ(d.types, std::vector<int>{10});
  EXPECT_EQ(d.fields.at("u"), (std::vector<double>{1.0, 2.0, 1.0, 3.0}));
}

TEST(Vtk, RoundTripOfScalarAndVectorFields) {
  const Mesh m = box_mesh(2, 3);
  const FiniteElement p2(2, 2);
  const DofMap S = build_dofmap(m, make_partition(m, 2), p2);
  const DofMap V = with_components(S, 2);
  const DistVector s = interpolate([](const Point& x) { return std::exp(x[0]) / 3.0; }, S);
  const DistVector v = interpolate([](const Point& x) { return Vec3{std::sin(x[1]), -x[0] / 7.0, 0.0}; }, V);
  const VtkField fields[] = {{"s", &S, &s}, {"v", &V, &v}};
  std::stringstream ss;
  write_vtk(m, fields, ss);
  const VtkData d = read_vtk(ss);
  EXPECT_EQ(d.types, std::vector<int>(m.n_cells(), 5));
  for (Index i = 0; i < m.n_vertices(); ++i) {
    EXPECT_EQ(d.points[i], m.vertices[i]);
    EXPECT_EQ(d.fields.at("s")[i], s.at(i));
    EXPECT_EQ(d.fields.at("v")[3 * i], v.at(V.global(i, 0)));
    EXPECT_EQ(d.fields.at("v")[3 * i + 1], v.at(V.global(i, 1)));
    EXPECT_EQ(d.fields.at("v")[3 * i + 2], 0.0);
  }
}

TEST(Vtk, RankCountDoesNotChangeTheFile) {
  PoissonConfig cfg;
  cfg.dim = 3;
  cfg.n = 4;
  cfg.degree = 2;
  std::string files[2];
  for (int k : {0, 1}) {
    cfg.n_ranks = k == 0 ? 1 : 4;
    const PoissonResult r = solve_poisson(cfg);
    const VtkField f{"u", r.space.get(), &r.u};
    std::stringstream ss;
    write_vtk(r.mesh, std::span(&f, 1), ss);
    files[k] = ss.str();
  }
  // Solutions agree only to solver tolerance; compare the geometry section
  // bitwise and the values at that tolerance.
  const auto split = files[0].find("POINT_DATA");
  EXPECT_EQ(files[0].substr(0, split), files[1].substr(0, files[1].find("POINT_DATA")));
  std::stringstream a(files[0]), b(files[1]);
  const auto da = read_vtk(a), db = read_vtk(b);
  for (Index i = 0; i < da.points.size(); ++i) EXPECT_NEAR(da.fields.at("u")[i], db.fields.at("u")[i], 1e-8);
}

TEST(Vtk, SameDataDifferentLayoutIsByteIdentical) {
  const Mesh m = box_mesh(3, 2);
  const FiniteElement fe(1, 3);
  std::vector<double> values(m.n_vertices());
  for (Index i = 0; i < values.size(); ++i) values[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
  std::string out[2];
  for (int k : {1, 4}) {
    const DofMap V = build_dofmap(m, make_partition(m, k), fe);
    const DistVector u = DistVector::scatter(V.unique_map, values);
    const VtkField f{"u", &V, &u};
    std::stringstream ss;
    write_vtk(m, std::span(&f, 1), ss);
    out[k == 4] = ss.str();
  }
  EXPECT_EQ(out[0], out[1]);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  Checkpoint c;
  c.step = 42;
  c.t = 0.1 + 0.2;
  c.dt = 1.0 / 3.0;
  c.scheme = "yosida2";
  c.velocity = {1e-300, -0.0, std::numeric_limits<double>::max(), 3.14159};
  c.pressure = {std::numeric_limits<double>::denorm_min(), 2.0};
  std::stringstream ss;
  write_checkpoint(c, ss);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "PFEM");
  const Checkpoint back = read_checkpoint(ss);
  EXPECT_EQ(back, c);
  EXPECT_TRUE(std::signbit(back.velocity[1]));
  std::stringstream again;
  write_checkpoint(back, again);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, CorruptInputRejected) {
  std::stringstream bad("NOPE1234");
  EXPECT_THROW(read_checkpoint(bad), ConfigError);
  Checkpoint c;
  c.velocity = {1.0, 2.0};
  std::stringstream ss;
  write_checkpoint(c, ss);
  std::stringstream cut(ss.str().substr(0, ss.str().size() - 3));
  EXPECT_THROW(read_checkpoint(cut), ConfigError);
}

TEST(Csv, GoldenHeader) {
  std::ifstream golden(PFEM_TEST_DATA "/ns_steps_header.csv");
  std::string line;
  ASSERT_TRUE(std::getline(golden, line));
  EXPECT_EQ(line, csv_header());
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(run_cli("frobnicate", dir), 2);
  EXPECT_NE(slurp(dir / "err.txt").find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli("", dir), 2);
  EXPECT_EQ(run_cli("poisson -p missing.prm", dir), 2);
  write_file(dir / "dup.prm", "[mesh]\nn = 2\nn = 3\n");
  EXPECT_EQ(run_cli("poisson -p dup.prm", dir), 2);
  write_file(dir / "bad.prm", "[mesh]\ndim = 2\nn = 2\n[solver]\nmethod = sor\n");
  EXPECT_EQ(run_cli("poisson -p bad.prm", dir), 2);
  write_file(dir / "ns.prm", "[mesh]\ndim = 2\nn = 2\n[ns]\nt_end = 0.1\ndt = 0.05\n[output]\ncsv = s.csv\n");
  EXPECT_EQ(run_cli("ns -p ns.prm --scheme perot --adaptive", dir), 2);
  EXPECT_EQ(run_cli("ns -p ns.prm --scheme nonsense", dir), 2);
  // A starved inner solver is reported as divergence.
  write_file(dir / "stall.prm",
             "[mesh]\ndim = 3\nn = 6\n[poisson]\ndegree = 2\n[solver]\nmax_iters = 2\npreconditioner = none\n");
  EXPECT_EQ(run_cli("poisson -p stall.prm", dir), 3);
  EXPECT_EQ(run_cli("--help", dir), 0);
}

TEST(Cli, PoissonConvergenceTable) {
  const fs::path dir = scratch("poisson");
  write_file(dir / "p.prm", "[mesh]\ndim = 2\nn = 4\n[poisson]\ndegree = 1\nneumann = 4\ndirichlet = 1, 2, 3\n");
  ASSERT_EQ(run_cli("poisson -p p.prm --convergence 3", dir), 0);
  const std::string out = slurp(dir / "out.txt");
  EXPECT_NE(out.find("L2-ord"), std::string::npos);
  std::istringstream in(out);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string n, h, dofs, l2, h1, l2o;
    row >> n >> h >> dofs >> l2 >> h1 >> l2o;
    if (rows++ > 0) EXPECT_GE(std::stod(l2o), 1.85) << line;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Cli, NsWritesCsvVtkAndCheckpoint) {
  const fs::path dir = scratch("ns");
  write_file(dir / "ns.prm",
             "[mesh]\ndim = 2\nn = 3\n[ns]\nt_end = 0.1\ndt = 0.025\nlid_ramp = 0.1\n"
             "[output]\ncsv = steps.csv\nvtk_every = 2\nvtk_prefix = snap\ncheckpoint = end.ckpt\n");
  ASSERT_EQ(run_cli("ns -p ns.prm --scheme yosida2", dir), 0);
  std::ifstream csv(dir / "steps.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, csv_header());
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
  for (const char* f : {"snap_000000.vtk", "snap_000002.vtk", "snap_000004.vtk"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const Checkpoint c = read_checkpoint_file((dir / "end.ckpt").string());
  EXPECT_EQ(c.step, 4u);
  EXPECT_DOUBLE_EQ(c.t, 0.1);
  EXPECT_EQ(c.scheme, "yosida2");
}

TEST(Cli, NsRestartContinuesBitwise) {
  const fs::path dir = scratch("restart");
  const std::string base = "[mesh]\ndim = 2\nn = 3\n[ns]\ndt = 0.025\nlid_ramp = 0.1\n";
  write_file(dir / "full.prm", base + "t_end = 0.1\n[output]\ncsv = full.csv\ncheckpoint = full.ckpt\n");
  write_file(dir / "first.prm", base + "t_end = 0.05\n[output]\ncsv = part.csv\ncheckpoint = half.ckpt\n");
  write_file(dir / "second.prm",
             base + "t_end = 0.1\n[output]\ncsv = part.csv\nrestart = half.ckpt\ncheckpoint = part.ckpt\n");
  ASSERT_EQ(run_cli("ns -p full.prm --scheme yosida1", dir), 0);
  ASSERT_EQ(run_cli("ns -p first.prm --scheme yosida1", dir), 0);
  ASSERT_EQ(run_cli("ns -p second.prm --scheme yosida1", dir), 0);
  EXPECT_EQ(slurp(dir / "part.csv"), slurp(dir / "full.csv"));
  EXPECT_EQ(slurp(dir / "part.ckpt"), slurp(dir / "full.ckpt"));
  EXPECT_EQ(run_cli("ns -p second.prm --scheme perot", dir), 2);
}

TEST(Cli, BenchAndPartitionInfo) {
  const fs::path dir = scratch("bench");
  write_file(dir / "b.prm", "[mesh]\ndim = 3\nn = 4\n[poisson]\ndegree = 2\n");
  ASSERT_EQ(run_cli("bench-scaling -p b.prm --ranks 1,2,4 -o bench.csv", dir), 0);
  std::ifstream csv(dir / "bench.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.substr(0, 31), "subdomains,dofs,iterations,rela");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3);
  ASSERT_EQ(run_cli("partition-info -p b.prm --ranks 3", dir), 0);
  EXPECT_NE(slurp(dir / "out.txt").find("interface DoF total"), std::string::npos);
}
