#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "femchp/cli.hpp"
#include "test_util.hpp"

using namespace femchp;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = test_support::temp_dir("cli"); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  std::filesystem::path dir;
};

}  // namespace

TEST_F(Cli, GenerateAndMeshInfo) {
  ASSERT_EQ(run({"generate", "--name", "right2d", "--n", "2", "--out", path("r.mesh")}).code, 0);
  const CliResult info = run({"mesh-info", "--mesh", path("r.mesh")});
  EXPECT_EQ(info.code, 0);
  EXPECT_NE(info.out.find("non-obtuse: yes, acute: no"), std::string::npos);
  EXPECT_NE(run({"mesh-info", "--mesh", "gen:equilateral2d:3"}).out.find("acute: yes"), std::string::npos);
}

TEST_F(Cli, MalformedMeshIsInputError) {
  std::ofstream(path("bad.mesh")) << "dim 2\nvertices 2\n0 0\n";
  const CliResult r = run({"mesh-info", "--mesh", path("bad.mesh")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line"), std::string::npos);
  EXPECT_EQ(run({"mesh-info", "--mesh", path("missing.mesh")}).code, 2);
  EXPECT_EQ(run({"mesh-info"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, SolveAffineReproducesInterpolant) {
  const CliResult r = run({"solve", "--mesh", "gen:crisscross2d:4", "--energy", "p-laplace:p=2", "--bc", "affine:1,2,-1",
                     "--out", path("u.field"), "--report", path("u.report")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Mesh mesh = build_structured_mesh("crisscross2d", 4);
  const NodalField u = load_field(path("u.field"));
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    EXPECT_NEAR(u.value(v)[0], 1 + 2 * mesh.vertex(v)[0] - mesh.vertex(v)[1], 1e-10);
  EXPECT_NE(slurp(path("u.report")).find("converged=true"), std::string::npos);
}

TEST_F(Cli, SolveMeanCurvatureSinProduct) {
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:6", "--energy", "mean-curvature", "--bc", "sin-product", "--m", "2",
                 "--csv", path("s.csv")})
                .code,
            0);
  EXPECT_NE(slurp(path("s.csv")).find("mean-curvature"), std::string::npos);
}

TEST_F(Cli, SolveExitCodes) {
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:4", "--energy", "biharmonic", "--bc", "sin-product"}).code, 2);
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:4", "--bc", "nonsense"}).code, 2);
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:4", "--bc", "affine:1,2"}).code, 2);
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:6", "--energy", "p-laplace:p=10", "--bc", "random:seed=3",
                 "--max-iters", "1"})
                .code,
            3);
}

TEST_F(Cli, SolveWithSourceAndLumpedTerm) {
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:4", "--bc", "constant:0", "--source-value", "-1", "--out",
                 path("d.field")})
                .code,
            0);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("d.field"), "--theorem", "dmp", "--energy",
                 "p-laplace:p=2", "--source-value", "-1"})
                .code,
            0);
  EXPECT_EQ(run({"solve", "--mesh", "gen:right2d:4", "--bc", "random:lo=2,hi=3", "--lumped-q", "2", "--out",
                 path("h.field")})
                .code,
            0);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("h.field"), "--theorem", "hull0", "--energy",
                 "p-laplace:p=2", "--lumped-q", "2"})
                .code,
            0);
}

TEST_F(Cli, VerifyExitCodes) {
  ASSERT_EQ(run({"solve", "--mesh", "gen:right2d:4", "--bc", "affine:0,1,1", "--out", path("a.field")}).code, 0);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("a.field"), "--theorem", "chp"}).code, 0);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("a.field"), "--theorem", "strong"}).code, 4);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("a.field"), "--theorem", "lemma-pos", "--hull",
                 "0;0.5"})
                .code,
            0);

  const Mesh mesh = build_structured_mesh("right2d", 4);
  NodalField spike(mesh.num_vertices(), 1);
  spike.value(mesh.interior_nodes()[4])[0] = 1.0;
  save_field(spike, path("spike.field"));
  const CliResult r = run({"verify", "--mesh", "gen:right2d:4", "--field", path("spike.field"), "--theorem", "chp", "--csv",
                     path("v.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(slurp(path("v.csv")).find("CHP,false,1,"), std::string::npos);

  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:3", "--field", path("spike.field")}).code, 2);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("spike.field"), "--theorem", "xyz"}).code, 2);
  EXPECT_EQ(run({"verify", "--mesh", "gen:right2d:4", "--field", path("none.field")}).code, 2);
}

TEST_F(Cli, ExperimentIsDeterministicAndOrdered) {
  std::ofstream(path("e.cfg")) << "# small sweep\n"
                                  "meshes = gen:right2d:4 gen:obtuse2d:4\n"
                                  "energies = p-laplace:p=2 p-laplace:p=3\n"
                                  "bcs = random\n"
                                  "seeds = 1 2\n"
                                  "m = 1 2\n"
                                  "theorems = chp lemma-pos strong\n";
  setenv("FEMCHP_THREADS", "3", 1);
  ASSERT_EQ(run({"experiment", path("e.cfg"), "--out", path("a.csv")}).code, 0);
  setenv("FEMCHP_THREADS", "1", 1);
  ASSERT_EQ(run({"experiment", path("e.cfg"), "--out", path("b.csv")}).code, 0);
  unsetenv("FEMCHP_THREADS");
  const std::string a = slurp(path("a.csv"));
  EXPECT_EQ(a, slurp(path("b.csv")));
  std::istringstream lines(a);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "# femchp-experiment-csv v1");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("mesh,energy,bc,seed,m,", 0), 0u);
  int rows = 0, obtuse_rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    if (rows == 1) {
      EXPECT_EQ(line.rfind("gen:right2d:4,p-laplace:p=2,random,1,1,", 0), 0u);
    }
    if (line.find("obtuse2d") != std::string::npos) {
      ++obtuse_rows;
      EXPECT_NE(line.find(",obtuse,"), std::string::npos);
    } else {
      EXPECT_NE(line.find(",true,pass,"), std::string::npos) << line;
    }
  }
  EXPECT_EQ(rows, 16);
  EXPECT_EQ(obtuse_rows, 8);
}

TEST_F(Cli, ExperimentSpecErrors) {
  std::ofstream(path("empty.cfg")) << "meshes = gen:right2d:4\nenergies =\nbcs = random\n";
  EXPECT_EQ(run({"experiment", path("empty.cfg")}).code, 2);
  std::ofstream(path("unknown.cfg")) << "meshes = gen:right2d:4\nenergies = mean-curvature\nbcs = random\ncolour = red\n";
  EXPECT_EQ(run({"experiment", path("unknown.cfg")}).code, 2);
  std::ofstream(path("badenergy.cfg")) << "meshes = gen:right2d:4\nenergies = nope\nbcs = random\n";
  EXPECT_EQ(run({"experiment", path("badenergy.cfg")}).code, 2);
  EXPECT_EQ(run({"experiment", path("missing.cfg")}).code, 2);
}

TEST_F(Cli, ExperimentRecordsPerRowFailures) {
  std::ofstream(path("rowerr.cfg")) << "meshes = gen:right2d:3\nenergies = p-laplace:p=2\nbcs = random affine:1,2\n"
                                       "theorems = chp dmp\nm = 2\n";
  ASSERT_EQ(run({"experiment", path("rowerr.cfg"), "--out", path("r.csv")}).code, 0);
  const std::string csv = slurp(path("r.csv"));
  EXPECT_NE(csv.find("dmp: the maximum principle check needs a scalar field"), std::string::npos);
  EXPECT_NE(csv.find("affine data needs"), std::string::npos);
}

TEST_F(Cli, BoundaryMiniLanguage) {
  EXPECT_TRUE(std::holds_alternative<RandomUniformData>(cli::parse_boundary("random-uniform:seed=4", 2, 1)));
  const auto r = std::get<RandomUniformData>(cli::parse_boundary("random:lo=2,hi=3", 2, 1, 9));
  EXPECT_EQ(r.seed, 9u);
  EXPECT_EQ(r.lo, 2.0);
  EXPECT_EQ(std::get<SinProductData>(cli::parse_boundary("sin-product:w=3", 2, 1)).frequency, 3.0);
  EXPECT_EQ(std::get<AffineData>(cli::parse_boundary("constant:1,2", 2, 2)).coefficients,
            (std::vector<double>{1, 0, 0, 2, 0, 0}));
  EXPECT_THROW(cli::parse_boundary("random:seed=x", 2, 1), Error);
  EXPECT_THROW(cli::parse_boundary("random:lo=3,hi=2", 2, 1), Error);
  EXPECT_THROW(cli::parse_boundary("abs-distance:radius=1", 2, 1), Error);
}
