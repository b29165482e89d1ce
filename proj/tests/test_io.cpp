#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "platedg/cli_io.hpp"

using namespace platedg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("platedg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("experiment defaults") {
  const RunConfig v = default_config(Experiment::vertical_load);
  CHECK(v.mesh.nx == 16);
  CHECK(v.flow.tau_equals_h);
  CHECK(v.flow.penalty.gamma0 == 5000.0);
  CHECK(v.flow.penalty.gamma1 == 1100.0);
  CHECK(v.physics.force(2) == 0.025);
  const RunConfig o = default_config(Experiment::obstacle);
  CHECK(o.mesh.nx * o.mesh.ny == 1024);
  REQUIRE(o.flow.obstacle.has_value());
  CHECK(o.flow.obstacle->sigma == 3e-4);
  CHECK(o.flow.tau == 5e-4);
  const RunConfig b = default_config(Experiment::buckling);
  CHECK(b.flow.tau == 0.04625);
  CHECK(b.flow.penalty.gamma0 == 1e4);
  CHECK(b.flow.alpha_increment.has_value());
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(json::parse(R"({
    "experiment": "vertical_load",
    "mesh": {"nx": 8, "ny": 4, "dirichlet_sides": ["left"]},
    "physics": {"force": 0.5},
    "flow": {"tau": 0.1, "gamma0": 100, "obstacle": {"ceiling": 0.3}},
    "output": {"directory": "x"}
  })"));
  CHECK(c.mesh.nx == 8);
  CHECK(c.mesh.dirichlet_sides == std::set<Side>{Side::left});
  CHECK(c.physics.force == Vec3(0.0, 0.0, 0.5));
  CHECK_FALSE(c.flow.tau_equals_h);
  CHECK(c.flow.penalty.gamma0 == 100.0);
  REQUIRE(c.flow.obstacle.has_value());
  CHECK(c.flow.obstacle->ceiling == 0.3);
  CHECK(c.flow.obstacle->sigma == 3e-4);
  CHECK(make_flow_config(c, 2.0).tau == 0.1);
  CHECK(make_flow_config(default_config(Experiment::vertical_load), 0.25).tau == 0.25);

  // Round trip through JSON.
  const RunConfig r = parse_config(to_json(c));
  CHECK(to_json(r) == to_json(c));
}

TEST_CASE("config errors name the offending path") {
  auto message = [](const char* text) -> std::string {
    try {
      parse_config(json::parse(text));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message(R"({"mesh": {"nz": 3}})").find("config.mesh") != std::string::npos);
  CHECK(message(R"({"flow": {"tau": "big"}})").find("config.flow.tau") != std::string::npos);
  CHECK(message(R"({"experiment": "lunar"})").find("experiment") != std::string::npos);
  CHECK(message(R"({"flow": {"tau": -1}})").find("config.flow") != std::string::npos);
  CHECK(message(R"({"physics": {"boundary_data": "saddle"}})").find("saddle") != std::string::npos);
  CHECK_FALSE(message(R"({"mesh": {"nx": 0}})").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("VTK output round trip") {
  const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 1, {});
  const DgSpace s(m);
  const Field y = interpolate(s, [](const Point2& x) { return Vec3(x(0), x(1), x(0) * x(1) + 0.125); });
  const fs::path dir = scratch_dir("vtk");
  emit_vtk(y, (dir / "y.vtk").string());
  std::ifstream in(dir / "y.vtk");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  std::string tok;
  while (in >> tok && tok != "POINTS") {}
  std::size_t npts = 0;
  in >> npts >> tok;
  REQUIRE(npts == 18);
  std::vector<Vec3> pts(npts);
  for (auto& p : pts) in >> p(0) >> p(1) >> p(2);
  // Points are the Lagrange coefficients of each cell in local order.
  for (std::size_t c = 0; c < 2; ++c)
    for (int i = 0; i < 9; ++i)
      for (int k = 0; k < 3; ++k) CHECK(pts[9 * c + i](k) == y.coeffs(s.index(c, k, i)));
  std::size_t ncell = 0, size = 0;
  in >> tok >> ncell >> size;
  CHECK(tok == "CELLS");
  CHECK(ncell == 8);
  CHECK(size == 40);
  int n, a, b, c, d;
  in >> n >> a >> b >> c >> d;
  CHECK((n == 4 && a == 0 && b == 1 && c == 4 && d == 3));
  for (std::size_t i = 1; i < ncell; ++i) in >> n >> a >> b >> c >> d;
  in >> tok >> ncell;
  CHECK(tok == "CELL_TYPES");
  in >> n;
  CHECK(n == 9);
  while (in >> tok && tok != "y3") {}
  in >> tok >> tok >> tok >> tok;  // double 1 LOOKUP_TABLE default
  double h0 = 0.0;
  in >> h0;
  CHECK(h0 == 0.125);
}

TEST_CASE("flat run without load takes no steps and writes outputs") {
  RunConfig c = default_config(Experiment::custom);
  c.mesh.nx = c.mesh.ny = 2;
  c.physics.force = Vec3::Zero();
  const fs::path dir = scratch_dir("flat");
  c.output.directory = dir.string();
  const RunSummary s = run_experiment(c);
  CHECK(s.ok());
  CHECK(s.iterations == 0);
  CHECK(std::abs(s.energy) <= 1e-11);
  for (const char* f : {"trace.json", "final.vtk", "table.csv", "summary.json"}) CHECK(fs::exists(dir / f));
  std::ifstream tin(dir / "trace.json");
  const json trace = json::parse(tin);
  CHECK(trace.is_array());
  std::ifstream sin(dir / "summary.json");
  const json summary = json::parse(sin);
  CHECK(summary["iterations"] == 0);
  CHECK(parse_config(summary["config"]).mesh.nx == 2);
}

TEST_CASE("vertical load run writes a table row and diagonal profile") {
  RunConfig c = default_config(Experiment::vertical_load);
  c.mesh.nx = c.mesh.ny = 4;
  c.flow.max_steps = 3;
  const fs::path dir = scratch_dir("vload");
  c.output.directory = dir.string();
  c.output.vtk_every = 1;
  const RunSummary s = run_experiment(c);
  CHECK(s.trace.steps.size() == 3);
  CHECK(s.energy < 0.0);
  CHECK(fs::exists(dir / "step_00002.vtk"));
  std::ifstream t(dir / "table.csv");
  std::string header, row;
  std::getline(t, header);
  std::getline(t, row);
  CHECK(header == "cells,dofs,h,tau,E_h,D_h,iterations");
  CHECK(row.rfind("16,432,", 0) == 0);
  std::ifstream d(dir / "diagonal.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(d, l);) ++lines;
  CHECK(lines == 202);
}

TEST_CASE("cylinder interpolant converges to the analytic energy") {
  RunConfig c = default_config(Experiment::cylinder);
  const fs::path dir = scratch_dir("cyl");
  c.output.directory = dir.string();
  RunOptions opt;
  opt.write_files = false;
  const auto rows = run_convergence(c, 3, opt);
  REQUIRE(rows.size() == 3);
  double prev_err = INFINITY, prev_def = INFINITY;
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.iterations == 0);
    const double err = std::abs(r.energy - M_PI / 2);
    CHECK(err < prev_err);
    CHECK(r.defect < prev_def);
    prev_err = err;
    prev_def = r.defect;
  }
  CHECK(rows[2].defect <= 0.5 * rows[1].defect);
  write_convergence_csv(rows, (dir / "convergence.csv").string());
  std::ifstream in(dir / "convergence.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "cells,dofs,h,tau,E_h,D_h,iterations,D_h_ratio,status");
}

TEST_CASE("convergence harness records a failing level and a single level works") {
  RunConfig c = default_config(Experiment::custom);
  c.mesh.nx = c.mesh.ny = 2;
  c.physics.force = Vec3::Zero();
  RunOptions opt;
  opt.write_files = false;
  const auto one = run_convergence(c, 1, opt);
  REQUIRE(one.size() == 1);
  CHECK(one[0].status == "ok");
  c.physics.initial = "data";
  c.physics.boundary_data = "none";
  const auto bad = run_convergence(c, 1, opt);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].status != "ok");
  CHECK_THROWS_AS(run_convergence(c, 0, opt), std::invalid_argument);
}

TEST_CASE("shipped example configs parse") {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(PLATEDG_SOURCE_DIR) / "configs")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string()));
    ++n;
  }
  CHECK(n >= 4);
}
