#include "platedg/cli_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "platedg/parallel.hpp"

namespace platedg {

using nlohmann::json;

namespace {

Mat32 flat_gradient() {
  Mat32 P = Mat32::Zero();
  P(0, 0) = P(1, 1) = 1.0;
  return P;
}

const char* side_name(Side s) {
  switch (s) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::top: return "top";
  }
  return "?";
}

Side side_from_name(const std::string& n, const std::string& path) {
  if (n == "left") return Side::left;
  if (n == "right") return Side::right;
  if (n == "bottom") return Side::bottom;
  if (n == "top") return Side::top;
  throw ConfigError(path + ": unknown side '" + n + "'");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + "." + it.key() + ": unknown key");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

void read_count(const json& obj, const char* key, std::size_t& out, const std::string& path) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(path + "." + key + ": expected a nonnegative integer");
  out = v.get<std::size_t>();
}

Vec3 read_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(path + ": expected three numbers");
  Vec3 r;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError(path + ": expected three numbers");
    r(i) = v[static_cast<std::size_t>(i)].get<double>();
  }
  return r;
}

}  // namespace

BoundaryData boundary_data_by_name(const std::string& name) {
  if (name == "clamped_flat") return BoundaryData::clamped_flat();
  if (name == "none") return BoundaryData::homogeneous();
  if (name == "cylinder") {
    BoundaryData d;
    d.g = [](const Point2& x) { return Vec3(std::sin(x(0)), x(1), std::cos(x(0))); };
    d.Phi = [](const Point2& x) {
      Mat32 P;
      P << std::cos(x(0)), 0.0, 0.0, 1.0, -std::sin(x(0)), 0.0;
      return P;
    };
    return d;
  }
  if (name == "compression") {
    BoundaryData d;
    d.g = [](const Point2& x) {
      const double s = x(0) > 0.0 ? 1.0 : (x(0) < 0.0 ? -1.0 : 0.0);
      return Vec3(x(0) - 1.4 * s, x(1), 0.0);
    };
    d.Phi = [](const Point2&) { return flat_gradient(); };
    return d;
  }
  throw ConfigError("unknown boundary data '" + name + "'");
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::vertical_load: return "vertical_load";
    case Experiment::obstacle: return "obstacle";
    case Experiment::buckling: return "buckling";
    case Experiment::cylinder: return "cylinder";
    case Experiment::custom: return "custom";
  }
  return "custom";
}

Experiment experiment_from_name(const std::string& n) {
  for (Experiment e : {Experiment::vertical_load, Experiment::obstacle, Experiment::buckling, Experiment::cylinder,
                       Experiment::custom})
    if (experiment_name(e) == n) return e;
  throw ConfigError("experiment: unknown value '" + n + "'");
}

RunConfig default_config(Experiment e) {
  RunConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::vertical_load:
    case Experiment::custom:
      break;
    case Experiment::obstacle:
      c.mesh = {32, 32, {-1.0, 1.0, -1.0, 1.0}, {Side::left}};
      c.physics.force = Vec3(0.0, 0.0, 1.0);
      c.flow.tau = 5e-4;
      c.flow.tau_equals_h = false;
      c.flow.penalty = {5000.0, 5000.0};
      c.flow.obstacle = ObstacleConfig{0.2, 3e-4};
      c.flow.max_steps = 20000;
      break;
    case Experiment::buckling:
      c.mesh = {16, 4, {-2.0, 2.0, 0.0, 1.0}, {Side::left, Side::right}};
      c.physics.force = Vec3(0.0, 0.0, 1e-2);
      c.physics.boundary_data = "compression";
      c.flow.tau = 0.04625;
      c.flow.tau_equals_h = false;
      c.flow.penalty = {1e4, 1e4};
      c.flow.alpha_increment = 5e-5;
      c.flow.max_steps = 40000;
      break;
    case Experiment::cylinder:
      c.mesh = {6, 2, {0.0, M_PI, 0.0, 1.0}, {Side::left, Side::right, Side::bottom, Side::top}};
      c.physics.force = Vec3::Zero();
      c.physics.boundary_data = "cylinder";
      c.physics.initial = "data";
      c.flow.max_steps = 0;
      break;
  }
  return c;
}

RunConfig parse_config(const json& doc) {
  check_keys(doc, {"experiment", "mesh", "physics", "flow", "output"}, "config");
  Experiment e = Experiment::custom;
  if (doc.contains("experiment")) {
    if (!doc["experiment"].is_string()) throw ConfigError("config.experiment: expected a string");
    e = experiment_from_name(doc["experiment"].get<std::string>());
  }
  RunConfig c = default_config(e);

  if (doc.contains("mesh")) {
    const json& m = doc["mesh"];
    check_keys(m, {"nx", "ny", "domain", "dirichlet_sides"}, "config.mesh");
    read_count(m, "nx", c.mesh.nx, "config.mesh");
    read_count(m, "ny", c.mesh.ny, "config.mesh");
    if (m.contains("domain")) {
      const json& d = m["domain"];
      if (!d.is_array() || d.size() != 4) throw ConfigError("config.mesh.domain: expected [x0, x1, y0, y1]");
      try {
        c.mesh.domain = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>(), d[3].get<double>()};
      } catch (const json::exception&) {
        throw ConfigError("config.mesh.domain: expected [x0, x1, y0, y1]");
      }
    }
    if (m.contains("dirichlet_sides")) {
      if (!m["dirichlet_sides"].is_array()) throw ConfigError("config.mesh.dirichlet_sides: expected an array");
      c.mesh.dirichlet_sides.clear();
      for (const auto& s : m["dirichlet_sides"]) {
        if (!s.is_string()) throw ConfigError("config.mesh.dirichlet_sides: expected side names");
        c.mesh.dirichlet_sides.insert(side_from_name(s.get<std::string>(), "config.mesh.dirichlet_sides"));
      }
    }
  }

  if (doc.contains("physics")) {
    const json& p = doc["physics"];
    check_keys(p, {"force", "boundary_data", "initial"}, "config.physics");
    if (p.contains("force")) {
      if (p["force"].is_number())
        c.physics.force = Vec3(0.0, 0.0, p["force"].get<double>());
      else
        c.physics.force = read_vec3(p["force"], "config.physics.force");
    }
    read(p, "boundary_data", c.physics.boundary_data, "config.physics");
    boundary_data_by_name(c.physics.boundary_data);
    read(p, "initial", c.physics.initial, "config.physics");
    if (c.physics.initial != "flat" && c.physics.initial != "data")
      throw ConfigError("config.physics.initial: expected 'flat' or 'data'");
  }

  if (doc.contains("flow")) {
    const json& f = doc["flow"];
    const std::string path = "config.flow";
    check_keys(f,
               {"tau", "tau_equals_h", "gamma0", "gamma1", "cg_tol", "cg_maxiter", "stop_tol", "max_steps",
                "quad_order", "precondition", "track_hessian", "obstacle", "continuation"},
               path);
    if (f.contains("tau")) {
      read(f, "tau", c.flow.tau, path);
      c.flow.tau_equals_h = false;
    }
    read(f, "tau_equals_h", c.flow.tau_equals_h, path);
    read(f, "gamma0", c.flow.penalty.gamma0, path);
    read(f, "gamma1", c.flow.penalty.gamma1, path);
    read(f, "cg_tol", c.flow.cg_tol, path);
    read_count(f, "cg_maxiter", c.flow.cg_maxiter, path);
    read(f, "stop_tol", c.flow.stop_tol, path);
    read_count(f, "max_steps", c.flow.max_steps, path);
    read(f, "quad_order", c.flow.quad_order, path);
    read(f, "precondition", c.flow.precondition, path);
    read(f, "track_hessian", c.flow.track_hessian, path);
    if (f.contains("obstacle")) {
      if (f["obstacle"].is_null()) {
        c.flow.obstacle.reset();
      } else {
        check_keys(f["obstacle"], {"ceiling", "sigma"}, path + ".obstacle");
        ObstacleConfig o = c.flow.obstacle.value_or(ObstacleConfig{});
        read(f["obstacle"], "ceiling", o.ceiling, path + ".obstacle");
        read(f["obstacle"], "sigma", o.sigma, path + ".obstacle");
        c.flow.obstacle = o;
      }
    }
    if (f.contains("continuation")) {
      if (f["continuation"].is_null()) {
        c.flow.alpha_increment.reset();
      } else {
        check_keys(f["continuation"], {"alpha_increment"}, path + ".continuation");
        double a = c.flow.alpha_increment.value_or(5e-5);
        read(f["continuation"], "alpha_increment", a, path + ".continuation");
        c.flow.alpha_increment = a;
      }
    }
    if (c.flow.quad_order < 1) throw ConfigError(path + ".quad_order: must be at least 1");
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    check_keys(o, {"directory", "vtk_every", "emit_csv"}, "config.output");
    read(o, "directory", c.output.directory, "config.output");
    read_count(o, "vtk_every", c.output.vtk_every, "config.output");
    read(o, "emit_csv", c.output.emit_csv, "config.output");
  }

  if (c.mesh.nx == 0 || c.mesh.ny == 0) throw ConfigError("config.mesh: cell counts must be positive");
  try {
    make_flow_config(c, 1.0).validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("config.flow: ") + ex.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json sides = json::array();
  for (Side s : c.mesh.dirichlet_sides) sides.push_back(side_name(s));
  json flow = {{"tau_equals_h", c.flow.tau_equals_h},
               {"gamma0", c.flow.penalty.gamma0},
               {"gamma1", c.flow.penalty.gamma1},
               {"cg_tol", c.flow.cg_tol},
               {"cg_maxiter", c.flow.cg_maxiter},
               {"stop_tol", c.flow.stop_tol},
               {"max_steps", c.flow.max_steps},
               {"quad_order", c.flow.quad_order},
               {"precondition", c.flow.precondition},
               {"track_hessian", c.flow.track_hessian}};
  if (!c.flow.tau_equals_h) flow["tau"] = c.flow.tau;
  if (c.flow.obstacle) flow["obstacle"] = {{"ceiling", c.flow.obstacle->ceiling}, {"sigma", c.flow.obstacle->sigma}};
  if (c.flow.alpha_increment) flow["continuation"] = {{"alpha_increment", *c.flow.alpha_increment}};
  return {{"experiment", experiment_name(c.experiment)},
          {"mesh",
           {{"nx", c.mesh.nx},
            {"ny", c.mesh.ny},
            {"domain", {c.mesh.domain.x0, c.mesh.domain.x1, c.mesh.domain.y0, c.mesh.domain.y1}},
            {"dirichlet_sides", sides}}},
          {"physics",
           {{"force", {c.physics.force(0), c.physics.force(1), c.physics.force(2)}},
            {"boundary_data", c.physics.boundary_data},
            {"initial", c.physics.initial}}},
          {"flow", flow},
          {"output",
           {{"directory", c.output.directory}, {"vtk_every", c.output.vtk_every}, {"emit_csv", c.output.emit_csv}}}};
}

FlowConfig make_flow_config(const RunConfig& c, double h) {
  FlowConfig f;
  f.tau = c.flow.tau_equals_h ? h : c.flow.tau;
  f.penalty = c.flow.penalty;
  f.cg_tol = c.flow.cg_tol;
  f.cg_maxiter = c.flow.cg_maxiter;
  f.stop_tol = c.flow.stop_tol;
  f.max_steps = c.flow.max_steps;
  f.obstacle = c.flow.obstacle;
  f.precondition = c.flow.precondition;
  f.track_hessian = c.flow.track_hessian;
  if (c.flow.alpha_increment)
    f.continuation = ContinuationConfig{*c.flow.alpha_increment, boundary_data_by_name(c.physics.boundary_data)};
  return f;
}

// ---------------------------------------------------------------------------

RunSummary run_experiment(const RunConfig& config, const RunOptions& options) {
  if (options.threads > 0) set_num_threads(options.threads);
  RunSummary s;
  const Mesh mesh = build_rect_mesh(config.mesh.domain, config.mesh.nx, config.mesh.ny, config.mesh.dirichlet_sides);
  const DgSpace space(mesh, 2, config.flow.quad_order);
  s.cells = mesh.num_cells();
  s.dofs = space.size();
  s.h = mesh.max_diameter();
  const FlowConfig flow = make_flow_config(config, s.h);
  s.tau = flow.tau;
  const BoundaryData data = boundary_data_by_name(config.physics.boundary_data);

  Field initial;
  if (config.physics.initial == "data") {
    if (data.is_homogeneous()) throw ConfigError("config.physics.initial: 'data' needs nonzero boundary data");
    initial = interpolate(space, data.g, data);
  } else {
    initial = flat_state(space, data);
  }

  namespace fs = std::filesystem;
  const fs::path dir(config.output.directory);
  if (options.write_files) fs::create_directories(dir);

  const FlowProblem problem{&space, data, config.physics.force};
  auto on_step = [&](const StepRecord& r, const Field& y) {
    if (options.log)
      *options.log << "step " << r.step << "  E_h " << r.energy << "  D_h " << r.defect << "  |dy| " << r.step_norm
                   << "  cg " << r.cg_iterations << (flow.continuation ? "  alpha " + std::to_string(r.alpha) : "")
                   << '\n';
    if (options.write_files && config.output.vtk_every > 0 && r.step % config.output.vtk_every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(5) << std::setfill('0') << r.step << ".vtk";
      emit_vtk(y, (dir / name.str()).string());
    }
  };
  s.trace = flow.continuation ? run_continuation_flow(initial, flow, problem, on_step)
                              : run_flow(initial, flow, problem, on_step);
  const Field& y = s.trace.final;
  s.energy = s.trace.steps.empty() ? s.trace.initial_energy : s.trace.steps.back().energy;
  s.defect = isometry_defect(y);
  s.iterations = s.trace.iterations(flow.stop_tol * flow.tau);
  s.max_height = max_height(y);
  if (flow.obstacle) s.max_penetration = s.max_height - flow.obstacle->ceiling;
  if (!data.is_homogeneous()) s.boundary_residual = boundary_residual(y, data);
  if (options.log) {
    for (const auto& w : s.trace.warnings) *options.log << "warning: " << w << '\n';
    if (!s.trace.failure.empty()) *options.log << "error: " << s.trace.failure << '\n';
  }

  if (options.write_files) {
    write_trace_json(s.trace, (dir / "trace.json").string());
    emit_vtk(y, (dir / "final.vtk").string());
    if (config.output.emit_csv) {
      write_table_csv(s, (dir / "table.csv").string());
      if (config.experiment == Experiment::vertical_load) {
        const Rect& d = config.mesh.domain;
        write_profile_csv(y, {d.x0, d.y1}, {d.x1, d.y0}, 201, (dir / "diagonal.csv").string());
      }
    }
    json summary = {{"cells", s.cells},       {"dofs", s.dofs},
                    {"h", s.h},               {"tau", s.tau},
                    {"energy", s.energy},     {"defect", s.defect},
                    {"iterations", s.iterations},
                    {"initial_energy", s.trace.initial_energy},
                    {"initial_defect", s.trace.initial_defect},
                    {"converged", s.trace.converged},
                    {"failure", s.trace.failure},
                    {"warnings", s.trace.warnings},
                    {"max_height", s.max_height},
                    {"boundary_residual", s.boundary_residual},
                    {"config", to_json(config)}};
    if (flow.obstacle) summary["max_penetration"] = s.max_penetration;
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  }
  return s;
}

std::vector<ConvergenceRow> run_convergence(const RunConfig& base, int levels, const RunOptions& options) {
  if (levels < 1) throw std::invalid_argument("run_convergence: levels must be at least 1");
  std::vector<ConvergenceRow> rows;
  for (int l = 0; l < levels; ++l) {
    RunConfig c = base;
    c.mesh.nx = base.mesh.nx << l;
    c.mesh.ny = base.mesh.ny << l;
    c.output.directory = (std::filesystem::path(base.output.directory) / ("level_" + std::to_string(l))).string();
    ConvergenceRow row;
    row.cells = c.mesh.nx * c.mesh.ny;
    try {
      if (options.log) *options.log << "level " << l << ": " << c.mesh.nx << " x " << c.mesh.ny << " cells\n";
      const RunSummary s = run_experiment(c, options);
      row = {s.cells, s.dofs, s.h, s.tau, s.energy, s.defect, s.iterations, s.ok() ? "ok" : s.trace.failure};
    } catch (const std::exception& e) {
      row.status = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(10);
  return out;
}

}  // namespace

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "cells,dofs,h,tau,E_h,D_h,iterations,D_h_ratio,status\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << r.cells << ',' << r.dofs << ',' << r.h << ',' << r.tau << ',' << r.energy << ',' << r.defect << ','
        << r.iterations << ',';
    if (i > 0 && r.defect > 0.0) out << rows[i - 1].defect / r.defect;
    out << ',' << csv_field(r.status) << '\n';
  }
}

void write_trace_json(const FlowTrace& trace, const std::string& path) {
  json steps = json::array();
  for (const auto& r : trace.steps)
    steps.push_back({{"step", r.step},
                     {"energy", r.energy},
                     {"defect", r.defect},
                     {"step_norm", r.step_norm},
                     {"grad_step_sq", r.grad_step_sq},
                     {"cg_iterations", r.cg_iterations},
                     {"cg_stagnated", r.cg_stagnated},
                     {"constraint_residual", r.constraint_residual},
                     {"alpha", r.alpha},
                     {"penetration", r.penetration},
                     {"hessian_lhs", r.hessian_lhs},
                     {"lift_norm", r.lift_norm}});
  std::ofstream out = open_out(path);
  out << steps.dump(1) << '\n';
}

void write_table_csv(const RunSummary& s, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "cells,dofs,h,tau,E_h,D_h,iterations\n";
  out << s.cells << ',' << s.dofs << ',' << s.h << ',' << s.tau << ',' << s.energy << ',' << s.defect << ','
      << s.iterations << '\n';
}

void emit_vtk(const Field& y, const std::string& path) {
  const DgSpace& space = *y.space;
  const Mesh& mesh = space.mesh();
  const int n = space.local_size();
  const int k = space.basis().degree();
  const std::size_t nc = mesh.num_cells();
  const auto& nodes = space.basis().nodes();

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "# vtk DataFile Version 3.0\nplatedg deformation\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nc * static_cast<std::size_t>(n) << " double\n";
  std::vector<double> disp, height;
  for (std::size_t c = 0; c < nc; ++c)
    for (int i = 0; i < n; ++i) {
      const Vec3 v(y.coeffs(space.index(c, 0, i)), y.coeffs(space.index(c, 1, i)), y.coeffs(space.index(c, 2, i)));
      const Point2 x = mesh.maps[c].map(nodes[static_cast<std::size_t>(i)]);
      out << v(0) << ' ' << v(1) << ' ' << v(2) << '\n';
      disp.push_back((v - Vec3(x(0), x(1), 0.0)).norm());
      height.push_back(v(2));
    }
  const std::size_t quads = nc * static_cast<std::size_t>(k * k);
  out << "CELLS " << quads << ' ' << 5 * quads << '\n';
  for (std::size_t c = 0; c < nc; ++c) {
    const std::size_t base = c * static_cast<std::size_t>(n);
    for (int b = 0; b < k; ++b)
      for (int a = 0; a < k; ++a) {
        auto id = [&](int i, int j) { return base + static_cast<std::size_t>(i + (k + 1) * j); };
        out << "4 " << id(a, b) << ' ' << id(a + 1, b) << ' ' << id(a + 1, b + 1) << ' ' << id(a, b + 1) << '\n';
      }
  }
  out << "CELL_TYPES " << quads << '\n';
  for (std::size_t q = 0; q < quads; ++q) out << "9\n";
  out << "POINT_DATA " << disp.size() << '\n';
  out << "SCALARS displacement double 1\nLOOKUP_TABLE default\n";
  for (double d : disp) out << d << '\n';
  out << "SCALARS y3 double 1\nLOOKUP_TABLE default\n";
  for (double h : height) out << h << '\n';
}

void write_profile_csv(const Field& y, const Point2& a, const Point2& b, std::size_t samples,
                       const std::string& path) {
  std::ofstream out = open_out(path);
  out << "s,x1,x2,y1,y2,y3,displacement\n";
  const double len = (b - a).norm();
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = samples > 1 ? static_cast<double>(i) / static_cast<double>(samples - 1) : 0.0;
    const Point2 x = a + t * (b - a);
    const auto loc = y.space->mesh().locate(x);
    if (!loc) continue;
    const Vec3 v = evaluate_at(y, loc->first, loc->second).value;
    out << t * len << ',' << x(0) << ',' << x(1) << ',' << v(0) << ',' << v(1) << ',' << v(2) << ','
        << (v - Vec3(x(0), x(1), 0.0)).norm() << '\n';
  }
}

}  // namespace platedg
