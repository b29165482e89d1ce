#pragma once

#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "platedg/flow.hpp"

namespace platedg {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { vertical_load, obstacle, buckling, cylinder, custom };

/// Boundary data selectors:
///   clamped_flat  g = (x1, x2, 0), Phi = [I, 0]^T
///   cylinder      g = (sin x1, x2, cos x1)
///   compression   g = (x1 - 1.4 sign(x1), x2, 0), Phi = [I, 0]^T
///   none          homogeneous
BoundaryData boundary_data_by_name(const std::string& name);

struct RunConfig {
  Experiment experiment = Experiment::custom;

  struct MeshSection {
    std::size_t nx = 16, ny = 16;
    Rect domain{0.0, 4.0, 0.0, 4.0};
    std::set<Side> dirichlet_sides{Side::left, Side::bottom};
  } mesh;

  struct PhysicsSection {
    Vec3 force{0.0, 0.0, 0.025};
    std::string boundary_data = "clamped_flat";
    std::string initial = "flat";  // flat | data (interpolate g)
  } physics;

  struct FlowSection {
    double tau = 0.0;
    bool tau_equals_h = true;
    Penalty penalty;
    double cg_tol = 1e-8;
    std::size_t cg_maxiter = 0;
    double stop_tol = 1e-6;
    std::size_t max_steps = 1000;
    int quad_order = 3;
    bool precondition = false;
    bool track_hessian = false;
    std::optional<ObstacleConfig> obstacle;
    std::optional<double> alpha_increment;  // continuation towards the boundary data
  } flow;

  struct OutputSection {
    std::string directory = "out";
    std::size_t vtk_every = 0;  // 0: final state only
    bool emit_csv = true;
  } output;
};

/// Defaults of the built-in experiments at desk scale.
RunConfig default_config(Experiment e);

std::string experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);

/// Starts from default_config(experiment) and applies the document. Unknown
/// keys and ill-typed values throw ConfigError naming the offending path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

/// Mesh size used for tau = h: the largest cell diameter.
FlowConfig make_flow_config(const RunConfig& c, double h);

struct RunOptions {
  int threads = 0;              // 0: OpenMP default
  std::ostream* log = nullptr;  // progress lines
  bool write_files = true;
};

struct RunSummary {
  std::size_t cells = 0;
  std::size_t dofs = 0;
  double h = 0.0;
  double tau = 0.0;
  double energy = 0.0;
  double defect = 0.0;
  std::size_t iterations = 0;
  double max_penetration = 0.0;   // obstacle runs
  double boundary_residual = 0.0; // |y - g|_{L2(Dirichlet boundary)}
  double max_height = 0.0;
  FlowTrace trace;
  std::string error;
  bool ok() const { return error.empty() && trace.failure.empty(); }
};

/// Builds the mesh and space, runs the flow (with continuation or obstacle
/// as configured) and writes trace.json, final.vtk, table.csv and, for the
/// vertical load, diagonal.csv into output.directory.
RunSummary run_experiment(const RunConfig& config, const RunOptions& options = {});

struct ConvergenceRow {
  std::size_t cells = 0, dofs = 0;
  double h = 0.0, tau = 0.0, energy = 0.0, defect = 0.0;
  std::size_t iterations = 0;
  std::string status = "ok";
};

/// Level l uses (nx 2^l) x (ny 2^l) cells and tau = h when tau_equals_h.
/// A failing level is recorded with its error and the harness continues.
std::vector<ConvergenceRow> run_convergence(const RunConfig& base, int levels, const RunOptions& options = {});
void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& path);

void write_trace_json(const FlowTrace& trace, const std::string& path);
void write_table_csv(const RunSummary& s, const std::string& path);

/// Legacy ASCII unstructured grid: the deformed Lagrange nodes of every cell,
/// split into k^2 quadrilaterals, with point data |y - x| and y3.
void emit_vtk(const Field& y, const std::string& path);

/// |y| - style samples along the segment from a to b: columns
/// s, x1, x2, y1, y2, y3, displacement.
void write_profile_csv(const Field& y, const Point2& a, const Point2& b, std::size_t samples,
                       const std::string& path);

/// Invariant checks on small built-in meshes; one line per check.
bool run_verify(unsigned seed, std::ostream& out);

}  // namespace platedg
