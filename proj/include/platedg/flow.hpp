#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "platedg/assembly.hpp"
#include "platedg/hessian.hpp"
#include "platedg/linalg.hpp"

namespace platedg {

struct ObstacleConfig {
  double ceiling = 0.2;
  double sigma = 3e-4;
};

/// Boundary data homotopy (1 - alpha) (x1, x2, 0) + alpha g, alpha raised by
/// `alpha_increment` before every step until it reaches 1.
struct ContinuationConfig {
  double alpha_increment = 5e-5;
  BoundaryData target;
};

struct FlowConfig {
  double tau = 0.1;
  Penalty penalty;
  double cg_tol = 1e-8;
  std::size_t cg_maxiter = 0;  // 0: 10 * constraint rows
  double stop_tol = 1e-6;      // stop once |dy|_{H^2_h} <= stop_tol * tau
  std::size_t max_steps = 1000;
  std::optional<ObstacleConfig> obstacle;
  std::optional<ContinuationConfig> continuation;
  /// Block-Jacobi Schur preconditioner built from the cell blocks of A.
  bool precondition = false;
  /// Evaluate the discrete Hessian after every step and record
  /// 1/2 |H_h|^2 - (f, y) and |H_h - D^2_h y|.
  bool track_hessian = false;
  Execution exec = Execution::parallel;

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

struct FlowProblem {
  const DgSpace* space = nullptr;
  BoundaryData data;  // ignored by continuation runs, which start from the identity data
  Vec3 force = Vec3::Zero();
};

struct StepRecord {
  std::size_t step = 0;
  double energy = 0.0;        // E_h after the step
  double defect = 0.0;        // D_h after the step
  double step_norm = 0.0;     // |dy|_{H^2_h}
  double grad_step_sq = 0.0;  // |grad_h dy|^2_{L^2}
  double constraint_residual = 0.0;  // |B dY|
  std::size_t cg_iterations = 0;
  bool cg_stagnated = false;
  double alpha = 1.0;
  double penetration = 0.0;   // max nodal y3 - ceiling (obstacle runs)
  double hessian_lhs = 0.0;   // 1/2 |H_h|^2 - (f, y) when tracked
  double lift_norm = 0.0;     // |H_h - D^2_h y| when tracked
};

struct FlowTrace {
  double initial_energy = 0.0;
  double initial_defect = 0.0;
  std::vector<StepRecord> steps;
  Field final;
  bool converged = false;
  std::string failure;  // nonempty if a step failed; steps hold the partial run
  std::vector<std::string> warnings;

  /// Steps with |dy|_{H^2_h} above the stopping threshold.
  std::size_t iterations(double threshold) const;
  double sum_grad_step_sq() const;
};

/// Matrices and the factorized step operator shared by all steps of a run.
struct FlowOperators {
  AssembledForms forms;
  SparseMatrix A;  // tau^-1 G + A0 (+ 2/sigma M)
  Factorization factor;
  BlockDiagonalInverse block_inverse;  // empty unless config.precondition
};

FlowOperators build_flow_operators(const DgSpace& space, const BoundaryData& data, const Vec3& force,
                                   const FlowConfig& config);

/// Right-hand side -(A0 Y - l_bc) + l_f (+ 2/sigma M (S - Y)).
Vector flow_rhs(const Field& y, const AssembledForms& forms, const FlowConfig& config);

struct StepResult {
  Field next;
  double step_norm = 0.0;
  std::size_t cg_iterations = 0;
  SchurResult solve;
  Vector step;
};

/// One step of the constrained H^2 gradient flow. `multiplier` is the warm
/// start for the Schur CG and is updated in place when given.
StepResult flow_step(const Field& y, const FlowOperators& ops, const FlowConfig& config,
                     Vector* multiplier = nullptr);

/// sum_T int_T |grad dy|^2 for a coefficient vector.
double broken_gradient_norm_squared(const DgSpace& space, const Vector& coeffs);

/// Called after every accepted step with the record and the new state.
using StepCallback = std::function<void(const StepRecord&, const Field&)>;

/// Runs until |dy|_{H^2_h} <= stop_tol * tau or max_steps. Solver failures
/// end the run with `failure` set and the partial trace kept.
FlowTrace run_flow(const Field& initial, const FlowConfig& config, const FlowProblem& problem,
                   const StepCallback& on_step = {});

/// Same as run_flow with the boundary data homotopy of config.continuation;
/// the stopping test applies only once alpha has reached 1.
FlowTrace run_continuation_flow(const Field& initial, const FlowConfig& config, const FlowProblem& problem,
                                const StepCallback& on_step = {});

/// (1 - alpha) (x1, x2, 0) + alpha target, with the matching gradient data.
BoundaryData blend_with_identity(const BoundaryData& target, double alpha);

/// Flat deformation (x1, x2, 0).
Field flat_state(const DgSpace& space, BoundaryData data);

/// L2 norm of y - g over the Dirichlet boundary.
double boundary_residual(const Field& y, const BoundaryData& target);

}  // namespace platedg
