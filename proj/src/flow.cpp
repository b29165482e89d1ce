#include "platedg/flow.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace platedg {

void FlowConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("flow: tau must be positive");
  if (!(penalty.gamma0 > 0.0) || !(penalty.gamma1 > 0.0))
    throw std::invalid_argument("flow: penalty parameters must be positive");
  if (!(cg_tol > 0.0)) throw std::invalid_argument("flow: cg_tol must be positive");
  if (!(stop_tol >= 0.0)) throw std::invalid_argument("flow: stop_tol must be nonnegative");
  if (obstacle && !(obstacle->sigma > 0.0)) throw std::invalid_argument("flow: obstacle sigma must be positive");
  if (continuation && !(continuation->alpha_increment > 0.0 && continuation->alpha_increment <= 1.0))
    throw std::invalid_argument("flow: alpha increment must lie in (0, 1]");
}

std::size_t FlowTrace::iterations(double threshold) const {
  std::size_t n = 0;
  for (const auto& s : steps)
    if (s.step_norm > threshold) ++n;
  return n;
}

double FlowTrace::sum_grad_step_sq() const {
  double s = 0.0;
  for (const auto& r : steps) s += r.grad_step_sq;
  return s;
}

FlowOperators build_flow_operators(const DgSpace& space, const BoundaryData& data, const Vec3& force,
                                   const FlowConfig& config) {
  config.validate();
  AssembledForms forms = assemble_forms(space, config.penalty, data, force, config.exec);
  SparseMatrix A = forms.G.scaled(1.0 / config.tau).add(forms.A0);
  if (config.obstacle) A = A.add(forms.M, 2.0 / config.obstacle->sigma);
  // The step operator acts identically and independently on the three components.
  Factorization factor(A, static_cast<std::size_t>(space.local_size()), 3);
  BlockDiagonalInverse binv;
  if (config.precondition) binv = BlockDiagonalInverse(A, static_cast<std::size_t>(space.dofs_per_cell()));
  return {std::move(forms), std::move(A), std::move(factor), std::move(binv)};
}

Vector flow_rhs(const Field& y, const AssembledForms& forms, const FlowConfig& config) {
  Vector F = forms.l_f - ah_action_direct(y, forms.penalty, config.exec);
  if (config.obstacle) {
    const Field s = l2_project_obstacle(y, config.obstacle->ceiling);
    F += (2.0 / config.obstacle->sigma) * forms.M.multiply(s.coeffs - y.coeffs);
  }
  return F;
}

StepResult flow_step(const Field& y, const FlowOperators& ops, const FlowConfig& config, Vector* multiplier) {
  const SparseMatrix B = constraint_operator(y, config.exec);
  const Vector F = flow_rhs(y, ops.forms, config);
  SchurPreconditioner pre;
  SchurOptions opt;
  opt.tol = config.cg_tol;
  opt.max_iter = config.cg_maxiter;
  if (config.precondition) {
    pre = SchurPreconditioner(ops.block_inverse, B, 3);
    opt.preconditioner = &pre;
  }
  if (multiplier) opt.initial_multiplier = multiplier;

  StepResult r;
  r.solve = schur_cg(ops.factor, B, F, opt);
  if (multiplier) *multiplier = r.solve.multiplier;
  r.step = r.solve.step;
  r.next = y;
  r.next.coeffs += r.step;
  r.step_norm = std::sqrt(std::max(0.0, ops.forms.G.quadratic_form(r.step)));
  r.cg_iterations = r.solve.iterations;
  return r;
}

double broken_gradient_norm_squared(const DgSpace& space, const Vector& coeffs) {
  const Field f(space, coeffs, {});
  double s = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto& t = space.cell_table(c);
    for (std::size_t q = 0; q < t.points.size(); ++q)
      s += t.weights[q] * evaluate(f, c, t.points[q]).gradient.squaredNorm();
  }
  return s;
}

BoundaryData blend_with_identity(const BoundaryData& target, double alpha) {
  BoundaryData d;
  d.g = [target, alpha](const Point2& x) {
    return Vec3((1.0 - alpha) * Vec3(x(0), x(1), 0.0) + alpha * target.value(x));
  };
  d.Phi = [target, alpha](const Point2& x) {
    Mat32 id = Mat32::Zero();
    id(0, 0) = id(1, 1) = 1.0;
    return Mat32((1.0 - alpha) * id + alpha * target.gradient(x));
  };
  return d;
}

Field flat_state(const DgSpace& space, BoundaryData data) {
  return interpolate(space, [](const Point2& x) { return Vec3(x(0), x(1), 0.0); }, std::move(data));
}

double boundary_residual(const Field& y, const BoundaryData& target) {
  Field f = y;
  f.data = target;
  double s = 0.0;
  for (const EdgeInfo& e : y.space->mesh().boundary_edges)
    if (e.dirichlet) s += edge_jump_norms(f, e).value;
  return std::sqrt(s);
}

namespace {

FlowTrace run(const Field& initial, const FlowConfig& config, const FlowProblem& problem, bool continuation,
              const StepCallback& on_step) {
  config.validate();
  if (!problem.space) throw std::invalid_argument("flow: problem has no space");
  if (continuation && !config.continuation) throw std::invalid_argument("flow: continuation parameters missing");
  const DgSpace& space = *problem.space;

  double alpha = continuation ? 0.0 : 1.0;
  BoundaryData data = continuation ? blend_with_identity(config.continuation->target, alpha) : problem.data;
  FlowOperators ops = build_flow_operators(space, data, problem.force, config);

  FlowTrace trace;
  Field y = initial;
  y.data = data;
  trace.initial_energy = energy_direct(y, config.penalty, problem.force);
  trace.initial_defect = isometry_defect(y);
  if (trace.initial_defect > config.tau) {
    std::ostringstream msg;
    msg << "initial isometry defect " << trace.initial_defect << " exceeds tau " << config.tau;
    trace.warnings.push_back(msg.str());
  }

  std::optional<HessianBasis> hbasis;
  if (config.track_hessian) hbasis.emplace(space);

  const double threshold = config.stop_tol * config.tau;
  Vector multiplier;
  for (std::size_t n = 1; n <= config.max_steps; ++n) {
    if (continuation && alpha < 1.0) {
      alpha = std::min(1.0, alpha + config.continuation->alpha_increment);
      data = blend_with_identity(config.continuation->target, alpha);
      BoundaryTerms bt = assemble_boundary_terms(space, config.penalty, data);
      ops.forms.l_bc = std::move(bt.l_bc);
      ops.forms.c_bc = bt.c_bc;
      y.data = data;
    }
    StepResult r;
    try {
      r = flow_step(y, ops, config, &multiplier);
    } catch (const std::exception& e) {
      trace.failure = "step " + std::to_string(n) + ": " + e.what();
      break;
    }
    StepRecord rec;
    rec.step = n;
    rec.step_norm = r.step_norm;
    rec.cg_iterations = r.cg_iterations;
    rec.cg_stagnated = r.solve.stagnated;
    rec.constraint_residual = r.solve.residual;
    rec.grad_step_sq = broken_gradient_norm_squared(space, r.step);
    rec.alpha = alpha;
    y = std::move(r.next);
    rec.energy = energy_direct(y, config.penalty, problem.force);
    rec.defect = isometry_defect(y);
    if (config.obstacle) rec.penetration = max_height(y) - config.obstacle->ceiling;
    if (hbasis) {
      const DiscreteHessian d = discrete_hessian(*hbasis, y, config.exec);
      HessianCoefficients bmr = d.B;
      bmr -= d.R;
      rec.hessian_lhs = 0.5 * d.H.norm_squared() - y.coeffs.dot(ops.forms.l_f);
      rec.lift_norm = std::sqrt(bmr.norm_squared());
    }
    if (rec.cg_stagnated) trace.warnings.push_back("step " + std::to_string(n) + ": Schur CG stagnated");
    trace.steps.push_back(rec);
    if (on_step) on_step(rec, y);
    if (alpha >= 1.0 && rec.step_norm <= threshold) {
      trace.converged = true;
      break;
    }
  }
  trace.final = std::move(y);
  return trace;
}

}  // namespace

FlowTrace run_flow(const Field& initial, const FlowConfig& config, const FlowProblem& problem,
                   const StepCallback& on_step) {
  return run(initial, config, problem, false, on_step);
}

FlowTrace run_continuation_flow(const Field& initial, const FlowConfig& config, const FlowProblem& problem,
                                const StepCallback& on_step) {
  return run(initial, config, problem, true, on_step);
}

}  // namespace platedg
