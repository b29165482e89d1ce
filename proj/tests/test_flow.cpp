#include <doctest.h>

#include <random>

#include "platedg/flow.hpp"
#include "test_util.hpp"

using namespace platedg;

namespace {

struct Desk {
  Mesh mesh;
  DgSpace space;
  explicit Desk(std::size_t n, std::set<Side> sides = {Side::left, Side::bottom})
      : mesh(build_rect_mesh({0.0, 4.0, 0.0, 4.0}, n, n, sides)), space(mesh) {}
};

}  // namespace

TEST_CASE("config validation") {
  FlowConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = FlowConfig{};
  c.obstacle = ObstacleConfig{0.2, -1.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = FlowConfig{};
  c.penalty.gamma1 = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("one step stays in the discrete tangent space and decreases energy") {
  Desk d(4);
  FlowConfig cfg;
  cfg.tau = d.mesh.max_diameter();
  const Vec3 f(0.0, 0.0, 0.025);
  const FlowOperators ops = build_flow_operators(d.space, BoundaryData::clamped_flat(), f, cfg);
  // A bent start so that the constraint couples all components.
  const Field y0 = testutil::bent_state(d.space, 0.01, BoundaryData::clamped_flat());
  const StepResult r = flow_step(y0, ops, cfg);
  const SparseMatrix B = constraint_operator(y0);
  CHECK(B.multiply(r.step).norm() <= 1e-6 * r.step.norm());
  CHECK(energy_direct(r.next, cfg.penalty, f) < energy_direct(y0, cfg.penalty, f));
  // Step norm is the H^2_h norm of the update.
  CHECK(r.step_norm == doctest::Approx(std::sqrt(ops.forms.G.quadratic_form(r.step))).epsilon(1e-12));
  // Optimality: A dY - F is in the range of B^T, so it is orthogonal to ker B.
  const Vector F = flow_rhs(y0, ops.forms, cfg);
  const Vector res = ops.A.multiply(r.step) - F;
  const Eigen::MatrixXd N = B.dense().fullPivLu().kernel();
  CHECK(res.norm() > 1e-6 * F.norm());
  CHECK((N.transpose() * res).norm() <= 1e-6 * res.norm());
}

TEST_CASE("energy decays and defect obeys the telescoping bound") {
  Desk d(4);
  FlowConfig cfg;
  cfg.tau = d.mesh.max_diameter();
  cfg.max_steps = 10;
  const FlowProblem prob{&d.space, BoundaryData::clamped_flat(), Vec3(0.0, 0.0, 0.025)};
  std::size_t calls = 0;
  const FlowTrace t = run_flow(flat_state(d.space, prob.data), cfg, prob,
                               [&](const StepRecord&, const Field&) { ++calls; });
  REQUIRE(t.failure.empty());
  CHECK(calls == t.steps.size());
  double prev = t.initial_energy, sum = 0.0;
  for (const StepRecord& s : t.steps) {
    CHECK(s.energy <= prev + 1e-10 * (1.0 + std::abs(prev)));
    prev = s.energy;
    sum += s.grad_step_sq;
    CHECK(s.defect <= t.initial_defect + sum + 1e-8);
  }
  CHECK(t.sum_grad_step_sq() == doctest::Approx(sum));
  CHECK(t.final.coeffs.size() == static_cast<long>(d.space.size()));
}

TEST_CASE("serial and parallel flows agree") {
  Desk d(3);
  FlowConfig cfg;
  cfg.tau = d.mesh.max_diameter();
  cfg.max_steps = 3;
  const FlowProblem prob{&d.space, BoundaryData::clamped_flat(), Vec3(0.0, 0.0, 0.05)};
  cfg.exec = Execution::serial;
  const FlowTrace a = run_flow(flat_state(d.space, prob.data), cfg, prob);
  cfg.exec = Execution::parallel;
  const FlowTrace b = run_flow(flat_state(d.space, prob.data), cfg, prob);
  REQUIRE(a.steps.size() == b.steps.size());
  CHECK((a.final.coeffs - b.final.coeffs).norm() <= 1e-9 * a.final.coeffs.norm());
}

TEST_CASE("flat plate without load is a fixed point") {
  Desk d(4);
  FlowConfig cfg;
  cfg.tau = d.mesh.max_diameter();
  const FlowProblem prob{&d.space, BoundaryData::clamped_flat(), Vec3::Zero()};
  const Field flat = flat_state(d.space, prob.data);
  const FlowOperators ops = build_flow_operators(d.space, prob.data, prob.force, cfg);
  CHECK(flow_rhs(flat, ops.forms, cfg).norm() <= 1e-10);
  const FlowTrace t = run_flow(flat, cfg, prob);
  CHECK(t.iterations(cfg.stop_tol * cfg.tau) == 0);
  CHECK(t.converged);
  CHECK(std::abs(t.initial_energy) <= 1e-11);
}

TEST_CASE("broken gradient norm of a linear field") {
  Desk d(2);
  const Field y = interpolate(d.space, [](const Point2& x) { return Vec3(x(0), 2.0 * x(1), 0.0); });
  // |grad y|^2 = 1 + 4 over an area of 16.
  CHECK(broken_gradient_norm_squared(d.space, y.coeffs) == doctest::Approx(80.0).epsilon(1e-13));
}

TEST_CASE("boundary data blending and residual") {
  Desk d(2, {Side::left, Side::right});
  BoundaryData target;
  target.g = [](const Point2& x) { return Vec3(x(0) + 1.0, x(1), 0.0); };
  target.Phi = BoundaryData::clamped_flat().Phi;
  const BoundaryData half = blend_with_identity(target, 0.5);
  CHECK((half.value(Point2(1.0, 2.0)) - Vec3(1.5, 2.0, 0.0)).norm() <= 1e-15);
  const Field flat = flat_state(d.space, {});
  // |y - g| = 1 on two sides of length 4.
  CHECK(boundary_residual(flat, target) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  CHECK(boundary_residual(flat, BoundaryData::clamped_flat()) <= 1e-14);
}

TEST_CASE("obstacle penalty keeps the plate near the ceiling") {
  const Mesh mesh = build_rect_mesh({-1.0, 1.0, -1.0, 1.0}, 4, 4, {Side::left});
  const DgSpace space(mesh);
  FlowConfig cfg;
  cfg.tau = 5e-4;
  cfg.penalty = {5000.0, 5000.0};
  cfg.obstacle = ObstacleConfig{0.02, 3e-4};
  cfg.max_steps = 200;
  const FlowProblem prob{&space, BoundaryData::clamped_flat(), Vec3(0.0, 0.0, 1.0)};
  const FlowTrace t = run_flow(flat_state(space, prob.data), cfg, prob);
  REQUIRE(t.failure.empty());
  REQUIRE(!t.steps.empty());
  CHECK(t.steps.back().penetration <= 0.02);
  double prev = t.initial_energy;
  for (const StepRecord& s : t.steps) {
    CHECK(s.energy <= prev + 1e-10 * (1.0 + std::abs(prev)));
    prev = s.energy;
  }
}

TEST_CASE("continuation raises alpha to one before stopping") {
  const Mesh mesh = build_rect_mesh({-2.0, 2.0, 0.0, 1.0}, 4, 1, {Side::left, Side::right});
  const DgSpace space(mesh);
  FlowConfig cfg;
  cfg.tau = 0.05;
  cfg.penalty = {1e4, 1e4};
  BoundaryData target;
  target.g = [](const Point2& x) { return Vec3(x(0) - 0.2 * (x(0) > 0 ? 1.0 : -1.0), x(1), 0.0); };
  target.Phi = BoundaryData::clamped_flat().Phi;
  cfg.continuation = ContinuationConfig{0.25, target};
  cfg.max_steps = 6;
  const FlowProblem prob{&space, {}, Vec3(0.0, 0.0, 1e-2)};
  const FlowTrace t = run_continuation_flow(flat_state(space, blend_with_identity(target, 0.0)), cfg, prob);
  REQUIRE(t.failure.empty());
  REQUIRE(t.steps.size() >= 4);
  CHECK(t.steps[0].alpha == doctest::Approx(0.25));
  CHECK(t.steps[3].alpha == doctest::Approx(1.0));
  CHECK(t.steps.back().alpha == doctest::Approx(1.0));
}
