#include <doctest.h>

#include <random>

#include "platedg/dgspace.hpp"
#include "test_util.hpp"

using namespace platedg;

TEST_CASE("dof numbering") {
  const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 3, {});
  const DgSpace s(m);
  CHECK(s.local_size() == 9);
  CHECK(s.dofs_per_cell() == 27);
  CHECK(s.size() == 27 * 6);
  CHECK(s.index(4, 2, 7) == (3 * 4 + 2) * 9 + 7);
  for (std::size_t g : {std::size_t{0}, std::size_t{50}, s.size() - 1}) {
    const auto loc = s.location(g);
    CHECK(s.index(loc.cell, loc.comp, loc.local) == g);
  }
}

TEST_CASE("interpolation reproduces Q2 fields and evaluation is consistent") {
  const Mesh m = build_rect_mesh({0.0, 2.0, 0.0, 1.0}, 2, 2, {});
  const DgSpace s(m);
  auto f = [](const Point2& x) { return Vec3(x(0) * x(0) * x(1), x(1) * x(1), 1.0 - x(0) * x(1)); };
  const Field y = interpolate(s, f);
  const PointValue pv = evaluate_at(y, 3, Point2(0.3, 0.8));
  const Point2 x = m.maps[3].map(Point2(0.3, 0.8));
  CHECK((pv.value - f(x)).norm() <= 1e-13);
  CHECK(pv.gradient(0, 0) == doctest::Approx(2 * x(0) * x(1)));
  CHECK(pv.gradient(2, 1) == doctest::Approx(-x(0)));
  CHECK(pv.hessian[0](0, 1) == doctest::Approx(2 * x(0)));
  CHECK(pv.hessian[1](1, 1) == doctest::Approx(2.0));
  CHECK(pv.grad_laplacian(0, 1) == doctest::Approx(2.0));
  // Continuous fields have no jumps.
  for (const EdgeInfo* e : m.skeleton()) {
    const EdgeJumps j = edge_jump_average(y, *e, 3);
    for (std::size_t q = 0; q < j.jump.size(); ++q) {
      CHECK(j.jump[q].norm() <= 1e-13);
      CHECK(j.grad_jump[q].norm() <= 1e-12);
    }
  }
}

TEST_CASE("edge reversal flips jumps and normal-weighted averages") {
  const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 2, {});
  const DgSpace s(m);
  std::mt19937 rng(2);
  const Field y = testutil::random_field(s, rng);
  for (const EdgeInfo& e : m.interior_edges) {
    const EdgeJumps a = edge_jump_average(y, e, 3);
    const EdgeJumps b = edge_jump_average(y, reversed(e), 3);
    CHECK((a.normal + b.normal).norm() <= 1e-14);
    for (std::size_t q = 0; q < a.jump.size(); ++q) {
      CHECK((a.jump[q] + b.jump[q]).norm() <= 1e-12);
      // [grad y] flips with the sides.
      CHECK((a.grad_jump[q] + b.grad_jump[q]).norm() <= 1e-12);
      // {D^2 y mu} flips with mu.
      CHECK((a.avg_dmu_grad[q] + b.avg_dmu_grad[q]).norm() <= 1e-11);
    }
  }
}

TEST_CASE("Dirichlet jumps subtract the boundary data") {
  const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 2, {Side::left});
  const DgSpace s(m);
  const Field flat = interpolate(s, [](const Point2& x) { return Vec3(x(0), x(1), 0.0); }, BoundaryData::clamped_flat());
  const Field lifted = interpolate(s, [](const Point2& x) { return Vec3(x(0), x(1), 0.3); }, BoundaryData::clamped_flat());
  for (const EdgeInfo& e : m.boundary_edges) {
    if (!e.dirichlet) continue;
    const EdgeJumps a = edge_jump_average(flat, e, 3);
    const EdgeJumps b = edge_jump_average(lifted, e, 3);
    for (std::size_t q = 0; q < a.jump.size(); ++q) {
      CHECK(a.jump[q].norm() <= 1e-14);
      CHECK(a.grad_jump[q].norm() <= 1e-13);
      CHECK(b.jump[q](2) == doctest::Approx(0.3));
    }
  }
}

TEST_CASE("obstacle projection and norms") {
  const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 2, {});
  const DgSpace s(m);
  const Field y = interpolate(s, [](const Point2& x) { return Vec3(x(0), x(1), x(0)); });
  CHECK(max_height(y) == doctest::Approx(1.0));
  const Field p = l2_project_obstacle(y, 0.2);
  CHECK(max_height(p) == doctest::Approx(0.2));
  // Unit square: |x1|^2 + |x2|^2 + |x1|^2 integrates to 1.
  CHECK(l2_norm_squared(y) == doctest::Approx(1.0).epsilon(1e-13));
  double cells = 0.0;
  for (std::size_t c = 0; c < m.num_cells(); ++c) cells += cell_l2_norm_squared(y, c);
  CHECK(cells == doctest::Approx(1.0).epsilon(1e-13));
}
