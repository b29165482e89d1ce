#include <doctest.h>

#include <cmath>
#include <map>

#include "platedg/mesh.hpp"

using namespace platedg;

TEST_CASE("rectangle mesh counts and numbering") {
  const Mesh m = build_rect_mesh({0.0, 3.0, -1.0, 1.0}, 3, 2, {Side::left});
  CHECK(m.num_cells() == 6);
  CHECK(m.vertices.size() == 12);
  CHECK(m.interior_edges.size() == 2 * 2 + 3 * 1);
  CHECK(m.boundary_edges.size() == 2 * (3 + 2));
  CHECK(m.max_diameter() == doctest::Approx(std::sqrt(2.0)));
  double area = 0.0;
  for (std::size_t c = 0; c < m.num_cells(); ++c) area += m.cell_area(c);
  CHECK(area == doctest::Approx(6.0).epsilon(1e-14));
  // Cell j nx + i has its lower-left corner at (x0 + i hx, y0 + j hy).
  const Point2 ll = m.vertices[m.cells[4][0]];
  CHECK(ll(0) == doctest::Approx(1.0));
  CHECK(ll(1) == doctest::Approx(0.0));
}

TEST_CASE("edge orientation and Dirichlet marking") {
  const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 2, {Side::left, Side::bottom});
  for (const EdgeInfo& e : m.interior_edges) {
    REQUIRE(e.cell_plus.has_value());
    CHECK(e.cell_minus < *e.cell_plus);
    // The normal points from the "-" cell towards the "+" cell.
    const Point2 cm = m.maps[e.cell_minus].map({0.5, 0.5});
    const Point2 cp = m.maps[*e.cell_plus].map({0.5, 0.5});
    CHECK(e.unit_normal.dot(cp - cm) > 0.0);
    CHECK(e.unit_normal.norm() == doctest::Approx(1.0));
    CHECK(e.length == doctest::Approx(0.5));
  }
  int dirichlet = 0;
  for (const EdgeInfo& e : m.boundary_edges) {
    const Point2 mid = 0.5 * (m.vertices[e.endpoints[0]] + m.vertices[e.endpoints[1]]);
    const bool expect = mid(0) < 1e-12 || mid(1) < 1e-12;
    CHECK(e.dirichlet == expect);
    dirichlet += e.dirichlet;
    // Outward normal.
    const Point2 c = m.maps[e.cell_minus].map({0.5, 0.5});
    CHECK(e.unit_normal.dot(mid - c) > 0.0);
  }
  CHECK(dirichlet == 4);
  CHECK(m.skeleton().size() == m.interior_edges.size() + 4);
}

TEST_CASE("every cell edge is shared by at most two cells") {
  const Mesh m = build_rect_mesh({0.0, 2.0, 0.0, 1.0}, 5, 3, {});
  std::map<std::pair<std::size_t, std::size_t>, int> count;
  for (const auto& c : m.cells)
    for (int k = 0; k < 4; ++k) {
      auto a = c[k], b = c[(k + 1) % 4];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  std::size_t interior = 0, boundary = 0;
  for (const auto& [edge, n] : count) {
    CHECK(n <= 2);
    (n == 2 ? interior : boundary)++;
  }
  CHECK(interior == m.interior_edges.size());
  CHECK(boundary == m.boundary_edges.size());
}

TEST_CASE("trace points coincide on both sides of interior edges") {
  const Mesh m = perturb_vertices(build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 3, 3, {}), 0.2, 7);
  for (const EdgeInfo& e : m.interior_edges) {
    const auto a = edge_trace_points(m, e, EdgeSide::minus, 3);
    const auto b = edge_trace_points(m, e, EdgeSide::plus, 3);
    REQUIRE(a.size() == b.size());
    double w = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) {
      CHECK((a[q].physical - b[q].physical).norm() <= 1e-13);
      CHECK((m.maps[e.cell_minus].map(a[q].reference) - a[q].physical).norm() <= 1e-13);
      w += a[q].weight;
    }
    CHECK(w == doctest::Approx(e.length).epsilon(1e-13));
  }
}

TEST_CASE("geometry map derivatives") {
  const GeometryMap g(0, {Point2(0, 0), Point2(1.2, 0.1), Point2(1.0, 0.9), Point2(-0.1, 1.1)});
  const Point2 r(0.3, 0.7);
  const Point2 x = g.map(r);
  const auto back = g.pull_back(x);
  REQUIRE(back.has_value());
  CHECK((*back - r).norm() <= 1e-12);
  CHECK((g.inverse_jacobian(r) * g.jacobian(r) - Mat2::Identity()).norm() <= 1e-13);
  CHECK_FALSE(g.is_parallelogram());
  // D^2 F^{-1} against central differences of DF^{-1} in physical coordinates.
  const double eps = 1e-6;
  const auto second = g.inverse_second(r);
  for (int i = 0; i < 2; ++i) {
    Point2 dx = Point2::Zero();
    dx(i) = eps;
    const Mat2 jp = g.inverse_jacobian(*g.pull_back(x + dx));
    const Mat2 jm = g.inverse_jacobian(*g.pull_back(x - dx));
    const Mat2 fd = (jp - jm) / (2 * eps);
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < 2; ++j) CHECK(second[a](i, j) == doctest::Approx(fd(a, j)).epsilon(1e-6));
  }
  CHECK_FALSE(g.pull_back(Point2(5.0, 5.0)).has_value());
}

TEST_CASE("perturbed meshes keep area and locate points") {
  const Mesh base = build_rect_mesh({0.0, 2.0, 0.0, 2.0}, 4, 4, {});
  const Mesh m = perturb_vertices(base, 0.25, 1);
  double area = 0.0;
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    area += m.cell_area(c);
    CHECK(m.cell_area(c) > 0.0);
  }
  CHECK(area == doctest::Approx(4.0).epsilon(1e-13));
  const auto hit = m.locate(Point2(1.3, 0.7));
  REQUIRE(hit.has_value());
  CHECK((m.maps[hit->first].map(hit->second) - Point2(1.3, 0.7)).norm() <= 1e-12);
}
