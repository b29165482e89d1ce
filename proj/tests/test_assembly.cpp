#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "platedg/assembly.hpp"
#include "test_util.hpp"

using namespace platedg;

namespace {

double oracle_mismatch(const SparseMatrix& lib, const Eigen::MatrixXd& scalar) {
  const Eigen::MatrixXd L = lib.dense();
  const int ns = static_cast<int>(scalar.rows());
  const int cells = ns / 9;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(L.rows(), L.cols());
  for (int ci = 0; ci < cells; ++ci)
    for (int cj = 0; cj < cells; ++cj)
      for (int k = 0; k < 3; ++k)
        for (int a = 0; a < 9; ++a)
          for (int b = 0; b < 9; ++b)
            full(oracle::library_index(ci, k, a), oracle::library_index(cj, k, b)) = scalar(9 * ci + a, 9 * cj + b);
  return (L - full).cwiseAbs().maxCoeff() / full.cwiseAbs().maxCoeff();
}

Side lib_side(oracle::Side s) {
  switch (s) {
    case oracle::Side::left: return Side::left;
    case oracle::Side::right: return Side::right;
    case oracle::Side::bottom: return Side::bottom;
    default: return Side::top;
  }
}

}  // namespace

TEST_CASE("assembled forms match the brute-force oracle") {
  for (const auto& sides : {std::set<oracle::Side>{oracle::Side::left, oracle::Side::bottom},
                            std::set<oracle::Side>{oracle::Side::left, oracle::Side::right, oracle::Side::bottom,
                                                   oracle::Side::top},
                            std::set<oracle::Side>{}}) {
    const oracle::Grid g{0.0, 1.0, 0.0, 1.0, 2, 2, sides};
    std::set<Side> lib_sides;
    for (auto s : sides) lib_sides.insert(lib_side(s));
    const Mesh mesh = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 2, lib_sides);
    const DgSpace space(mesh);
    const oracle::Forms ref = oracle::assemble(g, 10.0, 10.0);
    CHECK(oracle_mismatch(assemble_ah_matrix(space, {10.0, 10.0}), ref.ah) <= 1e-12);
    CHECK(oracle_mismatch(assemble_h2_metric(space), ref.G) <= 1e-12);
    CHECK(oracle_mismatch(assemble_mass(space), ref.M) <= 1e-12);
  }
}

TEST_CASE("oracle agreement on an anisotropic grid with experiment penalties") {
  const oracle::Grid g{-1.0, 2.0, 0.5, 1.5, 3, 2, {oracle::Side::left}};
  const Mesh mesh = build_rect_mesh({-1.0, 2.0, 0.5, 1.5}, 3, 2, {Side::left});
  const DgSpace space(mesh);
  const oracle::Forms ref = oracle::assemble(g, 5000.0, 1100.0);
  CHECK(oracle_mismatch(assemble_ah_matrix(space, {5000.0, 1100.0}), ref.ah) <= 1e-12);
}

TEST_CASE("a_h is symmetric and serial and parallel assembly agree") {
  const Mesh mesh = perturb_vertices(build_rect_mesh({0.0, 2.0, 0.0, 2.0}, 4, 4, {Side::left, Side::top}), 0.15, 3);
  const DgSpace space(mesh);
  const Penalty p{5000.0, 1100.0};
  const SparseMatrix s = assemble_ah_matrix(space, p, Execution::serial);
  const SparseMatrix q = assemble_ah_matrix(space, p, Execution::parallel);
  CHECK(s.symmetry_defect() <= 1e-12 * s.max_abs());
  CHECK(s.add(q, -1.0).max_abs() <= 1e-12 * s.max_abs());
  const SparseMatrix gs = assemble_h2_metric(space, Execution::serial);
  CHECK(gs.add(assemble_h2_metric(space, Execution::parallel), -1.0).max_abs() <= 1e-12 * gs.max_abs());
  const SparseMatrix ms = assemble_mass(space, Execution::serial);
  CHECK(ms.add(assemble_mass(space, Execution::parallel), -1.0).max_abs() <= 1e-12 * ms.max_abs());
}

TEST_CASE("penalties must be positive") {
  const Mesh mesh = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 1, 1, {});
  const DgSpace space(mesh);
  CHECK_THROWS_AS(assemble_ah_matrix(space, {0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(assemble_ah_matrix(space, {1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("coercivity witness: a_h is positive relative to the H2 metric") {
  const Mesh mesh = build_rect_mesh({0.0, 4.0, 0.0, 4.0}, 4, 4, {Side::left, Side::bottom});
  const DgSpace space(mesh);
  const SparseMatrix A0 = assemble_ah_matrix(space, {5000.0, 1100.0});
  const SparseMatrix G = assemble_h2_metric(space);
  std::mt19937 rng(11);
  double worst = INFINITY;
  for (int t = 0; t < 200; ++t) {
    const Vector v = testutil::random_vector(static_cast<long>(space.size()), rng);
    worst = std::min(worst, A0.quadratic_form(v) / G.quadratic_form(v));
  }
  CHECK(worst > 0.0);
}

TEST_CASE("matrix and quadrature routes to the energy agree") {
  const Mesh mesh = perturb_vertices(build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 3, 3, {Side::left, Side::bottom}), 0.2, 5);
  const DgSpace space(mesh);
  const Penalty p{50.0, 20.0};
  const Vec3 f(0.1, -0.2, 0.3);
  BoundaryData data;
  data.g = [](const Point2& x) { return Vec3(x(0) + 0.1 * x(1), x(1), 0.2 * x(0) * x(1)); };
  data.Phi = [](const Point2& x) {
    Mat32 P;
    P << 1.0, 0.1, 0.0, 1.0, 0.2 * x(1), 0.2 * x(0);
    return P;
  };
  const AssembledForms forms = assemble_forms(space, p, data, f);
  std::mt19937 rng(3);
  for (int t = 0; t < 5; ++t) {
    const Field y = testutil::random_field(space, rng, data);
    const double e1 = energy(y, forms), e2 = energy_direct(y, p, f);
    CHECK(std::abs(e1 - e2) <= 1e-10 * (1.0 + std::abs(e1)));
    const Vector g1 = forms.A0.multiply(y.coeffs) - forms.l_bc;
    const Vector g2 = ah_action_direct(y, p, Execution::serial);
    CHECK((g1 - g2).norm() <= 1e-10 * g1.norm());
    CHECK((ah_action_direct(y, p, Execution::parallel) - g2).norm() <= 1e-12 * g2.norm());
    CHECK((energy_gradient(y, forms) - (g1 - forms.l_f)).norm() <= 1e-12 * g1.norm());
  }
}

TEST_CASE("boundary terms vanish for homogeneous data and load integrates the force") {
  const Mesh mesh = build_rect_mesh({0.0, 3.0, 0.0, 2.0}, 3, 2, {Side::left});
  const DgSpace space(mesh);
  const BoundaryTerms bt = assemble_boundary_terms(space, {}, BoundaryData::homogeneous());
  CHECK(bt.l_bc.norm() == 0.0);
  CHECK(bt.c_bc == 0.0);
  // Basis functions sum to one on each cell, so the load sums to f * area.
  const Vector l = assemble_load(space, Vec3(1.0, 2.0, -3.0));
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) s += l.segment(static_cast<long>(space.index(c, k, 0)), 9).sum();
    CHECK(s == doctest::Approx(6.0 * (k == 0 ? 1.0 : k == 1 ? 2.0 : -3.0)).epsilon(1e-13));
  }
}

TEST_CASE("flat state with matching data has zero energy and residual") {
  const Mesh mesh = build_rect_mesh({0.0, 4.0, 0.0, 4.0}, 4, 4, {Side::left, Side::bottom});
  const DgSpace space(mesh);
  const Field y = interpolate(space, [](const Point2& x) { return Vec3(x(0), x(1), 0.0); }, BoundaryData::clamped_flat());
  const Penalty p{5000.0, 1100.0};
  CHECK(std::abs(energy_direct(y, p, Vec3::Zero())) <= 1e-11);
  CHECK(ah_action_direct(y, p).norm() <= 1e-10);
  CHECK(isometry_defect(y) <= 1e-13);
}

TEST_CASE("constraint operator is the derivative of the cell metric") {
  const Mesh mesh = perturb_vertices(build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 3, 3, {}), 0.2, 9);
  const DgSpace space(mesh);
  std::mt19937 rng(4);
  const Field y = testutil::random_field(space, rng);
  const Vector d = testutil::random_vector(static_cast<long>(space.size()), rng);
  const SparseMatrix B = constraint_operator(y, Execution::serial);
  CHECK(B.rows() == 3 * mesh.num_cells());
  CHECK(B.add(constraint_operator(y, Execution::parallel), -1.0).max_abs() == 0.0);
  const Vector Bd = B.multiply(d);
  // The metric is quadratic, so the central difference is exact up to rounding.
  const double eps = 1e-3;
  Field yp = y, ym = y;
  yp.coeffs += eps * d;
  ym.coeffs -= eps * d;
  const auto mp = cell_metric_integrals(yp), mm = cell_metric_integrals(ym);
  double err = 0.0, scale = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const Mat2 fd = (mp[c] - mm[c]) / (2 * eps);
    const Eigen::Vector3d lin(Bd(3 * c), Bd(3 * c + 1), Bd(3 * c + 2));
    const Eigen::Vector3d ref(fd(0, 0), fd(0, 1), fd(1, 1));
    err = std::max(err, (lin - ref).cwiseAbs().maxCoeff());
    scale = std::max(scale, ref.cwiseAbs().maxCoeff());
  }
  CHECK(err <= 1e-9 * scale);
}

TEST_CASE("isometry defect of an exact isometry is small and of a stretch is exact") {
  const Mesh mesh = build_rect_mesh({0.0, 2.0, 0.0, 1.0}, 4, 2, {});
  const DgSpace space(mesh);
  // y = (2 x1, x2, 0): per cell int (grad y)^T grad y - I = diag(3, 0) |T|.
  const Field s = interpolate(space, [](const Point2& x) { return Vec3(2 * x(0), x(1), 0.0); });
  CHECK(isometry_defect(s) == doctest::Approx(8 * 3.0 * 0.25).epsilon(1e-13));
  const Field r = interpolate(space, [](const Point2& x) { return Vec3(x(1), 0.0, -x(0)); });
  CHECK(isometry_defect(r) <= 1e-13);
}
