#include "platedg/assembly.hpp"

#include <cmath>

namespace platedg {

namespace {

using Eigen::MatrixXd;

enum class CellForm { hessian, mass };

MatrixXd cell_matrix(const DgSpace& space, std::size_t cell, CellForm form) {
  const int n = space.local_size();
  const auto& t = space.cell_table(cell);
  MatrixXd K = MatrixXd::Zero(n, n);
  for (std::size_t q = 0; q < t.points.size(); ++q) {
    const auto& d = t.points[q];
    const double w = t.weights[q];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b <= a; ++b) {
        const double v = form == CellForm::hessian ? (d.hessians[a].cwiseProduct(d.hessians[b])).sum()
                                                   : d.values[a] * d.values[b];
        K(a, b) += w * v;
      }
  }
  K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

// Traces of the basis on one edge side, already multiplied by the jump sign
// and the average weight.
struct SideTrace {
  double jump;       // sign * phi
  Point2 grad_jump;  // sign * grad phi
  Point2 avg_dmu_grad;
  double avg_dmu_lap;
};

SideTrace side_trace(const MappedDerivatives& d, int i, const Point2& mu, double sign, double avg) {
  const auto& t = d.thirds[i];
  const Point2 grad_lap(t[0] + t[2], t[1] + t[3]);
  return {sign * d.values[i], sign * d.gradients[i], avg * (d.hessians[i] * mu), avg * grad_lap.dot(mu)};
}

/// Skeleton contribution on one edge. Local ordering: minus basis, then plus basis.
MatrixXd edge_matrix(const DgSpace& space, const EdgeTable& et, bool consistency, double g0, double g1) {
  const EdgeInfo& e = *et.edge;
  const int n = space.local_size();
  const bool interior = !e.is_boundary();
  const int m = interior ? 2 * n : n;
  const double h = e.length;
  const double avg = interior ? 0.5 : 1.0;
  const Point2 mu = e.unit_normal;
  MatrixXd K = MatrixXd::Zero(m, m);
  std::vector<SideTrace> tr(m);
  for (std::size_t q = 0; q < et.minus.points.size(); ++q) {
    for (int i = 0; i < n; ++i) tr[i] = side_trace(et.minus.points[q], i, mu, 1.0, avg);
    if (interior)
      for (int i = 0; i < n; ++i) tr[n + i] = side_trace(et.plus.points[q], i, mu, -1.0, avg);
    const double w = et.minus.weights[q];
    for (int a = 0; a < m; ++a)
      for (int b = 0; b <= a; ++b) {
        double v = g1 / h * tr[a].grad_jump.dot(tr[b].grad_jump) + g0 / (h * h * h) * tr[a].jump * tr[b].jump;
        if (consistency)
          v += -tr[b].avg_dmu_grad.dot(tr[a].grad_jump) - tr[a].avg_dmu_grad.dot(tr[b].grad_jump) +
               tr[b].avg_dmu_lap * tr[a].jump + tr[a].avg_dmu_lap * tr[b].jump;
        K(a, b) += w * v;
      }
  }
  K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
  return K;
}

void scatter(const DgSpace& space, const MatrixXd& K, std::size_t c0, std::optional<std::size_t> c1,
             std::vector<Triplet>& out) {
  const int n = space.local_size();
  auto cell_of = [&](int a) { return a < n ? c0 : *c1; };
  for (int comp = 0; comp < 3; ++comp)
    for (int a = 0; a < K.rows(); ++a)
      for (int b = 0; b < K.cols(); ++b) {
        const double v = K(a, b);
        if (v == 0.0) continue;
        out.push_back({space.index(cell_of(a), comp, a % n), space.index(cell_of(b), comp, b % n), v});
      }
}

struct SkeletonForm {
  bool cells = true;
  CellForm cell_form = CellForm::hessian;
  bool edges = true;
  bool consistency = false;
  double g0 = 1.0, g1 = 1.0;
};

SparseMatrix assemble_serial(const DgSpace& space, const SkeletonForm& f) {
  std::vector<Triplet> t;
  const Mesh& mesh = space.mesh();
  if (f.cells)
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) scatter(space, cell_matrix(space, c, f.cell_form), c, {}, t);
  if (f.edges)
    for (const EdgeInfo* e : mesh.skeleton())
      scatter(space, edge_matrix(space, space.edge_table(*e), f.consistency, f.g0, f.g1), e->cell_minus,
              e->cell_plus, t);
  return SparseMatrix::from_triplets(space.size(), space.size(), std::move(t));
}

SparseMatrix assemble_parallel(const DgSpace& space, const SkeletonForm& f) {
  const Mesh& mesh = space.mesh();
  const auto skeleton = mesh.skeleton();
  const long nc = f.cells ? static_cast<long>(mesh.num_cells()) : 0;
  const long ne = f.edges ? static_cast<long>(skeleton.size()) : 0;
  std::vector<MatrixXd> cell_blocks(static_cast<std::size_t>(nc));
  std::vector<MatrixXd> edge_blocks(static_cast<std::size_t>(ne));
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (long c = 0; c < nc; ++c)
      cell_blocks[static_cast<std::size_t>(c)] = cell_matrix(space, static_cast<std::size_t>(c), f.cell_form);
#pragma omp for schedule(static)
    for (long i = 0; i < ne; ++i) {
      const EdgeInfo* e = skeleton[static_cast<std::size_t>(i)];
      edge_blocks[static_cast<std::size_t>(i)] =
          edge_matrix(space, space.edge_table(*e), f.consistency, f.g0, f.g1);
    }
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nc) * 3 * 81 + static_cast<std::size_t>(ne) * 3 * 324);
  for (long c = 0; c < nc; ++c)
    scatter(space, cell_blocks[static_cast<std::size_t>(c)], static_cast<std::size_t>(c), {}, t);
  for (long i = 0; i < ne; ++i) {
    const EdgeInfo* e = skeleton[static_cast<std::size_t>(i)];
    scatter(space, edge_blocks[static_cast<std::size_t>(i)], e->cell_minus, e->cell_plus, t);
  }
  return SparseMatrix::from_triplets(space.size(), space.size(), std::move(t));
}

SparseMatrix assemble(const DgSpace& space, const SkeletonForm& f, Execution exec) {
  return exec == Execution::serial ? assemble_serial(space, f) : assemble_parallel(space, f);
}

}  // namespace

SparseMatrix assemble_ah_matrix(const DgSpace& space, const Penalty& p, Execution exec) {
  if (!(p.gamma0 > 0.0) || !(p.gamma1 > 0.0)) throw std::invalid_argument("assemble_ah: penalties must be positive");
  return assemble(space, {true, CellForm::hessian, true, true, p.gamma0, p.gamma1}, exec);
}

SparseMatrix assemble_h2_metric(const DgSpace& space, Execution exec) {
  return assemble(space, {true, CellForm::hessian, true, false, 1.0, 1.0}, exec);
}

SparseMatrix assemble_mass(const DgSpace& space, Execution exec) {
  return assemble(space, {true, CellForm::mass, false, false, 0.0, 0.0}, exec);
}

BoundaryTerms assemble_boundary_terms(const DgSpace& space, const Penalty& p, const BoundaryData& data) {
  BoundaryTerms out;
  out.l_bc = Vector::Zero(static_cast<long>(space.size()));
  if (data.is_homogeneous()) return out;
  const Mesh& mesh = space.mesh();
  const int n = space.local_size();
  for (std::size_t k = 0; k < mesh.boundary_edges.size(); ++k) {
    const EdgeInfo& e = mesh.boundary_edges[k];
    if (!e.dirichlet) continue;
    const EdgeTable& et = space.edge_table(e);
    const double h = e.length;
    const Point2 mu = e.unit_normal;
    for (std::size_t q = 0; q < et.minus.points.size(); ++q) {
      const auto& d = et.minus.points[q];
      const double w = et.minus.weights[q];
      const Vec3 g = data.value(d.physical);
      const Mat32 Phi = data.gradient(d.physical);
      out.c_bc += w * (p.gamma1 / h * Phi.squaredNorm() + p.gamma0 / (h * h * h) * g.squaredNorm());
      for (int i = 0; i < n; ++i) {
        const SideTrace s = side_trace(d, i, mu, 1.0, 1.0);
        for (int c = 0; c < 3; ++c) {
          const Point2 phic = Phi.row(c).transpose();
          const double v = -s.avg_dmu_grad.dot(phic) + s.avg_dmu_lap * g(c) + p.gamma1 / h * s.grad_jump.dot(phic) +
                           p.gamma0 / (h * h * h) * s.jump * g(c);
          out.l_bc(static_cast<long>(space.index(e.cell_minus, c, i))) += w * v;
        }
      }
    }
  }
  return out;
}

Vector assemble_load(const DgSpace& space, const Vec3& force) {
  Vector l = Vector::Zero(static_cast<long>(space.size()));
  const int n = space.local_size();
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto& t = space.cell_table(c);
    for (std::size_t q = 0; q < t.points.size(); ++q)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k)
          l(static_cast<long>(space.index(c, k, i))) += t.weights[q] * force(k) * t.points[q].values[i];
  }
  return l;
}

AssembledForms assemble_forms(const DgSpace& space, const Penalty& p, const BoundaryData& data, const Vec3& force,
                              Execution exec) {
  AssembledForms f;
  f.penalty = p;
  f.A0 = assemble_ah_matrix(space, p, exec);
  f.G = assemble_h2_metric(space, exec);
  f.M = assemble_mass(space, exec);
  auto bt = assemble_boundary_terms(space, p, data);
  f.l_bc = std::move(bt.l_bc);
  f.c_bc = bt.c_bc;
  f.l_f = assemble_load(space, force);
  return f;
}

namespace {

// Rows (1,1), (1,2), (2,2) of the linearized constraint for one cell.
MatrixXd cell_constraint(const Field& y, std::size_t cell) {
  const DgSpace& space = *y.space;
  const int n = space.local_size();
  const auto& t = space.cell_table(cell);
  MatrixXd K = MatrixXd::Zero(3, 3 * n);
  for (std::size_t q = 0; q < t.points.size(); ++q) {
    const auto& d = t.points[q];
    const double w = t.weights[q];
    Mat32 gy = Mat32::Zero();
    for (int c = 0; c < 3; ++c) {
      const auto coef = y.cell_block(cell, c);
      for (int i = 0; i < n; ++i) gy.row(c) += coef(i) * d.gradients[i].transpose();
    }
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < n; ++i) {
        const Point2& gp = d.gradients[i];
        K(0, c * n + i) += w * 2.0 * gp(0) * gy(c, 0);
        K(1, c * n + i) += w * (gp(0) * gy(c, 1) + gy(c, 0) * gp(1));
        K(2, c * n + i) += w * 2.0 * gp(1) * gy(c, 1);
      }
  }
  return K;
}

}  // namespace

SparseMatrix constraint_operator(const Field& y, Execution exec) {
  const DgSpace& space = *y.space;
  const long nc = static_cast<long>(space.mesh().num_cells());
  std::vector<MatrixXd> blocks(static_cast<std::size_t>(nc));
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (long c = 0; c < nc; ++c) blocks[static_cast<std::size_t>(c)] = cell_constraint(y, static_cast<std::size_t>(c));
  } else {
    for (long c = 0; c < nc; ++c) blocks[static_cast<std::size_t>(c)] = cell_constraint(y, static_cast<std::size_t>(c));
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nc) * 3 * static_cast<std::size_t>(space.dofs_per_cell()));
  for (long c = 0; c < nc; ++c) {
    const auto cell = static_cast<std::size_t>(c);
    const std::size_t first = space.index(cell, 0, 0);
    for (int r = 0; r < 3; ++r)
      for (int j = 0; j < blocks[cell].cols(); ++j)
        t.push_back({3 * cell + static_cast<std::size_t>(r), first + static_cast<std::size_t>(j), blocks[cell](r, j)});
  }
  return SparseMatrix::from_triplets(3 * static_cast<std::size_t>(nc), space.size(), std::move(t));
}

std::vector<Mat2> cell_metric_integrals(const Field& y) {
  const DgSpace& space = *y.space;
  std::vector<Mat2> out(space.mesh().num_cells(), Mat2::Zero());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto& t = space.cell_table(c);
    for (std::size_t q = 0; q < t.points.size(); ++q) {
      const Mat32 gy = evaluate(y, c, t.points[q]).gradient;
      out[c] += t.weights[q] * gy.transpose() * gy;
    }
  }
  return out;
}

double isometry_defect(const Field& y) {
  const auto metric = cell_metric_integrals(y);
  double d = 0.0;
  for (std::size_t c = 0; c < metric.size(); ++c) {
    double area = 0.0;
    for (double w : y.space->cell_table(c).weights) area += w;
    d += (metric[c] - area * Mat2::Identity()).norm();
  }
  return d;
}

double energy(const Field& y, const AssembledForms& f) {
  const Vector& Y = y.coeffs;
  return 0.5 * (f.A0.quadratic_form(Y) - 2.0 * Y.dot(f.l_bc) + f.c_bc) - Y.dot(f.l_f);
}

double energy_direct(const Field& y, const Penalty& p, const Vec3& force) {
  const DgSpace& space = *y.space;
  double bending = 0.0, load = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto& t = space.cell_table(c);
    for (std::size_t q = 0; q < t.points.size(); ++q) {
      const PointValue v = evaluate(y, c, t.points[q]);
      for (int k = 0; k < 3; ++k) bending += t.weights[q] * v.hessian[k].squaredNorm();
      load += t.weights[q] * force.dot(v.value);
    }
  }
  double skeleton = 0.0;
  for (const EdgeInfo* e : space.mesh().skeleton()) {
    const EdgeTable& et = space.edge_table(*e);
    const Point2 mu = e->unit_normal;
    const double h = e->length;
    for (std::size_t q = 0; q < et.minus.points.size(); ++q) {
      const PointValue m = evaluate(y, e->cell_minus, et.minus.points[q]);
      Vec3 jump = m.value;
      Mat32 gjump = m.gradient;
      Mat32 dmu_grad;
      Vec3 dmu_lap;
      for (int k = 0; k < 3; ++k) {
        dmu_grad.row(k) = (m.hessian[k] * mu).transpose();
        dmu_lap(k) = m.grad_laplacian.row(k).dot(mu);
      }
      if (e->cell_plus) {
        const PointValue pl = evaluate(y, *e->cell_plus, et.plus.points[q]);
        jump -= pl.value;
        gjump -= pl.gradient;
        for (int k = 0; k < 3; ++k) {
          dmu_grad.row(k) = 0.5 * (dmu_grad.row(k) + (pl.hessian[k] * mu).transpose());
          dmu_lap(k) = 0.5 * (dmu_lap(k) + pl.grad_laplacian.row(k).dot(mu));
        }
      } else {
        jump -= y.data.value(et.minus.points[q].physical);
        gjump -= y.data.gradient(et.minus.points[q].physical);
      }
      skeleton += et.minus.weights[q] *
                  (-2.0 * dmu_grad.cwiseProduct(gjump).sum() + 2.0 * dmu_lap.dot(jump) +
                   p.gamma1 / h * gjump.squaredNorm() + p.gamma0 / (h * h * h) * jump.squaredNorm());
    }
  }
  return 0.5 * (bending + skeleton) - load;
}

namespace {

// Traces of y on one side of an edge: value, gradient, D^2 y mu, grad Lap y . mu.
struct FieldTrace {
  Vec3 value;
  Mat32 gradient;
  Mat32 dmu_grad;
  Vec3 dmu_lap;
};

FieldTrace field_trace(const Field& y, std::size_t cell, const MappedDerivatives& d, const Point2& mu) {
  const PointValue v = evaluate(y, cell, d);
  FieldTrace t{v.value, v.gradient, Mat32::Zero(), Vec3::Zero()};
  for (int k = 0; k < 3; ++k) {
    t.dmu_grad.row(k) = (v.hessian[k] * mu).transpose();
    t.dmu_lap(k) = v.grad_laplacian.row(k).dot(mu);
  }
  return t;
}

// Edge part of a_h(y, phi_i) for the basis of the cells next to the edge,
// as a 3 x (sides * n) block.
MatrixXd edge_action(const Field& y, const EdgeTable& et, const Penalty& p) {
  const EdgeInfo& e = *et.edge;
  const DgSpace& space = *y.space;
  const int n = space.local_size();
  const bool interior = !e.is_boundary();
  const double avg = interior ? 0.5 : 1.0;
  const double h = e.length;
  const Point2 mu = e.unit_normal;
  MatrixXd out = MatrixXd::Zero(3, interior ? 2 * n : n);
  for (std::size_t q = 0; q < et.minus.points.size(); ++q) {
    const FieldTrace m = field_trace(y, e.cell_minus, et.minus.points[q], mu);
    Vec3 jump = m.value;
    Mat32 gjump = m.gradient;
    Mat32 dmu_grad = m.dmu_grad;
    Vec3 dmu_lap = m.dmu_lap;
    if (interior) {
      const FieldTrace pl = field_trace(y, *e.cell_plus, et.plus.points[q], mu);
      jump -= pl.value;
      gjump -= pl.gradient;
      dmu_grad = 0.5 * (dmu_grad + pl.dmu_grad);
      dmu_lap = 0.5 * (dmu_lap + pl.dmu_lap);
    } else {
      jump -= y.data.value(et.minus.points[q].physical);
      gjump -= y.data.gradient(et.minus.points[q].physical);
    }
    const double w = et.minus.weights[q];
    for (int side = 0; side < (interior ? 2 : 1); ++side) {
      const auto& d = side == 0 ? et.minus.points[q] : et.plus.points[q];
      for (int i = 0; i < n; ++i) {
        const SideTrace t = side_trace(d, i, mu, side == 0 ? 1.0 : -1.0, avg);
        for (int k = 0; k < 3; ++k) {
          const Point2 gj = gjump.row(k).transpose();
          const Point2 dg = dmu_grad.row(k).transpose();
          out(k, side * n + i) +=
              w * (-dg.dot(t.grad_jump) - t.avg_dmu_grad.dot(gj) + jump(k) * t.avg_dmu_lap + t.jump * dmu_lap(k) +
                   p.gamma1 / h * gj.dot(t.grad_jump) + p.gamma0 / (h * h * h) * jump(k) * t.jump);
        }
      }
    }
  }
  return out;
}

}  // namespace

Vector ah_action_direct(const Field& y, const Penalty& p, Execution exec) {
  const DgSpace& space = *y.space;
  const int n = space.local_size();
  const long nc = static_cast<long>(space.mesh().num_cells());
  Vector r = Vector::Zero(static_cast<long>(space.size()));
  // Cells own disjoint blocks of r.
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (long c = 0; c < nc; ++c) {
    const auto cell = static_cast<std::size_t>(c);
    const auto& t = space.cell_table(cell);
    for (std::size_t q = 0; q < t.points.size(); ++q) {
      const PointValue v = evaluate(y, cell, t.points[q]);
      for (int k = 0; k < 3; ++k)
        for (int i = 0; i < n; ++i)
          r(static_cast<long>(space.index(cell, k, i))) +=
              t.weights[q] * v.hessian[k].cwiseProduct(t.points[q].hessians[i]).sum();
    }
  }
  const auto skeleton = space.mesh().skeleton();
  const long ne = static_cast<long>(skeleton.size());
  std::vector<MatrixXd> blocks(static_cast<std::size_t>(ne));
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (long i = 0; i < ne; ++i)
    blocks[static_cast<std::size_t>(i)] = edge_action(y, space.edge_table(*skeleton[static_cast<std::size_t>(i)]), p);
  for (long i = 0; i < ne; ++i) {
    const EdgeInfo& e = *skeleton[static_cast<std::size_t>(i)];
    const MatrixXd& b = blocks[static_cast<std::size_t>(i)];
    for (int side = 0; side < b.cols() / n; ++side) {
      const std::size_t cell = side == 0 ? e.cell_minus : *e.cell_plus;
      for (int k = 0; k < 3; ++k)
        r.segment(static_cast<long>(space.index(cell, k, 0)), n) += b.block(k, side * n, 1, n).transpose();
    }
  }
  return r;
}

Vector energy_gradient(const Field& y, const AssembledForms& f) {
  return f.A0.multiply(y.coeffs) - f.l_bc - f.l_f;
}

}  // namespace platedg
