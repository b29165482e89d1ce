#include "platedg/dgspace.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace platedg {

BoundaryData BoundaryData::clamped_flat() {
  BoundaryData d;
  d.g = [](const Point2& x) { return Vec3(x.x(), x.y(), 0.0); };
  d.Phi = [](const Point2&) {
    Mat32 P = Mat32::Zero();
    P(0, 0) = 1.0;
    P(1, 1) = 1.0;
    return P;
  };
  return d;
}

namespace {

PointTable trace_table(const Mesh& mesh, const RefBasis& basis, const EdgeInfo& e, EdgeSide side,
                       int quad_points) {
  PointTable t;
  const std::size_t cell = side == EdgeSide::minus ? e.cell_minus : *e.cell_plus;
  for (const auto& tp : edge_trace_points(mesh, e, side, quad_points)) {
    t.points.push_back(eval_mapped_derivatives(basis, mesh.maps[cell], tp.reference, 3));
    t.weights.push_back(tp.weight);
  }
  return t;
}

}  // namespace

DgSpace::DgSpace(const Mesh& mesh, int degree, int quad_points)
    : mesh_(&mesh), basis_(degree), quad_points_(quad_points), quad_(quadrature(quad_points)) {
  cells_.resize(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    auto& t = cells_[c];
    for (std::size_t q = 0; q < quad_.size(); ++q) {
      t.points.push_back(eval_mapped_derivatives(basis_, mesh.maps[c], quad_.points[q], 2));
      t.weights.push_back(quad_.weights[q] * mesh.maps[c].jacobian(quad_.points[q]).determinant());
    }
  }
  for (const auto& e : mesh.interior_edges)
    interior_.push_back({&e, trace_table(mesh, basis_, e, EdgeSide::minus, quad_points),
                         trace_table(mesh, basis_, e, EdgeSide::plus, quad_points)});
  for (const auto& e : mesh.boundary_edges)
    boundary_.push_back({&e, trace_table(mesh, basis_, e, EdgeSide::minus, quad_points), {}});
}

DgSpace::Location DgSpace::location(std::size_t global) const {
  const auto n = static_cast<std::size_t>(local_size());
  const std::size_t block = global / n;
  return {block / 3, static_cast<int>(block % 3), static_cast<int>(global % n)};
}

const EdgeTable& DgSpace::edge_table(const EdgeInfo& e) const {
  const auto& in = mesh_->interior_edges;
  const auto& bd = mesh_->boundary_edges;
  if (!in.empty() && &e >= in.data() && &e < in.data() + in.size())
    return interior_[static_cast<std::size_t>(&e - in.data())];
  if (!bd.empty() && &e >= bd.data() && &e < bd.data() + bd.size())
    return boundary_[static_cast<std::size_t>(&e - bd.data())];
  throw std::invalid_argument("edge_table: edge does not belong to this space's mesh");
}

PointValue evaluate(const Field& f, std::size_t cell, const MappedDerivatives& d) {
  PointValue v;
  const int n = f.space->local_size();
  for (int c = 0; c < 3; ++c) {
    const auto coef = f.cell_block(cell, c);
    for (int i = 0; i < n; ++i) {
      const double a = coef(i);
      v.value(c) += a * d.values[i];
      if (!d.gradients.empty()) v.gradient.row(c) += a * d.gradients[i].transpose();
      if (!d.hessians.empty()) v.hessian[c] += a * d.hessians[i];
      if (!d.thirds.empty()) {
        const auto& t = d.thirds[i];
        v.grad_laplacian(c, 0) += a * (t[0] + t[2]);
        v.grad_laplacian(c, 1) += a * (t[1] + t[3]);
      }
    }
  }
  return v;
}

PointValue evaluate_at(const Field& f, std::size_t cell, const Point2& ref) {
  const auto d = eval_mapped_derivatives(f.space->basis(), f.space->mesh().maps[cell], ref, 3);
  return evaluate(f, cell, d);
}

Field interpolate(const DgSpace& space, const std::function<Vec3(const Point2&)>& f,
                  BoundaryData data) {
  Field out(space, std::move(data));
  const auto& nodes = space.basis().nodes();
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c)
    for (int i = 0; i < space.local_size(); ++i) {
      const Vec3 v = f(space.mesh().maps[c].map(nodes[i]));
      for (int k = 0; k < 3; ++k) out.coeffs(space.index(c, k, i)) = v(k);
    }
  return out;
}

EdgeJumps edge_jump_average(const Field& field, const EdgeInfo& edge, int quad_order) {
  const DgSpace& space = *field.space;
  const Mesh& mesh = space.mesh();
  EdgeJumps out;
  out.normal = edge.unit_normal;
  const Point2 mu = edge.unit_normal;
  const auto minus = edge_trace_points(mesh, edge, EdgeSide::minus, quad_order);
  std::vector<TracePoint> plus;
  if (edge.cell_plus) plus = edge_trace_points(mesh, edge, EdgeSide::plus, quad_order);

  for (std::size_t q = 0; q < minus.size(); ++q) {
    const PointValue vm = evaluate_at(field, edge.cell_minus, minus[q].reference);
    Vec3 jump = vm.value;
    Mat32 gjump = vm.gradient;
    Mat32 dmu_grad;
    Vec3 dmu_lap;
    for (int c = 0; c < 3; ++c) {
      dmu_grad.row(c) = (vm.hessian[c] * mu).transpose();
      dmu_lap(c) = vm.grad_laplacian.row(c).dot(mu);
    }
    if (edge.cell_plus) {
      const PointValue vp = evaluate_at(field, *edge.cell_plus, plus[q].reference);
      jump -= vp.value;
      gjump -= vp.gradient;
      for (int c = 0; c < 3; ++c) {
        dmu_grad.row(c) = 0.5 * (dmu_grad.row(c) + (vp.hessian[c] * mu).transpose());
        dmu_lap(c) = 0.5 * (dmu_lap(c) + vp.grad_laplacian.row(c).dot(mu));
      }
    } else if (edge.dirichlet) {
      jump -= field.data.value(minus[q].physical);
      gjump -= field.data.gradient(minus[q].physical);
    }
    out.points.push_back(minus[q].physical);
    out.weights.push_back(minus[q].weight);
    out.jump.push_back(jump);
    out.grad_jump.push_back(gjump);
    out.avg_dmu_grad.push_back(dmu_grad);
    out.avg_dmu_lap.push_back(dmu_lap);
  }
  return out;
}

EdgeInfo reversed(const EdgeInfo& edge) {
  if (!edge.cell_plus) throw std::invalid_argument("reversed: boundary edges have a fixed orientation");
  EdgeInfo r = edge;
  r.cell_minus = *edge.cell_plus;
  r.cell_plus = edge.cell_minus;
  r.local_minus = edge.local_plus;
  r.local_plus = edge.local_minus;
  r.unit_normal = -edge.unit_normal;
  return r;
}

Field l2_project_obstacle(const Field& field, double ceiling) {
  Field out = field;
  const DgSpace& s = *field.space;
  for (std::size_t c = 0; c < s.mesh().num_cells(); ++c)
    for (int i = 0; i < s.local_size(); ++i) {
      double& v = out.coeffs(s.index(c, 2, i));
      v = std::min(v, ceiling);
    }
  return out;
}

double cell_l2_norm_squared(const Field& f, std::size_t cell) {
  const auto& t = f.space->cell_table(cell);
  double s = 0.0;
  for (std::size_t q = 0; q < t.points.size(); ++q) {
    Vec3 v = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
      const auto coef = f.cell_block(cell, c);
      for (int i = 0; i < f.space->local_size(); ++i) v(c) += coef(i) * t.points[q].values[i];
    }
    s += t.weights[q] * v.squaredNorm();
  }
  return s;
}

double l2_norm_squared(const Field& f) {
  double s = 0.0;
  for (std::size_t c = 0; c < f.space->mesh().num_cells(); ++c) s += cell_l2_norm_squared(f, c);
  return s;
}

double max_height(const Field& f) {
  const DgSpace& s = *f.space;
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < s.mesh().num_cells(); ++c) m = std::max(m, f.cell_block(c, 2).maxCoeff());
  return m;
}

}  // namespace platedg
