#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "platedg/mesh.hpp"
#include "platedg/refelem.hpp"

namespace platedg {

using Vec3 = Eigen::Vector3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Vector = Eigen::VectorXd;

/// Dirichlet data (g, Phi) for the Nitsche boundary jumps, evaluated at
/// boundary quadrature points. Default-constructed data is homogeneous.
struct BoundaryData {
  std::function<Vec3(const Point2&)> g;
  std::function<Mat32(const Point2&)> Phi;

  static BoundaryData homogeneous() { return {}; }
  /// g = (x1, x2, 0), Phi = [I_2, 0]^T.
  static BoundaryData clamped_flat();

  bool is_homogeneous() const { return !g && !Phi; }
  Vec3 value(const Point2& x) const { return g ? g(x) : Vec3::Zero(); }
  Mat32 gradient(const Point2& x) const { return Phi ? Phi(x) : Mat32::Zero(); }
};

/// Basis data at the quadrature points of one cell or one edge side.
struct PointTable {
  std::vector<MappedDerivatives> points;
  std::vector<double> weights;  // JxW on cells, edge weight on edges
};

struct EdgeTable {
  const EdgeInfo* edge = nullptr;
  PointTable minus;
  PointTable plus;  // empty on boundary edges
};

/// Degree-k discontinuous space replicated over three components.
///
/// Global index of (cell, component, local) is (3 cell + component) n + local
/// with n = (k+1)^2. The constructor tabulates basis derivatives at every
/// cell and edge quadrature point; the space is immutable afterwards.
class DgSpace {
public:
  DgSpace(const Mesh& mesh, int degree = 2, int quad_points = 3);

  const Mesh& mesh() const { return *mesh_; }
  const RefBasis& basis() const { return basis_; }
  const QuadRule& quad() const { return quad_; }
  int quad_points() const { return quad_points_; }

  int local_size() const { return basis_.size(); }
  int dofs_per_cell() const { return 3 * basis_.size(); }
  std::size_t size() const { return mesh_->num_cells() * static_cast<std::size_t>(dofs_per_cell()); }

  std::size_t index(std::size_t cell, int comp, int local) const {
    return (3 * cell + static_cast<std::size_t>(comp)) * static_cast<std::size_t>(local_size()) +
           static_cast<std::size_t>(local);
  }
  struct Location {
    std::size_t cell;
    int comp;
    int local;
  };
  Location location(std::size_t global) const;

  const PointTable& cell_table(std::size_t cell) const { return cells_[cell]; }
  /// Table of an edge owned by this space's mesh.
  const EdgeTable& edge_table(const EdgeInfo& e) const;

private:
  const Mesh* mesh_;
  RefBasis basis_;
  int quad_points_;
  QuadRule quad_;
  std::vector<PointTable> cells_;
  std::vector<EdgeTable> interior_;
  std::vector<EdgeTable> boundary_;
};

/// Coefficients of y_h in [V_h^k]^3 together with the boundary data that
/// defines its jumps on Dirichlet edges.
struct Field {
  const DgSpace* space = nullptr;
  Vector coeffs;
  BoundaryData data;

  Field() = default;
  Field(const DgSpace& s, BoundaryData d = {}) : space(&s), coeffs(Vector::Zero(s.size())), data(std::move(d)) {}
  Field(const DgSpace& s, Vector c, BoundaryData d) : space(&s), coeffs(std::move(c)), data(std::move(d)) {}

  auto cell_block(std::size_t cell, int comp) const {
    return coeffs.segment(space->index(cell, comp, 0), space->local_size());
  }
};

/// Value, gradient and Hessian of a field at one point of a cell.
struct PointValue {
  Vec3 value = Vec3::Zero();
  Mat32 gradient = Mat32::Zero();
  std::array<Mat2, 3> hessian{Mat2::Zero(), Mat2::Zero(), Mat2::Zero()};
  Mat32 grad_laplacian = Mat32::Zero();  // row c: grad of Laplacian of component c
};

PointValue evaluate(const Field& f, std::size_t cell, const MappedDerivatives& d);
/// Evaluation at an arbitrary reference point (recomputes basis data).
PointValue evaluate_at(const Field& f, std::size_t cell, const Point2& ref);

/// Lagrange interpolant: nodal values of f at the mapped nodes.
Field interpolate(const DgSpace& space, const std::function<Vec3(const Point2&)>& f,
                  BoundaryData data = {});

/// Jumps and averages of a field at the Gauss points of one edge.
struct EdgeJumps {
  std::vector<Point2> points;
  std::vector<double> weights;
  Point2 normal;
  std::vector<Vec3> jump;            // [y]
  std::vector<Mat32> grad_jump;      // [grad y]
  std::vector<Mat32> avg_dmu_grad;   // {D^2 y mu}, row per component
  std::vector<Vec3> avg_dmu_lap;     // {grad(Lap y) . mu}
};

/// On Dirichlet boundary edges the jumps subtract the field's (g, Phi) and the
/// averages are one-sided. Evaluation is direct (not table based), so any
/// EdgeInfo with valid cells works, including reoriented copies.
EdgeJumps edge_jump_average(const Field& field, const EdgeInfo& edge, int quad_order);

/// Copy of an interior edge with the "-" and "+" sides exchanged.
EdgeInfo reversed(const EdgeInfo& edge);

/// Nodal truncation of the third component: y3 <- min(y3, ceiling).
Field l2_project_obstacle(const Field& field, double ceiling);

/// Squared L2 norm of one cell's restriction, and of the whole field.
double cell_l2_norm_squared(const Field& f, std::size_t cell);
double l2_norm_squared(const Field& f);

/// Largest y3 over all Lagrange coefficients.
double max_height(const Field& f);

}  // namespace platedg
