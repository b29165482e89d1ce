#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace platedg {

using Point2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class Side { left, right, bottom, top };

/// Axis-aligned rectangle (x0,x1) x (y0,y1).
struct Rect {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
};

/// One edge of the skeleton. The normal points from the "-" cell to the
/// "+" cell, or outward on the boundary.
struct EdgeInfo {
  std::array<std::size_t, 2> endpoints{};
  std::size_t cell_minus = 0;
  std::optional<std::size_t> cell_plus;
  Point2 unit_normal = Point2::Zero();
  double length = 0.0;
  /// Local edge number (0 bottom, 1 right, 2 top, 3 left of the reference
  /// square) on the "-" and "+" cells.
  int local_minus = 0;
  int local_plus = -1;
  /// Boundary edge on the Dirichlet part of the boundary.
  bool dirichlet = false;

  bool is_boundary() const { return !cell_plus.has_value(); }
};

/// Bilinear map from the reference square [0,1]^2 onto a quadrilateral.
///
/// Corners are ordered counter-clockwise starting at the image of (0,0).
/// Second and third derivatives of the inverse map are available in
/// physical coordinates, which is what the chain rule for mapped basis
/// functions needs.
class GeometryMap {
public:
  GeometryMap() = default;
  GeometryMap(std::size_t cell, std::array<Point2, 4> corners);

  std::size_t cell() const { return cell_; }
  const std::array<Point2, 4>& corners() const { return corners_; }

  Point2 map(const Point2& ref) const;
  /// DF, entry (a, alpha) = dF_a / dxhat_alpha.
  Mat2 jacobian(const Point2& ref) const;
  /// The only nonzero second derivative of a bilinear map, d^2F/dxhat dyhat.
  Point2 mixed_second() const { return mixed_; }
  /// DF^{-1} at the physical image of ref: entry (alpha, i) = dxhat_alpha/dx_i.
  Mat2 inverse_jacobian(const Point2& ref) const;
  /// D^2 F^{-1}: result[alpha](i,j) = d^2 xhat_alpha / dx_i dx_j.
  std::array<Mat2, 2> inverse_second(const Point2& ref) const;
  /// D^3 F^{-1}: result[alpha][i](j,k) = d^3 xhat_alpha / dx_i dx_j dx_k.
  std::array<std::array<Mat2, 2>, 2> inverse_third(const Point2& ref) const;

  /// Newton inversion; returns nullopt when the point is not inside the cell.
  std::optional<Point2> pull_back(const Point2& x, double tol = 1e-12) const;

  bool is_parallelogram(double tol = 1e-14) const;

private:
  std::size_t cell_ = 0;
  std::array<Point2, 4> corners_{};
  Point2 mixed_ = Point2::Zero();
};

struct Mesh {
  std::vector<Point2> vertices;
  std::vector<std::array<std::size_t, 4>> cells;
  std::vector<EdgeInfo> interior_edges;
  std::vector<EdgeInfo> boundary_edges;
  std::vector<bool> dirichlet_marker;  // one per boundary edge
  std::vector<GeometryMap> maps;       // one per cell
  std::vector<double> cell_diameter;   // h_T

  /// Set when the mesh came from build_rect_mesh.
  std::optional<Rect> domain;
  std::size_t nx = 0, ny = 0;

  std::size_t num_cells() const { return cells.size(); }
  double max_diameter() const;
  double cell_area(std::size_t cell, int quad_points = 4) const;

  /// Interior edges followed by Dirichlet boundary edges: the set Gamma_h
  /// on which jumps and averages enter the bilinear forms.
  std::vector<const EdgeInfo*> skeleton() const;

  /// Cell containing x (first match), with its reference coordinates.
  std::optional<std::pair<std::size_t, Point2>> locate(const Point2& x) const;
};

/// Uniform nx-by-ny grid of rectangles. Boundary edges on the listed sides
/// are marked Dirichlet.
Mesh build_rect_mesh(const Rect& domain, std::size_t nx, std::size_t ny,
                     const std::set<Side>& dirichlet_sides);

/// Test utility: move interior vertices by up to `amount` times the local
/// spacing, keeping cells convex. Rebuilds geometry maps and edge data.
Mesh perturb_vertices(const Mesh& mesh, double amount, unsigned seed);

/// Reference point on the square for parameter t in [0,1] along local edge
/// `local_edge`, traversed counter-clockwise.
Point2 edge_reference_point(int local_edge, double t);

struct TracePoint {
  Point2 reference;  // in the cell's reference square
  Point2 physical;
  double weight;     // includes the edge length
};

enum class EdgeSide { minus, plus };

/// Gauss points along an edge seen from one side. Points with the same
/// index on the two sides are the same physical point.
std::vector<TracePoint> edge_trace_points(const Mesh& mesh, const EdgeInfo& edge,
                                          EdgeSide side, int quad_order);

}  // namespace platedg
