#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "platedg/mesh.hpp"

namespace platedg {

/// Gauss-Legendre rule with n points on [0,1].
struct GaussRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

GaussRule1D gauss_legendre(int n);

/// Tensor Gauss rule on the reference square plus the matching edge rule.
struct QuadRule {
  std::vector<Point2> points;
  std::vector<double> weights;
  GaussRule1D edge;

  std::size_t size() const { return points.size(); }
};

/// n points per direction; exact on Q_{2n-1}.
QuadRule quadrature(int points_per_direction);

/// Symmetric third-derivative tensor of a scalar in 2D, stored by the number
/// of y-derivatives: d_xxx, d_xxy, d_xyy, d_yyy.
using Third = std::array<double, 4>;

inline double third_entry(const Third& t, int i, int j, int k) { return t[i + j + k]; }

/// Tensor-product Lagrange basis of degree k on [0,1]^2 with equispaced
/// nodes including the endpoints. Local index of node (a, b) is a + (k+1) b.
class RefBasis {
public:
  explicit RefBasis(int degree = 2);

  int degree() const { return degree_; }
  int size() const { return (degree_ + 1) * (degree_ + 1); }
  const std::vector<Point2>& nodes() const { return nodes_; }

  double value(int i, const Point2& p) const;
  /// Reference derivative with (ox, oy) derivatives in x-hat and y-hat.
  double derivative(int i, int ox, int oy, const Point2& p) const;

private:
  double eval1d(int node, int order, double t) const;

  int degree_;
  std::vector<Point2> nodes_;
  // Monomial coefficients of the 1D Lagrange polynomials.
  std::vector<std::vector<double>> coeffs_;
};

/// Physical derivatives of every basis function at one point.
struct MappedDerivatives {
  Point2 physical = Point2::Zero();
  std::vector<double> values;
  std::vector<Point2> gradients;
  std::vector<Mat2> hessians;
  std::vector<Third> thirds;
};

class UnsupportedOrder : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Pushes reference derivatives through the geometry map with the chain rule,
/// including the D^2F^{-1} and D^3F^{-1} terms of non-affine maps.
MappedDerivatives eval_mapped_derivatives(const RefBasis& basis, const GeometryMap& map,
                                          const Point2& ref_point, int max_order);

}  // namespace platedg
