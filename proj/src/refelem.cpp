#include "platedg/refelem.hpp"

#include <cmath>
#include <numbers>

namespace platedg {

GaussRule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  GaussRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? x : p1;
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) {
      x = 0.0;
      dp = 1.0;
    }
    // Map [-1,1] to [0,1]; ascending order.
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n == 1) rule.weights[0] = 1.0;
  return rule;
}

QuadRule quadrature(int n) {
  if (n < 1) throw std::invalid_argument("quadrature: order hint must be >= 1");
  QuadRule q;
  q.edge = gauss_legendre(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      q.points.emplace_back(q.edge.points[i], q.edge.points[j]);
      q.weights.push_back(q.edge.weights[i] * q.edge.weights[j]);
    }
  return q;
}

RefBasis::RefBasis(int degree) : degree_(degree) {
  if (degree < 1) throw std::invalid_argument("RefBasis: degree must be >= 1");
  const int n = degree + 1;
  std::vector<double> t(n);
  for (int m = 0; m < n; ++m) t[m] = static_cast<double>(m) / degree;
  coeffs_.assign(n, std::vector<double>(n, 0.0));
  for (int m = 0; m < n; ++m) {
    std::vector<double> c{1.0};
    for (int l = 0; l < n; ++l) {
      if (l == m) continue;
      const double s = 1.0 / (t[m] - t[l]);
      std::vector<double> next(c.size() + 1, 0.0);
      for (std::size_t p = 0; p < c.size(); ++p) {
        next[p + 1] += c[p] * s;
        next[p] -= c[p] * t[l] * s;
      }
      c = std::move(next);
    }
    coeffs_[m] = c;
  }
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) nodes_.emplace_back(t[a], t[b]);
}

double RefBasis::eval1d(int node, int order, double t) const {
  const auto& c = coeffs_[node];
  double s = 0.0;
  for (int p = static_cast<int>(c.size()) - 1; p >= order; --p) {
    double f = 1.0;
    for (int q = 0; q < order; ++q) f *= p - q;
    s = s * t + f * c[p];
  }
  // Horner above accumulates in powers of t starting from t^(p-order).
  return s;
}

double RefBasis::value(int i, const Point2& p) const { return derivative(i, 0, 0, p); }

double RefBasis::derivative(int i, int ox, int oy, const Point2& p) const {
  const int n = degree_ + 1;
  return eval1d(i % n, ox, p.x()) * eval1d(i / n, oy, p.y());
}

MappedDerivatives eval_mapped_derivatives(const RefBasis& basis, const GeometryMap& map,
                                          const Point2& r, int max_order) {
  if (max_order < 0 || max_order > 3)
    throw UnsupportedOrder("eval_mapped_derivatives: derivative order must be in 0..3");
  const int nb = basis.size();
  MappedDerivatives out;
  out.physical = map.map(r);
  out.values.resize(nb);
  for (int i = 0; i < nb; ++i) out.values[i] = basis.value(i, r);
  if (max_order == 0) return out;

  const Mat2 G = map.inverse_jacobian(r);
  out.gradients.resize(nb);
  std::array<Mat2, 2> K{};
  std::array<std::array<Mat2, 2>, 2> L{};
  if (max_order >= 2) {
    K = map.inverse_second(r);
    out.hessians.resize(nb);
  }
  if (max_order >= 3) {
    L = map.inverse_third(r);
    out.thirds.resize(nb);
  }

  for (int b = 0; b < nb; ++b) {
    // Reference derivatives indexed by direction.
    double d1[2];
    double d2[2][2];
    double d3[2][2][2];
    for (int a = 0; a < 2; ++a) d1[a] = basis.derivative(b, a == 0, a == 1, r);
    out.gradients[b] = G.transpose() * Point2(d1[0], d1[1]);
    if (max_order < 2) continue;
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) d2[a][c] = basis.derivative(b, (a == 0) + (c == 0), (a == 1) + (c == 1), r);

    Mat2 H = Mat2::Zero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int a = 0; a < 2; ++a) {
          for (int c = 0; c < 2; ++c) s += d2[a][c] * G(a, i) * G(c, j);
          s += d1[a] * K[a](i, j);
        }
        H(i, j) = s;
      }
    out.hessians[b] = H;
    if (max_order < 3) continue;

    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c)
        for (int e = 0; e < 2; ++e) {
          const int nx = (a == 0) + (c == 0) + (e == 0);
          d3[a][c][e] = basis.derivative(b, nx, 3 - nx, r);
        }
    Third T{};
    const int idx[4][3] = {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    for (int m = 0; m < 4; ++m) {
      const int i = idx[m][0], j = idx[m][1], k = idx[m][2];
      double s = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int c = 0; c < 2; ++c) {
          for (int e = 0; e < 2; ++e) s += d3[a][c][e] * G(a, i) * G(c, j) * G(e, k);
          s += d2[a][c] * (K[a](i, k) * G(c, j) + G(a, i) * K[c](j, k) + K[a](i, j) * G(c, k));
        }
        s += d1[a] * L[a][i](j, k);
      }
      T[m] = s;
    }
    out.thirds[b] = T;
  }
  return out;
}

}  // namespace platedg
