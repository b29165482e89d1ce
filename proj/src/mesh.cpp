#include "platedg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include "platedg/refelem.hpp"

namespace platedg {

GeometryMap::GeometryMap(std::size_t cell, std::array<Point2, 4> corners)
    : cell_(cell), corners_(corners) {
  mixed_ = corners_[0] - corners_[1] + corners_[2] - corners_[3];
}

Point2 GeometryMap::map(const Point2& r) const {
  const auto& c = corners_;
  return c[0] * (1 - r.x()) * (1 - r.y()) + c[1] * r.x() * (1 - r.y()) + c[2] * r.x() * r.y() +
         c[3] * (1 - r.x()) * r.y();
}

Mat2 GeometryMap::jacobian(const Point2& r) const {
  Mat2 J;
  J.col(0) = (corners_[1] - corners_[0]) + mixed_ * r.y();
  J.col(1) = (corners_[3] - corners_[0]) + mixed_ * r.x();
  return J;
}

Mat2 GeometryMap::inverse_jacobian(const Point2& r) const { return jacobian(r).inverse(); }

std::array<Mat2, 2> GeometryMap::inverse_second(const Point2& r) const {
  const Mat2 G = inverse_jacobian(r);
  // K_{alpha ij} = -sum_a G_{alpha a} m_a (G_{0i} G_{1j} + G_{1i} G_{0j})
  std::array<Mat2, 2> K;
  for (int alpha = 0; alpha < 2; ++alpha) {
    const double gm = G(alpha, 0) * mixed_(0) + G(alpha, 1) * mixed_(1);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        K[alpha](i, j) = -gm * (G(0, i) * G(1, j) + G(1, i) * G(0, j));
  }
  return K;
}

std::array<std::array<Mat2, 2>, 2> GeometryMap::inverse_third(const Point2& r) const {
  const Mat2 G = inverse_jacobian(r);
  const auto K = inverse_second(r);
  // H_{a beta gamma} = m_a when {beta, gamma} = {0, 1}, zero otherwise.
  auto H = [&](int a, int b, int c) { return b != c ? mixed_(a) : 0.0; };
  std::array<std::array<Mat2, 2>, 2> L;
  for (int alpha = 0; alpha < 2; ++alpha)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          double s = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int c = 0; c < 2; ++c) {
                const double h = H(a, b, c);
                if (h == 0.0) continue;
                s += K[alpha](a, k) * h * G(b, i) * G(c, j);
                s += G(alpha, a) * h * K[b](i, k) * G(c, j);
                s += G(alpha, a) * h * G(b, i) * K[c](j, k);
              }
          L[alpha][i](j, k) = -s;
        }
  return L;
}

std::optional<Point2> GeometryMap::pull_back(const Point2& x, double tol) const {
  Point2 r(0.5, 0.5);
  for (int it = 0; it < 50; ++it) {
    const Point2 res = map(r) - x;
    const Point2 step = jacobian(r).inverse() * res;
    r -= step;
    if (step.norm() < 1e-15) break;
  }
  if ((map(r) - x).norm() > 1e-10 * (1.0 + x.norm())) return std::nullopt;
  if (r.minCoeff() < -tol || r.maxCoeff() > 1.0 + tol) return std::nullopt;
  return r.cwiseMax(0.0).cwiseMin(1.0);
}

bool GeometryMap::is_parallelogram(double tol) const {
  const double scale = (corners_[2] - corners_[0]).norm();
  return mixed_.norm() <= tol * scale;
}

double Mesh::max_diameter() const {
  return cell_diameter.empty() ? 0.0 : *std::max_element(cell_diameter.begin(), cell_diameter.end());
}

double Mesh::cell_area(std::size_t cell, int quad_points) const {
  const auto rule = gauss_legendre(quad_points);
  double a = 0.0;
  for (std::size_t i = 0; i < rule.points.size(); ++i)
    for (std::size_t j = 0; j < rule.points.size(); ++j) {
      const Point2 r(rule.points[i], rule.points[j]);
      a += rule.weights[i] * rule.weights[j] * maps[cell].jacobian(r).determinant();
    }
  return a;
}

std::vector<const EdgeInfo*> Mesh::skeleton() const {
  std::vector<const EdgeInfo*> out;
  out.reserve(interior_edges.size() + boundary_edges.size());
  for (const auto& e : interior_edges) out.push_back(&e);
  for (std::size_t i = 0; i < boundary_edges.size(); ++i)
    if (dirichlet_marker[i]) out.push_back(&boundary_edges[i]);
  return out;
}

std::optional<std::pair<std::size_t, Point2>> Mesh::locate(const Point2& x) const {
  if (domain && nx > 0 && ny > 0) {
    // Fast path for the tensor grids: guess the cell, then check neighbours.
    const auto& d = *domain;
    const long gi = static_cast<long>(std::floor((x.x() - d.x0) / (d.x1 - d.x0) * nx));
    const long gj = static_cast<long>(std::floor((x.y() - d.y0) / (d.y1 - d.y0) * ny));
    for (long dj = -1; dj <= 1; ++dj)
      for (long di = -1; di <= 1; ++di) {
        const long i = gi + di, j = gj + dj;
        if (i < 0 || j < 0 || i >= static_cast<long>(nx) || j >= static_cast<long>(ny)) continue;
        const std::size_t c = static_cast<std::size_t>(j) * nx + static_cast<std::size_t>(i);
        if (auto r = maps[c].pull_back(x, 1e-12)) return std::make_pair(c, *r);
      }
  }
  for (std::size_t c = 0; c < cells.size(); ++c)
    if (auto r = maps[c].pull_back(x, 1e-12)) return std::make_pair(c, *r);
  return std::nullopt;
}

Point2 edge_reference_point(int local_edge, double t) {
  switch (local_edge) {
    case 0: return {t, 0.0};
    case 1: return {1.0, t};
    case 2: return {1.0 - t, 1.0};
    case 3: return {0.0, 1.0 - t};
  }
  throw std::invalid_argument("local edge index out of range");
}

namespace {

bool on_side(const Rect& d, Side s, const Point2& p) {
  const double tol = 1e-12 * std::max({1.0, std::abs(d.x0), std::abs(d.x1), std::abs(d.y0), std::abs(d.y1)});
  switch (s) {
    case Side::left: return std::abs(p.x() - d.x0) <= tol;
    case Side::right: return std::abs(p.x() - d.x1) <= tol;
    case Side::bottom: return std::abs(p.y() - d.y0) <= tol;
    case Side::top: return std::abs(p.y() - d.y1) <= tol;
  }
  return false;
}

// Fills maps, diameters and the oriented edge skeleton from vertices/cells.
void finalize(Mesh& m, const std::set<Side>& dirichlet_sides) {
  m.maps.clear();
  m.cell_diameter.clear();
  m.interior_edges.clear();
  m.boundary_edges.clear();
  m.dirichlet_marker.clear();
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    std::array<Point2, 4> corners;
    for (int k = 0; k < 4; ++k) corners[k] = m.vertices[m.cells[c][k]];
    m.maps.emplace_back(c, corners);
    m.cell_diameter.push_back(
        std::max((corners[2] - corners[0]).norm(), (corners[3] - corners[1]).norm()));
  }

  // Cells are visited in increasing order, so the first owner of an edge is
  // the lower cell index and becomes the "-" side.
  std::map<std::pair<std::size_t, std::size_t>, EdgeInfo> edges;
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    for (int l = 0; l < 4; ++l) {
      const std::size_t a = m.cells[c][l], b = m.cells[c][(l + 1) % 4];
      const std::pair<std::size_t, std::size_t> key{std::min(a, b), std::max(a, b)};
      auto it = edges.find(key);
      if (it == edges.end()) {
        EdgeInfo e;
        e.endpoints = {a, b};
        e.cell_minus = c;
        e.local_minus = l;
        const Point2 d = m.vertices[b] - m.vertices[a];
        e.length = d.norm();
        e.unit_normal = Point2(d.y(), -d.x()) / e.length;
        edges.emplace(key, e);
        order.push_back(key);
      } else {
        if (it->second.cell_plus)
          throw std::invalid_argument("edge shared by more than two cells");
        it->second.cell_plus = c;
        it->second.local_plus = l;
      }
    }
  }
  for (const auto& key : order) {
    const EdgeInfo& e = edges.at(key);
    if (e.cell_plus) {
      m.interior_edges.push_back(e);
    } else {
      bool dir = false;
      if (m.domain) {
        for (Side s : dirichlet_sides)
          dir = dir || (on_side(*m.domain, s, m.vertices[e.endpoints[0]]) &&
                        on_side(*m.domain, s, m.vertices[e.endpoints[1]]));
      }
      m.boundary_edges.push_back(e);
      m.boundary_edges.back().dirichlet = dir;
      m.dirichlet_marker.push_back(dir);
    }
  }
}

std::set<Side> dirichlet_sides_of(const Mesh& m) {
  std::set<Side> sides;
  if (!m.domain) return sides;
  for (std::size_t i = 0; i < m.boundary_edges.size(); ++i) {
    if (!m.dirichlet_marker[i]) continue;
    const auto& e = m.boundary_edges[i];
    for (Side s : {Side::left, Side::right, Side::bottom, Side::top})
      if (on_side(*m.domain, s, m.vertices[e.endpoints[0]]) &&
          on_side(*m.domain, s, m.vertices[e.endpoints[1]]))
        sides.insert(s);
  }
  return sides;
}

}  // namespace

Mesh build_rect_mesh(const Rect& domain, std::size_t nx, std::size_t ny,
                     const std::set<Side>& dirichlet_sides) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("build_rect_mesh: cell counts must be >= 1");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0))
    throw std::invalid_argument("build_rect_mesh: degenerate domain");
  Mesh m;
  m.domain = domain;
  m.nx = nx;
  m.ny = ny;
  const double hx = (domain.x1 - domain.x0) / static_cast<double>(nx);
  const double hy = (domain.y1 - domain.y0) / static_cast<double>(ny);
  for (std::size_t j = 0; j <= ny; ++j)
    for (std::size_t i = 0; i <= nx; ++i) {
      // Snap the last row/column to the exact domain boundary.
      const double x = i == nx ? domain.x1 : domain.x0 + static_cast<double>(i) * hx;
      const double y = j == ny ? domain.y1 : domain.y0 + static_cast<double>(j) * hy;
      m.vertices.emplace_back(x, y);
    }
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t v0 = j * (nx + 1) + i;
      m.cells.push_back({v0, v0 + 1, v0 + nx + 2, v0 + nx + 1});
    }
  finalize(m, dirichlet_sides);
  return m;
}

Mesh perturb_vertices(const Mesh& mesh, double amount, unsigned seed) {
  Mesh m;
  m.vertices = mesh.vertices;
  m.cells = mesh.cells;
  m.domain = mesh.domain;
  m.nx = 0;  // no longer a tensor grid; disable the fast locate path
  m.ny = 0;
  const auto sides = dirichlet_sides_of(mesh);

  std::vector<bool> on_boundary(m.vertices.size(), false);
  for (const auto& e : mesh.boundary_edges) {
    on_boundary[e.endpoints[0]] = true;
    on_boundary[e.endpoints[1]] = true;
  }
  // Local spacing: shortest incident edge.
  std::vector<double> spacing(m.vertices.size(), std::numeric_limits<double>::infinity());
  auto visit = [&](const EdgeInfo& e) {
    spacing[e.endpoints[0]] = std::min(spacing[e.endpoints[0]], e.length);
    spacing[e.endpoints[1]] = std::min(spacing[e.endpoints[1]], e.length);
  };
  for (const auto& e : mesh.interior_edges) visit(e);
  for (const auto& e : mesh.boundary_edges) visit(e);

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = std::min(amount, 0.24);
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    if (on_boundary[v]) continue;
    m.vertices[v] += a * spacing[v] * Point2(u(rng), u(rng));
  }
  finalize(m, sides);
  return m;
}

std::vector<TracePoint> edge_trace_points(const Mesh& mesh, const EdgeInfo& edge, EdgeSide side,
                                          int quad_order) {
  if (side == EdgeSide::plus && !edge.cell_plus)
    throw std::invalid_argument("edge_trace_points: boundary edge has no '+' side");
  const std::size_t cell = side == EdgeSide::minus ? edge.cell_minus : *edge.cell_plus;
  const int local = side == EdgeSide::minus ? edge.local_minus : edge.local_plus;
  // The minus cell traverses the edge from endpoints[0] to endpoints[1];
  // the plus cell traverses it in the opposite direction.
  const bool reversed = mesh.cells[cell][local] != edge.endpoints[0];
  const auto rule = gauss_legendre(quad_order);
  std::vector<TracePoint> out;
  out.reserve(rule.points.size());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double s = rule.points[q];
    const Point2 r = edge_reference_point(local, reversed ? 1.0 - s : s);
    out.push_back({r, mesh.maps[cell].map(r), rule.weights[q] * edge.length});
  }
  return out;
}

}  // namespace platedg
