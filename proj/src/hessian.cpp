#include "platedg/hessian.hpp"

#include <Eigen/Eigenvalues>

namespace platedg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

HessianBasis::HessianBasis(const DgSpace& space, double rank_tol) : space_(&space) {
  const std::size_t nc = space.mesh().num_cells();
  const int n = space.local_size();
  coeffs_.resize(nc);
  gram_.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& t = space.cell_table(c);
    MatrixXd G = MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < t.points.size(); ++q)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b) G(a, b) += t.weights[q] * t.points[q].hessians[a].cwiseProduct(t.points[q].hessians[b]).sum();
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G);
    const VectorXd& lam = eig.eigenvalues();
    const double cut = rank_tol * lam.maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
      if (lam(i) > cut) keep.push_back(i);
    MatrixXd C(static_cast<long>(keep.size()), n);
    for (std::size_t p = 0; p < keep.size(); ++p)
      C.row(static_cast<long>(p)) = eig.eigenvectors().col(keep[p]).transpose() / std::sqrt(lam(keep[p]));
    coeffs_[c] = std::move(C);
    gram_[c] = std::move(G);
  }
}

Mat2 HessianBasis::value(std::size_t cell, std::size_t q, int p) const {
  const auto& d = space_->cell_table(cell).points[q];
  Mat2 v = Mat2::Zero();
  for (int m = 0; m < space_->local_size(); ++m) v += coeffs_[cell](p, m) * d.hessians[m];
  return v;
}

HessianCoefficients HessianCoefficients::zero(const HessianBasis& basis) {
  HessianCoefficients h;
  const std::size_t nc = basis.space().mesh().num_cells();
  h.cells.reserve(nc);
  for (std::size_t c = 0; c < nc; ++c) h.cells.push_back(MatrixXd::Zero(3, basis.rank(c)));
  return h;
}

double HessianCoefficients::norm_squared() const {
  double s = 0.0;
  for (const auto& b : cells) s += b.squaredNorm();
  return s;
}

HessianCoefficients& HessianCoefficients::operator+=(const HessianCoefficients& o) {
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] += o.cells[c];
  return *this;
}

HessianCoefficients& HessianCoefficients::operator-=(const HessianCoefficients& o) {
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] -= o.cells[c];
  return *this;
}

double LiftedField::norm_squared() const {
  double s = 0.0;
  for (const auto& b : coeffs) s += b.squaredNorm();
  return s;
}

void LiftedField::add_to(HessianCoefficients& global) const {
  for (std::size_t i = 0; i < cells.size(); ++i) global.cells[cells[i]] += coeffs[i];
}

namespace {

struct TraceJumps {
  std::vector<Vec3> value;
  std::vector<Mat32> gradient;
};

// Jumps at the edge table points; Dirichlet boundary jumps subtract the data.
TraceJumps trace_jumps(const Field& y, const EdgeTable& et) {
  const EdgeInfo& e = *et.edge;
  TraceJumps j;
  for (std::size_t q = 0; q < et.minus.points.size(); ++q) {
    const PointValue m = evaluate(y, e.cell_minus, et.minus.points[q]);
    Vec3 v = m.value;
    Mat32 g = m.gradient;
    if (e.cell_plus) {
      const PointValue p = evaluate(y, *e.cell_plus, et.plus.points[q]);
      v -= p.value;
      g -= p.gradient;
    } else {
      v -= y.data.value(et.minus.points[q].physical);
      g -= y.data.gradient(et.minus.points[q].physical);
    }
    j.value.push_back(v);
    j.gradient.push_back(g);
  }
  return j;
}

enum class LiftKind { gradient, value };

LiftedField lift(const HessianBasis& basis, const Field& y, const EdgeInfo& edge, LiftKind kind) {
  LiftedField out;
  if (edge.is_boundary() && !edge.dirichlet) return out;
  const DgSpace& space = basis.space();
  const EdgeTable& et = space.edge_table(edge);
  const TraceJumps jumps = trace_jumps(y, et);
  const double avg = edge.is_boundary() ? 1.0 : 0.5;
  const Point2 mu = edge.unit_normal;
  const int n = space.local_size();

  auto side = [&](std::size_t cell, const PointTable& table) {
    const MatrixXd& C = basis.coefficients(cell);
    MatrixXd coef = MatrixXd::Zero(3, C.rows());
    for (std::size_t q = 0; q < table.points.size(); ++q) {
      const auto& d = table.points[q];
      const double w = avg * table.weights[q];
      if (kind == LiftKind::gradient) {
        Eigen::Matrix<double, Eigen::Dynamic, 2> hmu(n, 2);
        for (int m = 0; m < n; ++m) hmu.row(m) = (d.hessians[m] * mu).transpose();
        const Eigen::Matrix<double, Eigen::Dynamic, 2> psi_mu = C * hmu;
        for (int c = 0; c < 3; ++c) coef.row(c) += w * (psi_mu * jumps.gradient[q].row(c).transpose()).transpose();
      } else {
        VectorXd dmu(n);
        for (int m = 0; m < n; ++m) dmu(m) = (d.thirds[m][0] + d.thirds[m][2]) * mu(0) + (d.thirds[m][1] + d.thirds[m][3]) * mu(1);
        const VectorXd div_mu = C * dmu;
        for (int c = 0; c < 3; ++c) coef.row(c) += w * jumps.value[q](c) * div_mu.transpose();
      }
    }
    out.cells.push_back(cell);
    out.coeffs.push_back(std::move(coef));
  };
  side(edge.cell_minus, et.minus);
  if (edge.cell_plus) side(*edge.cell_plus, et.plus);
  return out;
}

HessianCoefficients lift_all(const HessianBasis& basis, const Field& y, LiftKind kind, Execution exec) {
  const auto skeleton = basis.space().mesh().skeleton();
  const long ne = static_cast<long>(skeleton.size());
  HessianCoefficients total = HessianCoefficients::zero(basis);
  if (exec == Execution::serial) {
    for (const EdgeInfo* e : skeleton) lift(basis, y, *e, kind).add_to(total);
    return total;
  }
  std::vector<LiftedField> parts(static_cast<std::size_t>(ne));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < ne; ++i)
    parts[static_cast<std::size_t>(i)] = lift(basis, y, *skeleton[static_cast<std::size_t>(i)], kind);
  for (const auto& p : parts) p.add_to(total);
  return total;
}

}  // namespace

LiftedField lift_gradient_jump(const HessianBasis& basis, const Field& y, const EdgeInfo& edge) {
  return lift(basis, y, edge, LiftKind::gradient);
}

LiftedField lift_value_jump(const HessianBasis& basis, const Field& y, const EdgeInfo& edge) {
  return lift(basis, y, edge, LiftKind::value);
}

HessianCoefficients lift_gradient_jumps(const HessianBasis& basis, const Field& y, Execution exec) {
  return lift_all(basis, y, LiftKind::gradient, exec);
}

HessianCoefficients lift_value_jumps(const HessianBasis& basis, const Field& y, Execution exec) {
  return lift_all(basis, y, LiftKind::value, exec);
}

HessianCoefficients broken_hessian(const HessianBasis& basis, const Field& y) {
  HessianCoefficients h = HessianCoefficients::zero(basis);
  for (std::size_t cell = 0; cell < h.cells.size(); ++cell) {
    const MatrixXd CG = basis.coefficients(cell) * basis.gram(cell);
    for (int c = 0; c < 3; ++c) h.cells[cell].row(c) = (CG * y.cell_block(cell, c)).transpose();
  }
  return h;
}

std::vector<std::vector<std::array<Mat2, 3>>> DiscreteHessian::point_values(const HessianBasis& basis) const {
  std::vector<std::vector<std::array<Mat2, 3>>> out(H.cells.size());
  for (std::size_t cell = 0; cell < H.cells.size(); ++cell) {
    const std::size_t nq = basis.space().cell_table(cell).points.size();
    out[cell].assign(nq, {Mat2::Zero(), Mat2::Zero(), Mat2::Zero()});
    for (std::size_t q = 0; q < nq; ++q)
      for (int p = 0; p < basis.rank(cell); ++p) {
        const Mat2 psi = basis.value(cell, q, p);
        for (int c = 0; c < 3; ++c) out[cell][q][c] += H.cells[cell](c, p) * psi;
      }
  }
  return out;
}

DiscreteHessian discrete_hessian(const HessianBasis& basis, const Field& y, Execution exec) {
  DiscreteHessian d;
  d.broken = broken_hessian(basis, y);
  d.R = lift_gradient_jumps(basis, y, exec);
  d.B = lift_value_jumps(basis, y, exec);
  d.H = d.broken;
  d.H -= d.R;
  d.H += d.B;
  return d;
}

double pair_with_hessian(const HessianBasis& basis, const HessianCoefficients& tau, const Field& w) {
  double s = 0.0;
  const DgSpace& space = basis.space();
  for (std::size_t cell = 0; cell < tau.cells.size(); ++cell) {
    const auto& t = space.cell_table(cell);
    for (std::size_t q = 0; q < t.points.size(); ++q) {
      const PointValue pw = evaluate(w, cell, t.points[q]);
      for (int p = 0; p < basis.rank(cell); ++p) {
        const Mat2 psi = basis.value(cell, q, p);
        for (int c = 0; c < 3; ++c) s += t.weights[q] * tau.cells[cell](c, p) * psi.cwiseProduct(pw.hessian[c]).sum();
      }
    }
  }
  return s;
}

JumpNorms edge_jump_norms(const Field& y, const EdgeInfo& edge) {
  JumpNorms n;
  if (edge.is_boundary() && !edge.dirichlet) return n;
  const EdgeTable& et = y.space->edge_table(edge);
  const TraceJumps j = trace_jumps(y, et);
  for (std::size_t q = 0; q < j.value.size(); ++q) {
    n.value += et.minus.weights[q] * j.value[q].squaredNorm();
    n.gradient += et.minus.weights[q] * j.gradient[q].squaredNorm();
  }
  return n;
}

JumpNorms jump_norms(const Field& y) {
  JumpNorms total;
  for (const EdgeInfo* e : y.space->mesh().skeleton()) {
    const JumpNorms n = edge_jump_norms(y, *e);
    const double h = e->length;
    total.value += n.value / (h * h * h);
    total.gradient += n.gradient / h;
  }
  return total;
}

EnergyHessianGap energy_hessian_gap(const HessianBasis& basis, const Field& y, const AssembledForms& forms,
                                    Execution exec) {
  EnergyHessianGap g;
  g.energy = energy(y, forms);
  const DiscreteHessian d = discrete_hessian(basis, y, exec);
  HessianCoefficients bmr = d.B;
  bmr -= d.R;
  const JumpNorms jn = jump_norms(y);
  g.jump_functional =
      -0.5 * bmr.norm_squared() + 0.5 * forms.penalty.gamma0 * jn.value + 0.5 * forms.penalty.gamma1 * jn.gradient;
  g.hessian_norm_sq = d.H.norm_squared();
  g.load = y.coeffs.dot(forms.l_f);
  return g;
}

}  // namespace platedg
