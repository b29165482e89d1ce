#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "platedg/assembly.hpp"

namespace platedg {

/// Per-cell L2-orthonormal basis of { D^2 w : w in V_h(T) }.
///
/// Row p of coefficients(cell) expresses psi_p = sum_m c_pm D^2 phi_m. The
/// basis comes from an eigen-decomposition of the Gram matrix of the basis
/// Hessians; eigenvalues below rank_tol times the largest are dropped.
class HessianBasis {
public:
  explicit HessianBasis(const DgSpace& space, double rank_tol = 1e-10);

  const DgSpace& space() const { return *space_; }
  int rank(std::size_t cell) const { return static_cast<int>(coeffs_[cell].rows()); }
  const Eigen::MatrixXd& coefficients(std::size_t cell) const { return coeffs_[cell]; }
  /// Gram matrix int_T D^2 phi_m : D^2 phi_n.
  const Eigen::MatrixXd& gram(std::size_t cell) const { return gram_[cell]; }

  /// psi_p at cell quadrature point q.
  Mat2 value(std::size_t cell, std::size_t q, int p) const;

private:
  const DgSpace* space_;
  std::vector<Eigen::MatrixXd> coeffs_;
  std::vector<Eigen::MatrixXd> gram_;
};

/// Element of [H_h]^3 in the orthonormal basis; block per cell is 3 x rank.
struct HessianCoefficients {
  std::vector<Eigen::MatrixXd> cells;

  static HessianCoefficients zero(const HessianBasis& basis);
  double norm_squared() const;
  HessianCoefficients& operator+=(const HessianCoefficients& o);
  HessianCoefficients& operator-=(const HessianCoefficients& o);
};

/// Lifting supported on the cells adjacent to one edge.
struct LiftedField {
  std::vector<std::size_t> cells;
  std::vector<Eigen::MatrixXd> coeffs;  // 3 x rank per cell

  double norm_squared() const;
  void add_to(HessianCoefficients& global) const;
};

/// r_e: int r_e : tau = int_e [grad y] . {tau} mu for every tau in [H_h]^3.
LiftedField lift_gradient_jump(const HessianBasis& basis, const Field& y, const EdgeInfo& edge);
/// b_e: int b_e : tau = int_e [y] . {div tau} . mu.
LiftedField lift_value_jump(const HessianBasis& basis, const Field& y, const EdgeInfo& edge);

/// R_h = sum_e r_e and B_h = sum_e b_e over the skeleton.
HessianCoefficients lift_gradient_jumps(const HessianBasis& basis, const Field& y,
                                        Execution exec = Execution::parallel);
HessianCoefficients lift_value_jumps(const HessianBasis& basis, const Field& y,
                                     Execution exec = Execution::parallel);

/// L2 projection of the broken Hessian D^2_h y; exact up to the rank cut.
HessianCoefficients broken_hessian(const HessianBasis& basis, const Field& y);

struct DiscreteHessian {
  HessianCoefficients broken;  // D^2_h y
  HessianCoefficients R;
  HessianCoefficients B;
  HessianCoefficients H;       // D^2_h y - R + B

  /// H_h per cell, per quadrature point, per component.
  std::vector<std::vector<std::array<Mat2, 3>>> point_values(const HessianBasis& basis) const;
};

DiscreteHessian discrete_hessian(const HessianBasis& basis, const Field& y, Execution exec = Execution::parallel);

/// sum_T int_T tau : D^2 w with both sides evaluated by cell quadrature.
double pair_with_hessian(const HessianBasis& basis, const HessianCoefficients& tau, const Field& w);

/// Squared jump norms over the skeleton: sum_e h_e^-3 |[y]|^2_e and h_e^-1 |[grad y]|^2_e.
struct JumpNorms {
  double value = 0.0;
  double gradient = 0.0;
};
JumpNorms jump_norms(const Field& y);
/// int_e |[y]|^2 and int_e |[grad y]|^2 on one edge, unweighted.
JumpNorms edge_jump_norms(const Field& y, const EdgeInfo& edge);

/// Both sides of E_h - J_h = 1/2 |H_h|^2 - (f, y), with
/// J_h = -1/2 |B_h - R_h|^2 + gamma0/2 |h^-3/2 [y]|^2 + gamma1/2 |h^-1/2 [grad y]|^2.
struct EnergyHessianGap {
  double energy = 0.0;          // E_h
  double jump_functional = 0.0; // J_h
  double hessian_norm_sq = 0.0; // |H_h|^2
  double load = 0.0;            // (f, y)
  double lhs() const { return 0.5 * hessian_norm_sq - load; }
  double residual() const { return energy - jump_functional - lhs(); }
};

EnergyHessianGap energy_hessian_gap(const HessianBasis& basis, const Field& y, const AssembledForms& forms,
                                    Execution exec = Execution::parallel);

}  // namespace platedg
