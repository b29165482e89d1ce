#pragma once

#include <vector>

#include "platedg/dgspace.hpp"
#include "platedg/linalg.hpp"
#include "platedg/parallel.hpp"

namespace platedg {

struct Penalty {
  double gamma0 = 5000.0;  // value jumps, weighted by h_e^{-3}
  double gamma1 = 1100.0;  // gradient jumps, weighted by h_e^{-1}
};

/// Data-dependent part of a_h: for y with boundary jumps (y - g, grad y - Phi),
///   a_h(y, y) = Y^T A0 Y - 2 Y^T l_bc + c_bc.
struct BoundaryTerms {
  Vector l_bc;
  double c_bc = 0.0;
};

struct AssembledForms {
  SparseMatrix A0;  // a_h with homogeneous boundary jumps
  SparseMatrix G;   // discrete H^2 inner product
  SparseMatrix M;   // L^2 mass
  Vector l_bc;
  double c_bc = 0.0;
  Vector l_f;       // (f, v)
  Penalty penalty;
};

/// Interior-penalty bilinear form with Nitsche boundary terms.
SparseMatrix assemble_ah_matrix(const DgSpace& space, const Penalty& p, Execution exec = Execution::parallel);
BoundaryTerms assemble_boundary_terms(const DgSpace& space, const Penalty& p, const BoundaryData& data);

SparseMatrix assemble_h2_metric(const DgSpace& space, Execution exec = Execution::parallel);
SparseMatrix assemble_mass(const DgSpace& space, Execution exec = Execution::parallel);
Vector assemble_load(const DgSpace& space, const Vec3& force);

AssembledForms assemble_forms(const DgSpace& space, const Penalty& p, const BoundaryData& data,
                              const Vec3& force, Execution exec = Execution::parallel);

/// Linearized isometry constraint at y: three rows per cell, for the
/// (1,1), (1,2) and (2,2) entries of int_T grad(v)^T grad(y) + grad(y)^T grad(v).
SparseMatrix constraint_operator(const Field& y, Execution exec = Execution::parallel);

/// int_T grad(y)^T grad(y) for every cell.
std::vector<Mat2> cell_metric_integrals(const Field& y);

/// sum_T | int_T grad(y)^T grad(y) - I |_F.
double isometry_defect(const Field& y);

/// E_h = 1/2 (Y^T A0 Y - 2 Y^T l_bc + c_bc) - Y^T l_f. The forms must have
/// been assembled with the field's boundary data.
double energy(const Field& y, const AssembledForms& forms);

/// E_h from cell and edge quadrature of the Hessians, jumps and averages.
/// Avoids the cancellation between the large penalty entries of A0 and the
/// boundary terms, so it is the accurate choice for small energy differences.
double energy_direct(const Field& y, const Penalty& p, const Vec3& force);

/// a_h(y, .) as a vector, assembled from the jumps of y (boundary jumps
/// subtract the field's data). Equals A0 Y - l_bc without its cancellation.
Vector ah_action_direct(const Field& y, const Penalty& p, Execution exec = Execution::parallel);

/// a_h(y, .) - (f, .) as a vector: the gradient of E_h.
Vector energy_gradient(const Field& y, const AssembledForms& forms);

}  // namespace platedg
