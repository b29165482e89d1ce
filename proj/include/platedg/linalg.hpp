#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace platedg {

using Vector = Eigen::VectorXd;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
class SparseMatrix {
public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Duplicates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t i, std::size_t j) const;

  Vector multiply(const Vector& x) const;
  Vector multiply_transpose(const Vector& x) const;
  double quadratic_form(const Vector& x) const { return x.dot(multiply(x)); }

  /// this + s * other.
  SparseMatrix add(const SparseMatrix& other, double s = 1.0) const;
  SparseMatrix scaled(double s) const;
  SparseMatrix transpose() const;

  double max_abs() const;
  /// max |A_ij - A_ji|.
  double symmetry_defect() const;
  Eigen::MatrixXd dense() const;

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

class SingularMatrix : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Sparse direct factorization of a symmetric matrix, reused for many solves.
/// Read-only after construction, so solves may be shared between threads.
class Factorization {
public:
  explicit Factorization(const SparseMatrix& A);
  /// A made of `copies` identical decoupled blocks whose unknowns interleave
  /// in chunks of `chunk`: index i belongs to copy (i / chunk) % copies.
  /// Only one copy is factorized. Throws std::invalid_argument if A does not
  /// have this structure.
  Factorization(const SparseMatrix& A, std::size_t chunk, std::size_t copies);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  Vector solve(const Vector& b) const;
  std::size_t size() const { return n_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t n_ = 0;
  std::size_t chunk_ = 0;
  std::size_t copies_ = 1;
};

Factorization factorize(const SparseMatrix& A);

/// Inverses of the square diagonal blocks of A of a fixed size.
class BlockDiagonalInverse {
public:
  BlockDiagonalInverse() = default;
  BlockDiagonalInverse(const SparseMatrix& A, std::size_t block_size);

  std::size_t block_size() const { return block_size_; }
  const Eigen::MatrixXd& block(std::size_t b) const { return inverses_[b]; }
  std::size_t blocks() const { return inverses_.size(); }

private:
  std::size_t block_size_ = 0;
  std::vector<Eigen::MatrixXd> inverses_;
};

/// Block-Jacobi approximation of the Schur complement B A^{-1} B^T: each
/// group of `rows_per_block` constraint rows couples only to one diagonal
/// block of A, giving a small dense S_b = B_b A_bb^{-1} B_b^T per group.
class SchurPreconditioner {
public:
  SchurPreconditioner() = default;
  SchurPreconditioner(const BlockDiagonalInverse& Ainv, const SparseMatrix& B, std::size_t rows_per_block);

  bool empty() const { return blocks_.empty(); }
  Vector apply(const Vector& r) const;

private:
  std::size_t rows_per_block_ = 0;
  std::vector<Eigen::MatrixXd> blocks_;  // inverses of S_b
};

struct SchurOptions {
  double tol = 1e-8;
  std::size_t max_iter = 0;  // 0: 10 * number of constraint rows
  std::size_t plateau_window = 50;
  /// Relative decrease of the best residual that counts as progress.
  double plateau_improvement = 1e-3;
  const SchurPreconditioner* preconditioner = nullptr;
  const Vector* initial_multiplier = nullptr;
};

struct SchurResult {
  Vector step;        // dY
  Vector multiplier;  // Lambda
  std::size_t iterations = 0;
  double residual = 0.0;       // ||B dY|| = ||b - S Lambda||
  double rhs_norm = 0.0;       // ||B A^{-1} F||
  bool stagnated = false;
  std::vector<double> history;  // residual norms
};

/// CG did not reach the tolerance within max_iter; carries the best iterate.
class IterativeFailure : public std::runtime_error {
public:
  IterativeFailure(const std::string& what, SchurResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const SchurResult& best() const { return best_; }

private:
  SchurResult best_;
};

/// Solves [A B^T; B 0][dY; Lambda] = [F; 0] by (preconditioned) CG on the
/// Schur complement S = B A^{-1} B^T, then recovers dY = A^{-1}(F - B^T Lambda).
/// A residual plateau over `plateau_window` iterations returns the best
/// iterate with `stagnated` set. A plateau is `plateau_window` iterations in
/// which the best residual drops by less than `plateau_improvement`.
SchurResult schur_cg(const Factorization& A, const SparseMatrix& B, const Vector& rhs,
                     const SchurOptions& options = {});

}  // namespace platedg
