#include "platedg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/CholmodSupport>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace platedg {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  m.col_idx_.reserve(t.size());
  m.values_.reserve(t.size());
  std::size_t k = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    while (k < t.size() && t[k].row == r) {
      if (t[k].col >= cols) throw std::out_of_range("from_triplets: column out of range");
      if (!m.col_idx_.empty() && m.row_ptr_[r] < m.col_idx_.size() && m.col_idx_.back() == t[k].col)
        m.values_.back() += t[k].value;
      else {
        m.col_idx_.push_back(t[k].col);
        m.values_.push_back(t[k].value);
      }
      ++k;
    }
    m.row_ptr_[r + 1] = m.col_idx_.size();
  }
  if (k != t.size()) throw std::out_of_range("from_triplets: row out of range");
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  const auto b = col_idx_.begin() + static_cast<long>(row_ptr_[i]);
  const auto e = col_idx_.begin() + static_cast<long>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(b, e, j);
  return it != e && *it == j ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
}

Vector SparseMatrix::multiply(const Vector& x) const {
  Vector y = Vector::Zero(static_cast<long>(rows_));
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x(static_cast<long>(col_idx_[k]));
    y(static_cast<long>(r)) = s;
  }
  return y;
}

Vector SparseMatrix::multiply_transpose(const Vector& x) const {
  Vector y = Vector::Zero(static_cast<long>(cols_));
  for (std::size_t r = 0; r < rows_; ++r) {
    const double xr = x(static_cast<long>(r));
    if (xr == 0.0) continue;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) y(static_cast<long>(col_idx_[k])) += values_[k] * xr;
  }
  return y;
}

SparseMatrix SparseMatrix::add(const SparseMatrix& o, double s) const {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("SparseMatrix::add: shape mismatch");
  SparseMatrix m(rows_, cols_);
  m.col_idx_.reserve(values_.size() + o.values_.size());
  m.values_.reserve(values_.size() + o.values_.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    std::size_t a = row_ptr_[r], b = o.row_ptr_[r];
    const std::size_t ae = row_ptr_[r + 1], be = o.row_ptr_[r + 1];
    while (a < ae || b < be) {
      if (b >= be || (a < ae && col_idx_[a] < o.col_idx_[b])) {
        m.col_idx_.push_back(col_idx_[a]);
        m.values_.push_back(values_[a++]);
      } else if (a >= ae || o.col_idx_[b] < col_idx_[a]) {
        m.col_idx_.push_back(o.col_idx_[b]);
        m.values_.push_back(s * o.values_[b++]);
      } else {
        m.col_idx_.push_back(col_idx_[a]);
        m.values_.push_back(values_[a++] + s * o.values_[b++]);
      }
    }
    m.row_ptr_[r + 1] = m.col_idx_.size();
  }
  return m;
}

SparseMatrix SparseMatrix::scaled(double s) const {
  SparseMatrix m = *this;
  for (double& v : m.values_) v *= s;
  return m;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.push_back({col_idx_[k], r, values_[k]});
  return from_triplets(cols_, rows_, std::move(t));
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SparseMatrix::symmetry_defect() const {
  if (rows_ != cols_) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      d = std::max(d, std::abs(values_[k] - at(col_idx_[k], r)));
  return d;
}

Eigen::MatrixXd SparseMatrix::dense() const {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<long>(rows_), static_cast<long>(cols_));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      D(static_cast<long>(r), static_cast<long>(col_idx_[k])) = values_[k];
  return D;
}

// ---------------------------------------------------------------------------

namespace {

class SupernodalLLT : public Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> {
public:
  // Indefinite input is an expected outcome handled by the LDL^T fallback.
  SupernodalLLT() { cholmod().print = 0; }

  /// Reciprocal condition estimate from the diagonal of L.
  double rcond() { return cholmod_rcond(m_cholmodFactor, &cholmod()); }
};

}  // namespace

// Supernodal Cholesky for SPD matrices; LDL^T when A is indefinite.
struct Factorization::Impl {
  using Sparse = Eigen::SparseMatrix<double>;
  std::unique_ptr<SupernodalLLT> llt;
  std::unique_ptr<Eigen::SimplicialLDLT<Sparse, Eigen::Lower, Eigen::AMDOrdering<int>>> ldlt;

  // CHOLMOD solves share workspace in the common object.
  mutable std::mutex mutex;

  void compute(const Sparse& lower, double scale);
  template <typename Rhs>
  Eigen::MatrixXd solve(const Rhs& b) const {
    if (!llt) return ldlt->solve(b);
    std::lock_guard<std::mutex> lock(mutex);
    return llt->solve(b);
  }
};

namespace {

using EigenSparse = Eigen::SparseMatrix<double>;

}  // namespace

void Factorization::Impl::compute(const Sparse& lower, double scale) {
  if (lower.rows() == 0) {
    ldlt = std::make_unique<Eigen::SimplicialLDLT<Sparse, Eigen::Lower, Eigen::AMDOrdering<int>>>(lower);
    return;
  }
  llt = std::make_unique<SupernodalLLT>();
  llt->compute(lower);
  if (llt->info() == Eigen::Success) {
    if (!(llt->rcond() > 1e-14)) throw SingularMatrix("factorize: singular pivot");
    return;
  }
  llt.reset();
  ldlt = std::make_unique<Eigen::SimplicialLDLT<Sparse, Eigen::Lower, Eigen::AMDOrdering<int>>>(lower);
  if (ldlt->info() != Eigen::Success) throw SingularMatrix("factorize: numerical breakdown");
  const auto& D = ldlt->vectorD();
  scale = std::max(scale, D.cwiseAbs().maxCoeff());
  for (long i = 0; i < D.size(); ++i)
    if (!(std::abs(D(i)) > 1e-14 * scale)) throw SingularMatrix("factorize: singular pivot");
}

Factorization::Factorization(const SparseMatrix& A) : impl_(std::make_unique<Impl>()), n_(A.rows()) {
  if (A.rows() != A.cols()) throw std::invalid_argument("factorize: matrix must be square");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nonzeros());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k)
      if (A.col_idx()[k] <= r)
        t.emplace_back(static_cast<int>(r), static_cast<int>(A.col_idx()[k]), A.values()[k]);
  EigenSparse M(static_cast<long>(n_), static_cast<long>(n_));
  M.setFromTriplets(t.begin(), t.end());
  impl_->compute(M, A.max_abs());
}

Factorization::Factorization(const SparseMatrix& A, std::size_t chunk, std::size_t copies)
    : impl_(std::make_unique<Impl>()), n_(A.rows()), chunk_(chunk), copies_(copies) {
  if (A.rows() != A.cols()) throw std::invalid_argument("factorize: matrix must be square");
  if (chunk == 0 || copies == 0 || n_ % (chunk * copies) != 0)
    throw std::invalid_argument("factorize: size is not a multiple of chunk * copies");
  const std::size_t ns = n_ / copies;
  auto copy_of = [&](std::size_t i) { return (i / chunk) % copies; };
  auto reduced = [&](std::size_t i) { return (i / chunk / copies) * chunk + i % chunk; };
  auto global = [&](std::size_t j, std::size_t copy) { return ((j / chunk) * copies + copy) * chunk + j % chunk; };
  const double tol = 1e-12 * A.max_abs();

  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t r = 0; r < n_; ++r)
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      const std::size_t c = A.col_idx()[k];
      const double v = A.values()[k];
      const std::size_t cr = copy_of(r);
      if (cr != copy_of(c)) {
        if (std::abs(v) > tol) throw std::invalid_argument("factorize: copies are coupled");
        continue;
      }
      const std::size_t rr = reduced(r), rc = reduced(c);
      if (cr == 0) {
        if (rc <= rr) t.emplace_back(static_cast<int>(rr), static_cast<int>(rc), v);
      } else if (std::abs(v - A.at(global(rr, 0), global(rc, 0))) > tol) {
        throw std::invalid_argument("factorize: copies differ");
      }
    }
  EigenSparse M(static_cast<long>(ns), static_cast<long>(ns));
  M.setFromTriplets(t.begin(), t.end());
  impl_->compute(M, A.max_abs());
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Vector Factorization::solve(const Vector& b) const {
  if (copies_ <= 1) return impl_->solve(b);
  const auto ns = static_cast<long>(n_ / copies_);
  const auto chunk = static_cast<long>(chunk_);
  const auto copies = static_cast<long>(copies_);
  // Column j of the gathered right-hand side is copy j, in reduced order.
  Eigen::MatrixXd R(ns, copies);
  for (long blk = 0; blk < ns / chunk; ++blk)
    for (long j = 0; j < copies; ++j) R.block(blk * chunk, j, chunk, 1) = b.segment((blk * copies + j) * chunk, chunk);
  const Eigen::MatrixXd X = impl_->solve(R);
  Vector x(static_cast<long>(n_));
  for (long blk = 0; blk < ns / chunk; ++blk)
    for (long j = 0; j < copies; ++j) x.segment((blk * copies + j) * chunk, chunk) = X.block(blk * chunk, j, chunk, 1);
  return x;
}

Factorization factorize(const SparseMatrix& A) { return Factorization(A); }

// ---------------------------------------------------------------------------

BlockDiagonalInverse::BlockDiagonalInverse(const SparseMatrix& A, std::size_t block_size)
    : block_size_(block_size) {
  const std::size_t nb = A.rows() / block_size;
  inverses_.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<long>(block_size), static_cast<long>(block_size));
    const std::size_t lo = b * block_size, hi = lo + block_size;
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
        const std::size_t c = A.col_idx()[k];
        if (c >= lo && c < hi) D(static_cast<long>(r - lo), static_cast<long>(c - lo)) = A.values()[k];
      }
    inverses_[b] = D.ldlt().solve(Eigen::MatrixXd::Identity(D.rows(), D.cols()));
  }
}

SchurPreconditioner::SchurPreconditioner(const BlockDiagonalInverse& Ainv, const SparseMatrix& B,
                                         std::size_t rows_per_block)
    : rows_per_block_(rows_per_block) {
  const std::size_t groups = B.rows() / rows_per_block;
  const std::size_t bs = Ainv.block_size();
  blocks_.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t first = g * rows_per_block;
    // All columns of this group lie in one diagonal block of A.
    const std::size_t blk = B.row_ptr()[first] < B.row_ptr()[first + 1] ? B.col_idx()[B.row_ptr()[first]] / bs : g;
    Eigen::MatrixXd Bg = Eigen::MatrixXd::Zero(static_cast<long>(rows_per_block), static_cast<long>(bs));
    for (std::size_t r = 0; r < rows_per_block; ++r)
      for (std::size_t k = B.row_ptr()[first + r]; k < B.row_ptr()[first + r + 1]; ++k) {
        const std::size_t c = B.col_idx()[k];
        if (c / bs != blk) throw std::invalid_argument("SchurPreconditioner: constraint rows span several blocks");
        Bg(static_cast<long>(r), static_cast<long>(c - blk * bs)) = B.values()[k];
      }
    const Eigen::MatrixXd S = Bg * Ainv.block(blk) * Bg.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    const double scale = S.cwiseAbs().maxCoeff();
    if (scale == 0.0 || ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-13 * scale)
      blocks_[g] = Eigen::MatrixXd::Identity(S.rows(), S.cols()) / (scale > 0.0 ? scale : 1.0);
    else
      blocks_[g] = ldlt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
  }
}

Vector SchurPreconditioner::apply(const Vector& r) const {
  Vector z(r.size());
  const auto n = static_cast<long>(rows_per_block_);
  for (std::size_t g = 0; g < blocks_.size(); ++g)
    z.segment(static_cast<long>(g) * n, n) = blocks_[g] * r.segment(static_cast<long>(g) * n, n);
  return z;
}

// ---------------------------------------------------------------------------

SchurResult schur_cg(const Factorization& A, const SparseMatrix& B, const Vector& F, const SchurOptions& opt) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("schur_cg: tolerance must be positive");
  SchurResult res;
  const Vector u = A.solve(F);
  const long m = static_cast<long>(B.rows());
  res.multiplier = Vector::Zero(m);
  if (m == 0) {
    res.step = u;
    return res;
  }
  const Vector b = B.multiply(u);
  res.rhs_norm = b.norm();
  const std::size_t max_iter = opt.max_iter > 0 ? opt.max_iter : 10 * static_cast<std::size_t>(m);

  // w tracks A^{-1} B^T Lambda so that dY = u - w needs no extra solve.
  Vector lambda = Vector::Zero(m);
  Vector w = Vector::Zero(u.size());
  Vector r = b;
  if (opt.initial_multiplier && opt.initial_multiplier->size() == m) {
    lambda = *opt.initial_multiplier;
    w = A.solve(B.multiply_transpose(lambda));
    r = b - B.multiply(w);
  }
  auto precond = [&](const Vector& v) { return opt.preconditioner ? opt.preconditioner->apply(v) : v; };

  const double target = opt.tol * res.rhs_norm;
  double rnorm = r.norm();
  res.history.push_back(rnorm);

  Vector best_lambda = lambda, best_w = w;
  double best = rnorm;
  double plateau_ref = rnorm;
  std::size_t plateau_start = 0;

  auto finish = [&](const Vector& lam, const Vector& ww, double rn) {
    res.multiplier = lam;
    res.step = u - ww;
    res.residual = rn;
  };

  if (rnorm <= target || res.rhs_norm == 0.0) {
    finish(lambda, w, rnorm);
    return res;
  }

  Vector z = precond(r);
  Vector p = z;
  double rz = r.dot(z);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Vector t = A.solve(B.multiply_transpose(p));
    const Vector q = B.multiply(t);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) {
      // S is only semidefinite along p: no further progress possible.
      res.stagnated = true;
      res.iterations = it;
      finish(best_lambda, best_w, best);
      return res;
    }
    const double alpha = rz / pq;
    lambda += alpha * p;
    w += alpha * t;
    r -= alpha * q;
    rnorm = r.norm();
    res.history.push_back(rnorm);
    res.iterations = it;
    if (rnorm < best) {
      best = rnorm;
      best_lambda = lambda;
      best_w = w;
    }
    if (rnorm <= target) {
      finish(lambda, w, rnorm);
      return res;
    }
    if (best < (1.0 - opt.plateau_improvement) * plateau_ref) {
      plateau_ref = best;
      plateau_start = it;
    } else if (it - plateau_start >= opt.plateau_window) {
      res.stagnated = true;
      finish(best_lambda, best_w, best);
      return res;
    }
    z = precond(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  finish(best_lambda, best_w, best);
  throw IterativeFailure("schur_cg: no convergence within " + std::to_string(max_iter) + " iterations",
                         res);
}

}  // namespace platedg
