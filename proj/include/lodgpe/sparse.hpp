#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace lodgpe {

using DenseVector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing in
/// each row. Explicit zeros produced by assembly are kept so that all P1
/// operators of one mesh share a sparsity pattern.
struct CsrMatrix {
  int nrows = 0;
  int ncols = 0;
  std::vector<int> row_offsets{0};
  std::vector<int> column_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  using EigenMap = Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>>;
  /// Zero-copy view for use with Eigen expressions.
  EigenMap eigen() const {
    return EigenMap(nrows, ncols, static_cast<Eigen::Index>(nnz()), row_offsets.data(),
                    column_indices.data(), values.data());
  }

  static CsrMatrix from_eigen(const Eigen::SparseMatrix<double, Eigen::RowMajor, int>& m);
  static CsrMatrix identity(int n);

  bool same_pattern(const CsrMatrix& other) const;
  double max_abs() const;
  DenseMatrix to_dense() const;
};

CsrMatrix assemble_from_triplets(int nrows, int ncols, std::vector<Triplet> triplets);

DenseVector spmv(const CsrMatrix& a, const DenseVector& x);
CsrMatrix transpose(const CsrMatrix& a);

/// alpha * a + beta * b. Fast path when the patterns coincide.
CsrMatrix add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b);

/// max |A - A^T| over all entries.
double max_asymmetry(const CsrMatrix& a);

/// Sparse LU with fill-reducing ordering (UMFPACK) for symmetric, possibly
/// indefinite matrices such as saddle-point systems. Solves are const and
/// may run concurrently.
class Factorization {
 public:
  explicit Factorization(const CsrMatrix& a);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;
  Factorization(const Factorization&) = delete;
  Factorization& operator=(const Factorization&) = delete;

  int size() const;
  DenseVector solve(const DenseVector& b) const;
  /// Solve into caller buffers; workspace must come from make_workspace().
  struct Workspace {
    std::vector<int> wi;
    std::vector<double> w;
  };
  Workspace make_workspace() const;
  void solve(const double* b, double* x, Workspace& ws) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Factorization factor_symmetric(const CsrMatrix& a);

/// Supernodal Cholesky (CHOLMOD) with the symbolic analysis reused across
/// numeric refactorizations of matrices sharing one pattern.
class SpdSolver {
 public:
  SpdSolver();
  ~SpdSolver();
  SpdSolver(const SpdSolver&) = delete;
  SpdSolver& operator=(const SpdSolver&) = delete;

  void factorize(const CsrMatrix& a);
  DenseVector solve(const DenseVector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CgResult {
  DenseVector x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. Throws ConvergenceError when
/// the relative residual is still above tol after max_iter iterations.
CgResult conjugate_gradient(const CsrMatrix& a, const DenseVector& b, double tol, int max_iter,
                            const DenseVector* x0 = nullptr);

/// Matrix-free preconditioned CG used where the operator is only available
/// through its action.
template <typename Apply, typename Precond>
CgResult pcg(Apply&& apply, Precond&& precond, const DenseVector& b, DenseVector x, double tol,
             int max_iter) {
  CgResult res;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.x = DenseVector::Zero(b.size());
    return res;
  }
  if (x.size() != b.size()) x = DenseVector::Zero(b.size());
  DenseVector r = b - apply(x);
  double rnorm = r.norm();
  DenseVector z = precond(r);
  DenseVector p = z;
  double rz = r.dot(z);
  int it = 0;
  while (rnorm > tol * bnorm && it < max_iter) {
    const DenseVector ap = apply(p);
    const double alpha = rz / p.dot(ap);
    x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    rnorm = r.norm();
    ++it;
    if (rnorm <= tol * bnorm) break;
    z = precond(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  res.x = std::move(x);
  res.iterations = it;
  res.relative_residual = rnorm / bnorm;
  return res;
}

}  // namespace lodgpe
