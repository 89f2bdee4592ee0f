#include "lodgpe/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <cholmod.h>
#include <umfpack.h>

#include "lodgpe/errors.hpp"

namespace lodgpe {

CsrMatrix CsrMatrix::from_eigen(const Eigen::SparseMatrix<double, Eigen::RowMajor, int>& src) {
  Eigen::SparseMatrix<double, Eigen::RowMajor, int> m = src;
  m.makeCompressed();
  CsrMatrix out;
  out.nrows = static_cast<int>(m.rows());
  out.ncols = static_cast<int>(m.cols());
  out.row_offsets.assign(m.outerIndexPtr(), m.outerIndexPtr() + m.rows() + 1);
  out.column_indices.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
  out.values.assign(m.valuePtr(), m.valuePtr() + m.nonZeros());
  return out;
}

CsrMatrix CsrMatrix::identity(int n) {
  CsrMatrix out;
  out.nrows = out.ncols = n;
  out.row_offsets.resize(n + 1);
  out.column_indices.resize(n);
  out.values.assign(n, 1.0);
  for (int i = 0; i <= n; ++i) out.row_offsets[i] = i;
  for (int i = 0; i < n; ++i) out.column_indices[i] = i;
  return out;
}

bool CsrMatrix::same_pattern(const CsrMatrix& o) const {
  return nrows == o.nrows && ncols == o.ncols && row_offsets == o.row_offsets &&
         column_indices == o.column_indices;
}

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(nrows, ncols);
  for (int i = 0; i < nrows; ++i)
    for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) d(i, column_indices[k]) += values[k];
  return d;
}

CsrMatrix assemble_from_triplets(int nrows, int ncols, std::vector<Triplet> triplets) {
  if (nrows < 0 || ncols < 0) throw ConfigError("assemble_from_triplets: negative shape");
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
      throw ConfigError("assemble_from_triplets: index (" + std::to_string(t.row) + "," +
                        std::to_string(t.col) + ") out of range");
  }
  // Sorting by value as the last key makes duplicate sums independent of
  // the input order.
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.value < b.value;
  });

  CsrMatrix m;
  m.nrows = nrows;
  m.ncols = ncols;
  m.row_offsets.assign(nrows + 1, 0);
  m.column_indices.reserve(triplets.size());
  m.values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size();) {
    const int r = triplets[k].row;
    const int c = triplets[k].col;
    double sum = 0.0;
    while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) sum += triplets[k++].value;
    m.column_indices.push_back(c);
    m.values.push_back(sum);
    ++m.row_offsets[r + 1];
  }
  for (int i = 0; i < nrows; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
  return m;
}

DenseVector spmv(const CsrMatrix& a, const DenseVector& x) {
  if (x.size() != a.ncols)
    throw ConfigError("spmv: dimension mismatch (" + std::to_string(a.ncols) + " vs " +
                      std::to_string(x.size()) + ")");
  DenseVector y(a.nrows);
  for (int i = 0; i < a.nrows; ++i) {
    double s = 0.0;
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) s += a.values[k] * x[a.column_indices[k]];
    y[i] = s;
  }
  return y;
}

CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t;
  t.nrows = a.ncols;
  t.ncols = a.nrows;
  t.row_offsets.assign(t.nrows + 1, 0);
  for (int c : a.column_indices) ++t.row_offsets[c + 1];
  for (int i = 0; i < t.nrows; ++i) t.row_offsets[i + 1] += t.row_offsets[i];
  t.column_indices.resize(a.nnz());
  t.values.resize(a.nnz());
  std::vector<int> next(t.row_offsets.begin(), t.row_offsets.end() - 1);
  for (int i = 0; i < a.nrows; ++i) {
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      const int dst = next[a.column_indices[k]]++;
      t.column_indices[dst] = i;
      t.values[dst] = a.values[k];
    }
  }
  return t;
}

CsrMatrix add(double alpha, const CsrMatrix& a, double beta, const CsrMatrix& b) {
  if (a.nrows != b.nrows || a.ncols != b.ncols) throw ConfigError("add: shape mismatch");
  if (a.same_pattern(b)) {
    CsrMatrix c = a;
    for (std::size_t k = 0; k < c.values.size(); ++k) c.values[k] = alpha * a.values[k] + beta * b.values[k];
    return c;
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor, int> s = alpha * a.eigen() + beta * b.eigen();
  return CsrMatrix::from_eigen(s);
}

double max_asymmetry(const CsrMatrix& a) {
  if (a.nrows != a.ncols) throw ConfigError("max_asymmetry: matrix not square");
  const CsrMatrix d = add(1.0, a, -1.0, transpose(a));
  return d.max_abs();
}

// ---------------------------------------------------------------------------
// UMFPACK-backed factorization

struct Factorization::Impl {
  int n = 0;
  // CSC arrays of A^T (the CSR arrays of A); solves use UMFPACK_At.
  std::vector<int> ap, ai;
  std::vector<double> ax;
  void* numeric = nullptr;
  double control[UMFPACK_CONTROL];

  ~Impl() {
    if (numeric) umfpack_di_free_numeric(&numeric);
  }
};

Factorization::Factorization(const CsrMatrix& a) : impl_(std::make_unique<Impl>()) {
  if (a.nrows != a.ncols) throw ConfigError("factor_symmetric: matrix not square");
  auto& im = *impl_;
  im.n = a.nrows;
  im.ap = a.row_offsets;
  im.ai = a.column_indices;
  im.ax = a.values;
  umfpack_di_defaults(im.control);
  if (im.n == 0) return;

  double info[UMFPACK_INFO];
  void* symbolic = nullptr;
  int status = umfpack_di_symbolic(im.n, im.n, im.ap.data(), im.ai.data(), im.ax.data(), &symbolic,
                                   im.control, info);
  if (status != UMFPACK_OK) {
    if (symbolic) umfpack_di_free_symbolic(&symbolic);
    throw NumericalError("factor_symmetric: symbolic analysis failed (status " + std::to_string(status) + ")");
  }
  status = umfpack_di_numeric(im.ap.data(), im.ai.data(), im.ax.data(), symbolic, &im.numeric, im.control, info);
  umfpack_di_free_symbolic(&symbolic);
  if (status == UMFPACK_WARNING_singular_matrix)
    throw SingularMatrixError("factor_symmetric: matrix is singular (exact zero pivot)");
  if (status != UMFPACK_OK)
    throw NumericalError("factor_symmetric: numeric factorization failed (status " + std::to_string(status) + ")");

  // Pivot test relative to the largest entry of the scaled matrix.
  std::vector<double> udiag(im.n), rs(im.n);
  int do_recip = 0;
  status = umfpack_di_get_numeric(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr,
                                  udiag.data(), &do_recip, rs.data(), im.numeric);
  if (status != UMFPACK_OK) throw NumericalError("factor_symmetric: cannot inspect factors");
  // The factored matrix is A^T whose rows are the columns of A.
  double max_scaled = 0.0;
  for (int j = 0; j < im.n; ++j) {
    for (int k = im.ap[j]; k < im.ap[j + 1]; ++k) {
      const int row = im.ai[k];
      const double s = do_recip ? rs[row] : 1.0 / rs[row];
      max_scaled = std::max(max_scaled, std::abs(im.ax[k]) * s);
    }
  }
  double min_pivot = std::numeric_limits<double>::infinity();
  for (double d : udiag) min_pivot = std::min(min_pivot, std::abs(d));
  if (!(min_pivot > 1e-14 * max_scaled))
    throw SingularMatrixError("factor_symmetric: pivot " + std::to_string(min_pivot) +
                              " below 1e-14 * max|A|");
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

int Factorization::size() const { return impl_->n; }

Factorization::Workspace Factorization::make_workspace() const {
  Workspace ws;
  ws.wi.resize(impl_->n);
  ws.w.resize(5 * static_cast<std::size_t>(impl_->n));
  return ws;
}

void Factorization::solve(const double* b, double* x, Workspace& ws) const {
  const auto& im = *impl_;
  if (im.n == 0) return;
  double info[UMFPACK_INFO];
  const int status = umfpack_di_wsolve(UMFPACK_At, im.ap.data(), im.ai.data(), im.ax.data(), x, b, im.numeric,
                                       im.control, info, ws.wi.data(), ws.w.data());
  if (status != UMFPACK_OK) throw NumericalError("factorization solve failed (status " + std::to_string(status) + ")");
}

DenseVector Factorization::solve(const DenseVector& b) const {
  if (b.size() != impl_->n) throw ConfigError("factorization solve: dimension mismatch");
  DenseVector x(b.size());
  auto ws = make_workspace();
  solve(b.data(), x.data(), ws);
  return x;
}

Factorization factor_symmetric(const CsrMatrix& a) { return Factorization(a); }

// ---------------------------------------------------------------------------
// CHOLMOD-backed SPD solver

struct SpdSolver::Impl {
  mutable cholmod_common common;
  cholmod_factor* factor = nullptr;
  std::vector<int> pattern_offsets, pattern_columns;
  int n = 0;

  Impl() {
    cholmod_start(&common);
    common.print = 0;  // failures are reported through NumericalError
  }
  ~Impl() {
    if (factor) cholmod_free_factor(&factor, &common);
    cholmod_finish(&common);
  }
};

SpdSolver::SpdSolver() : impl_(std::make_unique<Impl>()) {}
SpdSolver::~SpdSolver() = default;

void SpdSolver::factorize(const CsrMatrix& a) {
  if (a.nrows != a.ncols) throw ConfigError("SpdSolver: matrix not square");
  auto& im = *impl_;
  // Symmetric CSR arrays double as CSC arrays; stype=1 reads the upper part.
  cholmod_sparse view{};
  view.nrow = view.ncol = static_cast<std::size_t>(a.nrows);
  view.nzmax = a.nnz();
  view.p = const_cast<int*>(a.row_offsets.data());
  view.i = const_cast<int*>(a.column_indices.data());
  view.x = const_cast<double*>(a.values.data());
  view.stype = 1;
  view.itype = CHOLMOD_INT;
  view.xtype = CHOLMOD_REAL;
  view.dtype = CHOLMOD_DOUBLE;
  view.sorted = 1;
  view.packed = 1;

  const bool reuse = im.factor && im.n == a.nrows && im.pattern_offsets == a.row_offsets &&
                     im.pattern_columns == a.column_indices;
  if (!reuse) {
    if (im.factor) cholmod_free_factor(&im.factor, &im.common);
    im.factor = cholmod_analyze(&view, &im.common);
    if (!im.factor) throw NumericalError("SpdSolver: symbolic analysis failed");
    im.pattern_offsets = a.row_offsets;
    im.pattern_columns = a.column_indices;
    im.n = a.nrows;
  }
  cholmod_factorize(&view, im.factor, &im.common);
  if (im.common.status == CHOLMOD_NOT_POSDEF)
    throw SingularMatrixError("SpdSolver: matrix is not positive definite");
  if (im.common.status < CHOLMOD_OK) throw NumericalError("SpdSolver: factorization failed");
}

DenseVector SpdSolver::solve(const DenseVector& b) const {
  const auto& im = *impl_;
  if (!im.factor) throw NumericalError("SpdSolver: solve before factorize");
  if (b.size() != im.n) throw ConfigError("SpdSolver: dimension mismatch");
  cholmod_dense rhs{};
  rhs.nrow = static_cast<std::size_t>(im.n);
  rhs.ncol = 1;
  rhs.nzmax = rhs.nrow;
  rhs.d = rhs.nrow;
  rhs.x = const_cast<double*>(b.data());
  rhs.xtype = CHOLMOD_REAL;
  rhs.dtype = CHOLMOD_DOUBLE;
  cholmod_dense* sol = cholmod_solve(CHOLMOD_A, im.factor, &rhs, &im.common);
  if (!sol) throw NumericalError("SpdSolver: solve failed");
  DenseVector x = Eigen::Map<const DenseVector>(static_cast<const double*>(sol->x), im.n);
  cholmod_free_dense(&sol, &im.common);
  return x;
}

// ---------------------------------------------------------------------------

CgResult conjugate_gradient(const CsrMatrix& a, const DenseVector& b, double tol, int max_iter,
                            const DenseVector* x0) {
  if (a.nrows != a.ncols || b.size() != a.nrows) throw ConfigError("conjugate_gradient: dimension mismatch");
  DenseVector inv_diag = DenseVector::Ones(a.nrows);
  for (int i = 0; i < a.nrows; ++i) {
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      if (a.column_indices[k] == i && a.values[k] > 0.0) inv_diag[i] = 1.0 / a.values[k];
    }
  }
  DenseVector start = x0 ? *x0 : DenseVector::Zero(a.nrows);
  CgResult res = pcg([&](const DenseVector& v) { return spmv(a, v); },
                     [&](const DenseVector& r) -> DenseVector { return inv_diag.cwiseProduct(r); }, b,
                     std::move(start), tol, max_iter);
  if (res.relative_residual > tol)
    throw ConvergenceError("conjugate_gradient: no convergence after " + std::to_string(res.iterations) +
                               " iterations, relative residual " + std::to_string(res.relative_residual),
                           res.relative_residual);
  return res;
}

}  // namespace lodgpe
