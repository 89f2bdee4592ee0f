#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>

#include "lodgpe/errors.hpp"
#include "lodgpe/sparse.hpp"

using namespace lodgpe;

namespace {

std::vector<Triplet> random_triplets(int n, int m, int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> ri(0, n - 1), ci(0, m - 1);
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  std::vector<Triplet> t;
  for (int k = 0; k < count; ++k) t.push_back({ri(rng), ci(rng), v(rng)});
  return t;
}

DenseMatrix dense_from(const std::vector<Triplet>& t, int n, int m) {
  DenseMatrix d = DenseMatrix::Zero(n, m);
  for (const auto& e : t) d(e.row, e.col) += e.value;
  return d;
}

/// 1D Laplacian with a positive shift: SPD and well conditioned.
CsrMatrix shifted_laplacian(int n, double shift) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0 + shift});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return assemble_from_triplets(n, n, t);
}

}  // namespace

TEST_CASE("triplet assembly sums duplicates independently of order") {
  auto t = random_triplets(7, 5, 60, 1);
  const CsrMatrix a = assemble_from_triplets(7, 5, t);
  CHECK((a.to_dense() - dense_from(t, 7, 5)).cwiseAbs().maxCoeff() < 1e-14);
  std::shuffle(t.begin(), t.end(), std::mt19937(7));
  const CsrMatrix b = assemble_from_triplets(7, 5, t);
  CHECK(a.row_offsets == b.row_offsets);
  CHECK(a.column_indices == b.column_indices);
  CHECK(a.values == b.values);
  for (int i = 0; i < a.nrows; ++i)
    for (int k = a.row_offsets[i] + 1; k < a.row_offsets[i + 1]; ++k)
      CHECK(a.column_indices[k - 1] < a.column_indices[k]);
}

TEST_CASE("explicit zeros are kept in the pattern") {
  const CsrMatrix a = assemble_from_triplets(2, 2, {{0, 1, 1.0}, {0, 1, -1.0}, {1, 1, 2.0}});
  CHECK(a.nnz() == 2);
  CHECK(a.same_pattern(assemble_from_triplets(2, 2, {{0, 1, 3.0}, {1, 1, 0.0}})));
}

TEST_CASE("triplets out of range are rejected") {
  CHECK_THROWS_AS(assemble_from_triplets(2, 2, {{2, 0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(assemble_from_triplets(2, 2, {{0, -1, 1.0}}), ConfigError);
}

TEST_CASE("spmv, transpose and add agree with dense arithmetic") {
  const auto ta = random_triplets(6, 4, 20, 2);
  const auto tb = random_triplets(6, 4, 15, 3);
  const CsrMatrix a = assemble_from_triplets(6, 4, ta);
  const CsrMatrix b = assemble_from_triplets(6, 4, tb);
  const DenseVector x = DenseVector::LinSpaced(4, -1.0, 2.0);
  CHECK((spmv(a, x) - a.to_dense() * x).norm() < 1e-14);
  CHECK((transpose(a).to_dense() - a.to_dense().transpose()).norm() == 0.0);
  CHECK((add(2.0, a, -0.5, b).to_dense() - (2.0 * a.to_dense() - 0.5 * b.to_dense())).norm() < 1e-14);
  CHECK((add(1.0, a, 3.0, a).to_dense() - 4.0 * a.to_dense()).norm() < 1e-14);
  CHECK_THROWS(spmv(a, DenseVector::Ones(5)));
  CHECK_THROWS(add(1.0, a, 1.0, transpose(b)));
}

TEST_CASE("symmetry measure") {
  CHECK(max_asymmetry(shifted_laplacian(5, 0.0)) == 0.0);
  const CsrMatrix a = assemble_from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 0.25}});
  CHECK(max_asymmetry(a) == doctest::Approx(0.75));
}

TEST_CASE("UMFPACK factorization solves an indefinite saddle system") {
  // [A C^T; C 0] with A SPD and C of full row rank.
  const int n = 12, m = 3;
  std::vector<Triplet> t;
  const CsrMatrix a = shifted_laplacian(n, 0.1);
  for (int i = 0; i < n; ++i)
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) t.push_back({i, a.column_indices[k], a.values[k]});
  for (int r = 0; r < m; ++r)
    for (int j = 4 * r; j < 4 * r + 4; ++j) {
      t.push_back({n + r, j, 0.25 * (j - 4 * r + 1)});
      t.push_back({j, n + r, 0.25 * (j - 4 * r + 1)});
    }
  const CsrMatrix k = assemble_from_triplets(n + m, n + m, t);
  const Factorization f = factor_symmetric(k);
  CHECK(f.size() == n + m);
  const DenseVector b = DenseVector::LinSpaced(n + m, 1.0, 3.0);
  const DenseVector x = f.solve(b);
  const DenseVector xo = k.to_dense().fullPivLu().solve(b);
  CHECK((x - xo).norm() < 1e-12 * xo.norm());

  auto ws = f.make_workspace();
  DenseVector y(n + m);
  f.solve(b.data(), y.data(), ws);
  CHECK((y - x).norm() < 1e-14 * x.norm());
}

TEST_CASE("singular matrices are reported") {
  const CsrMatrix s = assemble_from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {2, 2, 0.0}});
  CHECK_THROWS_AS(factor_symmetric(s), SingularMatrixError);
  const CsrMatrix rank1 = assemble_from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  CHECK_THROWS_AS(factor_symmetric(rank1), SingularMatrixError);
}

TEST_CASE("CHOLMOD solver with reused analysis") {
  SpdSolver s;
  const CsrMatrix a = shifted_laplacian(40, 0.01);
  s.factorize(a);
  const DenseVector b = DenseVector::Ones(40);
  CHECK((spmv(a, s.solve(b)) - b).norm() < 1e-10);
  const CsrMatrix a2 = shifted_laplacian(40, 1.0);
  s.factorize(a2);
  CHECK((spmv(a2, s.solve(b)) - b).norm() < 1e-12);
  const CsrMatrix bad = shifted_laplacian(40, -3.0);
  CHECK_THROWS_AS(s.factorize(bad), NumericalError);
}

TEST_CASE("conjugate gradients") {
  const CsrMatrix a = shifted_laplacian(50, 0.05);
  const DenseVector b = DenseVector::LinSpaced(50, -1.0, 1.0);
  const CgResult r = conjugate_gradient(a, b, 1e-12, 500);
  CHECK(r.relative_residual <= 1e-12);
  CHECK((spmv(a, r.x) - b).norm() <= 1e-12 * b.norm() * 1.0001);
  CHECK_THROWS_AS(conjugate_gradient(a, b, 1e-14, 2), ConvergenceError);
  try {
    conjugate_gradient(a, b, 1e-14, 2);
  } catch (const ConvergenceError& e) {
    CHECK(e.final_residual() > 1e-14);
  }
  // Exact start converges in zero iterations.
  const CgResult r0 = conjugate_gradient(a, b, 1e-10, 5, &r.x);
  CHECK(r0.iterations == 0);
}

TEST_CASE("small direct and iterative solves") {
  const CsrMatrix empty = assemble_from_triplets(3, 2, {});
  CHECK(empty.nnz() == 0);
  CHECK(empty.to_dense().isZero());
  const CsrMatrix one = assemble_from_triplets(1, 1, {{0, 0, 1.0}, {0, 0, 2.0}});
  CHECK(one.nnz() == 1);
  CHECK(one.values[0] == 3.0);

  const DenseVector x =
      factor_symmetric(assemble_from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 3.0}})).solve(DenseVector::LinSpaced(2, 2.0, 3.0));
  CHECK((x - DenseVector::Ones(2)).norm() < 1e-15);
  // Indefinite permutation matrix.
  const DenseVector y =
      factor_symmetric(assemble_from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}})).solve(DenseVector::LinSpaced(2, 1.0, 2.0));
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(1.0));

  // Random SPD 50 x 50: G G^T + I.
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix g(50, 50);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  const DenseMatrix spd = g * g.transpose() + DenseMatrix::Identity(50, 50);
  std::vector<Triplet> t;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) t.push_back({i, j, spd(i, j)});
  const CsrMatrix a = assemble_from_triplets(50, 50, t);
  DenseVector b(50);
  for (auto& v : b) v = u(rng);
  CHECK((spmv(a, factor_symmetric(a).solve(b)) - b).norm() <= 1e-10 * b.norm());

  std::vector<Triplet> it;
  for (int i = 0; i < 7; ++i) it.push_back({i, i, 1.0});
  const CgResult ri =
      conjugate_gradient(assemble_from_triplets(7, 7, it), DenseVector::LinSpaced(7, 1.0, 7.0), 1e-12, 10);
  CHECK(ri.iterations == 1);
  const CgResult rz = conjugate_gradient(a, DenseVector::Zero(50), 1e-12, 10);
  CHECK(rz.x.isZero());
}

TEST_CASE("CG agrees with the direct solver on a 2D Laplacian") {
  const int n = 20;
  std::vector<Triplet> t;
  auto id = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      t.push_back({id(i, j), id(i, j), 4.0});
      if (i > 0) t.push_back({id(i, j), id(i - 1, j), -1.0});
      if (i + 1 < n) t.push_back({id(i, j), id(i + 1, j), -1.0});
      if (j > 0) t.push_back({id(i, j), id(i, j - 1), -1.0});
      if (j + 1 < n) t.push_back({id(i, j), id(i, j + 1), -1.0});
    }
  const CsrMatrix a = assemble_from_triplets(n * n, n * n, t);
  const DenseVector b = DenseVector::LinSpaced(n * n, 0.0, 1.0);
  const DenseVector direct = factor_symmetric(a).solve(b);
  const CgResult cg = conjugate_gradient(a, b, 1e-12, 2000);
  CHECK((cg.x - direct).cwiseAbs().maxCoeff() < 1e-8);
}
