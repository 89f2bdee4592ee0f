#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "lodgpe/errors.hpp"
#include "lodgpe/lod.hpp"
#include "oracles.hpp"

using namespace lodgpe;

namespace {

struct Setup {
  std::shared_ptr<const MeshHierarchy> h;
  FeOperators fine;
  ConstraintOperator con;
};

Setup make_setup(const Rect& d, int coarse, int refinements, const Potential& v) {
  Setup s;
  s.h = std::make_shared<const MeshHierarchy>(build_hierarchy(d, coarse, refinements));
  s.fine = assemble_operators(s.h->fine, v);
  s.con = build_constraint(*s.h);
  return s;
}

double max_abs(const DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("prolongation interpolates coarse P1 functions") {
  const MeshHierarchy h = build_hierarchy(Rect{-1, 1, -1, 1}, 3, 2);
  const DofMap cd = DofMap::interior(h.coarse), fd = DofMap::interior(h.fine);
  const CsrMatrix p = prolongation_matrix(h, cd, fd);
  CHECK(p.nrows == static_cast<int>(fd.size()));
  CHECK(p.ncols == static_cast<int>(cd.size()));
  DenseVector c(static_cast<Eigen::Index>(cd.size()));
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = std::cos(1.0 + 2.0 * i);
  const DenseVector f = spmv(p, c);
  const DenseVector cn = to_nodal(cd, h.coarse.num_nodes(), c);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const Point& x = h.fine.nodes[fd.dof_to_node[i]];
    CHECK(f[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(oracle::evaluate_p1(h.coarse, cn, x.x, x.y)).epsilon(1e-13));
  }
}

TEST_CASE("constraint operator: C P equals the coarse mass matrix") {
  const Setup s = make_setup(Rect{0, 1, 0, 1}, 4, 2, Potential::constant(0.0));
  const FeOperators coarse = assemble_operators(s.h->coarse, Potential::constant(0.0));
  const DenseMatrix cp = s.con.matrix.to_dense() * s.con.prolongation.to_dense();
  CHECK(max_abs(cp - coarse.mass.to_dense()) < 1e-14);
}

TEST_CASE("ideal basis against a dense null-space oracle") {
  const Setup s = make_setup(Rect{-2, 2, -2, 2}, 4, 2, Potential::harmonic());
  const LodSpace lod = compute_correctors(s.h, s.fine, s.con);
  REQUIRE(lod.dim() == 9);
  REQUIRE(lod.fine_dim() == 225);
  const DenseMatrix a = s.fine.a_matrix().to_dense();
  const DenseMatrix c = s.con.matrix.to_dense();
  const DenseMatrix p = s.con.prolongation.to_dense();
  const DenseMatrix ref = oracle::dense_lod_basis(a, c, p);
  CHECK(max_abs(lod.basis - ref) < 1e-11);

  SUBCASE("C B = M_H: correctors lie in the kernel of the coarse projection") {
    const FeOperators coarse = assemble_operators(s.h->coarse, Potential::constant(0.0));
    CHECK(max_abs(c * lod.basis - coarse.mass.to_dense()) < 1e-13);
    CHECK(max_abs(c * (p - lod.basis)) < 1e-13);
  }
  SUBCASE("a-orthogonality to the fine-scale space") {
    const DenseMatrix z = oracle::kernel_basis(c);
    CHECK(z.cols() == 225 - 9);
    CHECK(max_abs(z.transpose() * a * lod.basis) < 1e-11 * max_abs(a));
  }
  SUBCASE("L2 splitting: (I - P_H) leaves only fine-scale parts") {
    // v = B c + q with q in ker C; the coarse moments of v are those of P c.
    const DenseVector coef = DenseVector::LinSpaced(9, -1.0, 1.0);
    const DenseVector v = lod.basis * coef;
    CHECK((c * v - c * (p * coef)).norm() < 1e-13);
  }
  SUBCASE("Galerkin matrices") {
    CHECK(max_abs(lod.a_lod - lod.basis.transpose() * a * lod.basis) < 1e-12);
    CHECK(max_abs(lod.m_lod - lod.basis.transpose() * s.fine.mass.to_dense() * lod.basis) < 1e-14);
    CHECK(max_abs(lod.a_lod - lod.a_lod.transpose()) == 0.0);
    CHECK(Eigen::LLT<DenseMatrix>(lod.a_lod).info() == Eigen::Success);
    CHECK(Eigen::LLT<DenseMatrix>(lod.m_lod).info() == Eigen::Success);
  }
}

TEST_CASE("localized correctors: patch covering the domain equals ideal, error decays with layers") {
  const Setup s = make_setup(Rect{-2, 2, -2, 2}, 8, 2, Potential::harmonic());
  const LodSpace ideal = compute_correctors(s.h, s.fine, s.con);
  const LodSpace full = compute_correctors(s.h, s.fine, s.con, Localization::patch(16));
  CHECK(max_abs(full.basis - ideal.basis) < 1e-11);

  std::vector<double> err;
  for (int k = 1; k <= 4; ++k) {
    const LodSpace loc = compute_correctors(s.h, s.fine, s.con, Localization::patch(k));
    const DenseMatrix d = loc.basis - ideal.basis;
    // Energy norm of the largest column error.
    const DenseMatrix e = d.transpose() * s.fine.a_matrix().to_dense() * d;
    err.push_back(std::sqrt(e.diagonal().maxCoeff()));
  }
  for (std::size_t k = 1; k < err.size(); ++k) CHECK(err[k] < 0.5 * err[k - 1]);
}

TEST_CASE("identity hierarchy gives the plain P1 space") {
  auto h = std::make_shared<const MeshHierarchy>(identity_hierarchy(Rect{}, 6));
  const FeOperators fine = assemble_operators(h->fine, Potential::harmonic());
  const LodSpace lod = compute_correctors(h, fine, build_constraint(*h));
  CHECK(max_abs(lod.basis - DenseMatrix::Identity(25, 25)) < 1e-12);
}

TEST_CASE("P_LOD is the a-orthogonal projection") {
  const Setup s = make_setup(Rect{0, 1, 0, 1}, 4, 2, Potential::constant(1.0));
  const LodSpace lod = compute_correctors(s.h, s.fine, s.con);
  const DenseVector v = interpolate(s.h->fine, s.fine.dofs, [](double x, double y) { return x * (1 - x) * std::exp(y) * y * (1 - y); });
  const DenseVector c = plod_project(lod, s.fine, v);
  const DenseVector r = v - prolong(lod, c);
  CHECK((lod.basis.transpose() * spmv(s.fine.a_matrix(), r)).norm() < 1e-13);
  // Projecting a space element returns its coefficients.
  const DenseVector c2 = plod_project(lod, s.fine, prolong(lod, c));
  CHECK((c2 - c).norm() < 1e-12 * c.norm());
  CHECK_THROWS_AS(plod_project(lod, s.fine, DenseVector::Ones(3)), ConfigError);
}

TEST_CASE("localization values") {
  CHECK(Localization::ideal().is_ideal());
  CHECK(Localization::ideal().describe() == "ideal");
  CHECK(Localization::patch(2).describe() == "patch(2)");
  CHECK_THROWS_AS(Localization::patch(0), ConfigError);
}

TEST_CASE("corrector cache round trip and failure modes") {
  const Setup s = make_setup(Rect{0, 1, 0, 1}, 2, 2, Potential::harmonic());
  const LodSpace lod = compute_correctors(s.h, s.fine, s.con);
  const auto dir = std::filesystem::temp_directory_path() / "lodgpe_test_cache";
  std::filesystem::remove_all(dir);
  CorrectorKey key{Rect{0, 1, 0, 1}, 2, 2, Potential::harmonic().descriptor(), "ideal"};
  const auto file = cache_path(dir, key);

  auto fresh = [&] {
    LodSpace t;
    t.hierarchy = s.h;
    t.coarse_dofs = s.con.coarse_dofs;
    t.fine_dofs = s.con.fine_dofs;
    return t;
  };
  LodSpace t = fresh();
  CHECK(load_lod_space(file, key, t) == CacheStatus::missing);
  save_lod_space(file, key, lod);
  t = fresh();
  REQUIRE(load_lod_space(file, key, t) == CacheStatus::hit);
  CHECK(t.basis == lod.basis);
  CHECK(t.a_lod == lod.a_lod);
  CHECK(t.m_lod == lod.m_lod);

  CorrectorKey other = key;
  other.potential = Potential::constant(1.0).descriptor();
  CHECK(cache_path(dir, other) != file);
  t = fresh();
  CHECK(load_lod_space(file, other, t) == CacheStatus::mismatch);

  {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    f.put('\x7f');
  }
  t = fresh();
  CHECK(load_lod_space(file, key, t) == CacheStatus::corrupt);
  {
    std::ofstream f(file, std::ios::binary);
    f << "garbage";
  }
  t = fresh();
  CHECK(load_lod_space(file, key, t) == CacheStatus::corrupt);
  std::filesystem::remove_all(dir);
}
