#include "lodgpe/lod.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lodgpe/errors.hpp"
#include "lodgpe/parallel.hpp"

namespace lodgpe {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

}  // namespace

CsrMatrix prolongation_matrix(const MeshHierarchy& h, const DofMap& coarse, const DofMap& fine) {
  std::vector<Triplet> trip;
  trip.reserve(3 * fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const ChildLocation& loc = h.child_map[fine.dof_to_node[i]];
    const Triangle& tri = h.coarse.triangles[loc.triangle];
    for (int k = 0; k < 3; ++k) {
      const int cd = coarse.node_to_dof[tri[k]];
      if (cd >= 0 && loc.bary[k] != 0.0) trip.push_back({static_cast<int>(i), cd, loc.bary[k]});
    }
  }
  return assemble_from_triplets(static_cast<int>(fine.size()), static_cast<int>(coarse.size()), std::move(trip));
}

ConstraintOperator build_constraint(const MeshHierarchy& h) {
  ConstraintOperator c;
  c.coarse_dofs = DofMap::interior(h.coarse);
  c.fine_dofs = DofMap::interior(h.fine);
  c.prolongation = prolongation_matrix(h, c.coarse_dofs, c.fine_dofs);
  const FeOperators fine = assemble_operators(h.fine, Potential::constant(0.0));
  const RowSparse pt_m = RowSparse(c.prolongation.eigen().transpose()) * fine.mass.eigen();
  c.matrix = CsrMatrix::from_eigen(pt_m);
  return c;
}

Localization Localization::patch(int k) {
  if (k < 1) throw ConfigError("localization radius must be a positive number of coarse layers");
  return Localization{k};
}

std::string Localization::describe() const { return layers ? "patch(" + std::to_string(*layers) + ")" : "ideal"; }

namespace {

CsrMatrix saddle_matrix(const CsrMatrix& a, const CsrMatrix& c) {
  const int nf = a.nrows;
  const int nc = c.nrows;
  std::vector<Triplet> trip;
  trip.reserve(a.nnz() + 2 * c.nnz());
  for (int i = 0; i < nf; ++i)
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) trip.push_back({i, a.column_indices[k], a.values[k]});
  for (int i = 0; i < nc; ++i) {
    for (int k = c.row_offsets[i]; k < c.row_offsets[i + 1]; ++k) {
      trip.push_back({nf + i, c.column_indices[k], c.values[k]});
      trip.push_back({c.column_indices[k], nf + i, c.values[k]});
    }
  }
  return assemble_from_triplets(nf + nc, nf + nc, std::move(trip));
}

void ideal_correctors(LodSpace& space, const CsrMatrix& a, const ConstraintOperator& con) {
  const int nf = a.nrows;
  const int nc = con.matrix.nrows;
  auto t0 = std::chrono::steady_clock::now();
  const Factorization fact = factor_symmetric(saddle_matrix(a, con.matrix));
  space.timings.factor_seconds += seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const ColSparse p = con.prolongation.eigen();
  const ColSparse ap = a.eigen() * p;
  parallel_for(static_cast<std::size_t>(nc), [&](std::size_t lo, std::size_t hi) {
    auto ws = fact.make_workspace();
    DenseVector rhs(nf + nc), sol(nf + nc);
    for (std::size_t j = lo; j < hi; ++j) {
      rhs.setZero();
      for (ColSparse::InnerIterator it(ap, static_cast<Eigen::Index>(j)); it; ++it) rhs[it.row()] = it.value();
      fact.solve(rhs.data(), sol.data(), ws);
      auto col = space.basis.col(static_cast<Eigen::Index>(j));
      col = -sol.head(nf);
      for (ColSparse::InnerIterator it(p, static_cast<Eigen::Index>(j)); it; ++it) col[it.row()] += it.value();
    }
  });
  space.timings.solve_seconds += seconds_since(t0);
  space.timings.solves += nc;
}

void localized_correctors(LodSpace& space, const CsrMatrix& a, const ConstraintOperator& con, int layers) {
  const MeshHierarchy& h = *space.hierarchy;
  const TriMesh& coarse = h.coarse;
  const TriMesh& fine = h.fine;
  const int nc = con.matrix.nrows;

  std::vector<std::vector<int>> coarse_node_elems(coarse.num_nodes());
  for (std::size_t t = 0; t < coarse.num_triangles(); ++t)
    for (int v : coarse.triangles[t]) coarse_node_elems[v].push_back(static_cast<int>(t));
  std::vector<std::vector<int>> fine_node_elems(fine.num_nodes());
  for (std::size_t t = 0; t < fine.num_triangles(); ++t)
    for (int v : fine.triangles[t]) fine_node_elems[v].push_back(static_cast<int>(t));

  const ColSparse p = con.prolongation.eigen();
  const ColSparse ap = a.eigen() * p;
  const RowSparse a_rows = a.eigen();
  const RowSparse c_rows = con.matrix.eigen();

  auto t0 = std::chrono::steady_clock::now();
  parallel_for(static_cast<std::size_t>(nc), [&](std::size_t lo, std::size_t hi) {
    std::vector<std::uint8_t> in_patch(coarse.num_triangles());
    std::vector<int> fine_local(con.fine_dofs.size(), -1);
    std::vector<int> coarse_local(con.coarse_dofs.size(), -1);
    for (std::size_t j = lo; j < hi; ++j) {
      // Grow the patch by vertex neighbours, starting from the hat support.
      std::fill(in_patch.begin(), in_patch.end(), 0);
      std::vector<int> current = coarse_node_elems[con.coarse_dofs.dof_to_node[j]];
      for (int e : current) in_patch[e] = 1;
      for (int layer = 0; layer < layers; ++layer) {
        std::vector<int> next;
        for (int e : current)
          for (int v : coarse.triangles[e])
            for (int n : coarse_node_elems[v])
              if (!in_patch[n]) {
                in_patch[n] = 1;
                next.push_back(n);
              }
        current.swap(next);
      }

      std::vector<int> fdofs;
      for (std::size_t d = 0; d < con.fine_dofs.size(); ++d) {
        const int node = con.fine_dofs.dof_to_node[d];
        bool inside = true;
        for (int t : fine_node_elems[node])
          if (!in_patch[fine.ancestor[t]]) {
            inside = false;
            break;
          }
        if (inside) {
          fine_local[d] = static_cast<int>(fdofs.size());
          fdofs.push_back(static_cast<int>(d));
        }
      }
      std::vector<int> cdofs;
      for (std::size_t d = 0; d < con.coarse_dofs.size(); ++d) {
        const int node = con.coarse_dofs.dof_to_node[d];
        bool touches = false;
        for (int e : coarse_node_elems[node])
          if (in_patch[e]) {
            touches = true;
            break;
          }
        if (touches) {
          coarse_local[d] = static_cast<int>(cdofs.size());
          cdofs.push_back(static_cast<int>(d));
        }
      }

      const int nl = static_cast<int>(fdofs.size());
      const int ml = static_cast<int>(cdofs.size());
      std::vector<Triplet> trip;
      for (int i = 0; i < nl; ++i)
        for (RowSparse::InnerIterator it(a_rows, fdofs[i]); it; ++it) {
          const int jl = fine_local[it.col()];
          if (jl >= 0) trip.push_back({i, jl, it.value()});
        }
      for (int r = 0; r < ml; ++r)
        for (RowSparse::InnerIterator it(c_rows, cdofs[r]); it; ++it) {
          const int jl = fine_local[it.col()];
          if (jl < 0) continue;
          trip.push_back({nl + r, jl, it.value()});
          trip.push_back({jl, nl + r, it.value()});
        }
      const Factorization fact = factor_symmetric(assemble_from_triplets(nl + ml, nl + ml, std::move(trip)));

      DenseVector rhs = DenseVector::Zero(nl + ml);
      for (ColSparse::InnerIterator it(ap, static_cast<Eigen::Index>(j)); it; ++it) {
        const int il = fine_local[it.row()];
        if (il >= 0) rhs[il] = it.value();
      }
      const DenseVector sol = fact.solve(rhs);
      auto col = space.basis.col(static_cast<Eigen::Index>(j));
      col.setZero();
      for (ColSparse::InnerIterator it(p, static_cast<Eigen::Index>(j)); it; ++it) col[it.row()] = it.value();
      for (int i = 0; i < nl; ++i) col[fdofs[i]] -= sol[i];

      for (int d : fdofs) fine_local[d] = -1;
      for (int d : cdofs) coarse_local[d] = -1;
    }
  });
  space.timings.solve_seconds += seconds_since(t0);
  space.timings.solves += nc;
}

}  // namespace

LodSpace compute_correctors(std::shared_ptr<const MeshHierarchy> h, const FeOperators& fine,
                            const ConstraintOperator& con, Localization loc) {
  if (!h) throw ConfigError("compute_correctors: missing hierarchy");
  if (fine.dofs.size() != con.fine_dofs.size() || con.matrix.ncols != static_cast<int>(fine.dofs.size()))
    throw ConfigError("compute_correctors: fine operators do not match the constraint operator");

  LodSpace space;
  space.hierarchy = std::move(h);
  space.coarse_dofs = con.coarse_dofs;
  space.fine_dofs = con.fine_dofs;
  space.localization = loc;
  space.basis.resize(static_cast<Eigen::Index>(con.fine_dofs.size()), static_cast<Eigen::Index>(con.coarse_dofs.size()));

  const CsrMatrix a = fine.a_matrix();
  if (loc.is_ideal())
    ideal_correctors(space, a, con);
  else
    localized_correctors(space, a, con, *loc.layers);
  galerkin_project(space, fine);
  return space;
}

void galerkin_project(LodSpace& space, const FeOperators& fine) {
  const auto t0 = std::chrono::steady_clock::now();
  const CsrMatrix a = fine.a_matrix();
  const DenseMatrix ab = a.eigen() * space.basis;
  space.a_lod.noalias() = space.basis.transpose() * ab;
  const DenseMatrix mb = fine.mass.eigen() * space.basis;
  space.m_lod.noalias() = space.basis.transpose() * mb;
  // Round-off symmetrization.
  space.a_lod = 0.5 * (space.a_lod + space.a_lod.transpose()).eval();
  space.m_lod = 0.5 * (space.m_lod + space.m_lod.transpose()).eval();
  space.timings.galerkin_seconds += seconds_since(t0);
}

DenseVector plod_project(const LodSpace& space, const FeOperators& fine, const DenseVector& v_fine) {
  if (v_fine.size() != space.fine_dim()) throw ConfigError("plod_project: dimension mismatch");
  const Eigen::LLT<DenseMatrix> llt(space.a_lod);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("plod_project: LOD stiffness is not positive definite");
  const DenseVector rhs = space.basis.transpose() * spmv(fine.a_matrix(), v_fine);
  return llt.solve(rhs);
}

DenseVector prolong(const LodSpace& space, const DenseVector& c) {
  if (c.size() != space.dim()) throw ConfigError("prolong: dimension mismatch");
  return space.basis * c;
}

}  // namespace lodgpe
