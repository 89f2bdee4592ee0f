#include "lodgpe/gpe.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lodgpe/errors.hpp"

namespace lodgpe {

const char* to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::coarse_fem:
      return "coarse_fem";
    case SpaceKind::lod:
      return "lod";
    case SpaceKind::fine_fem:
      return "fine_fem";
  }
  return "?";
}

const char* to_string(InitialGuess g) {
  switch (g) {
    case InitialGuess::thomas_fermi:
      return "thomas_fermi";
    case InitialGuess::coarse_hat_blob:
      return "coarse_hat_blob";
    case InitialGuess::constant:
      return "constant";
    case InitialGuess::given:
      return "given";
  }
  return "?";
}

InitialGuess initial_guess_from_string(const std::string& s) {
  for (auto g : {InitialGuess::thomas_fermi, InitialGuess::coarse_hat_blob, InitialGuess::constant})
    if (s == to_string(g)) return g;
  throw ConfigError("unknown initial guess '" + s + "' (expected thomas_fermi, coarse_hat_blob or constant)");
}

void FlowParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("flow.tau must be positive");
  if (!(tol_energy > 0.0)) throw ConfigError("flow.tol_energy must be positive");
  if (tol_residual < 0.0) throw ConfigError("flow.tol_residual must be non-negative");
  if (max_steps < 1) throw ConfigError("flow.max_steps must be at least 1");
  if (!(inner_tol > 0.0)) throw ConfigError("flow.inner_tol must be positive");
}

namespace {

std::vector<Point> dof_points(const TriMesh& mesh, const DofMap& dofs) {
  std::vector<Point> pts;
  pts.reserve(dofs.size());
  for (int node : dofs.dof_to_node) pts.push_back(mesh.nodes[node]);
  return pts;
}

/// P1 space on some mesh of the hierarchy; the fine space is the special
/// case with an identity prolongation.
class FemSpace final : public DiscreteSpace {
 public:
  FemSpace(SpaceKind kind, std::shared_ptr<const TriMesh> fine_mesh, std::shared_ptr<const FeOperators> fine_ops)
      : kind_(kind), fine_mesh_(std::move(fine_mesh)), fine_ops_(std::move(fine_ops)) {
    mesh_ = fine_mesh_.get();
    dofs_ = fine_ops_->dofs;
    a_ = fine_ops_->a_matrix();
    m_ = fine_ops_->mass;
  }

  FemSpace(std::shared_ptr<const MeshHierarchy> h, std::shared_ptr<const FeOperators> fine_ops)
      : kind_(SpaceKind::coarse_fem), hierarchy_(std::move(h)), fine_ops_(std::move(fine_ops)) {
    mesh_ = &hierarchy_->coarse;
    dofs_ = DofMap::interior(hierarchy_->coarse);
    const DofMap fine_dofs = DofMap::interior(hierarchy_->fine);
    if (fine_dofs.size() != fine_ops_->dofs.size())
      throw ConfigError("coarse space: fine operators do not match the hierarchy");
    prolongation_ = prolongation_matrix(*hierarchy_, dofs_, fine_dofs);
    using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
    const auto p = prolongation_.eigen();
    const RowSparse pt = p.transpose();
    const RowSparse a = pt * (fine_ops_->a_matrix().eigen() * p);
    const RowSparse m = pt * (fine_ops_->mass.eigen() * p);
    a_ = CsrMatrix::from_eigen(a);
    m_ = CsrMatrix::from_eigen(m);
  }

  SpaceKind kind() const override { return kind_; }
  int dim() const override { return static_cast<int>(dofs_.size()); }
  const TriMesh& fine_mesh() const override { return hierarchy_ ? hierarchy_->fine : *fine_mesh_; }
  const FeOperators& fine_operators() const override { return *fine_ops_; }
  std::vector<Point> coefficient_points() const override { return dof_points(*mesh_, dofs_); }

  DenseVector to_fine(const DenseVector& c) const override {
    if (!hierarchy_) return c;
    return spmv(prolongation_, c);
  }
  DenseVector apply_mass(const DenseVector& c) const override { return spmv(m_, c); }
  DenseVector apply_hamiltonian(const DenseVector& c, const DenseVector&, double beta) const override {
    DenseVector out = spmv(a_, c);
    if (beta != 0.0) out += beta * nonlinear_load(*mesh_, dofs_, c);
    return out;
  }

  DenseVector flow_solve(const DenseVector& c, const DenseVector&, double beta, double tau, const DenseVector& rhs,
                         const DenseVector&) override {
    CsrMatrix k = add(1.0 / tau, m_, 1.0, a_);
    if (beta != 0.0) k = add(1.0, k, beta, assemble_density_mass(*mesh_, dofs_, c));
    solver_.factorize(k);
    return solver_.solve(rhs);
  }

 private:
  SpaceKind kind_;
  std::shared_ptr<const MeshHierarchy> hierarchy_;
  std::shared_ptr<const TriMesh> fine_mesh_;
  std::shared_ptr<const FeOperators> fine_ops_;
  const TriMesh* mesh_ = nullptr;
  DofMap dofs_;
  CsrMatrix prolongation_;
  CsrMatrix a_, m_;
  SpdSolver solver_;
};

/// Multiscale space. Step systems are solved matrix-free with CG; the
/// nonlinear term enters through the fine mesh.
class LodDiscreteSpace final : public DiscreteSpace {
 public:
  LodDiscreteSpace(std::shared_ptr<const LodSpace> space, std::shared_ptr<const FeOperators> fine_ops)
      : space_(std::move(space)), fine_ops_(std::move(fine_ops)) {
    if (!space_ || !space_->hierarchy) throw ConfigError("LOD space: missing hierarchy");
    if (static_cast<int>(fine_ops_->dofs.size()) != space_->fine_dim())
      throw ConfigError("LOD space: fine operators do not match the basis");
  }

  SpaceKind kind() const override { return SpaceKind::lod; }
  int dim() const override { return space_->dim(); }
  const TriMesh& fine_mesh() const override { return space_->hierarchy->fine; }
  const FeOperators& fine_operators() const override { return *fine_ops_; }
  std::vector<Point> coefficient_points() const override {
    return dof_points(space_->hierarchy->coarse, space_->coarse_dofs);
  }

  DenseVector to_fine(const DenseVector& c) const override { return space_->basis * c; }
  DenseVector apply_mass(const DenseVector& c) const override { return space_->m_lod * c; }
  DenseVector apply_hamiltonian(const DenseVector& c, const DenseVector& u_fine, double beta) const override {
    DenseVector out = space_->a_lod * c;
    if (beta != 0.0)
      out.noalias() += beta * (space_->basis.transpose() * nonlinear_load(fine_mesh(), fine_ops_->dofs, u_fine));
    return out;
  }

  DenseVector flow_solve(const DenseVector&, const DenseVector& u_fine, double beta, double tau,
                         const DenseVector& rhs, const DenseVector& guess) override {
    if (tau != k0_tau_) {
      k0_ = space_->m_lod / tau + space_->a_lod;
      k0_tau_ = tau;
      precond_s_ = -1.0;
    }
    const TriMesh& fm = fine_mesh();
    CsrMatrix n;
    double s = 0.0;
    if (beta != 0.0) {
      n = assemble_density_mass(fm, fine_ops_->dofs, u_fine);
      s = l4_norm4(fm, fine_ops_->dofs, u_fine);
    }
    // The density term is replaced by its mean s * M in the preconditioner.
    if (precond_s_ < 0.0 || std::abs(s - precond_s_) > 0.1 * precond_s_) {
      precond_.compute(k0_ + (beta * s) * space_->m_lod);
      if (precond_.info() != Eigen::Success) throw SingularMatrixError("LOD step preconditioner is not SPD");
      precond_s_ = s;
    }
    const DenseMatrix& b = space_->basis;
    auto apply = [&](const DenseVector& v) -> DenseVector {
      DenseVector out = k0_ * v;
      if (beta != 0.0) {
        const DenseVector bv = b * v;
        out.noalias() += beta * (b.transpose() * spmv(n, bv));
      }
      return out;
    };
    auto precond = [&](const DenseVector& r) -> DenseVector { return precond_.solve(r); };
    CgResult res = pcg(apply, precond, rhs, guess, inner_tol, 500);
    if (!(res.relative_residual <= std::max(1e-8, inner_tol)))
      throw ConvergenceError("LOD step solve did not converge", res.relative_residual);
    return res.x;
  }

  double inner_tol = 1e-13;

 private:
  std::shared_ptr<const LodSpace> space_;
  std::shared_ptr<const FeOperators> fine_ops_;
  DenseMatrix k0_;
  double k0_tau_ = -1.0;
  Eigen::LLT<DenseMatrix> precond_;
  double precond_s_ = -1.0;
};

double mass_norm(const DiscreteSpace& space, const DenseVector& c) { return std::sqrt(c.dot(space.apply_mass(c))); }

}  // namespace

std::unique_ptr<DiscreteSpace> make_fine_fem_space(std::shared_ptr<const TriMesh> mesh,
                                                   std::shared_ptr<const FeOperators> ops) {
  if (!mesh || !ops) throw ConfigError("fine space: missing mesh or operators");
  return std::make_unique<FemSpace>(SpaceKind::fine_fem, std::move(mesh), std::move(ops));
}

std::unique_ptr<DiscreteSpace> make_coarse_fem_space(std::shared_ptr<const MeshHierarchy> h,
                                                     std::shared_ptr<const FeOperators> fine_ops) {
  if (!h || !fine_ops) throw ConfigError("coarse space: missing hierarchy or operators");
  return std::make_unique<FemSpace>(std::move(h), std::move(fine_ops));
}

std::unique_ptr<DiscreteSpace> make_lod_discrete_space(std::shared_ptr<const LodSpace> space,
                                                       std::shared_ptr<const FeOperators> fine_ops) {
  if (!fine_ops) throw ConfigError("LOD space: missing operators");
  return std::make_unique<LodDiscreteSpace>(std::move(space), std::move(fine_ops));
}

double thomas_fermi_mu(const TriMesh& mesh, const Potential& potential, double beta) {
  if (!(beta > 0.0)) throw ConfigError("Thomas-Fermi profile needs beta > 0");
  const QuadRule& q = default_quadrature();
  std::vector<double> v, w;
  v.reserve(mesh.num_triangles() * q.weights.size());
  w.reserve(v.capacity());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = std::abs(mesh.signed_area(t));
    for (std::size_t k = 0; k < q.weights.size(); ++k) {
      const auto& b = q.points[k];
      double x = 0.0, y = 0.0;
      for (int i = 0; i < 3; ++i) {
        x += b[i] * mesh.nodes[tri[i]].x;
        y += b[i] * mesh.nodes[tri[i]].y;
      }
      v.push_back(potential(x, y));
      w.push_back(area * q.weights[k]);
    }
  }
  auto mass = [&](double mu) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m += w[i] * std::max(0.0, mu - v[i]);
    return m / beta;
  };
  double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end()) + beta / mesh.domain.area();
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DenseVector initial_state(const DiscreteSpace& space, const Potential& potential, double beta,
                          const FlowParams& params) {
  const int n = space.dim();
  if (n == 0) throw ConfigError("discrete space has no degrees of freedom");
  DenseVector c = DenseVector::Ones(n);
  const auto pts = space.coefficient_points();
  switch (params.initial_guess) {
    case InitialGuess::given:
      if (params.given.size() != n) throw ConfigError("given initial state has the wrong dimension");
      c = params.given;
      break;
    case InitialGuess::constant:
      break;
    case InitialGuess::coarse_hat_blob: {
      const Rect& d = space.fine_mesh().domain;
      const double cx = 0.5 * (d.xmin + d.xmax), cy = 0.5 * (d.ymin + d.ymax);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double dd = std::hypot(pts[i].x - cx, pts[i].y - cy);
        if (dd < best_d) {
          best_d = dd;
          best = i;
        }
      }
      c.setZero();
      c[best] = 1.0;
      break;
    }
    case InitialGuess::thomas_fermi:
      if (beta > 0.0) {
        const double mu = thomas_fermi_mu(space.fine_mesh(), potential, beta);
        for (int i = 0; i < n; ++i) c[i] = std::sqrt(std::max(0.0, (mu - potential(pts[i].x, pts[i].y)) / beta));
        if (c.maxCoeff() <= 0.0) c.setOnes();
      }
      break;
  }
  const double nrm = mass_norm(space, c);
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("initial state has zero L2 norm");
  return c / nrm;
}

double stationarity_residual(const DiscreteSpace& space, const DenseVector& c, const DenseVector& u_fine,
                             double beta, double lambda) {
  const DenseVector hc = space.apply_hamiltonian(c, u_fine, beta);
  const double denom = hc.norm();
  if (denom == 0.0) return 0.0;
  return (hc - lambda * space.apply_mass(c)).norm() / denom;
}

GroundState minimize(DiscreteSpace& space, const Potential& potential, double beta, const FlowParams& params) {
  params.validate();
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  if (auto* lod = dynamic_cast<LodDiscreteSpace*>(&space)) lod->inner_tol = params.inner_tol;

  const FeOperators& fops = space.fine_operators();
  const TriMesh& fmesh = space.fine_mesh();

  GroundState gs;
  DenseVector c = initial_state(space, potential, beta, params);
  DenseVector uf = space.to_fine(c);
  double e = energy(fops, fmesh, uf, beta);
  double l4 = l4_norm4(fmesh, fops.dofs, uf);
  double lambda = eigenvalue_from_state(e, l4, beta);
  gs.energy_history.push_back(e);

  const double tau = params.tau;
  for (int step = 1; step <= params.max_steps; ++step) {
    const DenseVector rhs = space.apply_mass(c) / tau;
    const DenseVector guess = c / (1.0 + tau * lambda);
    DenseVector w = space.flow_solve(c, uf, beta, tau, rhs, guess);
    const double nrm = mass_norm(space, w);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("gradient flow produced a degenerate state");
    c = w / nrm;
    uf = space.to_fine(c);
    const double e_next = energy(fops, fmesh, uf, beta);
    if (!std::isfinite(e_next)) throw NumericalError("gradient flow energy is not finite");
    l4 = l4_norm4(fmesh, fops.dofs, uf);
    lambda = eigenvalue_from_state(e_next, l4, beta);
    gs.energy_history.push_back(e_next);
    gs.steps_taken = step;
    const double de = std::abs(e_next - e) / tau;
    e = e_next;
    if (de < params.tol_energy) {
      if (params.tol_residual <= 0.0) {
        gs.converged = true;
        break;
      }
      if (stationarity_residual(space, c, uf, beta, lambda) < params.tol_residual) {
        gs.converged = true;
        break;
      }
    }
  }

  gs.coeffs = std::move(c);
  gs.fine_coeffs = std::move(uf);
  gs.energy = e;
  gs.l4_norm4 = l4;
  gs.eigenvalue = lambda;
  gs.residual = stationarity_residual(space, gs.coeffs, gs.fine_coeffs, beta, lambda);
  return gs;
}

GroundState sign_align(GroundState candidate, const DenseVector& reference_fine, const CsrMatrix& fine_mass) {
  if (reference_fine.size() != candidate.fine_coeffs.size()) throw ConfigError("sign_align: dimension mismatch");
  if (candidate.fine_coeffs.dot(spmv(fine_mass, reference_fine)) < 0.0) {
    candidate.coeffs = -candidate.coeffs;
    candidate.fine_coeffs = -candidate.fine_coeffs;
  }
  return candidate;
}

}  // namespace lodgpe
