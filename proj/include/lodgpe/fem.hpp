#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "lodgpe/mesh.hpp"
#include "lodgpe/sparse.hpp"

namespace lodgpe {

/// Quadrature on the reference triangle in barycentric coordinates.
/// Weights sum to one; multiply by the triangle area.
struct QuadRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Symmetric 6-point rule, exact for polynomials of degree 4. Enough for the
/// quartic term of a P1 function and for quadratic potentials times P1xP1.
const QuadRule& default_quadrature();

/// Trapping potential V >= 0.
class Potential {
 public:
  enum class Kind { constant, harmonic, checkerboard, callable };

  static Potential constant(double value);
  /// V(x, y) = 0.5 (x^2 + y^2).
  static Potential harmonic();
  /// Alternating squares anchored at the origin; square (i, j) with i + j
  /// even takes `low`, odd takes `high`.
  static Potential checkerboard(double square_side, double low, double high);
  static Potential callable(std::function<double(double, double)> fn, std::string name = "callable");

  Kind kind() const { return kind_; }
  double operator()(double x, double y) const;

  /// Canonical text form; used in cache keys and manifests.
  std::string descriptor() const;
  /// Callables have no stable descriptor and cannot key a cache.
  bool cacheable() const { return kind_ != Kind::callable; }
  /// Piecewise constant on every triangle of an aligned mesh.
  bool piecewise_constant() const { return kind_ == Kind::checkerboard || kind_ == Kind::constant; }

  /// Throws ConfigError if some triangle straddles a checkerboard edge.
  void check_alignment(const TriMesh& mesh) const;

  double square_side() const { return side_; }
  double low() const { return low_; }
  double high() const { return high_; }
  double value() const { return value_; }

 private:
  Kind kind_ = Kind::constant;
  double value_ = 0.0;
  double side_ = 0.0, low_ = 0.0, high_ = 0.0;
  std::function<double(double, double)> fn_;
  std::string name_;
};

/// P1 operators with homogeneous Dirichlet conditions imposed by eliminating
/// the boundary nodes (or, with DofMap::all_nodes, the full Neumann-type
/// assembly used by consistency checks).
struct FeOperators {
  DofMap dofs;
  CsrMatrix stiffness;       // (grad phi_i, grad phi_j)
  CsrMatrix mass;            // (phi_i, phi_j)
  CsrMatrix potential_mass;  // (V phi_i, phi_j)

  /// Matrix of a(v, w) = (grad v, grad w) + (V v, w).
  CsrMatrix a_matrix() const { return add(1.0, stiffness, 1.0, potential_mass); }
};

FeOperators assemble_operators(const TriMesh& mesh, const Potential& potential,
                               const QuadRule& quad = default_quadrature());
FeOperators assemble_operators(const TriMesh& mesh, const Potential& potential, const QuadRule& quad,
                               DofMap dofs);

/// Weighted mass matrix (|u|^2 phi_i, phi_j) for the P1 function u given in
/// dof coordinates (eliminated nodes carry zero).
CsrMatrix assemble_density_mass(const TriMesh& mesh, const DofMap& dofs, const DenseVector& u,
                                const QuadRule& quad = default_quadrature());

/// Vector (|u|^2 u, phi_i); equals assemble_density_mass(u) * u.
DenseVector nonlinear_load(const TriMesh& mesh, const DofMap& dofs, const DenseVector& u,
                           const QuadRule& quad = default_quadrature());

/// Load vector (f, phi_i).
DenseVector load_vector(const TriMesh& mesh, const DofMap& dofs, const std::function<double(double, double)>& f,
                        const QuadRule& quad = default_quadrature());

/// Nodal interpolant on the dofs.
DenseVector interpolate(const TriMesh& mesh, const DofMap& dofs, const std::function<double(double, double)>& f);

/// Integral of u^4 for P1 u, exact with a degree-4 rule.
double l4_norm4(const TriMesh& mesh, const DofMap& dofs, const DenseVector& u,
                const QuadRule& quad = default_quadrature());

/// E(u) = 1/2 (grad u, grad u) + 1/2 (V u, u) + beta/4 (u^4, 1).
double energy(const FeOperators& ops, const TriMesh& mesh, const DenseVector& u, double beta,
              const QuadRule& quad = default_quadrature());

/// Ground-state eigenvalue from the energy: lambda = 2E + beta/2 |u|_{L4}^4.
inline double eigenvalue_from_state(double energy_value, double l4_norm4_value, double beta) {
  return 2.0 * energy_value + 0.5 * beta * l4_norm4_value;
}

struct Norms {
  double l2 = 0.0;
  double h1 = 0.0;  // full norm: sqrt(|e|^2 + |grad e|^2)
};

Norms norms(const FeOperators& ops, const DenseVector& e);

/// Expands a dof vector to all mesh nodes (zeros on eliminated nodes).
DenseVector to_nodal(const DofMap& dofs, std::size_t num_nodes, const DenseVector& u);

}  // namespace lodgpe
