#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lodgpe/fem.hpp"
#include "lodgpe/lod.hpp"
#include "lodgpe/mesh.hpp"
#include "lodgpe/sparse.hpp"

namespace lodgpe {

enum class SpaceKind { coarse_fem, lod, fine_fem };
const char* to_string(SpaceKind k);

/// A finite-dimensional subspace of the fine P1 space in which the energy
/// is minimized. Coefficients live in the space's own coordinates; every
/// functional is evaluated on the fine mesh through to_fine().
class DiscreteSpace {
 public:
  virtual ~DiscreteSpace() = default;

  virtual SpaceKind kind() const = 0;
  virtual int dim() const = 0;
  virtual const TriMesh& fine_mesh() const = 0;
  /// a(.,.) and mass on the fine mesh.
  virtual const FeOperators& fine_operators() const = 0;
  /// Location attached to each coefficient (node of the space's mesh).
  virtual std::vector<Point> coefficient_points() const = 0;

  virtual DenseVector to_fine(const DenseVector& c) const = 0;
  virtual DenseVector apply_mass(const DenseVector& c) const = 0;
  /// (A + beta N(u)) c, with u the function represented by c.
  virtual DenseVector apply_hamiltonian(const DenseVector& c, const DenseVector& u_fine, double beta) const = 0;

  /// Solves (M/tau + A + beta N(u)) x = rhs for the current state u.
  virtual DenseVector flow_solve(const DenseVector& c, const DenseVector& u_fine, double beta, double tau,
                                 const DenseVector& rhs, const DenseVector& guess) = 0;
};

/// P1 space on the fine mesh itself.
std::unique_ptr<DiscreteSpace> make_fine_fem_space(std::shared_ptr<const TriMesh> mesh,
                                                   std::shared_ptr<const FeOperators> ops);

/// Plain coarse P1 space of a hierarchy; operators are the exact Galerkin
/// projections of the fine ones.
std::unique_ptr<DiscreteSpace> make_coarse_fem_space(std::shared_ptr<const MeshHierarchy> h,
                                                     std::shared_ptr<const FeOperators> fine_ops);

std::unique_ptr<DiscreteSpace> make_lod_discrete_space(std::shared_ptr<const LodSpace> space,
                                                       std::shared_ptr<const FeOperators> fine_ops);

enum class InitialGuess { thomas_fermi, coarse_hat_blob, constant, given };
const char* to_string(InitialGuess g);
InitialGuess initial_guess_from_string(const std::string& s);

struct FlowParams {
  double tau = 0.5;
  double tol_energy = 1e-10;
  /// Additional stop test on the relative stationarity residual; 0 disables.
  double tol_residual = 0.0;
  int max_steps = 10000;
  InitialGuess initial_guess = InitialGuess::thomas_fermi;
  DenseVector given;          // used with InitialGuess::given
  double inner_tol = 1e-13;   // relative tolerance of iterative step solves

  void validate() const;
};

struct GroundState {
  DenseVector coeffs;
  DenseVector fine_coeffs;
  double energy = 0.0;
  double eigenvalue = 0.0;
  double l4_norm4 = 0.0;
  int steps_taken = 0;
  bool converged = false;
  double residual = 0.0;  // relative stationarity residual at exit
  std::vector<double> energy_history;
};

/// Normalized gradient flow: (M/tau + A + beta N(u^n)) w = M u^n / tau,
/// u^{n+1} = w / |w|_{L2}. Stops when |E^{n+1} - E^n| / tau < tol_energy
/// (and the residual test, if enabled). A non-converged run returns with
/// converged == false.
GroundState minimize(DiscreteSpace& space, const Potential& potential, double beta, const FlowParams& params);

/// Initial coefficient vector (normalized) for the requested guess.
DenseVector initial_state(const DiscreteSpace& space, const Potential& potential, double beta,
                          const FlowParams& params);

/// Chemical potential of the Thomas-Fermi profile max(0, (mu - V)/beta)
/// with unit mass on the mesh.
double thomas_fermi_mu(const TriMesh& mesh, const Potential& potential, double beta);

/// |(A + beta N(u)) u - lambda M u|_2 / |(A + beta N(u)) u|_2.
double stationarity_residual(const DiscreteSpace& space, const DenseVector& c, const DenseVector& u_fine,
                             double beta, double lambda);

/// Flips the state if (u, reference)_{L2} < 0.
GroundState sign_align(GroundState candidate, const DenseVector& reference_fine, const CsrMatrix& fine_mass);

}  // namespace lodgpe
