#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "lodgpe/fem.hpp"
#include "lodgpe/mesh.hpp"
#include "lodgpe/sparse.hpp"

namespace lodgpe {

/// Coarse-to-fine P1 interpolation on nested meshes, shape n_fine x n_coarse.
CsrMatrix prolongation_matrix(const MeshHierarchy& h, const DofMap& coarse, const DofMap& fine);

/// Moments of fine functions against the coarse hats. C v = 0 exactly when
/// the L2 projection of v onto the coarse P1 space vanishes.
struct ConstraintOperator {
  DofMap coarse_dofs;
  DofMap fine_dofs;
  CsrMatrix prolongation;  // n_fine x n_coarse
  CsrMatrix matrix;        // n_coarse x n_fine, entries (phi_j^h, Lambda_i^H)
};

ConstraintOperator build_constraint(const MeshHierarchy& h);

/// Corrector support: the whole domain ("ideal") or a patch of coarse
/// element layers around each coarse hat.
struct Localization {
  std::optional<int> layers;

  static Localization ideal() { return {}; }
  static Localization patch(int k);
  bool is_ideal() const { return !layers.has_value(); }
  std::string describe() const;
};

struct CorrectorTimings {
  double factor_seconds = 0.0;
  double solve_seconds = 0.0;
  double galerkin_seconds = 0.0;
  int solves = 0;
};

/// The multiscale space: column j of `basis` holds the fine P1 coefficients
/// of Lambda_j - Q(Lambda_j), where Q is the a-orthogonal corrector into
/// the kernel of the coarse L2 projection.
struct LodSpace {
  std::shared_ptr<const MeshHierarchy> hierarchy;
  DofMap coarse_dofs;
  DofMap fine_dofs;
  Localization localization;
  DenseMatrix basis;  // n_fine x n_coarse
  DenseMatrix a_lod;  // B^T A_h B
  DenseMatrix m_lod;  // B^T M_h B
  CorrectorTimings timings;

  int dim() const { return static_cast<int>(basis.cols()); }
  int fine_dim() const { return static_cast<int>(basis.rows()); }
};

/// Solves one saddle-point problem [A C^T; C 0](q, mu) = (A lambda_j, 0)
/// per coarse hat. In ideal mode the saddle matrix is factored once.
/// `fine` must hold a(.,.) on the hierarchy's fine mesh.
LodSpace compute_correctors(std::shared_ptr<const MeshHierarchy> h, const FeOperators& fine,
                            const ConstraintOperator& c, Localization loc = Localization::ideal());

/// Recomputes a_lod and m_lod from the basis.
void galerkin_project(LodSpace& space, const FeOperators& fine);

/// Coefficients of the a-orthogonal projection of a fine function onto the
/// space: solves a_lod c = B^T A_h v.
DenseVector plod_project(const LodSpace& space, const FeOperators& fine, const DenseVector& v_fine);

/// Fine P1 coefficients B c.
DenseVector prolong(const LodSpace& space, const DenseVector& c);

// ---------------------------------------------------------------------------
// Corrector cache

struct CorrectorKey {
  Rect domain;
  int coarse_cells = 0;
  int refinements = 0;
  std::string potential;
  std::string localization;

  std::string canonical() const;
};

std::filesystem::path cache_path(const std::filesystem::path& dir, const CorrectorKey& key);

enum class CacheStatus { hit, missing, mismatch, corrupt };
const char* to_string(CacheStatus s);

/// Writes basis, a_lod and m_lod behind a text header recording the key.
void save_lod_space(const std::filesystem::path& file, const CorrectorKey& key, const LodSpace& space);

/// Fills basis/a_lod/m_lod of `space` (whose hierarchy and dof maps must
/// already be set) if the header matches `key` and the payload checksum is
/// intact.
CacheStatus load_lod_space(const std::filesystem::path& file, const CorrectorKey& key, LodSpace& space);

}  // namespace lodgpe
