#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lodgpe/fem.hpp"
#include "lodgpe/gpe.hpp"
#include "lodgpe/lod.hpp"
#include "lodgpe/mesh.hpp"

namespace lodgpe {

struct StudyConfig {
  Rect domain{-6.0, 6.0, -6.0, 6.0};
  Potential potential = Potential::harmonic();
  double beta = 100.0;
  double fine_h = 0.0625;           // cell side of the reference mesh
  std::vector<double> H_sequence;   // coarse cell sides
  FlowParams flow;
  Localization localization = Localization::ideal();
  bool lod = true;
  bool baseline_coarse_fem = false;
  bool relative_errors = true;
  bool saturation_check = true;
  bool use_cache = true;
  std::filesystem::path cache_dir = ".lodgpe_cache";

  /// Throws ConfigError for non-dyadic H, misaligned checkerboards, etc.
  void validate() const;
  int fine_cells() const;
  int coarse_cells(double H) const;
  /// Number of red refinements from the H mesh to the reference mesh.
  int refinements(double H) const;
};

struct StudyRow {
  double H = 0.0;
  double err_h1 = 0.0;
  double err_l2 = 0.0;
  double err_energy = 0.0;
  double err_eigenvalue = 0.0;
  int iterations = 0;
  double wall_time = 0.0;

  bool ok = false;
  std::string failure;
  bool converged = false;
  bool saturated = false;  // some error within 10x of the reference's own error estimate
  int dofs = 0;
  double energy = 0.0;
  double eigenvalue = 0.0;
  std::string cache;  // corrector cache status, LOD rows only
};

struct FittedRates {
  std::optional<double> h1, l2, energy, eigenvalue;
};

struct ReferenceSummary {
  double energy = 0.0;
  double eigenvalue = 0.0;
  int fine_dofs = 0;
  int steps = 0;
  bool converged = false;
  double residual = 0.0;
  double wall_time = 0.0;
  /// Estimated discretization errors of the reference itself (same scaling
  /// as the rows), from a solve on the 2h mesh; empty if not computed.
  std::optional<StudyRow> error_estimate;
};

struct StudyResult {
  std::vector<StudyRow> rows;           // LOD
  std::vector<StudyRow> baseline_rows;  // plain coarse P1
  FittedRates rates;
  FittedRates baseline_rates;
  ReferenceSummary reference;
  bool valid = false;
  /// Energy of the LOD minimizers non-increasing as H shrinks.
  bool nested_monotone = true;
  int cache_hits = 0;
  int cache_misses = 0;
  std::vector<std::string> warnings;
};

StudyResult run_study(const StudyConfig& config);

/// Coarse P1 rows alone (the reference is recomputed).
std::vector<StudyRow> coarse_fem_baseline(const StudyConfig& config);

/// Least-squares slope of log(err) against log(h). Non-positive or
/// non-finite errors are skipped and reported in `warnings`. Throws
/// std::invalid_argument with fewer than two usable pairs.
double fit_rate(const std::vector<double>& hs, const std::vector<double>& errs,
                std::vector<std::string>* warnings = nullptr);

FittedRates fit_rates(const std::vector<StudyRow>& rows, std::vector<std::string>* warnings = nullptr);

/// LOD space for one hierarchy, loaded from or stored to the corrector
/// cache when `cache_dir` is set and the potential has a stable descriptor.
struct LodBuild {
  std::shared_ptr<const LodSpace> space;
  std::optional<CacheStatus> cache;  // unset when caching was not attempted
  std::filesystem::path cache_file;
  double seconds = 0.0;
};

LodBuild obtain_lod_space(std::shared_ptr<const MeshHierarchy> h, const FeOperators& fine_ops,
                          const Potential& potential, Localization loc,
                          const std::optional<std::filesystem::path>& cache_dir);

/// One ground state on the given space: the reference mesh for fine_fem,
/// otherwise the hierarchy with coarse side H over that mesh.
struct SolveOutcome {
  GroundState state;
  std::shared_ptr<const TriMesh> fine_mesh;
  std::shared_ptr<const FeOperators> fine_ops;
  int dofs = 0;
  std::optional<CacheStatus> cache;
  std::filesystem::path cache_file;
};

SolveOutcome solve_ground_state(const StudyConfig& config, SpaceKind space, double H);

/// "H,err_h1,..." table followed by the rate comment line.
void write_csv(std::ostream& out, const std::vector<StudyRow>& rows, const FittedRates& rates);

/// Gnuplot script plotting the columns of `csv_name` on log-log axes with
/// reference slopes `orders`.
void write_plot_script(std::ostream& out, const std::string& csv_name, const std::string& title,
                       const std::vector<int>& orders = {3, 4, 6});

/// Formats with 12 significant digits.
std::string format_number(double v);

}  // namespace lodgpe
