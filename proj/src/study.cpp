#include "lodgpe/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lodgpe/errors.hpp"

namespace lodgpe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// n with width / side == n, or -1.
int cells_for(double width, double side) {
  if (!(side > 0.0)) return -1;
  const double n = width / side;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, r)) return -1;
  return static_cast<int>(r);
}

int log2_exact(int ratio) {
  if (ratio < 1) return -1;
  int r = 0;
  while (ratio > 1) {
    if (ratio % 2) return -1;
    ratio /= 2;
    ++r;
  }
  return r;
}

std::string h_label(double H) {
  std::ostringstream s;
  s << H;
  return s.str();
}

const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Reference {
  std::shared_ptr<const TriMesh> mesh;
  std::shared_ptr<const FeOperators> ops;
  GroundState state;
  Norms norms;
};

Reference reference_solve(const StudyConfig& cfg, int cells) {
  Reference ref;
  ref.mesh = std::make_shared<const TriMesh>(uniform_mesh(cfg.domain, cells));
  ref.ops = std::make_shared<const FeOperators>(assemble_operators(*ref.mesh, cfg.potential));
  auto space = make_fine_fem_space(ref.mesh, ref.ops);
  ref.state = minimize(*space, cfg.potential, cfg.beta, cfg.flow);
  ref.norms = norms(*ref.ops, ref.state.fine_coeffs);
  return ref;
}

/// Fills the error columns of `row` for a state given on `mesh` (same node
/// set as the reference mesh, possibly numbered differently).
void fill_errors(StudyRow& row, const StudyConfig& cfg, const Reference& ref, const TriMesh& mesh,
                 const DofMap& dofs, const GroundState& gs) {
  const std::vector<int> perm = match_nodes(mesh, *ref.mesh);
  const DofMap& rdofs = ref.ops->dofs;
  DenseVector u = DenseVector::Zero(static_cast<Eigen::Index>(rdofs.size()));
  for (std::size_t d = 0; d < dofs.size(); ++d) {
    const int rd = rdofs.node_to_dof[perm[dofs.dof_to_node[d]]];
    if (rd < 0) throw NumericalError("state has a dof on the reference boundary");
    u[rd] = gs.fine_coeffs[static_cast<Eigen::Index>(d)];
  }
  GroundState aligned = gs;
  aligned.fine_coeffs = u;
  aligned = sign_align(std::move(aligned), ref.state.fine_coeffs, ref.ops->mass);

  const Norms e = norms(*ref.ops, ref.state.fine_coeffs - aligned.fine_coeffs);
  double de = gs.energy - ref.state.energy;
  if (de < -1e-12 * std::max(1.0, std::abs(ref.state.energy)))
    throw NumericalError("discrete energy below the reference minimum (" + format_number(de) + ")");
  de = std::max(0.0, de);
  double dl = std::abs(gs.eigenvalue - ref.state.eigenvalue);

  row.err_h1 = e.h1;
  row.err_l2 = e.l2;
  row.err_energy = de;
  row.err_eigenvalue = dl;
  if (cfg.relative_errors) {
    row.err_h1 /= ref.norms.h1;
    row.err_l2 /= ref.norms.l2;
    row.err_energy /= std::abs(ref.state.energy);
    row.err_eigenvalue /= std::abs(ref.state.eigenvalue);
  }
}

/// Errors of the 2h solution against the h reference, scaled by the
/// asymptotic factors 1/(2^p - 1) for orders p = (1, 2, 2, 2).
StudyRow reference_error_estimate(const StudyConfig& cfg, const Reference& ref) {
  const int coarse = cfg.fine_cells() / 2;
  auto h = std::make_shared<const MeshHierarchy>(build_hierarchy(cfg.domain, coarse, 1));
  auto fine_ops = std::make_shared<const FeOperators>(assemble_operators(h->fine, cfg.potential));
  auto space = make_coarse_fem_space(h, fine_ops);
  const GroundState gs = minimize(*space, cfg.potential, cfg.beta, cfg.flow);
  StudyRow est;
  est.H = 2.0 * cfg.fine_h;
  fill_errors(est, cfg, ref, h->fine, fine_ops->dofs, gs);
  est.err_h1 /= 1.0;
  est.err_l2 /= 3.0;
  est.err_energy /= 3.0;
  est.err_eigenvalue /= 3.0;
  est.ok = true;
  return est;
}

bool saturated(const StudyRow& row, const StudyRow& est) {
  return row.err_h1 < 10.0 * est.err_h1 || row.err_l2 < 10.0 * est.err_l2 ||
         row.err_energy < 10.0 * est.err_energy || row.err_eigenvalue < 10.0 * est.err_eigenvalue;
}

std::shared_ptr<const MeshHierarchy> hierarchy_for(const StudyConfig& cfg, double H) {
  const int r = cfg.refinements(H);
  if (r == 0) return std::make_shared<const MeshHierarchy>(identity_hierarchy(cfg.domain, cfg.fine_cells()));
  return std::make_shared<const MeshHierarchy>(build_hierarchy(cfg.domain, cfg.coarse_cells(H), r));
}

StudyRow compute_row(const StudyConfig& cfg, const Reference& ref, double H, SpaceKind kind, StudyResult* tally) {
  StudyRow row;
  row.H = H;
  const auto t0 = Clock::now();
  try {
    auto h = hierarchy_for(cfg, H);
    auto fine_ops = std::make_shared<const FeOperators>(assemble_operators(h->fine, cfg.potential));
    std::unique_ptr<DiscreteSpace> space;
    if (kind == SpaceKind::lod) {
      std::optional<std::filesystem::path> dir;
      if (cfg.use_cache) dir = cfg.cache_dir;
      LodBuild b = obtain_lod_space(h, *fine_ops, cfg.potential, cfg.localization, dir);
      if (b.cache) {
        row.cache = to_string(*b.cache);
        if (tally) (*b.cache == CacheStatus::hit ? tally->cache_hits : tally->cache_misses) += 1;
      }
      space = make_lod_discrete_space(b.space, fine_ops);
    } else {
      space = make_coarse_fem_space(h, fine_ops);
    }
    row.dofs = space->dim();
    const GroundState gs = minimize(*space, cfg.potential, cfg.beta, cfg.flow);
    row.iterations = gs.steps_taken;
    row.converged = gs.converged;
    row.energy = gs.energy;
    row.eigenvalue = gs.eigenvalue;
    if (!gs.converged)
      throw ConvergenceError("gradient flow did not converge in " + std::to_string(gs.steps_taken) + " steps",
                             gs.residual);
    fill_errors(row, cfg, ref, h->fine, fine_ops->dofs, gs);
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.failure = e.what();
    row.err_h1 = row.err_l2 = row.err_energy = row.err_eigenvalue = kNaN;
  }
  row.wall_time = seconds_since(t0);
  return row;
}

void fill_reference_summary(StudyResult& res, const Reference& ref, double seconds) {
  res.reference.energy = ref.state.energy;
  res.reference.eigenvalue = ref.state.eigenvalue;
  res.reference.fine_dofs = static_cast<int>(ref.ops->dofs.size());
  res.reference.steps = ref.state.steps_taken;
  res.reference.converged = ref.state.converged;
  res.reference.residual = ref.state.residual;
  res.reference.wall_time = seconds;
}

constexpr double kStationarityBound = 1e-6;

}  // namespace

// ---------------------------------------------------------------------------
// Config

void StudyConfig::validate() const {
  domain.validate();
  if (beta < 0.0 || !std::isfinite(beta)) throw ConfigError("model.beta must be non-negative");
  flow.validate();
  const int nf = cells_for(domain.width(), fine_h);
  if (nf < 0) throw ConfigError("study.fine_h must divide the domain width");
  if (cells_for(domain.height(), fine_h) != nf) throw ConfigError("study.fine_h must give square cells");
  for (double H : H_sequence) {
    const int nc = cells_for(domain.width(), H);
    if (nc < 0) throw ConfigError("H = " + h_label(H) + " does not divide the domain width");
    if (nf % nc != 0 || log2_exact(nf / nc) < 0)
      throw ConfigError("H = " + h_label(H) + " is not a dyadic multiple of the reference cell side");
  }
  if (saturation_check && nf % 2 != 0) throw ConfigError("saturation check needs an even number of fine cells");
  if (potential.kind() == Potential::Kind::checkerboard) {
    const double ratio = potential.square_side() / fine_h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
      throw ConfigError("checkerboard squares must be unions of reference cells");
    const double ox = domain.xmin / potential.square_side(), oy = domain.ymin / potential.square_side();
    if (std::abs(ox - std::round(ox)) > 1e-9 || std::abs(oy - std::round(oy)) > 1e-9)
      throw ConfigError("checkerboard squares must start on the domain corner");
  }
}

int StudyConfig::fine_cells() const {
  const int n = cells_for(domain.width(), fine_h);
  if (n < 0) throw ConfigError("study.fine_h must divide the domain width");
  return n;
}

int StudyConfig::coarse_cells(double H) const {
  const int n = cells_for(domain.width(), H);
  if (n < 0) throw ConfigError("H = " + h_label(H) + " does not divide the domain width");
  return n;
}

int StudyConfig::refinements(double H) const {
  const int nf = fine_cells(), nc = coarse_cells(H);
  const int r = nf % nc == 0 ? log2_exact(nf / nc) : -1;
  if (r < 0) throw ConfigError("H = " + h_label(H) + " is not a dyadic multiple of the reference cell side");
  return r;
}

// ---------------------------------------------------------------------------
// Corrector cache

LodBuild obtain_lod_space(std::shared_ptr<const MeshHierarchy> h, const FeOperators& fine_ops,
                          const Potential& potential, Localization loc,
                          const std::optional<std::filesystem::path>& cache_dir) {
  const auto t0 = Clock::now();
  LodBuild out;
  const ConstraintOperator con = build_constraint(*h);
  const bool cacheable = cache_dir.has_value() && potential.cacheable();
  CorrectorKey key;
  if (cacheable) {
    key.domain = h->coarse.domain;
    key.coarse_cells = h->coarse.cells_per_side;
    key.refinements = h->refinements;
    key.potential = potential.descriptor();
    key.localization = loc.describe();
    out.cache_file = cache_path(*cache_dir, key);
    auto space = std::make_shared<LodSpace>();
    space->hierarchy = h;
    space->coarse_dofs = con.coarse_dofs;
    space->fine_dofs = con.fine_dofs;
    space->localization = loc;
    const CacheStatus st = load_lod_space(out.cache_file, key, *space);
    out.cache = st;
    if (st == CacheStatus::hit) {
      out.space = std::move(space);
      out.seconds = seconds_since(t0);
      return out;
    }
  }
  auto space = std::make_shared<LodSpace>(compute_correctors(h, fine_ops, con, loc));
  if (cacheable) {
    try {
      save_lod_space(out.cache_file, key, *space);
    } catch (const std::exception&) {
      out.cache_file.clear();
    }
  }
  out.space = std::move(space);
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Rates

double fit_rate(const std::vector<double>& hs, const std::vector<double>& errs, std::vector<std::string>* warnings) {
  if (hs.size() != errs.size()) throw std::invalid_argument("fit_rate: hs and errs differ in length");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0) || !(errs[i] > 0.0) || !std::isfinite(errs[i]) || !std::isfinite(hs[i])) {
      if (warnings)
        warnings->push_back("fit_rate: skipping pair (" + format_number(hs[i]) + ", " + format_number(errs[i]) + ")");
      continue;
    }
    x.push_back(std::log(hs[i]));
    y.push_back(std::log(errs[i]));
  }
  if (x.size() < 2) throw std::invalid_argument("fit_rate: fewer than two positive (h, err) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_rate: all h values coincide");
  return sxy / sxx;
}

FittedRates fit_rates(const std::vector<StudyRow>& rows, std::vector<std::string>* warnings) {
  std::vector<double> hs, h1, l2, en, ev;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    hs.push_back(r.H);
    h1.push_back(r.err_h1);
    l2.push_back(r.err_l2);
    en.push_back(r.err_energy);
    ev.push_back(r.err_eigenvalue);
  }
  auto one = [&](const std::vector<double>& e) -> std::optional<double> {
    try {
      return fit_rate(hs, e, warnings);
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  };
  FittedRates out;
  out.h1 = one(h1);
  out.l2 = one(l2);
  out.energy = one(en);
  out.eigenvalue = one(ev);
  return out;
}

// ---------------------------------------------------------------------------
// Study driver

StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyResult res;

  auto t0 = Clock::now();
  const Reference ref = reference_solve(cfg, cfg.fine_cells());
  fill_reference_summary(res, ref, seconds_since(t0));
  res.valid = ref.state.converged && ref.state.residual <= kStationarityBound;
  if (!ref.state.converged) res.warnings.push_back("reference gradient flow did not converge");
  if (ref.state.residual > kStationarityBound)
    res.warnings.push_back("reference stationarity residual " + format_number(ref.state.residual) +
                           " exceeds " + format_number(kStationarityBound));

  if (cfg.saturation_check) {
    try {
      res.reference.error_estimate = reference_error_estimate(cfg, ref);
    } catch (const std::exception& e) {
      res.warnings.push_back(std::string("reference error estimate failed: ") + e.what());
    }
  }

  std::vector<double> hs = cfg.H_sequence;
  std::sort(hs.begin(), hs.end(), std::greater<>());

  auto run_rows = [&](SpaceKind kind, std::vector<StudyRow>& rows) {
    for (double H : hs) {
      rows.push_back(compute_row(cfg, ref, H, kind, &res));
      StudyRow& row = rows.back();
      const char* label = kind == SpaceKind::lod ? "LOD" : "coarse P1";
      if (!row.ok) {
        res.warnings.push_back(std::string(label) + " row H=" + h_label(H) + " failed: " + row.failure);
      } else if (res.reference.error_estimate && saturated(row, *res.reference.error_estimate)) {
        row.saturated = true;
        res.warnings.push_back(std::string(label) + " row H=" + h_label(H) +
                               " is within 10x of the reference discretization error");
      }
    }
  };
  if (cfg.lod) run_rows(SpaceKind::lod, res.rows);
  if (cfg.baseline_coarse_fem) run_rows(SpaceKind::coarse_fem, res.baseline_rows);

  res.rates = fit_rates(res.rows, &res.warnings);
  res.baseline_rates = fit_rates(res.baseline_rows, &res.warnings);

  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : res.rows) {
    if (!r.ok) continue;
    if (r.energy > prev + 1e-10) res.nested_monotone = false;
    prev = r.energy;
  }
  if (!res.nested_monotone) res.warnings.push_back("LOD energies are not monotone in H");
  return res;
}

std::vector<StudyRow> coarse_fem_baseline(const StudyConfig& config) {
  StudyConfig cfg = config;
  cfg.lod = false;
  cfg.baseline_coarse_fem = true;
  cfg.saturation_check = false;
  return run_study(cfg).baseline_rows;
}

SolveOutcome solve_ground_state(const StudyConfig& s, SpaceKind kind, double H) {
  s.flow.validate();
  SolveOutcome out;
  std::unique_ptr<DiscreteSpace> space;
  if (kind == SpaceKind::fine_fem) {
    out.fine_mesh = std::make_shared<const TriMesh>(uniform_mesh(s.domain, s.fine_cells()));
    out.fine_ops = std::make_shared<const FeOperators>(assemble_operators(*out.fine_mesh, s.potential));
    space = make_fine_fem_space(out.fine_mesh, out.fine_ops);
  } else {
    auto h = hierarchy_for(s, H);
    out.fine_mesh = std::shared_ptr<const TriMesh>(h, &h->fine);
    out.fine_ops = std::make_shared<const FeOperators>(assemble_operators(h->fine, s.potential));
    if (kind == SpaceKind::lod) {
      std::optional<std::filesystem::path> dir;
      if (s.use_cache) dir = s.cache_dir;
      const LodBuild b = obtain_lod_space(h, *out.fine_ops, s.potential, s.localization, dir);
      out.cache = b.cache;
      out.cache_file = b.cache_file;
      space = make_lod_discrete_space(b.space, out.fine_ops);
    } else {
      space = make_coarse_fem_space(h, out.fine_ops);
    }
  }
  out.dofs = space->dim();
  out.state = minimize(*space, s.potential, s.beta, s.flow);
  return out;
}

// ---------------------------------------------------------------------------
// Output

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<StudyRow>& rows, const FittedRates& rates) {
  out << "H,err_h1,err_l2,err_energy,err_eigenvalue,iters,wall_time_s\n";
  for (const auto& r : rows)
    out << format_number(r.H) << ',' << format_number(r.err_h1) << ',' << format_number(r.err_l2) << ','
        << format_number(r.err_energy) << ',' << format_number(r.err_eigenvalue) << ',' << r.iterations << ','
        << format_number(r.wall_time) << '\n';
  auto rate = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
  out << "# rate_h1=" << rate(rates.h1) << ", rate_l2=" << rate(rates.l2) << ", rate_energy=" << rate(rates.energy)
      << ", rate_eigenvalue=" << rate(rates.eigenvalue) << '\n';
}

void write_plot_script(std::ostream& out, const std::string& csv_name, const std::string& title,
                       const std::vector<int>& orders) {
  out << "set datafile separator ','\n"
      << "set datafile commentschars '#'\n"
      << "set logscale xy\n"
      << "set xlabel 'H'\n"
      << "set ylabel 'error'\n"
      << "set key left top\n"
      << "set title '" << title << "'\n"
      << "stats '" << csv_name << "' using 1 every ::1 nooutput\n"
      << "Hmax = STATS_max\n"
      << "stats '" << csv_name << "' using 2 every ::1 nooutput\n"
      << "E0 = STATS_max\n"
      << "plot '" << csv_name << "' using 1:2 every ::1 with linespoints title 'H1', \\\n"
      << "     '' using 1:3 every ::1 with linespoints title 'L2', \\\n"
      << "     '' using 1:4 every ::1 with linespoints title 'energy', \\\n"
      << "     '' using 1:5 every ::1 with linespoints title 'eigenvalue'";
  for (int p : orders)
    out << ", \\\n     E0*(x/Hmax)**" << p << " with lines dashtype 2 title 'O(H^" << p << ")'";
  out << '\n';
}

}  // namespace lodgpe
