// lodgpe: ground states and convergence studies from the command line.
//
//   lodgpe solve      --config run.cfg [--out DIR] [section.key=value ...]
//   lodgpe study      --config run.cfg [--out DIR] [--plot]
//   lodgpe correctors --config run.cfg
//
// Exit status: 0 success, 1 usage or configuration error, 2 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "lodgpe/config.hpp"
#include "lodgpe/errors.hpp"
#include "lodgpe/gpe.hpp"
#include "lodgpe/parallel.hpp"
#include "lodgpe/study.hpp"

#ifndef LODGPE_VERSION
#define LODGPE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lodgpe;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;

struct Options {
  std::string config;
  std::string out = "lodgpe_out";
  unsigned threads = 0;
  bool no_cache = false;
  std::string cache_dir;
  bool relative = false;
  bool absolute = false;
  bool plot = false;
  std::vector<std::string> overrides;
};

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Flags are folded into the override list so the manifest records them.
std::vector<std::string> effective_overrides(const Options& o) {
  std::vector<std::string> ov = o.overrides;
  if (o.no_cache) ov.push_back("study.use_cache=false");
  if (!o.cache_dir.empty()) ov.push_back("study.cache_dir=" + o.cache_dir);
  if (o.relative) ov.push_back("study.relative_errors=true");
  if (o.absolute) ov.push_back("study.relative_errors=false");
  return ov;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json row_json(const StudyRow& r) {
  json j;
  j["H"] = r.H;
  j["ok"] = r.ok;
  if (!r.ok) j["failure"] = r.failure;
  j["err_h1"] = number(r.err_h1);
  j["err_l2"] = number(r.err_l2);
  j["err_energy"] = number(r.err_energy);
  j["err_eigenvalue"] = number(r.err_eigenvalue);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["saturated"] = r.saturated;
  j["dofs"] = r.dofs;
  j["energy"] = number(r.energy);
  j["eigenvalue"] = number(r.eigenvalue);
  if (!r.cache.empty()) j["cache"] = r.cache;
  j["wall_time_s"] = r.wall_time;
  return j;
}

json rates_json(const FittedRates& r) {
  auto v = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"h1", v(r.h1)}, {"l2", v(r.l2)}, {"energy", v(r.energy)}, {"eigenvalue", v(r.eigenvalue)}};
}

class Run {
 public:
  Run(std::string command, const Options& o, RunConfig cfg) : opt_(o), cfg_(std::move(cfg)) {
    manifest_["tool"] = "lodgpe";
    manifest_["version"] = LODGPE_VERSION;
    manifest_["command"] = std::move(command);
    manifest_["timestamp"] = utc_timestamp();
    manifest_["config_file"] = o.config;
    manifest_["overrides"] = effective_overrides(o);
    manifest_["threads"] = thread_count();
    manifest_["resolved_config"] = serialize_config(cfg_);
  }

  json& manifest() { return manifest_; }
  const RunConfig& config() const { return cfg_; }

  fs::path output(const std::string& name) {
    fs::create_directories(opt_.out);
    const fs::path p = fs::path(opt_.out) / name;
    outputs_.push_back(p.string());
    return p;
  }

  void finish() {
    {
      std::ofstream(output("resolved.cfg")) << serialize_config(cfg_);
    }
    const fs::path mpath = output("manifest.json");
    manifest_["outputs"] = outputs_;
    std::ofstream(mpath) << manifest_.dump(2) << '\n';
  }

 private:
  Options opt_;
  RunConfig cfg_;
  json manifest_;
  std::vector<std::string> outputs_;
};

int cmd_solve(const Options& o) {
  Run run("solve", o, load_config(o.config, effective_overrides(o)));
  const StudyConfig& s = run.config().study;
  const SolveConfig& sc = run.config().solve;
  const SolveOutcome so = solve_ground_state(s, sc.space, sc.H);
  const GroundState& gs = so.state;
  const TriMesh* fine_mesh = so.fine_mesh.get();
  const FeOperators* ops = so.fine_ops.get();
  json cache;
  if (so.cache) cache = json{{"status", to_string(*so.cache)}, {"file", so.cache_file.string()}};
  std::cout << "space " << to_string(sc.space) << "  dofs " << so.dofs << "  fine dofs " << ops->dofs.size()
            << '\n'
            << "E = " << format_number(gs.energy) << "  lambda = " << format_number(gs.eigenvalue)
            << "  steps = " << gs.steps_taken << "  residual = " << format_number(gs.residual)
            << (gs.converged ? "" : "  (not converged)") << '\n';

  json& m = run.manifest();
  m["result"] = json{{"space", to_string(sc.space)},
                     {"dofs", so.dofs},
                     {"fine_dofs", ops->dofs.size()},
                     {"energy", gs.energy},
                     {"eigenvalue", gs.eigenvalue},
                     {"steps", gs.steps_taken},
                     {"converged", gs.converged},
                     {"residual", gs.residual}};
  if (!cache.is_null()) m["cache"] = cache;

  if (sc.write_solution) {
    std::ofstream out(run.output("solution.txt"));
    out.precision(12);
    const DenseVector nodal = to_nodal(ops->dofs, fine_mesh->num_nodes(), gs.fine_coeffs);
    for (std::size_t i = 0; i < fine_mesh->num_nodes(); ++i)
      out << format_number(fine_mesh->nodes[i].x) << ' ' << format_number(fine_mesh->nodes[i].y) << ' '
          << format_number(nodal[static_cast<Eigen::Index>(i)]) << '\n';
  }
  if (sc.write_mesh) {
    std::ofstream out(run.output("mesh.txt"));
    write_mesh(out, *fine_mesh);
  }
  run.finish();
  return gs.converged ? kOk : kNumericalError;
}

int cmd_study(const Options& o) {
  Run run("study", o, load_config(o.config, effective_overrides(o)));
  const StudyConfig& s = run.config().study;
  const StudyResult res = run_study(s);

  {
    std::ofstream csv(run.output("study.csv"));
    write_csv(csv, res.rows, res.rates);
  }
  if (s.baseline_coarse_fem) {
    std::ofstream csv(run.output("baseline.csv"));
    write_csv(csv, res.baseline_rows, res.baseline_rates);
  }
  if (o.plot) {
    std::ofstream gp(run.output("study.gp"));
    write_plot_script(gp, "study.csv", "LOD errors");
    if (s.baseline_coarse_fem) {
      std::ofstream bgp(run.output("baseline.gp"));
      write_plot_script(bgp, "baseline.csv", "P1 errors", {1, 2});
    }
  }

  json& m = run.manifest();
  m["reference"] = json{{"energy", res.reference.energy},         {"eigenvalue", res.reference.eigenvalue},
                        {"fine_dofs", res.reference.fine_dofs},   {"steps", res.reference.steps},
                        {"converged", res.reference.converged},   {"residual", res.reference.residual},
                        {"wall_time_s", res.reference.wall_time}};
  if (res.reference.error_estimate) m["reference"]["error_estimate"] = row_json(*res.reference.error_estimate);
  m["valid"] = res.valid;
  m["nested_monotone"] = res.nested_monotone;
  m["cache"] = json{{"hits", res.cache_hits}, {"misses", res.cache_misses}};
  json rows = json::array(), brows = json::array();
  for (const auto& r : res.rows) rows.push_back(row_json(r));
  for (const auto& r : res.baseline_rows) brows.push_back(row_json(r));
  m["rows"] = rows;
  m["rates"] = rates_json(res.rates);
  if (s.baseline_coarse_fem) {
    m["baseline_rows"] = brows;
    m["baseline_rates"] = rates_json(res.baseline_rates);
  }
  m["warnings"] = res.warnings;
  run.finish();

  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  auto rate = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
  if (s.lod)
    std::cout << "LOD rates: h1=" << rate(res.rates.h1) << " l2=" << rate(res.rates.l2)
              << " energy=" << rate(res.rates.energy) << " eigenvalue=" << rate(res.rates.eigenvalue) << '\n';
  if (s.baseline_coarse_fem)
    std::cout << "P1 rates:  h1=" << rate(res.baseline_rates.h1) << " l2=" << rate(res.baseline_rates.l2)
              << " energy=" << rate(res.baseline_rates.energy)
              << " eigenvalue=" << rate(res.baseline_rates.eigenvalue) << '\n';
  if (!res.valid) {
    std::cerr << "error: reference solve failed its stationarity check; study is invalid\n";
    return kNumericalError;
  }
  return kOk;
}

int cmd_correctors(const Options& o) {
  Run run("correctors", o, load_config(o.config, effective_overrides(o)));
  const StudyConfig& s = run.config().study;
  s.validate();
  std::optional<fs::path> dir;
  if (s.use_cache) dir = s.cache_dir;

  json entries = json::array();
  int hits = 0, misses = 0;
  for (double H : s.H_sequence) {
    const int r = s.refinements(H);
    auto h = std::make_shared<const MeshHierarchy>(
        r == 0 ? identity_hierarchy(s.domain, s.fine_cells()) : build_hierarchy(s.domain, s.coarse_cells(H), r));
    const FeOperators ops = assemble_operators(h->fine, s.potential);
    const LodBuild b = obtain_lod_space(h, ops, s.potential, s.localization, dir);
    const auto& t = b.space->timings;
    std::string status = b.cache ? to_string(*b.cache) : "disabled";
    if (b.cache == CacheStatus::hit)
      ++hits;
    else if (b.cache)
      ++misses;
    if (b.cache == CacheStatus::corrupt || b.cache == CacheStatus::mismatch)
      std::cerr << "warning: cache entry " << b.cache_file << " was " << status << "; rebuilt\n";
    std::cout << "H=" << format_number(H) << "  dim " << b.space->dim() << "  cache " << status
              << "  factor " << format_number(t.factor_seconds) << " s  solves " << t.solves << " in "
              << format_number(t.solve_seconds) << " s  total " << format_number(b.seconds) << " s";
    if (!b.cache_file.empty()) std::cout << "  " << b.cache_file.string();
    std::cout << '\n';
    entries.push_back(json{{"H", H},
                           {"dim", b.space->dim()},
                           {"cache", status},
                           {"file", b.cache_file.string()},
                           {"factor_seconds", t.factor_seconds},
                           {"solve_seconds", t.solve_seconds},
                           {"solves", t.solves},
                           {"seconds", b.seconds}});
  }
  run.manifest()["cache"] = json{{"hits", hits}, {"misses", misses}, {"entries", entries}};
  run.finish();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gross-Pitaevskii ground states in LOD spaces"};
  app.set_version_flag("--version", LODGPE_VERSION);
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Configuration file")->required();
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    sub->add_flag("--no-cache", o.no_cache, "Do not read or write the corrector cache");
    sub->add_option("--cache-dir", o.cache_dir, "Corrector cache directory");
    auto* rel = sub->add_flag("--relative", o.relative, "Report relative errors");
    auto* abs = sub->add_flag("--absolute", o.absolute, "Report absolute errors");
    rel->excludes(abs);
    sub->add_option("overrides", o.overrides, "section.key=value overrides");
  };
  CLI::App* solve = app.add_subcommand("solve", "Compute one ground state");
  CLI::App* study = app.add_subcommand("study", "Run a convergence study");
  CLI::App* corr = app.add_subcommand("correctors", "Build and cache the LOD bases of a study");
  for (auto* sub : {solve, study, corr}) add_common(sub);
  study->add_flag("--plot", o.plot, "Also write a gnuplot script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  set_thread_count(o.threads);
  try {
    if (*solve) return cmd_solve(o);
    if (*study) return cmd_study(o);
    return cmd_correctors(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
}
