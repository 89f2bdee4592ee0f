#include "lodgpe/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lodgpe/errors.hpp"

namespace lodgpe {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"domain", {"xmin", "xmax", "ymin", "ymax"}},
      {"potential", {"kind", "value", "square_side", "low", "high"}},
      {"model", {"beta"}},
      {"flow", {"tau", "tol_energy", "tol_residual", "max_steps", "initial_guess", "inner_tol"}},
      {"study",
       {"fine_h", "H", "lod", "baseline_coarse_fem", "relative_errors", "saturation_check", "localization",
        "use_cache", "cache_dir"}},
      {"solve", {"space", "H", "write_solution", "write_mesh"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

class Reader {
 public:
  explicit Reader(const pt::ptree& t) : tree_(t) {}

  std::optional<std::string> raw(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  }
  double real(const std::string& key, double dflt) const {
    auto v = raw(key);
    if (!v) return dflt;
    try {
      return parse_real(*v);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  int integer(const std::string& key, int dflt) const {
    const double v = real(key, dflt);
    if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError(key + ": expected an integer");
    return static_cast<int>(v);
  }
  bool boolean(const std::string& key, bool dflt) const {
    auto v = raw(key);
    return v ? parse_bool(key, *v) : dflt;
  }
  std::string text(const std::string& key, const std::string& dflt) const { return raw(key).value_or(dflt); }
  std::vector<double> list(const std::string& key, const std::vector<double>& dflt) const {
    auto v = raw(key);
    if (!v) return dflt;
    std::vector<double> out;
    std::string item;
    std::istringstream in(*v);
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(parse_real(item));
      } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
    return out;
  }

 private:
  const pt::ptree& tree_;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    auto it = schema().find(section);
    if (it == schema().end()) {
      if (!body.data().empty()) throw ConfigError("key '" + section + "' outside of a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
  }
}

Potential read_potential(const Reader& r) {
  const std::string kind = r.text("potential.kind", "harmonic");
  if (kind == "harmonic") return Potential::harmonic();
  if (kind == "constant") return Potential::constant(r.real("potential.value", 0.0));
  if (kind == "checkerboard")
    return Potential::checkerboard(r.real("potential.square_side", 0.5), r.real("potential.low", 0.0),
                                   r.real("potential.high", 1.0));
  throw ConfigError("potential.kind: unknown potential '" + kind + "' (expected harmonic, constant or checkerboard)");
}

Localization read_localization(const std::string& s) {
  if (s == "ideal") return Localization::ideal();
  try {
    std::size_t pos = 0;
    const int k = std::stoi(s, &pos);
    if (pos == s.size()) return Localization::patch(k);
  } catch (const std::logic_error&) {
  }
  throw ConfigError("study.localization: expected 'ideal' or a positive layer count, got '" + s + "'");
}

RunConfig from_tree(const pt::ptree& tree) {
  check_schema(tree);
  const Reader r(tree);
  RunConfig cfg;
  StudyConfig& s = cfg.study;
  s.domain.xmin = r.real("domain.xmin", s.domain.xmin);
  s.domain.xmax = r.real("domain.xmax", s.domain.xmax);
  s.domain.ymin = r.real("domain.ymin", s.domain.ymin);
  s.domain.ymax = r.real("domain.ymax", s.domain.ymax);
  s.potential = read_potential(r);
  s.beta = r.real("model.beta", s.beta);

  FlowParams& f = s.flow;
  f.tau = r.real("flow.tau", f.tau);
  f.tol_energy = r.real("flow.tol_energy", f.tol_energy);
  f.tol_residual = r.real("flow.tol_residual", f.tol_residual);
  f.max_steps = r.integer("flow.max_steps", f.max_steps);
  f.inner_tol = r.real("flow.inner_tol", f.inner_tol);
  f.initial_guess = initial_guess_from_string(r.text("flow.initial_guess", to_string(f.initial_guess)));

  s.fine_h = r.real("study.fine_h", s.fine_h);
  s.H_sequence = r.list("study.H", s.H_sequence);
  s.lod = r.boolean("study.lod", s.lod);
  s.baseline_coarse_fem = r.boolean("study.baseline_coarse_fem", s.baseline_coarse_fem);
  s.relative_errors = r.boolean("study.relative_errors", s.relative_errors);
  s.saturation_check = r.boolean("study.saturation_check", s.saturation_check);
  s.localization = read_localization(r.text("study.localization", "ideal"));
  s.use_cache = r.boolean("study.use_cache", s.use_cache);
  s.cache_dir = r.text("study.cache_dir", s.cache_dir.string());

  SolveConfig& v = cfg.solve;
  v.space = space_kind_from_string(r.text("solve.space", to_string(v.space)));
  v.H = r.real("solve.H", v.H);
  v.write_solution = r.boolean("solve.write_solution", v.write_solution);
  v.write_mesh = r.boolean("solve.write_mesh", v.write_mesh);

  s.domain.validate();
  s.flow.validate();
  return cfg;
}

}  // namespace

double parse_real(const std::string& text) {
  const std::string s = trim(text);
  auto number = [&](const std::string& t) {
    const std::string u = trim(t);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(u, &pos);
    } catch (const std::logic_error&) {
      pos = 0;
    }
    if (u.empty() || pos != u.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + text + "'");
    return v;
  };
  if (auto p = s.find('^'); p != std::string::npos) return std::pow(number(s.substr(0, p)), number(s.substr(p + 1)));
  if (auto p = s.find('/'); p != std::string::npos) {
    const double d = number(s.substr(p + 1));
    if (d == 0.0) throw ConfigError("division by zero in '" + text + "'");
    return number(s.substr(0, p)) / d;
  }
  return number(s);
}

SpaceKind space_kind_from_string(const std::string& s) {
  for (auto k : {SpaceKind::lod, SpaceKind::fine_fem, SpaceKind::coarse_fem})
    if (s == to_string(k)) return k;
  throw ConfigError("solve.space: unknown space '" + s + "' (expected lod, fine_fem or coarse_fem)");
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not of the form section.key=value");
    const std::string key = trim(o.substr(0, eq));
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos)
      throw ConfigError("override key '" + key + "' must be section.key");
    tree.put(pt::ptree::path_type(key, '.'), trim(o.substr(eq + 1)));
  }
  return from_tree(tree);
}

RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file '" + file.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

std::string serialize_config(const RunConfig& cfg) {
  const StudyConfig& s = cfg.study;
  const Potential& p = s.potential;
  std::ostringstream o;
  o << "[domain]\n"
    << "xmin = " << fmt(s.domain.xmin) << "\nxmax = " << fmt(s.domain.xmax) << "\nymin = " << fmt(s.domain.ymin)
    << "\nymax = " << fmt(s.domain.ymax) << "\n\n[potential]\n";
  switch (p.kind()) {
    case Potential::Kind::harmonic:
      o << "kind = harmonic\n";
      break;
    case Potential::Kind::constant:
      o << "kind = constant\nvalue = " << fmt(p.value()) << '\n';
      break;
    case Potential::Kind::checkerboard:
      o << "kind = checkerboard\nsquare_side = " << fmt(p.square_side()) << "\nlow = " << fmt(p.low())
        << "\nhigh = " << fmt(p.high()) << '\n';
      break;
    case Potential::Kind::callable:
      throw ConfigError("callable potentials cannot be written to a config file");
  }
  o << "\n[model]\nbeta = " << fmt(s.beta) << "\n\n[flow]\n"
    << "tau = " << fmt(s.flow.tau) << "\ntol_energy = " << fmt(s.flow.tol_energy)
    << "\ntol_residual = " << fmt(s.flow.tol_residual) << "\nmax_steps = " << s.flow.max_steps
    << "\ninitial_guess = " << to_string(s.flow.initial_guess) << "\ninner_tol = " << fmt(s.flow.inner_tol)
    << "\n\n[study]\nfine_h = " << fmt(s.fine_h) << "\nH = ";
  for (std::size_t i = 0; i < s.H_sequence.size(); ++i) o << (i ? ", " : "") << fmt(s.H_sequence[i]);
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "\nlod = " << b(s.lod) << "\nbaseline_coarse_fem = " << b(s.baseline_coarse_fem)
    << "\nrelative_errors = " << b(s.relative_errors) << "\nsaturation_check = " << b(s.saturation_check)
    << "\nlocalization = " << (s.localization.is_ideal() ? std::string("ideal") : std::to_string(*s.localization.layers))
    << "\nuse_cache = " << b(s.use_cache) << "\ncache_dir = " << s.cache_dir.string() << "\n\n[solve]\n"
    << "space = " << to_string(cfg.solve.space) << "\nH = " << fmt(cfg.solve.H)
    << "\nwrite_solution = " << b(cfg.solve.write_solution) << "\nwrite_mesh = " << b(cfg.solve.write_mesh) << '\n';
  return o.str();
}

}  // namespace lodgpe
