#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lodgpe/config.hpp"
#include "lodgpe/errors.hpp"

using namespace lodgpe;

namespace {

void check_same(const RunConfig& a, const RunConfig& b) {
  const StudyConfig &s = a.study, &t = b.study;
  CHECK(s.domain.xmin == t.domain.xmin);
  CHECK(s.domain.xmax == t.domain.xmax);
  CHECK(s.domain.ymin == t.domain.ymin);
  CHECK(s.domain.ymax == t.domain.ymax);
  CHECK(s.potential.descriptor() == t.potential.descriptor());
  CHECK(s.beta == t.beta);
  CHECK(s.flow.tau == t.flow.tau);
  CHECK(s.flow.tol_energy == t.flow.tol_energy);
  CHECK(s.flow.tol_residual == t.flow.tol_residual);
  CHECK(s.flow.max_steps == t.flow.max_steps);
  CHECK(s.flow.initial_guess == t.flow.initial_guess);
  CHECK(s.flow.inner_tol == t.flow.inner_tol);
  CHECK(s.fine_h == t.fine_h);
  CHECK(s.H_sequence == t.H_sequence);
  CHECK(s.lod == t.lod);
  CHECK(s.baseline_coarse_fem == t.baseline_coarse_fem);
  CHECK(s.relative_errors == t.relative_errors);
  CHECK(s.saturation_check == t.saturation_check);
  CHECK(s.localization.describe() == t.localization.describe());
  CHECK(s.use_cache == t.use_cache);
  CHECK(s.cache_dir == t.cache_dir);
  CHECK(a.solve.space == b.solve.space);
  CHECK(a.solve.H == b.solve.H);
  CHECK(a.solve.write_solution == b.solve.write_solution);
  CHECK(a.solve.write_mesh == b.solve.write_mesh);
}

}  // namespace

TEST_CASE("number forms") {
  CHECK(parse_real("0.25") == 0.25);
  CHECK(parse_real(" 1/16 ") == 0.0625);
  CHECK(parse_real("2^-4") == 0.0625);
  CHECK(parse_real("-6") == -6.0);
  CHECK(parse_real("1e-10") == 1e-10);
  for (const char* bad : {"", "abc", "1/0", "1.5x", "nan", "inf"}) CHECK_THROWS_AS(parse_real(bad), ConfigError);
}

TEST_CASE("empty text yields the defaults") {
  const RunConfig c = parse_config("");
  CHECK(c.study.domain.xmin == -6.0);
  CHECK(c.study.beta == 100.0);
  CHECK(c.study.fine_h == 0.0625);
  CHECK(c.study.potential.kind() == Potential::Kind::harmonic);
  CHECK(c.study.flow.tau == 0.5);
  CHECK(c.study.localization.is_ideal());
  CHECK(c.solve.space == SpaceKind::lod);
}

TEST_CASE("sections, lists and overrides") {
  const std::string text =
      "; comment\n"
      "[domain]\nxmin = 0\nxmax = 1\nymin = 0\nymax = 1\n"
      "[potential]\nkind = checkerboard\nsquare_side = 1/8\nlow = 0\nhigh = 2\n"
      "[model]\nbeta = 50\n"
      "[study]\nH = 1/2, 1/4,2^-3\nlocalization = 3\nbaseline_coarse_fem = yes\n"
      "[solve]\nspace = coarse_fem\n";
  const RunConfig c = parse_config(text, {"model.beta=25", "flow.initial_guess = constant"});
  CHECK(c.study.domain.xmax == 1.0);
  CHECK(c.study.potential.descriptor() == "checkerboard(side=0.125,low=0,high=2)");
  CHECK(c.study.beta == 25.0);
  CHECK(c.study.H_sequence == std::vector<double>{0.5, 0.25, 0.125});
  CHECK(c.study.localization.describe() == "patch(3)");
  CHECK(c.study.baseline_coarse_fem);
  CHECK(c.study.flow.initial_guess == InitialGuess::constant);
  CHECK(c.solve.space == SpaceKind::coarse_fem);
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(parse_config("[domian]\nxmin = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nbeat = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("beta = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nbeta = lots\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[flow]\ntau = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[flow]\nmax_steps = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[study]\nlod = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[study]\nlocalization = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[potential]\nkind = quartic\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[solve]\nspace = p2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[domain]\nxmin = 1\nxmax = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("", {"beta=3"}), ConfigError);
  CHECK_THROWS_AS(parse_config("", {"model.beta"}), ConfigError);
  CHECK_THROWS_AS(parse_config("", {"model.nope=1"}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/lodgpe.cfg"), ConfigError);
}

TEST_CASE("serialization round trip") {
  RunConfig c;
  c.study.domain = Rect{-1.5, 2.0, -1.0, 2.5};
  c.study.potential = Potential::constant(0.1);
  c.study.beta = 1.0 / 3.0;
  c.study.H_sequence = {0.5, 0.25};
  c.study.flow.tol_residual = 1e-9;
  c.study.flow.initial_guess = InitialGuess::coarse_hat_blob;
  c.study.localization = Localization::patch(2);
  c.study.use_cache = false;
  c.study.cache_dir = "/tmp/x y";
  c.solve.space = SpaceKind::fine_fem;
  c.solve.write_mesh = true;
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  check_same(c, back);
  CHECK(serialize_config(back) == text);
}

TEST_CASE("shipped presets parse, validate and round trip") {
  const std::filesystem::path dir = LODGPE_PRESETS_DIR;
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".cfg") continue;
    CAPTURE(e.path().string());
    ++count;
    const RunConfig c = load_config(e.path());
    CHECK_NOTHROW(c.study.validate());
    check_same(c, parse_config(serialize_config(c)));
  }
  CHECK(count >= 3);
  const RunConfig h = load_config(dir / "harmonic.cfg");
  CHECK(h.study.H_sequence == std::vector<double>{2.0, 1.0, 0.5, 0.25});
  CHECK(h.study.fine_cells() == 192);
}
