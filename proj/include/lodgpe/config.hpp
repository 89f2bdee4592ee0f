#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lodgpe/gpe.hpp"
#include "lodgpe/study.hpp"

namespace lodgpe {

/// Settings of the single-solve command.
struct SolveConfig {
  SpaceKind space = SpaceKind::lod;
  double H = 0.25;
  bool write_solution = false;
  bool write_mesh = false;
};

struct RunConfig {
  StudyConfig study;
  SolveConfig solve;
};

/// Parses the INI-style text format documented in docs/config.md. Keys are
/// `section.key`; `overrides` are "section.key=value" strings applied on top
/// of the text. Unknown sections or keys are errors. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

/// Full resolved configuration, every key spelled out. parse_config of the
/// result reproduces the same configuration.
std::string serialize_config(const RunConfig& config);

/// Accepts decimals plus the forms "a/b" and "b^e" (e.g. "2^-4").
double parse_real(const std::string& text);

SpaceKind space_kind_from_string(const std::string& s);

}  // namespace lodgpe
