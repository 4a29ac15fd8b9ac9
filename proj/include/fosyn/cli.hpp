#pragma once

#include "fosyn/synthesis.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fosyn::cli {

struct CliConfig {
  std::vector<std::string> plant_paths;  // one file per plant, order preserved
  std::string spec_string;               // one of {s,t,h} per plant
  std::vector<std::string> bounds;       // decimal or "inf", one per plant
  int order = 0;
  int restarts = 3;
  std::uint64_t seed = 0;
  bool sampling = false;
  int print_level = 1;
  std::string out_path = "controller.json";
  std::string report_path;   // written when non-empty
  std::string history_path;  // written when non-empty
};

/// Parses flags and synthesizes. Exit status 0 on success, 2 when the result
/// is infeasible or no stabilizing controller was found (outputs are still
/// written), 1 on usage or parse errors.
int run(int argc, const char* const* argv);

/// The same, starting from an already-populated configuration.
int run(const CliConfig& config);

/// CSV with header start,iteration,value,best_so_far; one row per iteration
/// per start, values in the report units of the synthesis objective.
void write_history(const std::vector<std::vector<double>>& histories, const std::string& path);

}  // namespace fosyn::cli
