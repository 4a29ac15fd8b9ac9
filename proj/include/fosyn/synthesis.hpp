#pragma once

#include "fosyn/closedloop.hpp"
#include "fosyn/objectives.hpp"
#include "fosyn/optimizer.hpp"
#include "fosyn/plant.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fosyn {

/// Per-plant objective entry: a bound of +inf means "minimize this norm",
/// a finite (positive) bound means "keep this norm at or below the bound".
struct ObjectiveEntry {
  ObjectiveKind kind = ObjectiveKind::h_inf;
  double bound = std::numeric_limits<double>::infinity();

  bool is_constraint() const { return std::isfinite(bound); }
};

struct ObjectiveSpec {
  std::vector<ObjectiveEntry> entries;  // one per plant
  int order = 0;                        // controller order nk
};

struct SynthesisOptions {
  int starts = 3;
  std::uint64_t seed = 0;
  bool sampling = false;  // gradient-sampling refinement after each BFGS run
  double stab_margin = 1e-7;
  std::optional<Controller> warm;  // first initial point, when provided
  BfgsOptions bfgs;
  SamplingOptions sampling_opts;
  // Streaming hook for per-iteration best values (start, iteration, value in
  // report units). Only the minimization phase is streamed.
  std::function<void(int, int, double)> on_iteration;
};

struct PhaseOutcome {
  bool attempted = false;
  bool succeeded = false;
};

struct StartSummary {
  bool stabilized = false;
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();  // report units
  double violation = 0.0;  // max constraint residual, norm units
  Termination termination = Termination::max_iterations;
};

struct SynthesisReport {
  Controller controller;            // original-plant coordinates (unshifted)
  std::vector<double> achieved;     // per plant, recomputed from `controller`
  bool feasible = false;
  bool stabilized = false;
  PhaseOutcome stabilization, feasibility, optimization;
  // Per start, per accepted iterate: minimization-phase objective values in
  // report units (H2 entries as norms).
  std::vector<std::vector<double>> histories;
  std::vector<StartSummary> start_summaries;
  std::uint64_t seed = 0;
  int best_start = -1;
  std::string message;
};

/// Phased synthesis: shift away any plant feedthrough, stabilize, attain
/// feasibility of the bounded entries, then minimize the unbounded entries
/// under an escalating exact penalty on the bounds. Runs opts.starts
/// independent attempts and returns the best. Throws NoFiniteH2Error when an
/// H2 entry admits no finite value at the requested order.
SynthesisReport synthesize(const PlantSet& ps, const ObjectiveSpec& spec,
                           const SynthesisOptions& opts = {});

/// First point: the warm start projected onto the parameter map when given,
/// the zero vector otherwise. Remaining points have i.i.d. standard normal
/// entries scaled by 1/sqrt(dim).
std::vector<Vector> initial_points(const ParamMap& pm, int count, std::uint64_t seed,
                                   const std::optional<Controller>& warm = {});

/// Fresh per-plant values of the specified norms on the original plants for
/// a given controller; unstable or ill-posed loops report +inf.
std::vector<double> report_values(const PlantSet& ps, const ObjectiveSpec& spec,
                                  const Controller& K);

}  // namespace fosyn
