#pragma once

#include "fosyn/numerics.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace fosyn {

/// A point evaluation: value may be +inf, in which case no gradient exists.
struct OracleResult {
  double value = std::numeric_limits<double>::infinity();
  std::optional<Vector> gradient;
};

/// Deterministic objective oracle; must be safe for concurrent calls.
using OracleFn = std::function<OracleResult(const Vector&)>;

enum class Termination {
  gradient_tolerance,
  target_reached,
  max_iterations,
  line_search_failed,
  sampling_stationary,
  sampling_failed,
  invalid_start,
};

const char* to_string(Termination t);

/// Record of one optimization run.
struct RunTrace {
  std::vector<std::pair<Vector, double>> iterates;
  Vector best_k;
  double best_value = std::numeric_limits<double>::infinity();
  Termination termination = Termination::max_iterations;
  long fn_evals = 0;

  void record(const Vector& k, double value);
};

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = std::numeric_limits<double>::infinity();
  Vector gradient;
  long evals = 0;
};

/// Weak Wolfe line search (Armijo decrease plus a directional-derivative
/// increase), bracketing by expansion then bisection. Infinite values fail
/// the Armijo test and shrink the step, so a run started at a finite value
/// never accepts an infinite iterate. Requires g0'd < 0 and finite f0.
LineSearchResult line_search_weak_wolfe(const OracleFn& f, const Vector& k, const Vector& d,
                                        double f0, const Vector& g0, double c1 = 1e-4,
                                        double c2 = 0.5, int max_iter = 50);

struct BfgsOptions {
  double tol_grad = 1e-6;
  int max_iter = 1000;
  double target = -std::numeric_limits<double>::infinity();  // stop once value <= target
  double c1 = 1e-4;
  double c2 = 0.5;
  int ls_max = 50;
};

/// Inverse-Hessian BFGS with the weak Wolfe line search; the update is
/// skipped whenever s'y <= 1e-12 |s||y|. Throws InvalidInputError when the
/// start value is not finite.
RunTrace bfgs(const OracleFn& f, const Vector& k0, const BfgsOptions& opts = {});

struct SamplingOptions {
  double tol_sample = 1e-6;
  int max_iter_per_radius = 100;
  std::uint64_t seed = 0;
  double target = -std::numeric_limits<double>::infinity();
  std::vector<double> radius_scales = {1e-4, 1e-5, 1e-6};  // multiplied by 1 + |k0|
};

/// Gradient sampling: at each iterate draw 2*dim+1 gradients in the current
/// sampling ball (center included, infinite-value points redrawn), step along
/// the negated minimum-norm element of their convex hull with Armijo
/// backtracking, and shrink the radius once that element is small.
RunTrace gradient_sampling(const OracleFn& f, const Vector& k0, const SamplingOptions& opts = {});

/// Minimum-Euclidean-norm point of the convex hull of the given vectors, by
/// the vertex-exchange (Wolfe) algorithm.
Vector min_norm_hull(const std::vector<Vector>& gradients);

struct MultiStartOptions {
  bool sampling = false;  // run gradient sampling after BFGS
  BfgsOptions bfgs;
  SamplingOptions sampling_opts;
  std::uint64_t seed = 0;
};

struct MultiStartResult {
  RunTrace best;
  std::vector<RunTrace> traces;
  int best_index = -1;
};

/// Independent runs from each start; the winner has minimal best value, ties
/// broken by start index. Throws NoFiniteStartError when every start is
/// infinite.
MultiStartResult multi_start(const OracleFn& f, const std::vector<Vector>& starts,
                             const MultiStartOptions& opts = {});

}  // namespace fosyn
