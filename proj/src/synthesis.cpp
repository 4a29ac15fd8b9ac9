#include "fosyn/synthesis.hpp"

#include "fosyn/errors.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace fosyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasRelTol = 1e-6;  // value <= bound * (1 + kFeasRelTol)

// Objective entries probed right at the stability boundary behave like
// unstable ones from the optimizer's point of view.
Evaluation evaluate_or_inf(ObjectiveKind kind, const Plant& p, const ParamMap& pm,
                           const Vector& k) {
  try {
    return evaluate(kind, p, pm, k);
  } catch (const StabilityBoundaryError&) {
    return Evaluation{};  // +inf
  }
}

// Converts a squared-H2 evaluation to norm units in place.
void to_norm_units(ObjectiveKind kind, Evaluation& ev) {
  if (kind != ObjectiveKind::h_two || !ev.finite()) {
    return;
  }
  const double f = std::max(ev.value, 0.0);
  ev.value = std::sqrt(f);
  if (ev.gradient) {
    if (f > 0.0) {
      *ev.gradient /= 2.0 * std::sqrt(f);
    } else {
      ev.gradient->setZero();
    }
  }
}

struct Problem {
  const std::vector<Plant>* work;  // shifted plants
  const ObjectiveSpec* spec;
  const ParamMap* pm;
  std::vector<int> minimize;  // entry indices with bound = +inf
  std::vector<int> bounded;   // entry indices with finite bound

  // Per-entry value in norm units (no gradients); +inf for unstable loops.
  std::vector<double> values_norm(const Vector& k) const {
    const Controller K = pm->to_controller(k);
    std::vector<double> out(work->size());
    for (std::size_t i = 0; i < work->size(); ++i) {
      const ClosedLoop cl = assemble((*work)[i], K);
      switch (spec->entries[i].kind) {
        case ObjectiveKind::spectral_abscissa:
          out[i] = spectral_abscissa(cl.A);
          break;
        case ObjectiveKind::h_two: {
          const double f = h2_squared_value(cl);
          out[i] = std::isfinite(f) ? std::sqrt(std::max(f, 0.0)) : kInf;
          break;
        }
        case ObjectiveKind::h_inf:
          out[i] = hinf_norm_value(cl);
          break;
      }
    }
    return out;
  }

  bool is_feasible(const std::vector<double>& vals) const {
    for (int j : bounded) {
      if (!(vals[j] <= spec->entries[j].bound * (1.0 + kFeasRelTol))) {
        return false;
      }
    }
    return true;
  }

  // Report-unit objective: max over the minimize entries (0 when none).
  double report_objective(const std::vector<double>& vals) const {
    double J = minimize.empty() ? 0.0 : -kInf;
    for (int i : minimize) {
      J = std::max(J, vals[i]);
    }
    return J;
  }

  double max_violation(const std::vector<double>& vals) const {
    double v = 0.0;
    for (int j : bounded) {
      v = std::max(v, vals[j] - spec->entries[j].bound);
    }
    return v;
  }
};

// Tracks the best feasible point seen at any oracle evaluation of phase 3.
struct FeasibleBest {
  bool has = false;
  double objective = kInf;  // oracle units
  Vector k;
};

// Phase 1: worst spectral abscissa over every plant.
OracleFn stabilization_oracle(const Problem& prob) {
  return [&prob](const Vector& k) -> OracleResult {
    double worst = -kInf;
    Evaluation active;
    for (const Plant& p : *prob.work) {
      Evaluation ev = spectral_abscissa(p, *prob.pm, k);
      if (ev.value > worst) {
        worst = ev.value;
        active = std::move(ev);
      }
    }
    return OracleResult{worst, std::move(active.gradient)};
  };
}

// Phase 2: worst constraint residual in norm units, with an infinite barrier
// whenever any norm entry (bounded or not) loses stability, so that the next
// phase starts from a usable point.
OracleFn feasibility_oracle(const Problem& prob) {
  return [&prob](const Vector& k) -> OracleResult {
    double worst = -kInf;
    Evaluation active;
    for (std::size_t i = 0; i < prob.work->size(); ++i) {
      const ObjectiveEntry& e = prob.spec->entries[i];
      if (e.kind == ObjectiveKind::spectral_abscissa && !e.is_constraint()) {
        continue;
      }
      Evaluation ev = evaluate_or_inf(e.kind, (*prob.work)[i], *prob.pm, k);
      if (!ev.finite()) {
        return OracleResult{};  // +inf
      }
      to_norm_units(e.kind, ev);
      if (!e.is_constraint()) {
        continue;  // only needed the stability barrier
      }
      const double residual = ev.value - e.bound;
      if (residual > worst) {
        worst = residual;
        active = std::move(ev);
      }
    }
    return OracleResult{worst, std::move(active.gradient)};
  };
}

// Phase 3: max over the minimize entries (H2 entries as squared norms) plus
// rho times the summed constraint violations in norm units.
OracleFn penalty_oracle(const Problem& prob, double rho, FeasibleBest* stash) {
  return [&prob, rho, stash](const Vector& k) -> OracleResult {
    std::vector<Evaluation> evals(prob.work->size());
    for (std::size_t i = 0; i < prob.work->size(); ++i) {
      const ObjectiveEntry& e = prob.spec->entries[i];
      evals[i] = evaluate_or_inf(e.kind, (*prob.work)[i], *prob.pm, k);
      if (!evals[i].finite()) {
        return OracleResult{};  // +inf
      }
      if (e.is_constraint()) {
        to_norm_units(e.kind, evals[i]);
      }
    }
    double base = 0.0;
    int arg = -1;
    for (int i : prob.minimize) {
      if (arg < 0 || evals[i].value > base) {
        base = evals[i].value;
        arg = i;
      }
    }
    Vector grad = Vector::Zero(prob.pm->dim());
    if (arg >= 0) {
      grad = *evals[arg].gradient;
    }
    double value = (arg >= 0) ? base : 0.0;
    bool feasible = true;
    for (int j : prob.bounded) {
      const double bound = prob.spec->entries[j].bound;
      const double residual = evals[j].value - bound;
      if (evals[j].value > bound * (1.0 + kFeasRelTol)) {
        feasible = false;
      }
      if (residual > 0.0) {
        value += rho * residual;
        grad += rho * *evals[j].gradient;
      }
    }
    if (feasible && value < stash->objective) {
      stash->has = true;
      stash->objective = value;
      stash->k = k;
    }
    return OracleResult{value, std::move(grad)};
  };
}

RunTrace run_with_refinement(const OracleFn& f, const Vector& k0, const BfgsOptions& bopts,
                             bool sampling, const SamplingOptions& sopts) {
  RunTrace trace = bfgs(f, k0, bopts);
  if (sampling && trace.best_value > bopts.target) {
    SamplingOptions s = sopts;
    s.target = bopts.target;
    RunTrace refine = gradient_sampling(f, trace.best_k, s);
    for (const auto& it : refine.iterates) {
      trace.record(it.first, it.second);
    }
    trace.fn_evals += refine.fn_evals;
    trace.termination = refine.termination;
  }
  return trace;
}

struct StartOutcome {
  Vector k;
  bool stabilized = false;
  bool feasible = false;
  bool optimized = false;
  double objective = kInf;   // report units
  double violation = kInf;   // max constraint residual
  double stab_level = kInf;  // best worst-case abscissa reached
  std::vector<double> history;
  Termination termination = Termination::max_iterations;
};

}  // namespace

std::vector<Vector> initial_points(const ParamMap& pm, int count, std::uint64_t seed,
                                   const std::optional<Controller>& warm) {
  if (count < 1) {
    throw InvalidInputError("initial_points: count must be >= 1");
  }
  std::vector<Vector> pts;
  pts.reserve(count);
  pts.push_back(warm ? pm.project(*warm) : Vector(Vector::Zero(pm.dim())));

  std::mt19937_64 rng(detail::splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(pm.dim(), 1)));
  for (int i = 1; i < count; ++i) {
    Vector v(pm.dim());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      v[j] = scale * normal(rng);
    }
    pts.push_back(std::move(v));
  }
  return pts;
}

std::vector<double> report_values(const PlantSet& ps, const ObjectiveSpec& spec,
                                  const Controller& K) {
  if (spec.entries.size() != ps.plants.size()) {
    throw InvalidInputError("report_values: objective entries do not match the plant count");
  }
  std::vector<double> out;
  out.reserve(ps.plants.size());
  for (std::size_t i = 0; i < ps.plants.size(); ++i) {
    const Plant& plant = ps.plants[i];
    double value = kInf;
    try {
      const bool has_feedthrough = !(plant.D22.array() == 0.0).all();
      const Controller Kw =
          has_feedthrough ? unshift_controller(K, Matrix(-plant.D22)) : K;
      const Plant work = has_feedthrough ? shift_feedthrough(plant) : plant;
      const ClosedLoop cl = assemble(work, Kw);
      switch (spec.entries[i].kind) {
        case ObjectiveKind::spectral_abscissa:
          value = spectral_abscissa(cl.A);
          break;
        case ObjectiveKind::h_two: {
          if (cl.D.norm() > 1e-8 * (1.0 + plant.D11.norm())) {
            value = kInf;  // nonzero closed-loop feedthrough: H2 norm is infinite
          } else {
            const double f = h2_squared_value(cl);
            value = std::isfinite(f) ? std::sqrt(std::max(f, 0.0)) : kInf;
          }
          break;
        }
        case ObjectiveKind::h_inf:
          value = hinf_norm_value(cl);
          break;
      }
    } catch (const WellPosednessError&) {
      value = kInf;  // the loop with this plant's feedthrough is ill-posed
    }
    out.push_back(value);
  }
  return out;
}

SynthesisReport synthesize(const PlantSet& ps, const ObjectiveSpec& spec,
                           const SynthesisOptions& opts) {
  check_set(ps);
  const std::size_t nplants = ps.plants.size();
  if (spec.entries.size() != nplants) {
    throw InvalidInputError("synthesize: expected " + std::to_string(nplants) +
                            " objective entries, got " + std::to_string(spec.entries.size()));
  }
  if (spec.order < 0) {
    throw InvalidInputError("synthesize: controller order must be >= 0");
  }
  for (const ObjectiveEntry& e : spec.entries) {
    if (e.is_constraint() && !(e.bound > 0.0)) {
      throw InvalidInputError("synthesize: finite bounds must be positive");
    }
  }
  if (opts.starts < 1) {
    throw InvalidInputError("synthesize: need at least one start");
  }

  const Matrix D22 = ps.plants.front().D22;
  const bool has_feedthrough = !(D22.array() == 0.0).all();
  std::vector<Plant> work;
  work.reserve(nplants);
  for (const Plant& p : ps.plants) {
    work.push_back(has_feedthrough ? shift_feedthrough(p) : p);
  }

  std::vector<Plant> h2_plants;
  for (std::size_t i = 0; i < nplants; ++i) {
    if (spec.entries[i].kind == ObjectiveKind::h_two) {
      h2_plants.push_back(work[i]);
    }
  }
  const ParamMap pm = h2_plants.empty()
                          ? ParamMap::canonical(spec.order, work.front().m2(), work.front().p2())
                          : eliminate_feedthrough(h2_plants, spec.order);

  std::optional<Controller> warm = opts.warm;
  if (warm && has_feedthrough) {
    warm = unshift_controller(*warm, Matrix(-D22));  // move into shifted coordinates
  }
  const std::vector<Vector> starts = initial_points(pm, opts.starts, opts.seed, warm);

  Problem prob;
  prob.work = &work;
  prob.spec = &spec;
  prob.pm = &pm;
  for (std::size_t i = 0; i < nplants; ++i) {
    (spec.entries[i].is_constraint() ? prob.bounded : prob.minimize).push_back(
        static_cast<int>(i));
  }
  const bool all_h2_objective = [&] {
    if (prob.minimize.empty()) return false;
    for (int i : prob.minimize) {
      if (spec.entries[i].kind != ObjectiveKind::h_two) return false;
    }
    return true;
  }();
  // Phase-3 iterate values in report units: the H2 oracle works on the
  // squared norm, histories and streams carry the norm itself.
  auto report_units = [&](double v) {
    return all_h2_objective && std::isfinite(v) ? std::sqrt(std::max(v, 0.0)) : v;
  };

  const OracleFn stab_fn = stabilization_oracle(prob);
  const OracleFn feas_fn = feasibility_oracle(prob);

  std::vector<StartOutcome> outcomes;
  outcomes.reserve(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    StartOutcome out;
    Vector k = starts[s];
    std::uint64_t start_seed = detail::splitmix64(opts.seed + 0x9E3779B97F4A7C15ULL * (s + 1));

    // Phase 1: stabilize every plant.
    double alpha = stab_fn(k).value;
    if (alpha > -opts.stab_margin) {
      BfgsOptions b = opts.bfgs;
      b.target = -opts.stab_margin;
      SamplingOptions so = opts.sampling_opts;
      so.seed = start_seed;
      const RunTrace t1 = run_with_refinement(stab_fn, k, b, opts.sampling, so);
      k = t1.best_k;
      alpha = t1.best_value;
      out.termination = t1.termination;
    }
    out.stab_level = alpha;
    out.stabilized = alpha <= -opts.stab_margin;
    if (!out.stabilized) {
      out.k = k;
      outcomes.push_back(std::move(out));
      continue;
    }

    // Phase 2: meet the finite bounds.
    if (!prob.bounded.empty()) {
      double psi = feas_fn(k).value;
      if (psi > 0.0) {
        BfgsOptions b = opts.bfgs;
        b.target = 0.0;
        SamplingOptions so = opts.sampling_opts;
        so.seed = detail::splitmix64(start_seed + 1);
        const RunTrace t2 = run_with_refinement(feas_fn, k, b, opts.sampling, so);
        k = t2.best_k;
        psi = t2.best_value;
        out.termination = t2.termination;
      }
      if (psi > 0.0) {
        out.k = k;
        out.feasible = false;
        out.violation = psi;
        const std::vector<double> vals = prob.values_norm(k);
        out.objective = prob.report_objective(vals);
        outcomes.push_back(std::move(out));
        continue;
      }
    }
    out.feasible = true;

    // Phase 3: minimize under an escalating exact penalty.
    if (!prob.minimize.empty()) {
      FeasibleBest stash;
      stash.has = true;
      stash.k = k;
      {
        // Seed the stash with the phase-2 point (feasible by construction).
        const std::vector<double> vals = prob.values_norm(k);
        double base = 0.0;
        for (int i : prob.minimize) {
          const double v = spec.entries[i].kind == ObjectiveKind::h_two ? vals[i] * vals[i]
                                                                        : vals[i];
          base = std::max(base, v);
        }
        stash.objective = base;
      }
      double rho = 10.0;
      Vector cur = k;
      int round = 0;
      int global_iter = 0;
      while (true) {
        const OracleFn phi = penalty_oracle(prob, rho, &stash);
        SamplingOptions so = opts.sampling_opts;
        so.seed = detail::splitmix64(start_seed + 2 + round);
        const RunTrace t3 = run_with_refinement(phi, cur, opts.bfgs, opts.sampling, so);
        for (const auto& it : t3.iterates) {
          const double v = report_units(it.second);
          out.history.push_back(v);
          if (opts.on_iteration) {
            opts.on_iteration(static_cast<int>(s), global_iter, v);
          }
          ++global_iter;
        }
        out.termination = t3.termination;
        const std::vector<double> vals = prob.values_norm(t3.best_k);
        if (prob.is_feasible(vals)) {
          k = t3.best_k;
          out.optimized = true;
          break;
        }
        if (rho >= 1e6 || !stash.has) {
          k = stash.has ? stash.k : t3.best_k;
          out.optimized = stash.has;
          break;
        }
        rho *= 10.0;
        cur = stash.k;
        ++round;
      }
    } else {
      out.optimized = true;  // pure feasibility problem
    }

    out.k = k;
    const std::vector<double> vals = prob.values_norm(k);
    out.feasible = prob.is_feasible(vals);
    out.objective = prob.report_objective(vals);
    out.violation = prob.max_violation(vals);
    outcomes.push_back(std::move(out));
  }

  // Reduce: feasible starts by objective, then stabilized ones by violation,
  // then anything by the stabilization level reached.
  int winner = -1;
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    const StartOutcome& o = outcomes[s];
    if (!o.stabilized || !o.feasible) continue;
    if (winner < 0 || o.objective < outcomes[winner].objective) {
      winner = static_cast<int>(s);
    }
  }
  if (winner < 0) {
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      const StartOutcome& o = outcomes[s];
      if (!o.stabilized) continue;
      if (winner < 0 || o.violation < outcomes[winner].violation) {
        winner = static_cast<int>(s);
      }
    }
  }
  if (winner < 0) {
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      if (winner < 0 || outcomes[s].stab_level < outcomes[winner].stab_level) {
        winner = static_cast<int>(s);
      }
    }
  }

  const StartOutcome& win = outcomes[winner];
  SynthesisReport report;
  report.seed = opts.seed;
  report.best_start = winner;

  const Controller Khat = pm.to_controller(win.k);
  report.controller = has_feedthrough ? unshift_controller(Khat, D22) : Khat;
  report.achieved = report_values(ps, spec, report.controller);

  report.stabilized = win.stabilized;
  bool feasible = win.stabilized;
  for (int j : prob.bounded) {
    if (!(report.achieved[j] <= spec.entries[j].bound * (1.0 + kFeasRelTol))) {
      feasible = false;
    }
  }
  for (int i : prob.minimize) {
    if (!std::isfinite(report.achieved[i]) &&
        spec.entries[i].kind != ObjectiveKind::spectral_abscissa) {
      feasible = false;
    }
  }
  report.feasible = feasible;

  report.stabilization.attempted = true;
  report.stabilization.succeeded = false;
  report.feasibility.attempted = !prob.bounded.empty();
  report.optimization.attempted = !prob.minimize.empty();
  for (const StartOutcome& o : outcomes) {
    report.stabilization.succeeded |= o.stabilized;
    report.feasibility.succeeded |= (o.stabilized && o.feasible && !prob.bounded.empty());
    report.optimization.succeeded |= o.optimized;
  }

  for (const StartOutcome& o : outcomes) {
    report.histories.push_back(o.history);
    StartSummary sum;
    sum.stabilized = o.stabilized;
    sum.feasible = o.feasible;
    sum.objective = o.objective;
    sum.violation = std::max(o.violation, 0.0);
    sum.termination = o.termination;
    report.start_summaries.push_back(sum);
  }

  if (!report.stabilized) {
    report.message = "no stabilizing controller was found";
  } else if (!report.feasible) {
    report.message = "no feasible controller was found; the report carries the best violation";
  }
  return report;
}

}  // namespace fosyn
