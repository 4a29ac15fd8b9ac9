#include "fosyn/optimizer.hpp"

#include "fosyn/errors.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fosyn {

using detail::splitmix64;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const Vector& gradient_of(const OracleResult& r) {
  if (!r.gradient) {
    throw InvalidInputError("oracle returned a finite value without a gradient");
  }
  return *r.gradient;
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tolerance:
      return "gradient-tolerance";
    case Termination::target_reached:
      return "target-reached";
    case Termination::max_iterations:
      return "max-iterations";
    case Termination::line_search_failed:
      return "line-search-failed";
    case Termination::sampling_stationary:
      return "sampling-stationary";
    case Termination::sampling_failed:
      return "sampling-failed";
    case Termination::invalid_start:
      return "invalid-start";
  }
  return "unknown";
}

void RunTrace::record(const Vector& k, double value) {
  iterates.emplace_back(k, value);
  if (value < best_value) {
    best_value = value;
    best_k = k;
  }
}

LineSearchResult line_search_weak_wolfe(const OracleFn& f, const Vector& k, const Vector& d,
                                        double f0, const Vector& g0, double c1, double c2,
                                        int max_iter) {
  const double g0d = g0.dot(d);
  if (!(g0d < 0.0) || !std::isfinite(f0)) {
    throw InvalidInputError("line_search_weak_wolfe: needs a descent direction and a finite "
                            "start value");
  }
  LineSearchResult res;
  double lo = 0.0;
  double hi = kInf;
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const OracleResult probe = f(k + t * d);
    ++res.evals;
    const bool armijo = probe.value <= f0 + c1 * t * g0d;  // NaN and +inf fail
    if (!armijo) {
      hi = t;
    } else if (gradient_of(probe).dot(d) < c2 * g0d) {
      lo = t;
      // On a ray where the function keeps decreasing the curvature condition
      // may never hold; stop expanding at some point and take the decrease.
      if (!std::isfinite(hi) && t >= 0x1p30) {
        res.ok = true;
        res.step = t;
        res.value = probe.value;
        res.gradient = *probe.gradient;
        return res;
      }
    } else {
      res.ok = true;
      res.step = t;
      res.value = probe.value;
      res.gradient = *probe.gradient;
      return res;
    }
    t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
  }
  return res;  // bracket failure
}

RunTrace bfgs(const OracleFn& f, const Vector& k0, const BfgsOptions& opts) {
  RunTrace trace;
  OracleResult cur = f(k0);
  ++trace.fn_evals;
  if (!std::isfinite(cur.value)) {
    throw InvalidInputError("bfgs: start value is not finite");
  }
  const Eigen::Index dim = k0.size();
  Vector k = k0;
  Vector g = gradient_of(cur);
  double value = cur.value;
  trace.record(k, value);

  Matrix H = Matrix::Identity(dim, dim);
  bool scaled = false;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (value <= opts.target) {
      trace.termination = Termination::target_reached;
      return trace;
    }
    if (g.norm() <= opts.tol_grad) {
      trace.termination = Termination::gradient_tolerance;
      return trace;
    }

    Vector d = -(H * g);
    if (!(g.dot(d) < 0.0)) {
      H.setIdentity();
      scaled = false;
      d = -g;
    }
    const LineSearchResult ls =
        line_search_weak_wolfe(f, k, d, value, g, opts.c1, opts.c2, opts.ls_max);
    trace.fn_evals += ls.evals;
    if (!ls.ok) {
      trace.termination = Termination::line_search_failed;
      return trace;
    }

    const Vector s = ls.step * d;
    const Vector y = ls.gradient - g;
    k += s;
    value = ls.value;
    g = ls.gradient;
    trace.record(k, value);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const Vector Hy = H * y;
      H += ((sy + y.dot(Hy)) / (sy * sy)) * (s * s.transpose());
      H -= (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
  }
  if (value <= opts.target) {
    trace.termination = Termination::target_reached;
  } else {
    trace.termination = Termination::max_iterations;
  }
  return trace;
}

RunTrace gradient_sampling(const OracleFn& f, const Vector& k0, const SamplingOptions& opts) {
  RunTrace trace;
  OracleResult cur = f(k0);
  ++trace.fn_evals;
  if (!std::isfinite(cur.value)) {
    throw InvalidInputError("gradient_sampling: start value is not finite");
  }
  const Eigen::Index dim = k0.size();
  Vector k = k0;
  Vector g = gradient_of(cur);
  double value = cur.value;
  trace.record(k, value);
  trace.termination = Termination::sampling_stationary;

  std::mt19937_64 rng(splitmix64(opts.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  auto sample_in_ball = [&](double radius) {
    Vector dir(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      dir[i] = normal(rng);
    }
    const double norm = dir.norm();
    if (norm == 0.0) {
      return Vector(Vector::Zero(dim));
    }
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(dim));
    return Vector((r / norm) * dir);
  };

  const double scale = 1.0 + k0.norm();
  for (double radius_scale : opts.radius_scales) {
    const double eps = radius_scale * scale;
    for (int it = 0; it < opts.max_iter_per_radius; ++it) {
      if (value <= opts.target) {
        trace.termination = Termination::target_reached;
        return trace;
      }
      std::vector<Vector> grads;
      grads.reserve(2 * dim + 1);
      grads.push_back(g);
      for (Eigen::Index s = 0; s < 2 * dim; ++s) {
        bool got = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
          const OracleResult probe = f(k + sample_in_ball(eps));
          ++trace.fn_evals;
          if (std::isfinite(probe.value)) {
            grads.push_back(gradient_of(probe));
            got = true;
            break;
          }
        }
        if (!got) {
          trace.termination = Termination::sampling_failed;
          return trace;
        }
      }

      const Vector gstar = min_norm_hull(grads);
      if (gstar.norm() <= opts.tol_sample) {
        break;  // stationary at this radius
      }

      // Armijo backtracking along the negated min-norm subgradient.
      const Vector d = -gstar;
      const double slope = gstar.squaredNorm();
      double t = 1.0;
      bool moved = false;
      while (t > 1e-20) {
        const OracleResult probe = f(k + t * d);
        ++trace.fn_evals;
        if (probe.value <= value - 1e-4 * t * slope) {
          k += t * d;
          value = probe.value;
          g = gradient_of(probe);
          trace.record(k, value);
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) {
        break;  // no progress at this radius either; shrink
      }
    }
  }
  return trace;
}

Vector min_norm_hull(const std::vector<Vector>& gradients) {
  if (gradients.empty()) {
    throw InvalidInputError("min_norm_hull: empty point list");
  }
  const Eigen::Index dim = gradients.front().size();
  const int m = static_cast<int>(gradients.size());
  Matrix P(dim, m);
  for (int i = 0; i < m; ++i) {
    if (gradients[i].size() != dim) {
      throw DimensionError("min_norm_hull: points of different lengths");
    }
    P.col(i) = gradients[i];
  }
  if (dim == 0) {
    return Vector(0);
  }

  double scale2 = 0.0;
  for (int i = 0; i < m; ++i) {
    scale2 = std::max(scale2, P.col(i).squaredNorm());
  }
  const double tol = 1e-12 * std::max(1.0, scale2);

  // Wolfe's vertex-exchange algorithm. S holds an affinely independent active
  // set, w its convex weights for the current point x.
  std::vector<int> S;
  {
    int i0 = 0;
    for (int i = 1; i < m; ++i) {
      if (P.col(i).squaredNorm() < P.col(i0).squaredNorm()) {
        i0 = i;
      }
    }
    S.push_back(i0);
  }
  Vector w = Vector::Ones(1);

  // Affine minimizer over the active set: min |P_S v| s.t. sum(v) = 1,
  // parameterized as v = e_1 + N u with N spanning {sum = 0}.
  auto affine_minimizer = [&](const std::vector<int>& act) {
    const int s = static_cast<int>(act.size());
    Vector v = Vector::Zero(s);
    v[0] = 1.0;
    if (s == 1) {
      return v;
    }
    Matrix A(dim, s - 1);
    for (int j = 1; j < s; ++j) {
      A.col(j - 1) = P.col(act[j]) - P.col(act[0]);
    }
    const Vector b = -P.col(act[0]);
    const Vector u = A.completeOrthogonalDecomposition().solve(b);
    for (int j = 1; j < s; ++j) {
      v[j] = u[j - 1];
      v[0] -= u[j - 1];
    }
    return v;
  };

  for (int outer = 0; outer < 16 * m + 64; ++outer) {
    Vector x = Vector::Zero(dim);
    for (std::size_t j = 0; j < S.size(); ++j) {
      x += w[static_cast<Eigen::Index>(j)] * P.col(S[j]);
    }
    // Optimality: x'p_i >= |x|^2 for every point.
    int enter = -1;
    double worst = x.squaredNorm() - tol;
    for (int i = 0; i < m; ++i) {
      const double xp = x.dot(P.col(i));
      if (xp < worst) {
        worst = xp;
        enter = i;
      }
    }
    if (enter < 0 || std::find(S.begin(), S.end(), enter) != S.end()) {
      return x;
    }
    S.push_back(enter);
    Vector w_ext(S.size());
    w_ext.head(w.size()) = w;
    w_ext[w.size()] = 0.0;
    w = w_ext;

    for (int inner = 0; inner < 4 * m + 16; ++inner) {
      const Vector v = affine_minimizer(S);
      if ((v.array() > 1e-12).all()) {
        w = v;
        break;
      }
      // Walk from w toward v until the first weight hits zero, then drop it.
      double theta = 1.0;
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (v[j] <= 1e-12 && w[j] > v[j]) {
          theta = std::min(theta, w[j] / (w[j] - v[j]));
        }
      }
      w = (1.0 - theta) * w + theta * v;
      std::vector<int> keep_idx;
      std::vector<double> keep_w;
      for (std::size_t j = 0; j < S.size(); ++j) {
        if (w[static_cast<Eigen::Index>(j)] > 1e-12) {
          keep_idx.push_back(S[j]);
          keep_w.push_back(w[static_cast<Eigen::Index>(j)]);
        }
      }
      if (keep_idx.empty()) {
        keep_idx.push_back(S[0]);
        keep_w.push_back(1.0);
      }
      S = std::move(keep_idx);
      w = Eigen::Map<const Vector>(keep_w.data(), static_cast<Eigen::Index>(keep_w.size()));
      w /= w.sum();
    }
  }
  Vector x = Vector::Zero(dim);
  for (std::size_t j = 0; j < S.size(); ++j) {
    x += w[static_cast<Eigen::Index>(j)] * P.col(S[j]);
  }
  return x;
}

MultiStartResult multi_start(const OracleFn& f, const std::vector<Vector>& starts,
                             const MultiStartOptions& opts) {
  if (starts.empty()) {
    throw InvalidInputError("multi_start: need at least one start");
  }
  MultiStartResult result;
  result.traces.reserve(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    RunTrace trace;
    const OracleResult probe = f(starts[s]);
    if (!std::isfinite(probe.value)) {
      trace.termination = Termination::invalid_start;
      trace.fn_evals = 1;
    } else {
      trace = bfgs(f, starts[s], opts.bfgs);
      ++trace.fn_evals;  // the probe above
      if (opts.sampling && trace.best_value > opts.bfgs.target) {
        SamplingOptions sopt = opts.sampling_opts;
        sopt.seed = splitmix64(opts.seed + 0x9E3779B97F4A7C15ULL * (s + 1));
        sopt.target = opts.bfgs.target;
        RunTrace refine = gradient_sampling(f, trace.best_k, sopt);
        for (const auto& it : refine.iterates) {
          trace.record(it.first, it.second);
        }
        trace.fn_evals += refine.fn_evals;
        trace.termination = refine.termination;
      }
    }
    result.traces.push_back(std::move(trace));
    const RunTrace& t = result.traces.back();
    if (result.best_index < 0 || t.best_value < result.best.best_value) {
      if (t.termination != Termination::invalid_start) {
        result.best = t;
        result.best_index = static_cast<int>(s);
      }
    }
  }
  if (result.best_index < 0) {
    throw NoFiniteStartError("multi_start: every start evaluated to +inf");
  }
  return result;
}

}  // namespace fosyn
