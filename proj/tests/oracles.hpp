#pragma once

// Reference implementations used only by the test suites. Each one computes
// the quantity under test by a route independent of the library code: dense
// Kronecker solves for Lyapunov equations, direct frequency sweeps for norms,
// central differences for gradients, and a literal interconnection solve for
// closed loops with feedthrough.

#include "fosyn/closedloop.hpp"
#include "fosyn/numerics.hpp"
#include "fosyn/objectives.hpp"
#include "fosyn/plant.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracles {

using fosyn::ClosedLoop;
using fosyn::ComplexMatrix;
using fosyn::ComplexVector;
using fosyn::Controller;
using fosyn::Matrix;
using fosyn::Plant;
using fosyn::Vector;

// Solves A'X + XA + Q = 0 through the n^2 x n^2 Kronecker system
// (I kron A' + A' kron I) vec(X) = -vec(Q).
inline Matrix kron_lyapunov(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  Matrix K = Matrix::Zero(n * n, n * n);
  const Matrix At = A.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    K.block(i * n, i * n, n, n) += At;  // I kron A'
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n).diagonal().array() += At(i, j);  // A' kron I
    }
  }
  Vector q(n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    q.segment(j * n, n) = Q.col(j);
  }
  const Vector x = K.fullPivLu().solve(-q);
  Matrix X(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    X.col(j) = x.segment(j * n, n);
  }
  return X;
}

// Central finite differences with per-coordinate step 1e-6 * (1 + |k_i|).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& k) {
  Vector g(k.size());
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(k[i]));
    Vector kp = k, km = k;
    kp[i] += h;
    km[i] -= h;
    g[i] = (f(kp) - f(km)) / (2.0 * h);
  }
  return g;
}

// Transfer matrix C (jwI - A)^-1 B + D evaluated directly.
inline ComplexMatrix transfer(const ClosedLoop& cl, double omega) {
  ComplexMatrix jwIA = -cl.A.cast<std::complex<double>>();
  jwIA.diagonal().array() += std::complex<double>(0.0, omega);
  return cl.C.cast<std::complex<double>>() *
             jwIA.partialPivLu().solve(cl.B.cast<std::complex<double>>()) +
         cl.D.cast<std::complex<double>>();
}

inline double sigma_max(const ComplexMatrix& T) {
  if (T.size() == 0) return 0.0;
  return T.jacobiSvd().singularValues()[0];
}

// Frequency response of the literal plant/controller interconnection,
// valid for nonzero D22: solve the coupled equations
//   jw x  = A x  + B1 w + B2 u
//   jw xk = AK xk + BK y
//   u     = CK xk + DK y
//   y     = C2 x + D21 w + D22 u
// for z = C1 x + D11 w + D12 u, one performance-input column at a time.
inline ComplexMatrix interconnection_transfer(const Plant& p, const Controller& K, double omega) {
  using C = std::complex<double>;
  const int n = p.n(), nk = K.order(), m2 = p.m2(), p2 = p.p2();
  const int dim = n + nk + m2 + p2;
  ComplexMatrix M = ComplexMatrix::Zero(dim, dim);
  const C jw(0.0, omega);

  // unknown layout: [x; xk; u; y]
  M.block(0, 0, n, n) = jw * Matrix::Identity(n, n).cast<C>() - p.A.cast<C>();
  M.block(0, n + nk, n, m2) = -p.B2.cast<C>();
  M.block(n, n, nk, nk) = jw * Matrix::Identity(nk, nk).cast<C>() - K.AK.cast<C>();
  M.block(n, n + nk + m2, nk, p2) = -K.BK.cast<C>();
  M.block(n + nk, n, m2, nk) = -K.CK.cast<C>();
  M.block(n + nk, n + nk, m2, m2) = Matrix::Identity(m2, m2).cast<C>();
  M.block(n + nk, n + nk + m2, m2, p2) = -K.DK.cast<C>();
  M.block(n + nk + m2, 0, p2, n) = -p.C2.cast<C>();
  M.block(n + nk + m2, n + nk, p2, m2) = -p.D22.cast<C>();
  M.block(n + nk + m2, n + nk + m2, p2, p2) = Matrix::Identity(p2, p2).cast<C>();

  const auto lu = M.partialPivLu();
  ComplexMatrix T(p.p1(), p.m1());
  for (int j = 0; j < p.m1(); ++j) {
    ComplexVector rhs = ComplexVector::Zero(dim);
    rhs.segment(0, n) = p.B1.col(j).cast<C>();
    rhs.segment(n + nk + m2, p2) = p.D21.col(j).cast<C>();
    const ComplexVector sol = lu.solve(rhs);
    T.col(j) = p.C1.cast<C>() * sol.segment(0, n) + p.D11.col(j).cast<C>() +
               p.D12.cast<C>() * sol.segment(n + nk, m2);
  }
  return T;
}

// Dense-grid H-infinity reference: 1e5 log-spaced frequencies over
// [1e-4, 1e4] plus golden-section refinement around the grid argmax.
inline double dense_grid_hinf(const ClosedLoop& cl, int grid_points = 100000) {
  double best = sigma_max(cl.D.cast<std::complex<double>>());
  double best_w = 0.0;
  double prev_w = 0.0;
  double next_of_best = 0.0;
  std::vector<double> ws(grid_points + 1);
  ws[0] = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    ws[i + 1] = std::pow(10.0, -4.0 + 8.0 * i / (grid_points - 1.0));
  }
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const double s = sigma_max(transfer(cl, ws[i]));
    if (s > best) {
      best = s;
      best_w = ws[i];
      prev_w = (i > 0) ? ws[i - 1] : 0.0;
      next_of_best = (i + 1 < ws.size()) ? ws[i + 1] : ws[i] * 1.01;
    }
  }
  (void)best_w;
  // Golden-section refinement on the bracketing interval.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = prev_w, b = next_of_best;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = sigma_max(transfer(cl, x1)), f2 = sigma_max(transfer(cl, x2));
  for (int it = 0; it < 100 && (b - a) > 1e-13 * (1.0 + b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = sigma_max(transfer(cl, x2));
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = sigma_max(transfer(cl, x1));
    }
  }
  return std::max(best, sigma_max(transfer(cl, 0.5 * (a + b))));
}

// --- fixed test problems -----------------------------------------------------

// One-state plant with a two-entry performance output; the closed loop under
// static feedback u = k y has squared H2 norm (1 + k^2) / (2 (1 - k)).
inline Plant scalar_plant() {
  Plant p;
  p.A = Matrix::Constant(1, 1, -1.0);
  p.B1 = Matrix::Constant(1, 1, 1.0);
  p.B2 = Matrix::Constant(1, 1, 1.0);
  p.C1 = (Matrix(2, 1) << 1.0, 0.0).finished();
  p.C2 = Matrix::Constant(1, 1, 1.0);
  p.D11 = Matrix::Zero(2, 1);
  p.D12 = (Matrix(2, 1) << 0.0, 1.0).finished();
  p.D21 = Matrix::Zero(1, 1);
  p.D22 = Matrix::Zero(1, 1);
  p.name = "scalar";
  return p;
}

// Oscillator with the H2 performance channel of the mixed design example.
inline Plant p2_plant() {
  Plant p;
  p.A = (Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished();
  p.B1 = Matrix::Identity(2, 2);
  p.B2 = (Matrix(2, 1) << 0.0, 1.0).finished();
  p.C1 = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
  p.C2 = (Matrix(1, 2) << 0.0, 1.0).finished();
  p.D11 = Matrix::Zero(2, 2);
  p.D12 = (Matrix(2, 1) << 0.0, 1.0).finished();
  p.D21 = Matrix::Zero(1, 2);
  p.D22 = Matrix::Zero(1, 1);
  p.name = "p2";
  return p;
}

// The same oscillator with the H-infinity channel; under u = k y the loop has
// ||T||_inf = 1 / (|k| sqrt(1 - k^2/4)) for -2 < k < 0.
inline Plant pinf_plant() {
  Plant p;
  p.A = (Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished();
  p.B1 = (Matrix(2, 1) << 1.0, 0.0).finished();
  p.B2 = (Matrix(2, 1) << 0.0, 1.0).finished();
  p.C1 = (Matrix(1, 2) << 0.0, 1.0).finished();
  p.C2 = (Matrix(1, 2) << 0.0, 1.0).finished();
  p.D11 = Matrix::Zero(1, 1);
  p.D12 = Matrix::Zero(1, 1);
  p.D21 = Matrix::Zero(1, 1);
  p.D22 = Matrix::Zero(1, 1);
  p.name = "pinf";
  return p;
}

// Closed-loop squared H2 norm of the scalar plant under u = k y, and its
// derivative.
inline double scalar_h2_squared(double k) { return (1.0 + k * k) / (2.0 * (1.0 - k)); }
inline double scalar_h2_squared_grad(double k) {
  return (1.0 + 2.0 * k - k * k) / (2.0 * (1.0 - k) * (1.0 - k));
}

// --- random test-problem generators -----------------------------------------

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      M(i, j) = scale * normal(rng);
    }
  }
  return M;
}

// Random Hurwitz matrix: shift a random matrix left of the imaginary axis.
inline Matrix random_hurwitz(std::mt19937_64& rng, int n, double margin = 0.5) {
  Matrix A = random_matrix(rng, n, n);
  const double alpha = fosyn::spectral_abscissa(A);
  A.diagonal().array() -= alpha + margin;
  return A;
}

inline ClosedLoop random_stable_system(std::mt19937_64& rng, int n, int m, int p,
                                       bool with_d = false) {
  ClosedLoop cl;
  cl.A = random_hurwitz(rng, n);
  cl.B = random_matrix(rng, n, m);
  cl.C = random_matrix(rng, p, n);
  cl.D = with_d ? random_matrix(rng, p, m, 0.3) : Matrix::Zero(p, m);
  return cl;
}

// Random plant whose feedthrough constraint is solvable (D11 is constructed
// inside the range of DK -> D12 DK D21) and whose open loop is stable, so
// k = 0 is a usable evaluation point.
inline Plant random_plant(std::mt19937_64& rng, int n, int m1, int m2, int p1, int p2,
                          bool zero_d11 = false) {
  Plant plant;
  plant.A = random_hurwitz(rng, n, 0.7);
  plant.B1 = random_matrix(rng, n, m1);
  plant.B2 = random_matrix(rng, n, m2);
  plant.C1 = random_matrix(rng, p1, n);
  plant.C2 = random_matrix(rng, p2, n);
  plant.D12 = random_matrix(rng, p1, m2);
  plant.D21 = random_matrix(rng, p2, m1);
  plant.D22 = Matrix::Zero(p2, m2);
  if (zero_d11) {
    plant.D11 = Matrix::Zero(p1, m1);
  } else {
    plant.D11 = -plant.D12 * random_matrix(rng, m2, p2, 0.5) * plant.D21;
  }
  plant.name = "random";
  return plant;
}

// --- finite-difference gradient suite ----------------------------------------

// True when sigma_max(T(jw)) has a single dominant peak: the best local
// maximum on a scan grid beats every other local maximum and the w -> inf
// limit by at least 1e-3 in value (scaled).
inline bool unique_peak(const ClosedLoop& cl) {
  std::vector<double> ws = {0.0};
  for (int i = 0; i < 600; ++i) {
    ws.push_back(std::pow(10.0, -3.0 + 6.0 * i / 599.0));
  }
  std::vector<double> sig(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) {
    sig[i] = sigma_max(transfer(cl, ws[i]));
  }
  std::vector<double> local_maxima;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const bool up = (i == 0) || sig[i] >= sig[i - 1];
    const bool down = (i + 1 == sig.size()) || sig[i] >= sig[i + 1];
    if (up && down) {
      local_maxima.push_back(sig[i]);
    }
  }
  std::sort(local_maxima.rbegin(), local_maxima.rend());
  if (local_maxima.empty()) {
    return false;
  }
  const double top = local_maxima[0];
  const double margin = 1e-3 * (1.0 + top);
  if (local_maxima.size() > 1 && top - local_maxima[1] < margin) {
    return false;
  }
  const double at_inf = sigma_max(cl.D.cast<std::complex<double>>());
  return top - at_inf >= margin;
}

// Draws (plant, eliminated parameter map, stable point) cases and compares
// the analytic gradient of the requested objective against central finite
// differences of its value. Returns the worst relative error over `count`
// accepted points.
inline double fd_max_rel_error(fosyn::ObjectiveKind kind, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int collected = 0;
  while (collected < count) {
    const int n = 2 + static_cast<int>(rng() % 5);   // up to 6 states
    const int m1 = 1 + static_cast<int>(rng() % 3);
    const int m2 = 1 + static_cast<int>(rng() % 2);
    const int p1 = 1 + static_cast<int>(rng() % 3);
    const int p2 = 1 + static_cast<int>(rng() % 2);
    const int nk = static_cast<int>(rng() % 3);
    const Plant plant = random_plant(rng, n, m1, m2, p1, p2);
    const fosyn::ParamMap pm = fosyn::eliminate_feedthrough(plant, nk);
    if (pm.dim() == 0) {
      continue;
    }
    for (int attempt = 0; attempt < 8 && collected < count; ++attempt) {
      Vector k(pm.dim());
      for (Eigen::Index i = 0; i < k.size(); ++i) {
        k[i] = 0.2 * normal(rng);
      }
      const ClosedLoop cl = fosyn::assemble(plant, pm.to_controller(k));
      if (fosyn::spectral_abscissa(cl.A) > -0.05) {
        continue;
      }
      if (kind == fosyn::ObjectiveKind::h_inf && !unique_peak(cl)) {
        continue;
      }
      const fosyn::Evaluation ev = fosyn::evaluate(kind, plant, pm, k);
      if (!ev.finite()) {
        continue;
      }
      const Vector fd = fd_gradient(
          [&](const Vector& kk) { return fosyn::evaluate(kind, plant, pm, kk).value; }, k);
      const double rel = (*ev.gradient - fd).norm() / std::max(1e-8, ev.gradient->norm());
      worst = std::max(worst, rel);
      ++collected;
    }
  }
  return worst;
}

}  // namespace oracles
