#include "fosyn/objectives.hpp"

#include "fosyn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fosyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// --- spectral abscissa -----------------------------------------------------

struct ActiveEigen {
  std::complex<double> lambda;
  ComplexVector right;
  ComplexVector left;
};

// Active eigenvalue = first under (Re desc, Im desc); at a conjugate pair the
// +Im branch is differentiated, an arbitrary-but-fixed subgradient choice.
ActiveEigen active_eigenpair(const Matrix& A) {
  Eigen::EigenSolver<Matrix> right(A);
  Eigen::EigenSolver<Matrix> leftT(Matrix(A.transpose()));
  if (right.info() != Eigen::Success || leftT.info() != Eigen::Success) {
    throw NoSolutionError("spectral_abscissa: eigenvalue iteration did not converge");
  }
  const auto& vals = right.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < vals.size(); ++i) {
    const auto a = vals[i], b = vals[best];
    if (a.real() > b.real() || (a.real() == b.real() && a.imag() > b.imag())) {
      best = i;
    }
  }
  // Left eigenvector for lambda: eigenvector of A' for conj(lambda).
  const std::complex<double> target = std::conj(vals[best]);
  const auto& lvals = leftT.eigenvalues();
  Eigen::Index match = 0;
  double dist = std::abs(lvals[0] - target);
  for (Eigen::Index i = 1; i < lvals.size(); ++i) {
    const double d = std::abs(lvals[i] - target);
    if (d < dist) {
      dist = d;
      match = i;
    }
  }
  return ActiveEigen{vals[best], right.eigenvectors().col(best),
                     leftT.eigenvectors().col(match)};
}

// --- H-infinity machinery --------------------------------------------------

ComplexMatrix transfer_at(const ClosedLoop& cl, double omega) {
  ComplexMatrix jwIA = -cl.A.cast<std::complex<double>>();
  jwIA.diagonal().array() += std::complex<double>(0.0, omega);
  return cl.C.cast<std::complex<double>>() * jwIA.partialPivLu().solve(
             cl.B.cast<std::complex<double>>()) +
         cl.D.cast<std::complex<double>>();
}

double sigma_max_at(const ClosedLoop& cl, double omega) {
  if (cl.B.cols() == 0 || cl.C.rows() == 0) {
    return 0.0;
  }
  if (!std::isfinite(omega)) {
    return cl.D.size() == 0 ? 0.0 : cl.D.jacobiSvd().singularValues()[0];
  }
  return transfer_at(cl, omega).jacobiSvd().singularValues()[0];
}

// gamma is a strict upper bound on the norm iff gamma > sigma_max(D) and the
// Hamiltonian
//   H = [ A + B R^-1 D' C            B R^-1 B'              ]
//       [ -C' (I + D R^-1 D') C     -(A + B R^-1 D' C)'     ],
//   R = gamma^2 I - D' D,
// has no purely imaginary eigenvalues. When it does, the imaginary parts are
// the frequencies where sigma_max(T(jw)) crosses the level gamma.
bool imaginary_crossings(const ClosedLoop& cl, double gamma, std::vector<double>* freqs) {
  const Eigen::Index n = cl.A.rows();
  const Eigen::Index m = cl.B.cols();
  Matrix R = -cl.D.transpose() * cl.D;
  R.diagonal().array() += gamma * gamma;
  const auto Rfac = R.llt();
  const Matrix RinvBt = Rfac.solve(cl.B.transpose());
  const Matrix RinvDtC = Rfac.solve(cl.D.transpose() * cl.C);
  const Matrix Abar = cl.A + cl.B * RinvDtC;

  Matrix H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = Abar;
  H.topRightCorner(n, n) = cl.B * RinvBt;
  H.bottomLeftCorner(n, n) =
      -cl.C.transpose() * (cl.C + cl.D * RinvDtC);
  H.bottomRightCorner(n, n) = -Abar.transpose();

  Eigen::EigenSolver<Matrix> solver(H, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NoSolutionError("hinf_norm: Hamiltonian eigenvalue iteration did not converge");
  }
  const double tol = 1e-9 * std::max(1.0, H.norm());
  bool found = false;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const auto lambda = solver.eigenvalues()[i];
    if (std::abs(lambda.real()) <= tol) {
      found = true;
      if (freqs != nullptr && lambda.imag() >= 0.0) {
        freqs->push_back(lambda.imag());
      }
    }
  }
  return found;
}

std::vector<double> coarse_frequencies(const ClosedLoop& cl) {
  std::vector<double> freqs = {0.0};
  std::vector<double> magnitudes;
  const Spectrum lambda = eigenvalues(cl.A);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double mag = std::abs(lambda[i]);
    if (mag > 1e-12) {
      magnitudes.push_back(mag);
      freqs.push_back(mag);
    }
    if (std::abs(lambda[i].imag()) > 1e-12) {
      freqs.push_back(std::abs(lambda[i].imag()));
    }
  }
  double center = 1.0;
  if (!magnitudes.empty()) {
    std::sort(magnitudes.begin(), magnitudes.end());
    center = magnitudes[magnitudes.size() / 2];
  }
  for (int i = 0; i < 32; ++i) {
    const double expo = -4.0 + 8.0 * i / 31.0;
    freqs.push_back(center * std::pow(10.0, expo));
  }
  std::sort(freqs.begin(), freqs.end());
  return freqs;
}

double golden_section_peak(const ClosedLoop& cl, double lo, double hi) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = sigma_max_at(cl, x1), f2 = sigma_max_at(cl, x2);
  for (int it = 0; it < 80 && (b - a) > 1e-13 * (1.0 + b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = sigma_max_at(cl, x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = sigma_max_at(cl, x1);
    }
  }
  const double mid = 0.5 * (a + b);
  double best_w = mid, best = sigma_max_at(cl, mid);
  for (double cand : {lo, hi}) {
    const double v = sigma_max_at(cl, cand);
    if (v > best) {
      best = v;
      best_w = cand;
    }
  }
  return best_w;
}

struct HinfPeak {
  double value = 0.0;
  double omega = 0.0;  // +inf: the supremum is sigma_max(D) at omega = inf
  ComplexVector u, v;  // top singular pair of T(j omega)
};

// Requires cl.A Hurwitz. Bisection with certified upper bounds, then a local
// refinement of the peak frequency so the returned value is the supremum to
// well below the bisection tolerance.
HinfPeak hinf_peak(const ClosedLoop& cl) {
  HinfPeak peak;
  if (cl.D.size() == 0) {
    return peak;  // empty performance channel
  }
  const double sigma_d = cl.D.jacobiSvd().singularValues()[0];

  double lo = sigma_d;
  double omega_grid = std::numeric_limits<double>::infinity();
  for (double w : coarse_frequencies(cl)) {
    const double s = sigma_max_at(cl, w);
    if (s > lo) {
      lo = s;
      omega_grid = w;
    }
  }
  if (lo <= 1e-300) {
    return peak;  // identically zero channel
  }

  double hi = 2.0 * lo;
  for (int it = 0; it < 200 && imaginary_crossings(cl, hi, nullptr); ++it) {
    hi *= 2.0;
  }

  std::vector<double> crossings;
  for (int it = 0; it < 200 && (hi - lo) > 1e-8 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= sigma_d * (1.0 + 1e-12)) {
      lo = mid;  // cannot certify below sigma_max(D); the supremum sits there
      break;
    }
    std::vector<double> f;
    if (imaginary_crossings(cl, mid, &f)) {
      lo = mid;
      crossings = std::move(f);
    } else {
      hi = mid;
    }
  }

  std::vector<double> candidates = crossings;
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t i = 0; i + 1 < crossings.size(); ++i) {
    candidates.push_back(0.5 * (candidates[i] + candidates[i + 1]));
  }
  if (std::isfinite(omega_grid)) {
    candidates.push_back(omega_grid);
  }
  if (candidates.empty()) {
    candidates.push_back(0.0);
  }

  double best_w = candidates.front(), best = -1.0;
  for (double w : candidates) {
    const double s = sigma_max_at(cl, w);
    if (s > best) {
      best = s;
      best_w = w;
    }
  }

  // Local refinement around the best candidate; the peak is interior to the
  // bracket formed by its neighbours (or a relative pad when alone).
  std::sort(candidates.begin(), candidates.end());
  double left = 0.0, right = best_w > 0 ? best_w * (1.0 + 1e-3) : 1e-3;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == best_w) {
      left = (i > 0) ? candidates[i - 1] : std::max(0.0, best_w * (1.0 - 1e-3));
      right = (i + 1 < candidates.size()) ? candidates[i + 1] : best_w * (1.0 + 1e-3) + 1e-9;
      break;
    }
  }
  const double refined = golden_section_peak(cl, left, right);
  const double refined_value = sigma_max_at(cl, refined);
  if (refined_value > best) {
    best = refined_value;
    best_w = refined;
  }

  if (sigma_d >= best) {
    peak.value = sigma_d;
    peak.omega = std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<ComplexMatrix> dec(cl.D.cast<std::complex<double>>(),
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
    peak.u = dec.matrixU().col(0);
    peak.v = dec.matrixV().col(0);
    return peak;
  }

  peak.value = best;
  peak.omega = best_w;
  Eigen::JacobiSVD<ComplexMatrix> dec(transfer_at(cl, best_w),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  peak.u = dec.matrixU().col(0);
  peak.v = dec.matrixV().col(0);
  return peak;
}

void require_eliminated_feedthrough(const Plant& p, const ClosedLoop& cl) {
  if (cl.D.norm() > 1e-8 * (1.0 + p.D11.norm())) {
    throw InvalidInputError("h2_squared: closed-loop feedthrough is nonzero; the parameter map "
                            "must come from eliminate_feedthrough");
  }
}

}  // namespace

ObjectiveKind kind_from_char(char c) {
  switch (c) {
    case 's':
      return ObjectiveKind::spectral_abscissa;
    case 't':
      return ObjectiveKind::h_two;
    case 'h':
      return ObjectiveKind::h_inf;
    default:
      throw InvalidInputError(std::string("unknown objective specifier '") + c +
                              "'; expected one of 's', 't', 'h'");
  }
}

char to_char(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::spectral_abscissa:
      return 's';
    case ObjectiveKind::h_two:
      return 't';
    case ObjectiveKind::h_inf:
      return 'h';
  }
  return '?';
}

Evaluation spectral_abscissa(const Plant& p, const ParamMap& pm, const Vector& k) {
  const ClosedLoop cl = assemble(p, pm.to_controller(k));
  const ActiveEigen act = active_eigenpair(cl.A);

  Evaluation out;
  out.value = act.lambda.real();

  // d Re(lambda) = Re(y^H dA x / (y^H x)) = <Re(conj(y) x' / s), dA>.
  std::complex<double> s = act.left.dot(act.right);  // y^H x
  const double floor = 1e-14 * act.left.norm() * act.right.norm();
  if (std::abs(s) < floor) {
    s = (s == 0.0) ? std::complex<double>(floor, 0.0) : s * (floor / std::abs(s));
  }
  const Matrix WA = ((act.left.conjugate() * act.right.transpose()) / s).real();
  const int nk = pm.order();
  const Matrix WB = Matrix::Zero(cl.B.rows(), cl.B.cols());
  const Matrix WC = Matrix::Zero(cl.C.rows(), cl.C.cols());
  const Matrix WD = Matrix::Zero(cl.D.rows(), cl.D.cols());
  out.gradient = pm.pullback(pullback_closed_loop(p, nk, WA, WB, WC, WD));
  return out;
}

double h2_squared_value(const ClosedLoop& cl) {
  // Loops inside the Lyapunov solvability margin are reported as infinite;
  // their norms are not computable to any accuracy anyway.
  if (spectral_abscissa(cl.A) >= -1e-12 * (1.0 + cl.A.norm())) {
    return kInf;
  }
  const Matrix Xo = solve_lyapunov(cl.A, cl.C.transpose() * cl.C);
  return std::max(0.0, (cl.B.transpose() * Xo * cl.B).trace());
}

Evaluation h2_squared(const Plant& p, const ParamMap& pm, const Vector& k) {
  const ClosedLoop cl = assemble(p, pm.to_controller(k));
  require_eliminated_feedthrough(p, cl);

  const double alpha = spectral_abscissa(cl.A);
  if (alpha >= 0.0) {
    return Evaluation{};  // +inf, no gradient
  }
  const double tol_boundary = 1e-12 * (1.0 + cl.A.norm());
  if (alpha >= -tol_boundary) {
    throw StabilityBoundaryError("h2_squared: closed loop is too close to the stability "
                                 "boundary for the Lyapunov solves (abscissa " +
                                     std::to_string(alpha) + ")",
                                 alpha);
  }

  // Observability gramian Xo:  A' Xo + Xo A + C' C = 0
  // Controllability gramian Xc: A Xc + Xc A' + B B' = 0
  const Matrix Xo = solve_lyapunov(cl.A, cl.C.transpose() * cl.C);
  const Matrix Xc = solve_lyapunov(cl.A.transpose(), cl.B * cl.B.transpose());

  Evaluation out;
  const double value = (cl.B.transpose() * Xo * cl.B).trace();
  const double dual = (cl.C * Xc * cl.C.transpose()).trace();
  out.value = std::max(0.0, value);
  out.trace_mismatch = std::abs(value - dual);

  // df = <2 Xo Xc, dA> + <2 Xo B, dB> + <2 C Xc, dC>; the dA and dC terms are
  // the adjoint of the gramian equation, pairing the perturbation with the
  // dual gramian.
  const Matrix WA = 2.0 * Xo * Xc;
  const Matrix WB = 2.0 * Xo * cl.B;
  const Matrix WC = 2.0 * cl.C * Xc;
  const Matrix WD = Matrix::Zero(cl.D.rows(), cl.D.cols());
  out.gradient = pm.pullback(pullback_closed_loop(p, pm.order(), WA, WB, WC, WD));
  return out;
}

double hinf_norm_value(const ClosedLoop& cl) {
  if (spectral_abscissa(cl.A) >= 0.0) {
    return kInf;
  }
  return hinf_peak(cl).value;
}

Evaluation hinf_norm(const Plant& p, const ParamMap& pm, const Vector& k) {
  const ClosedLoop cl = assemble(p, pm.to_controller(k));
  if (spectral_abscissa(cl.A) >= 0.0) {
    return Evaluation{};  // +inf, no gradient
  }
  const HinfPeak peak = hinf_peak(cl);

  Evaluation out;
  out.value = peak.value;
  out.peak_frequency = peak.omega;

  const Eigen::Index n = cl.A.rows();
  ComplexVector a = ComplexVector::Zero(n);
  ComplexVector b = ComplexVector::Zero(n);
  ComplexVector u = peak.u, v = peak.v;
  if (u.size() == 0 || v.size() == 0) {
    // Identically zero channel: any unit pair is a valid subgradient choice.
    u = ComplexVector::Zero(cl.C.rows());
    v = ComplexVector::Zero(cl.B.cols());
    if (u.size() > 0) u[0] = 1.0;
    if (v.size() > 0) v[0] = 1.0;
  }
  if (std::isfinite(peak.omega)) {
    // d sigma = Re(u^H dT v) with T = C (jwI - A)^-1 B + D at the peak; the
    // frequency term vanishes there. a^H = u^H C Phi, b = Phi B v.
    ComplexMatrix jwIA = -cl.A.cast<std::complex<double>>();
    jwIA.diagonal().array() += std::complex<double>(0.0, peak.omega);
    const auto lu = jwIA.partialPivLu();
    b = lu.solve(cl.B.cast<std::complex<double>>() * v);
    a = lu.adjoint().solve(cl.C.transpose().cast<std::complex<double>>() * u);
  }
  const Matrix WA = (a.conjugate() * b.transpose()).real();
  const Matrix WB = (a.conjugate() * v.transpose()).real();
  const Matrix WC = (u.conjugate() * b.transpose()).real();
  const Matrix WD = (u.conjugate() * v.transpose()).real();
  out.gradient = pm.pullback(pullback_closed_loop(p, pm.order(), WA, WB, WC, WD));
  return out;
}

Evaluation evaluate(ObjectiveKind kind, const Plant& p, const ParamMap& pm, const Vector& k) {
  switch (kind) {
    case ObjectiveKind::spectral_abscissa:
      return spectral_abscissa(p, pm, k);
    case ObjectiveKind::h_two:
      return h2_squared(p, pm, k);
    case ObjectiveKind::h_inf:
      return hinf_norm(p, pm, k);
  }
  throw InvalidInputError("evaluate: unknown objective kind");
}

}  // namespace fosyn
