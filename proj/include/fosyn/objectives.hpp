#pragma once

#include "fosyn/closedloop.hpp"
#include "fosyn/numerics.hpp"
#include "fosyn/plant.hpp"

#include <limits>
#include <optional>

namespace fosyn {

/// Which closed-loop quantity a plant entry measures.
enum class ObjectiveKind {
  spectral_abscissa,  // 's': max real part of the closed-loop spectrum
  h_two,              // 't': H2 norm (the evaluator returns its square)
  h_inf,              // 'h': H-infinity norm
};

ObjectiveKind kind_from_char(char c);
char to_char(ObjectiveKind kind);

/// Value and gradient of an objective at a parameter vector. An unstable
/// closed loop yields value = +inf with no gradient.
struct Evaluation {
  double value = std::numeric_limits<double>::infinity();
  std::optional<Vector> gradient;

  // Diagnostics.
  double peak_frequency = std::numeric_limits<double>::quiet_NaN();  // H-infinity
  double trace_mismatch = std::numeric_limits<double>::quiet_NaN();  // H2 dual-trace check

  bool finite() const { return std::isfinite(value); }
};

/// Max real part of the closed-loop spectrum; gradient through the left and
/// right eigenvectors of the active eigenvalue. Always finite.
Evaluation spectral_abscissa(const Plant& p, const ParamMap& pm, const Vector& k);

/// Squared H2 norm trace(B' X B) with X the closed-loop observability
/// gramian, +inf when the loop is unstable. The gradient combines both
/// Lyapunov solutions (observability and controllability) through the
/// adjoint of the Lyapunov operator. Requires a parameter map under which
/// the closed-loop feedthrough vanishes identically.
Evaluation h2_squared(const Plant& p, const ParamMap& pm, const Vector& k);

/// H-infinity norm by bisection on imaginary-axis eigenvalues of Hamiltonian
/// matrices, +inf when the loop is unstable. The gradient differentiates the
/// peak singular value at the recorded peak frequency.
Evaluation hinf_norm(const Plant& p, const ParamMap& pm, const Vector& k);

Evaluation evaluate(ObjectiveKind kind, const Plant& p, const ParamMap& pm, const Vector& k);

/// Value-only evaluations on an assembled loop (used by reports).
double h2_squared_value(const ClosedLoop& cl);
double hinf_norm_value(const ClosedLoop& cl);

}  // namespace fosyn
