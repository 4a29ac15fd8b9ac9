#pragma once

#include <Eigen/Dense>

#include <complex>

namespace fosyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Eigenvalues of a real matrix; closed under conjugation.
using Spectrum = Eigen::VectorXcd;

/// All eigenvalues of a square matrix with finite entries.
Spectrum eigenvalues(const Matrix& A);

/// Largest real part over the spectrum of A; -inf for an empty matrix.
double spectral_abscissa(const Matrix& A);

/// Solves A'X + XA + Q = 0 for symmetric X via complex Schur reduction and
/// triangular back-substitution. Requires A Hurwitz and Q symmetric.
/// The transposed variant A Y + Y A' + Q = 0 is solve_lyapunov(A', Q).
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

struct Svd {
  Matrix U;  // rows x rows, orthogonal
  Vector S;  // length min(rows, cols), non-negative, non-increasing
  Matrix V;  // cols x cols, orthogonal
};

/// Full singular value decomposition, M = U * diag(S) * V'.
Svd svd(const Matrix& M);

/// Singular values above max(rows, cols) * ulp * S[0].
int numerical_rank(const Svd& dec);

}  // namespace fosyn
