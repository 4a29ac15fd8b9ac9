#include "fosyn/numerics.hpp"

#include "fosyn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace fosyn {

namespace {

void require_finite(const Matrix& M, const char* who) {
  if (!M.allFinite()) {
    throw InvalidInputError(std::string(who) + ": matrix has non-finite entries");
  }
}

void require_square(const Matrix& M, const char* who) {
  if (M.rows() != M.cols()) {
    throw DimensionError(std::string(who) + ": matrix is " + std::to_string(M.rows()) + "x" +
                         std::to_string(M.cols()) + ", expected square");
  }
}

}  // namespace

Spectrum eigenvalues(const Matrix& A) {
  require_square(A, "eigenvalues");
  require_finite(A, "eigenvalues");
  if (A.rows() == 0) {
    return Spectrum(0);
  }
  Eigen::EigenSolver<Matrix> solver(A, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NoSolutionError("eigenvalues: iteration did not converge");
  }
  return solver.eigenvalues();
}

double spectral_abscissa(const Matrix& A) {
  const Spectrum lambda = eigenvalues(A);
  double alpha = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    alpha = std::max(alpha, lambda[i].real());
  }
  return alpha;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  require_square(A, "solve_lyapunov");
  require_square(Q, "solve_lyapunov");
  require_finite(A, "solve_lyapunov");
  require_finite(Q, "solve_lyapunov");
  if (A.rows() != Q.rows()) {
    throw DimensionError("solve_lyapunov: A is " + std::to_string(A.rows()) + "x" +
                         std::to_string(A.cols()) + " but Q is " + std::to_string(Q.rows()) + "x" +
                         std::to_string(Q.cols()));
  }
  const double q_scale = 1.0 + Q.norm();
  if ((Q - Q.transpose()).norm() > 1e-10 * q_scale) {
    throw InvalidInputError("solve_lyapunov: Q is not symmetric");
  }
  const Eigen::Index n = A.rows();
  if (n == 0) {
    return Matrix(0, 0);
  }

  // A = U T U^H with T upper triangular. Substituting X = conj(U) Z U^H turns
  // A'X + XA + Q = 0 into T' Z + Z T + U' Q U = 0, solvable one column at a
  // time by forward substitution since T' + T(j,j) I is lower triangular.
  Eigen::ComplexSchur<Matrix> schur(A);
  if (schur.info() != Eigen::Success) {
    throw NoSolutionError("solve_lyapunov: Schur reduction failed");
  }
  const ComplexMatrix& T = schur.matrixT();
  const ComplexMatrix& U = schur.matrixU();

  const double tol_singular = 1e-12 * (1.0 + A.norm());
  double alpha = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    alpha = std::max(alpha, T(i, i).real());
  }
  if (alpha >= -tol_singular) {
    throw NoSolutionError("solve_lyapunov: A is not Hurwitz (spectral abscissa " +
                          std::to_string(alpha) + ")");
  }

  const ComplexMatrix Qt = U.transpose() * Q * U;
  ComplexMatrix Z(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    ComplexVector rhs = -Qt.col(j);
    for (Eigen::Index i = 0; i < j; ++i) {
      rhs -= T(i, j) * Z.col(i);
    }
    ComplexMatrix L = T.transpose();
    L.diagonal().array() += T(j, j);
    Z.col(j) = L.triangularView<Eigen::Lower>().solve(rhs);
  }

  const ComplexMatrix Xc = U.conjugate() * Z * U.adjoint();
  Matrix X = Xc.real();
  X = 0.5 * (X + X.transpose()).eval();
  return X;
}

Svd svd(const Matrix& M) {
  require_finite(M, "svd");
  Eigen::JacobiSVD<Matrix> dec(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return Svd{dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

int numerical_rank(const Svd& dec) {
  if (dec.S.size() == 0) {
    return 0;
  }
  const double dim = static_cast<double>(std::max(dec.U.rows(), dec.V.rows()));
  const double tol = dim * std::numeric_limits<double>::epsilon() * dec.S[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < dec.S.size(); ++i) {
    if (dec.S[i] > tol) {
      ++rank;
    }
  }
  return rank;
}

}  // namespace fosyn
