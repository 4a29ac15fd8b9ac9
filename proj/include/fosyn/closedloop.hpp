#pragma once

#include "fosyn/numerics.hpp"
#include "fosyn/plant.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fosyn {

/// Fixed-order output-feedback controller
///   dx_K/dt = A_K x_K + B_K y
///   u       = C_K x_K + D_K y
/// Order zero (empty A_K, B_K, C_K) is static output feedback u = D_K y.
struct Controller {
  Matrix AK, BK, CK, DK;

  int order() const { return static_cast<int>(AK.rows()); }        // nk
  int inputs() const { return static_cast<int>(DK.cols()); }       // p2
  int outputs() const { return static_cast<int>(DK.rows()); }      // m2
};

Controller zero_controller(int nk, int m2, int p2);

/// Affine map from a free parameter vector k to a controller,
///   K(k) = base + sum_i k_i * basis_i,
/// with basis directions orthonormal under the Frobenius inner product on the
/// stacked controller matrices. Parameters enumerate A_K column-major, then
/// B_K, then C_K, then D_K.
class ParamMap {
 public:
  /// Unconstrained map: base zero, basis the canonical unit directions of all
  /// nk^2 + nk*p2 + m2*nk + m2*p2 controller entries.
  static ParamMap canonical(int nk, int m2, int p2);

  ParamMap(int nk, int m2, int p2, Vector base, Matrix basis);

  int dim() const { return static_cast<int>(basis_.cols()); }
  int order() const { return nk_; }
  int m2() const { return m2_; }
  int p2() const { return p2_; }
  const Vector& base() const { return base_; }
  const Matrix& basis() const { return basis_; }

  /// K(k). Throws DimensionError when k has the wrong length.
  Controller to_controller(const Vector& k) const;

  /// Basis direction i as controller-shaped blocks.
  Controller direction(int i) const;

  /// Gradient pull-back: given dPhi/dK as controller-shaped blocks, returns
  /// dPhi/dk = basis' * vec(blocks).
  Vector pullback(const Controller& grad_blocks) const;

  /// Least-squares coordinates of K on the affine set, basis' * (vec(K) - base).
  Vector project(const Controller& K) const;

 private:
  int nk_, m2_, p2_;
  Vector base_;   // stacked controller entries
  Matrix basis_;  // (stacked size) x dim, orthonormal columns
};

/// Closed-loop system matrices for the performance channel w -> z,
///   A = [A + B2 DK C2, B2 CK; BK C2, AK]
///   B = [B1 + B2 DK D21; BK D21]
///   C = [C1 + D12 DK C2, D12 CK]
///   D = D11 + D12 DK D21.
struct ClosedLoop {
  Matrix A, B, C, D;
};

/// Forms the closed loop of a plant with D22 = 0 and a compatible controller.
/// Plants with a nonzero feedthrough must go through shift_feedthrough first.
ClosedLoop assemble(const Plant& p, const Controller& K);

/// Rewrites the affine constraint D11 + D12 DK D21 = 0 in explicit parametric
/// form: the returned map ranges exactly over the controllers satisfying the
/// constraint, with A_K, B_K, C_K unconstrained, the minimum-Frobenius-norm
/// particular solution for D_K as base point, and an orthonormal basis of the
/// D_K null directions obtained from the SVDs of D12 and D21. Throws
/// NoFiniteH2Error when the constraint has no solution.
ParamMap eliminate_feedthrough(const Plant& p, int nk);

/// Intersection of the feedthrough constraints of several plants, solved as
/// one stacked linear system in vec(D_K).
ParamMap eliminate_feedthrough(const std::vector<Plant>& plants, int nk);

/// Same plant with D22 replaced by zero; models the shifted measurement
/// y_tilde = y - D22 u.
Plant shift_feedthrough(const Plant& p);

/// Maps a controller synthesized for the shifted plant back to the original
/// measurement:
///   A_K = A^_K - B^_K D22 (I + D^_K D22)^-1 C^_K
///   B_K = B^_K (I - D22 (I + D^_K D22)^-1 D^_K)
///   C_K = (I + D^_K D22)^-1 C^_K
///   D_K = (I + D^_K D22)^-1 D^_K
/// Throws WellPosednessError when I + D^_K D22 is (close to) singular.
Controller unshift_controller(const Controller& Khat, const Matrix& D22);

/// Chain rule through the closed-loop assembly: given cotangents of a scalar
/// objective with respect to the four closed-loop matrices, returns the
/// cotangent with respect to the controller blocks.
Controller pullback_closed_loop(const Plant& p, int nk, const Matrix& WA, const Matrix& WB,
                                const Matrix& WC, const Matrix& WD);

/// Controller document format: fields "AK","BK","CK","DK" in the same
/// array-of-arrays encoding as the plant format.
Controller load_controller(const std::string& text);
Controller load_controller_file(const std::filesystem::path& path);
std::string serialize(const Controller& K);
void save_controller_file(const Controller& K, const std::filesystem::path& path);

}  // namespace fosyn
