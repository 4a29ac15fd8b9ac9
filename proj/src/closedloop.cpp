#include "fosyn/closedloop.hpp"

#include "fosyn/errors.hpp"
#include "json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace fosyn {

namespace {

int stacked_size(int nk, int m2, int p2) { return nk * nk + nk * p2 + m2 * nk + m2 * p2; }

Vector stack(const Controller& K) {
  const int nk = K.order(), m2 = K.outputs(), p2 = K.inputs();
  Vector v(stacked_size(nk, m2, p2));
  Eigen::Index at = 0;
  auto put = [&](const Matrix& M) {
    v.segment(at, M.size()) = Eigen::Map<const Vector>(M.data(), M.size());
    at += M.size();
  };
  put(K.AK);
  put(K.BK);
  put(K.CK);
  put(K.DK);
  return v;
}

Controller unstack(const Vector& v, int nk, int m2, int p2) {
  Controller K;
  Eigen::Index at = 0;
  auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix M = Eigen::Map<const Matrix>(v.data() + at, rows, cols);
    at += rows * cols;
    return M;
  };
  K.AK = take(nk, nk);
  K.BK = take(nk, p2);
  K.CK = take(m2, nk);
  K.DK = take(m2, p2);
  return K;
}

void check_controller_dims(const Plant& p, const Controller& K, const char* who) {
  if (K.outputs() != p.m2() || K.inputs() != p.p2()) {
    throw DimensionError(std::string(who) + ": controller is " + std::to_string(K.outputs()) +
                         "x" + std::to_string(K.inputs()) + " but the plant expects " +
                         std::to_string(p.m2()) + "x" + std::to_string(p.p2()));
  }
  const int nk = K.order();
  if (K.AK.cols() != nk || K.BK.rows() != nk || K.BK.cols() != p.p2() || K.CK.rows() != p.m2() ||
      K.CK.cols() != nk || K.DK.rows() != p.m2()) {
    throw DimensionError(std::string(who) + ": controller blocks are internally inconsistent");
  }
}

}  // namespace

Controller zero_controller(int nk, int m2, int p2) {
  return Controller{Matrix::Zero(nk, nk), Matrix::Zero(nk, p2), Matrix::Zero(m2, nk),
                    Matrix::Zero(m2, p2)};
}

ParamMap::ParamMap(int nk, int m2, int p2, Vector base, Matrix basis)
    : nk_(nk), m2_(m2), p2_(p2), base_(std::move(base)), basis_(std::move(basis)) {
  const int total = stacked_size(nk_, m2_, p2_);
  if (base_.size() != total || basis_.rows() != total) {
    throw DimensionError("ParamMap: stacked sizes do not match the controller dimensions");
  }
}

ParamMap ParamMap::canonical(int nk, int m2, int p2) {
  if (nk < 0 || m2 < 1 || p2 < 1) {
    throw InvalidInputError("ParamMap::canonical: need nk >= 0, m2 >= 1, p2 >= 1");
  }
  const int total = stacked_size(nk, m2, p2);
  return ParamMap(nk, m2, p2, Vector::Zero(total), Matrix::Identity(total, total));
}

Controller ParamMap::to_controller(const Vector& k) const {
  if (k.size() != dim()) {
    throw DimensionError("ParamMap::to_controller: parameter vector has length " +
                         std::to_string(k.size()) + ", expected " + std::to_string(dim()));
  }
  return unstack(base_ + basis_ * k, nk_, m2_, p2_);
}

Controller ParamMap::direction(int i) const {
  if (i < 0 || i >= dim()) {
    throw DimensionError("ParamMap::direction: index out of range");
  }
  return unstack(basis_.col(i), nk_, m2_, p2_);
}

Vector ParamMap::pullback(const Controller& grad_blocks) const {
  return basis_.transpose() * stack(grad_blocks);
}

Vector ParamMap::project(const Controller& K) const {
  if (K.order() != nk_ || K.outputs() != m2_ || K.inputs() != p2_) {
    throw DimensionError("ParamMap::project: controller dimensions do not match the map");
  }
  return basis_.transpose() * (stack(K) - base_);
}

ClosedLoop assemble(const Plant& p, const Controller& K) {
  validate(p);
  check_controller_dims(p, K, "assemble");
  if (!(p.D22.array() == 0.0).all()) {
    throw InvalidInputError("assemble: plant has a nonzero D22 block; apply shift_feedthrough "
                            "and unshift_controller around the synthesis");
  }
  const int n = p.n(), nk = K.order();
  ClosedLoop cl;
  cl.A.resize(n + nk, n + nk);
  cl.A.topLeftCorner(n, n) = p.A + p.B2 * K.DK * p.C2;
  cl.A.topRightCorner(n, nk) = p.B2 * K.CK;
  cl.A.bottomLeftCorner(nk, n) = K.BK * p.C2;
  cl.A.bottomRightCorner(nk, nk) = K.AK;

  cl.B.resize(n + nk, p.m1());
  cl.B.topRows(n) = p.B1 + p.B2 * K.DK * p.D21;
  cl.B.bottomRows(nk) = K.BK * p.D21;

  cl.C.resize(p.p1(), n + nk);
  cl.C.leftCols(n) = p.C1 + p.D12 * K.DK * p.C2;
  cl.C.rightCols(nk) = p.D12 * K.CK;

  cl.D = p.D11 + p.D12 * K.DK * p.D21;
  return cl;
}

Controller pullback_closed_loop(const Plant& p, int nk, const Matrix& WA, const Matrix& WB,
                                const Matrix& WC, const Matrix& WD) {
  const int n = p.n();
  Controller g = zero_controller(nk, p.m2(), p.p2());
  // <WA, dA>: dA = [B2 dDK C2, B2 dCK; dBK C2, dAK]
  g.AK += WA.bottomRightCorner(nk, nk);
  g.BK += WA.bottomLeftCorner(nk, n) * p.C2.transpose();
  g.CK += p.B2.transpose() * WA.topRightCorner(n, nk);
  g.DK += p.B2.transpose() * WA.topLeftCorner(n, n) * p.C2.transpose();
  // <WB, dB>: dB = [B2 dDK D21; dBK D21]
  g.BK += WB.bottomRows(nk) * p.D21.transpose();
  g.DK += p.B2.transpose() * WB.topRows(n) * p.D21.transpose();
  // <WC, dC>: dC = [D12 dDK C2, D12 dCK]
  g.CK += p.D12.transpose() * WC.rightCols(nk);
  g.DK += p.D12.transpose() * WC.leftCols(n) * p.C2.transpose();
  // <WD, dD>: dD = D12 dDK D21
  g.DK += p.D12.transpose() * WD * p.D21.transpose();
  return g;
}

namespace {

// Shared tail of the two elimination overloads: glue the identity directions
// of A_K, B_K, C_K in front of the D_K null-space directions.
ParamMap build_elimination_map(int nk, int m2, int p2, const Matrix& dk_base,
                               const Matrix& dk_null_basis) {
  const int total = stacked_size(nk, m2, p2);
  const int abc = total - m2 * p2;
  const int dim = abc + static_cast<int>(dk_null_basis.cols());

  Vector base = Vector::Zero(total);
  base.tail(m2 * p2) = Eigen::Map<const Vector>(dk_base.data(), dk_base.size());

  Matrix basis = Matrix::Zero(total, dim);
  basis.topLeftCorner(abc, abc).setIdentity();
  basis.bottomRightCorner(m2 * p2, dk_null_basis.cols()) = dk_null_basis;
  return ParamMap(nk, m2, p2, std::move(base), std::move(basis));
}

}  // namespace

ParamMap eliminate_feedthrough(const Plant& p, int nk) {
  validate(p);
  if (nk < 0) {
    throw InvalidInputError("eliminate_feedthrough: controller order must be >= 0");
  }
  if (!(p.D22.array() == 0.0).all()) {
    throw InvalidInputError("eliminate_feedthrough: plant has a nonzero D22 block");
  }
  const int m2 = p.m2(), p2 = p.p2();

  // D12 = U1 S1 V1', D21 = U2 S2 V2'. In the rotated unknown M = V1' DK U2 the
  // constraint D12 DK D21 = -D11 becomes S1 M S2 = -U1' D11 V2 =: G, which pins
  // M(i,j) = G(i,j) / (s1_i s2_j) for i < r1, j < r2, forces the remaining
  // entries of G to vanish, and leaves every other entry of M free.
  const Svd svd12 = svd(p.D12);
  const Svd svd21 = svd(p.D21);
  const int r1 = numerical_rank(svd12);
  const int r2 = numerical_rank(svd21);
  const Matrix G = -svd12.U.transpose() * p.D11 * svd21.V;

  Matrix M = Matrix::Zero(m2, p2);
  for (int i = 0; i < r1; ++i) {
    for (int j = 0; j < r2; ++j) {
      M(i, j) = G(i, j) / (svd12.S[i] * svd21.S[j]);
    }
  }
  const Matrix dk_base = svd12.V * M * svd21.U.transpose();

  const double residual = (p.D11 + p.D12 * dk_base * p.D21).norm();
  if (residual > 1e-8 * (1.0 + p.D11.norm())) {
    throw NoFiniteH2Error("eliminate_feedthrough: the constraint D11 + D12 DK D21 = 0 has no "
                          "solution (residual " + std::to_string(residual) +
                          "); no controller achieves a finite H2 norm");
  }

  Matrix null_basis(m2 * p2, m2 * p2 - r1 * r2);
  int col = 0;
  for (int j = 0; j < p2; ++j) {
    for (int i = 0; i < m2; ++i) {
      if (i < r1 && j < r2) continue;
      const Matrix dir = svd12.V.col(i) * svd21.U.col(j).transpose();
      null_basis.col(col++) = Eigen::Map<const Vector>(dir.data(), dir.size());
    }
  }
  return build_elimination_map(nk, m2, p2, dk_base, null_basis);
}

ParamMap eliminate_feedthrough(const std::vector<Plant>& plants, int nk) {
  if (plants.empty()) {
    throw InvalidInputError("eliminate_feedthrough: empty plant list");
  }
  if (plants.size() == 1) {
    return eliminate_feedthrough(plants.front(), nk);
  }
  const int m2 = plants.front().m2(), p2 = plants.front().p2();
  Eigen::Index total_rows = 0;
  for (const Plant& p : plants) {
    validate(p);
    if (p.m2() != m2 || p.p2() != p2) {
      throw DimensionError("eliminate_feedthrough: plants disagree on controller dimensions");
    }
    total_rows += p.p1() * p.m1();
  }

  // Stacked system in vec(DK): rows vec(D12_k DK D21_k) = (D21_k' kron D12_k) vec(DK).
  Matrix W(total_rows, m2 * p2);
  Vector rhs(total_rows);
  Eigen::Index at = 0;
  double d11_scale = 0.0;
  for (const Plant& p : plants) {
    const Eigen::Index rows = p.p1() * p.m1();
    // Column (jj*m2 + ii) of D21' kron D12 is vec(D12 e_ii e_jj' D21).
    for (int jj = 0; jj < p2; ++jj) {
      for (int ii = 0; ii < m2; ++ii) {
        Matrix contrib = p.D12.col(ii) * p.D21.row(jj);  // p1 x m1
        W.block(at, static_cast<Eigen::Index>(jj) * m2 + ii, rows, 1) =
            Eigen::Map<const Vector>(contrib.data(), contrib.size());
      }
    }
    rhs.segment(at, rows) = -Eigen::Map<const Vector>(p.D11.data(), p.D11.size());
    d11_scale = std::max(d11_scale, p.D11.norm());
    at += rows;
  }

  const Svd dec = svd(W);
  const int rank = numerical_rank(dec);
  Vector x = Vector::Zero(m2 * p2);
  for (int i = 0; i < rank; ++i) {
    x += (dec.U.col(i).dot(rhs) / dec.S[i]) * dec.V.col(i);
  }
  const double residual = (W * x - rhs).norm();
  if (residual > 1e-8 * (1.0 + d11_scale)) {
    throw NoFiniteH2Error("eliminate_feedthrough: the stacked feedthrough constraints have no "
                          "common solution; no controller achieves a finite H2 norm");
  }
  const Matrix dk_base = Eigen::Map<const Matrix>(x.data(), m2, p2);
  const Matrix null_basis = dec.V.rightCols(m2 * p2 - rank);
  return build_elimination_map(nk, m2, p2, dk_base, null_basis);
}

Plant shift_feedthrough(const Plant& p) {
  validate(p);
  Plant shifted = p;
  shifted.D22 = Matrix::Zero(p.p2(), p.m2());
  return shifted;
}

Controller unshift_controller(const Controller& Khat, const Matrix& D22) {
  const int m2 = Khat.outputs(), p2 = Khat.inputs(), nk = Khat.order();
  if (D22.rows() != p2 || D22.cols() != m2) {
    throw DimensionError("unshift_controller: D22 is " + std::to_string(D22.rows()) + "x" +
                         std::to_string(D22.cols()) + ", expected " + std::to_string(p2) + "x" +
                         std::to_string(m2));
  }
  const Matrix E = Matrix::Identity(m2, m2) + Khat.DK * D22;
  const Svd dec = svd(E);
  const double smin = dec.S[dec.S.size() - 1];
  if (smin <= 0.0 || dec.S[0] / smin >= 1e12) {
    throw WellPosednessError("unshift_controller: I + DK_hat * D22 is singular or "
                             "ill-conditioned; the loop is not well posed");
  }
  const auto Elu = E.partialPivLu();
  const Matrix EinvC = Elu.solve(Khat.CK);
  const Matrix EinvD = Elu.solve(Khat.DK);

  Controller K;
  K.AK = Khat.AK - Khat.BK * D22 * EinvC;
  K.BK = Khat.BK * (Matrix::Identity(p2, p2) - D22 * EinvD);
  K.CK = EinvC;
  K.DK = EinvD;
  return K;
}

Controller load_controller(const std::string& text) {
  const nlohmann::json doc = detail::parse_document(text, "load_controller");
  if (!doc.is_object()) {
    throw ParseError("load_controller: document root must be an object");
  }
  static const std::set<std::string> known = {"AK", "BK", "CK", "DK"};
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) {
      throw ParseError("load_controller: unknown field \"" + item.key() + "\"");
    }
  }
  if (!doc.contains("DK")) {
    throw ParseError("load_controller: missing required field \"DK\"");
  }
  Controller K;
  K.DK = detail::matrix_from_json(doc.at("DK"), "DK");
  const int m2 = K.outputs(), p2 = K.inputs();

  K.AK = doc.contains("AK") ? detail::matrix_from_json(doc.at("AK"), "AK") : Matrix(0, 0);
  const int nk = static_cast<int>(K.AK.rows());
  if (K.AK.cols() != nk && !(nk == 0)) {
    throw ParseError("load_controller: AK must be square");
  }
  if (nk == 0) {
    K.AK.resize(0, 0);
  }

  auto block = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
    if (!doc.contains(key)) {
      return Matrix(Matrix::Zero(rows, cols));
    }
    Matrix M = detail::matrix_from_json(doc.at(key), key);
    if (M.size() == 0) {
      M.resize(rows, cols);
      M.setZero();
    }
    if (M.rows() != rows || M.cols() != cols) {
      throw ParseError(std::string("load_controller: field \"") + key + "\" is " +
                       std::to_string(M.rows()) + "x" + std::to_string(M.cols()) + ", expected " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    return M;
  };
  K.BK = block("BK", nk, p2);
  K.CK = block("CK", m2, nk);
  if (!K.AK.allFinite() || !K.BK.allFinite() || !K.CK.allFinite() || !K.DK.allFinite()) {
    throw InvalidInputError("load_controller: non-finite entries");
  }
  return K;
}

Controller load_controller_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("load_controller: cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return load_controller(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string serialize(const Controller& K) {
  std::string out = "{\n";
  const std::pair<const char*, const Matrix*> blocks[] = {
      {"AK", &K.AK}, {"BK", &K.BK}, {"CK", &K.CK}, {"DK", &K.DK}};
  for (std::size_t i = 0; i < std::size(blocks); ++i) {
    out += "  \"" + std::string(blocks[i].first) + "\": " + detail::matrix_text(*blocks[i].second);
    out += (i + 1 < std::size(blocks)) ? ",\n" : "\n";
  }
  out += "}\n";
  return out;
}

void save_controller_file(const Controller& K, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("save_controller_file: cannot open " + path.string());
  }
  out << serialize(K);
}

}  // namespace fosyn
