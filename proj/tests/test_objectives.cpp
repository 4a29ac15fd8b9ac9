#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fosyn/errors.hpp"
#include "fosyn/objectives.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace fosyn;

namespace {

Vector k1(double v) { return Vector::Constant(1, v); }

// 1/(s+1) wrapped as a plant; the zero controller leaves it untouched.
Plant first_order_lag() {
  Plant p;
  p.A = Matrix::Constant(1, 1, -1.0);
  p.B1 = Matrix::Constant(1, 1, 1.0);
  p.B2 = Matrix::Constant(1, 1, 1.0);
  p.C1 = Matrix::Constant(1, 1, 1.0);
  p.C2 = Matrix::Constant(1, 1, 1.0);
  p.D11 = Matrix::Zero(1, 1);
  p.D12 = Matrix::Zero(1, 1);
  p.D21 = Matrix::Zero(1, 1);
  p.D22 = Matrix::Zero(1, 1);
  p.name = "lag";
  return p;
}

}  // namespace

TEST_CASE("spectral abscissa of the scalar example is k - 1") {
  const Plant p = oracles::scalar_plant();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const Evaluation ev = spectral_abscissa(p, pm, k1(0.0));
  CHECK(ev.value == doctest::Approx(-1.0).epsilon(1e-14));
  REQUIRE(ev.gradient.has_value());
  CHECK((*ev.gradient)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral abscissa of the undamped oscillator is zero") {
  const Plant p = oracles::pinf_plant();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const Evaluation ev = spectral_abscissa(p, pm, k1(0.0));
  CHECK(std::abs(ev.value) < 1e-12);
}

TEST_CASE("spectral abscissa of the damped oscillator matches the quadratic roots") {
  const double k = -0.9458;
  const Plant p = oracles::pinf_plant();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const Evaluation ev = spectral_abscissa(p, pm, k1(k));
  CHECK(ev.value == doctest::Approx(k / 2.0).epsilon(1e-10));
}

TEST_CASE("squared H2 norm of the scalar example at k = 0") {
  const Plant p = oracles::scalar_plant();
  const ParamMap pm = eliminate_feedthrough(p, 0);
  const Evaluation ev = h2_squared(p, pm, k1(0.0));
  CHECK(ev.value == doctest::Approx(0.5).epsilon(1e-14));
  REQUIRE(ev.gradient.has_value());
  CHECK((*ev.gradient)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ev.trace_mismatch < 1e-12);
}

TEST_CASE("squared H2 norm at the optimal gain") {
  const double kstar = 1.0 - std::sqrt(2.0);
  const Plant p = oracles::scalar_plant();
  const ParamMap pm = eliminate_feedthrough(p, 0);
  const Evaluation ev = h2_squared(p, pm, k1(kstar));
  CHECK(ev.value == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  CHECK(std::abs((*ev.gradient)[0]) < 1e-12);
}

TEST_CASE("squared H2 norm is +inf for a destabilizing gain") {
  const Plant p = oracles::scalar_plant();
  const ParamMap pm = eliminate_feedthrough(p, 0);
  const Evaluation ev = h2_squared(p, pm, k1(2.0));
  CHECK(!ev.finite());
  CHECK(!ev.gradient.has_value());
}

TEST_CASE("scalar example closed forms hold on sampled gains") {
  const Plant p = oracles::scalar_plant();
  const ParamMap pm = eliminate_feedthrough(p, 0);
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> uni(-4.0, 0.999);
  for (int i = 0; i < 100; ++i) {
    const double k = uni(rng);
    const Evaluation ev = h2_squared(p, pm, k1(k));
    const double expected = oracles::scalar_h2_squared(k);
    const double expected_grad = oracles::scalar_h2_squared_grad(k);
    CHECK(std::abs(ev.value - expected) <= 1e-12 * (1.0 + std::abs(expected)));
    CHECK(std::abs((*ev.gradient)[0] - expected_grad) <=
          1e-12 * (1.0 + std::abs(expected_grad)));
  }
}

TEST_CASE("h2_squared near the stability boundary raises a boundary error") {
  const Plant p = oracles::scalar_plant();
  const ParamMap pm = eliminate_feedthrough(p, 0);
  CHECK_THROWS_AS(h2_squared(p, pm, k1(1.0 - 1e-14)), StabilityBoundaryError);
}

TEST_CASE("h2_squared requires an eliminating parameter map") {
  Plant p = oracles::scalar_plant();
  p.D21 = Matrix::Constant(1, 1, 1.0);
  p.D11 = (Matrix(2, 1) << 0.3, 0.0).finished();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);  // does not eliminate D11
  CHECK_THROWS_AS(h2_squared(p, pm, k1(0.0)), InvalidInputError);
}

TEST_CASE("H-infinity norm of a static channel is sigma_max(D)") {
  Plant p = first_order_lag();
  p.B1 = Matrix::Zero(1, 1);
  p.C1 = Matrix::Zero(1, 1);
  p.D11 = Matrix::Constant(1, 1, 0.7);
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const Evaluation ev = hinf_norm(p, pm, k1(0.0));
  CHECK(ev.value == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::isinf(ev.peak_frequency));
}

TEST_CASE("H-infinity norm of the first-order lag peaks at DC") {
  const Plant p = first_order_lag();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const Evaluation ev = hinf_norm(p, pm, k1(0.0));
  CHECK(ev.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(ev.peak_frequency) < 1e-4);
}

TEST_CASE("H-infinity norm of the damped oscillator matches the closed form") {
  const Plant p = oracles::pinf_plant();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const double k = -0.94576;
  const Evaluation ev = hinf_norm(p, pm, k1(k));
  const double expected = 1.0 / (std::abs(k) * std::sqrt(1.0 - k * k / 4.0));
  CHECK(ev.value == doctest::Approx(expected).epsilon(1e-8));
  CHECK(ev.value == doctest::Approx(1.2).epsilon(2e-4));
  const double w2 = 1.0 - k * k / 2.0;
  CHECK(ev.peak_frequency == doctest::Approx(std::sqrt(w2)).epsilon(1e-4));
}

TEST_CASE("H-infinity norm is +inf for an unstable loop") {
  const Plant p = oracles::pinf_plant();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  const Evaluation ev = hinf_norm(p, pm, k1(0.5));  // positive feedback destabilizes
  CHECK(!ev.finite());
  CHECK(!ev.gradient.has_value());
}

TEST_CASE("infinite values coincide with a nonnegative abscissa") {
  const Plant p = oracles::pinf_plant();
  const ParamMap pm = ParamMap::canonical(0, 1, 1);
  for (double k : {-1.5, -0.9, -0.2, 0.0, 0.2, 1.0}) {
    const double alpha = spectral_abscissa(p, pm, k1(k)).value;
    const Evaluation ev = hinf_norm(p, pm, k1(k));
    CHECK(std::isinf(ev.value) == (alpha >= 0.0));
  }
}

TEST_CASE("evaluate dispatches on the objective kind") {
  const Plant scalar = oracles::scalar_plant();
  const ParamMap pm = eliminate_feedthrough(scalar, 0);
  CHECK(evaluate(ObjectiveKind::h_two, scalar, pm, k1(0.0)).value ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(evaluate(ObjectiveKind::spectral_abscissa, scalar, pm, k1(0.0)).value ==
        doctest::Approx(-1.0).epsilon(1e-14));
  const Plant pinf = oracles::pinf_plant();
  const ParamMap pmc = ParamMap::canonical(0, 1, 1);
  CHECK(evaluate(ObjectiveKind::h_inf, pinf, pmc, k1(-0.94576)).value ==
        doctest::Approx(1.2).epsilon(2e-4));
  CHECK(kind_from_char('t') == ObjectiveKind::h_two);
  CHECK(to_char(ObjectiveKind::h_inf) == 'h');
  CHECK_THROWS_AS(kind_from_char('x'), InvalidInputError);
}

TEST_CASE("analytic gradients match finite differences") {
  CHECK(oracles::fd_max_rel_error(ObjectiveKind::h_two, 25, 101) <= 1e-5);
  CHECK(oracles::fd_max_rel_error(ObjectiveKind::spectral_abscissa, 25, 103) <= 1e-5);
  CHECK(oracles::fd_max_rel_error(ObjectiveKind::h_inf, 25, 107) <= 1e-5);
}

TEST_CASE("H2 trace diagnostics stay within the dual-trace tolerance") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 30; ++trial) {
    const Plant plant = oracles::random_plant(rng, 2 + static_cast<int>(rng() % 4), 2, 1, 2, 1);
    const ParamMap pm = eliminate_feedthrough(plant, 0);
    const Evaluation ev = h2_squared(plant, pm, Vector::Zero(pm.dim()));
    if (!ev.finite()) {
      continue;
    }
    CHECK(ev.trace_mismatch <= 1e-8 * (1.0 + ev.value));
  }
}

TEST_CASE("bisection agrees with the dense-grid reference") {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int m = 1 + static_cast<int>(rng() % 2);
    const int p = 1 + static_cast<int>(rng() % 2);
    const ClosedLoop cl = oracles::random_stable_system(rng, n, m, p, trial % 2 == 0);
    const double value = hinf_norm_value(cl);
    const double reference = oracles::dense_grid_hinf(cl, 20000);
    CHECK(std::abs(value - reference) <= 1e-4 * reference);
  }
}
