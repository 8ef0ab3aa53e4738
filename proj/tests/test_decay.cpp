#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lasso/core.hpp"
#include "lasso/decay.hpp"
#include "lasso/quadrature.hpp"

using namespace lasso;
using std::numbers::pi;

namespace {

std::vector<double> grid(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return t;
}

LoopState sum_state() {
  return LoopState::sine_mode(1.0, 1).plus(LoopState::sine_mode(1.0, 2)).normalized();
}

// (2k / pi) Im <u, R(k^2 + i0) u> by direct quadrature of the kernel, split on the diagonal.
double density_by_kernel(const LassoParams& p, const LoopState& psi, double k) {
  const auto outer = quad::gauss_legendre(48, 0.0, p.L);
  cplx total = 0.0;
  for (std::size_t i = 0; i < outer.x.size(); ++i) {
    const double x = outer.x[i];
    cplx inner = 0.0;
    for (const auto& r : {quad::gauss_legendre(32, 0.0, x), quad::gauss_legendre(32, x, p.L)})
      for (std::size_t j = 0; j < r.x.size(); ++j)
        inner += r.w[j] * resolvent_kernel(p, cplx(k), x, r.x[j]).loop_loop() * psi.wavefunction(p, r.x[j]);
    total += outer.w[i] * std::conj(psi.wavefunction(p, x)) * inner;
  }
  return 2 * k / pi * total.imag();
}

}  // namespace

TEST_CASE("bound projections for the ideal coupling") {
  const auto p0 = LassoParams::delta(1.0, 0.0, 0.0);
  auto b = project_bound(p0, LoopState::sine_mode(1.0, 2));
  REQUIRE(b.size() == 1);
  CHECK(b[0].state.kind == BoundState::Kind::embedded);
  CHECK(b[0].state.n == 2);
  CHECK(std::abs(b[0].c) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(project_bound(p0, LoopState::sine_mode(1.0, 1)).empty());

  const auto ppi = LassoParams::delta(1.0, pi, 0.0);
  b = project_bound(ppi, LoopState::sine_mode(1.0, 1));
  REQUIRE(b.size() == 1);
  CHECK(b[0].state.n == 1);
  CHECK(std::abs(b[0].c) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(project_bound(LassoParams::delta(1.0, 0.3, 0.0), LoopState::sine_mode(1.0, 2)).empty());

  b = project_bound(p0, sum_state());
  REQUIRE(b.size() == 1);
  CHECK(b[0].state.n == 2);
  CHECK(std::abs(b[0].c) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("negative bound state carries part of the weight") {
  const auto p = LassoParams::delta(1.0, 0.3, -3.0);
  const auto b = project_bound(p, LoopState::winding(1.0, 0));
  REQUIRE(b.size() == 1);
  CHECK(b[0].state.kind == BoundState::Kind::negative);
  CHECK(std::norm(b[0].c) > 0.1);
  CHECK(std::norm(b[0].c) < 1.0);
}

TEST_CASE("embedded eigenfunction has no continuous weight") {
  const auto p = LassoParams::delta(1.0, 0.0, 0.0);
  const auto chi2 = LoopState::sine_mode(1.0, 2);
  for (double k : {0.5, 2.0, 6.0, 13.0}) CHECK(std::abs(spectral_density(p, chi2, k)) < 1e-13);
  const auto prof = survival(p, chi2, grid(0.0, 20.0, 11));
  for (double P : prof.probability) CHECK(P == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(prof.completeness == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("spectral density matches the kernel quadrature") {
  const auto psi = LoopState::winding(1.0, 1).plus(LoopState::sine_mode(1.0, 3).scaled(0.5)).normalized();
  for (const auto& p : {LassoParams::delta(1.0, 0.3, 0.0), LassoParams::delta(1.0, 1.2, -0.8),
                        LassoParams::general(1.0, 0.7, 0.4, 0.2, 0.9)})
    for (double k : {0.7, 2.3, 4.1, 8.6}) {
      const double a = spectral_density(p, psi, k), b = density_by_kernel(p, psi, k);
      CHECK(a >= -1e-14);
      CHECK(std::abs(a - b) < 1e-9 * std::max(1.0, std::abs(b)));
    }
}

TEST_CASE("completeness of the spectral decomposition") {
  const auto psi = LoopState::sine_mode(1.0, 1);
  const auto p = LassoParams::delta(1.0, 0.3, 0.0);
  const auto prof = survival(p, psi, {0.0});
  CHECK(std::abs(prof.completeness - 1.0) < 1e-6);
  CHECK(prof.bound.empty());

  const auto q = LassoParams::delta(1.0, 0.3, -3.0);
  const auto w = survival(q, LoopState::winding(1.0, 1), {0.0});
  CHECK(std::abs(w.completeness - 1.0) < 1e-6);
  CHECK(w.bound_mass > 0.0);
}

TEST_CASE("property: survival probability stays in [0, 1]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phi(0.0, pi), al(-2.0, 2.0);
  std::uniform_int_distribution<int> mode(1, 3);
  for (int trial = 0; trial < 6; ++trial) {
    const auto p = LassoParams::delta(1.0, phi(rng), al(rng));
    const auto psi = LoopState::sine_mode(1.0, mode(rng)).plus(LoopState::winding(1.0, mode(rng) - 2)).normalized();
    const auto prof = survival(p, psi, grid(0.0, 2.0, 21));
    CHECK(prof.probability.front() == doctest::Approx(1.0).epsilon(1e-6));
    for (double P : prof.probability) {
      INFO("P - 1 = ", P - 1.0, " trial ", trial);
      CHECK(P >= 0.0);
      CHECK(P <= 1.0 + 1e-8);
    }
  }
}

TEST_CASE("superposition with an embedded mode tends to a constant") {
  const auto p = LassoParams::delta(1.0, 0.0, 0.0);
  const auto prof = survival(p, sum_state(), grid(0.0, 20.0, 81));
  double late = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < prof.times.size(); ++i)
    if (prof.times[i] >= 10.0) {
      late += prof.probability[i];
      ++count;
    }
  CHECK(late / count == doctest::Approx(0.25).epsilon(0.02));
  CHECK(prof.limit == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(prof.asymptotics == Asymptotics::constant_limit);
}

TEST_CASE("lowest loop mode leaks out at zero flux") {
  const auto prof = survival(LassoParams::delta(1.0, 0.0, 0.0), LoopState::sine_mode(1.0, 1), grid(0.0, 10.0, 11));
  CHECK(prof.bound.empty());
  CHECK(prof.probability.back() < 0.05);
}

TEST_CASE("state without bound content decays") {
  const auto p = LassoParams::delta(1.0, 0.3, 0.0);
  const auto prof = survival(p, LoopState::sine_mode(1.0, 1), grid(0.0, 10.0, 11));
  CHECK(prof.asymptotics == Asymptotics::decays_to_zero);
  CHECK(prof.probability.back() < 0.05);
}

TEST_CASE("parity decomposition") {
  const auto p = LassoParams::delta(1.0, 0.4, 0.0);
  const auto psi = LoopState::winding(1.0, 1).plus(LoopState::sine_mode(1.0, 2).scaled(0.3)).normalized();
  const auto s = a_parity_decompose(p, psi);
  CHECK(std::abs(s.even.plus(s.odd).inner(psi) - 1.0) < 1e-12);
  CHECK(std::abs(s.even.inner(s.odd)) < 1e-12);
  CHECK(std::abs(s.even.reflected().inner(s.even) - s.even.norm2()) < 1e-12);
  CHECK(std::abs(s.odd.reflected().inner(s.odd) + s.odd.norm2()) < 1e-12);
  const auto again = a_parity_decompose(p, s.even);
  CHECK(again.odd.norm2() < 1e-24);
  CHECK(std::abs(again.even.inner(s.even) - s.even.norm2()) < 1e-12);

  const auto chi1 = a_parity_decompose(p, LoopState::sine_mode(1.0, 1));
  CHECK(chi1.odd.norm2() < 1e-24);
  const auto chi2 = a_parity_decompose(p, LoopState::sine_mode(1.0, 2));
  CHECK(chi2.even.norm2() < 1e-24);
}

TEST_CASE("surviving parity class follows the flux") {
  CHECK(surviving_parity(LassoParams::delta(1.0, 0.0, 0.0)) == Parity::odd);
  CHECK(surviving_parity(LassoParams::delta(1.0, 2 * pi, 0.0)) == Parity::odd);
  CHECK(surviving_parity(LassoParams::delta(1.0, pi, 0.0)) == Parity::even);
  CHECK(!surviving_parity(LassoParams::delta(1.0, 0.3, 0.0)).has_value());
}

TEST_CASE("the odd part survives at integer flux") {
  const auto p = LassoParams::delta(1.0, 0.0, 0.0);
  const auto s = a_parity_decompose(p, sum_state());
  const auto even = survival(p, s.even.normalized(), {10.0});
  const auto odd = survival(p, s.odd.normalized(), {10.0});
  CHECK(even.probability.back() < 0.05);
  CHECK(odd.probability.back() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("evolved loop state reproduces the survival amplitude") {
  const auto p = LassoParams::delta(1.0, 0.3, 0.0);
  const auto psi = LoopState::winding(1.0, 1);
  for (double t : {0.2, 0.5, 1.5}) {
    const auto amp = survival(p, psi, {t}).amplitude.back();
    const auto ev = evolve_loop_state(p, psi, t);
    CHECK(std::abs(psi.inner(ev.loop) - amp) < 1e-6);
    CHECK(ev.loop_norm2 <= 1.0 + 1e-8);
    CHECK(ev.loop_norm2 >= std::norm(amp) - 1e-8);
  }
}

TEST_CASE("two junctions without a switch reduce to a single evolution") {
  const auto p = LassoParams::delta(1.0, 0.3, 0.0);
  const auto psi = LoopState::winding(1.0, 1);
  const auto r = two_junction_scenario(p, p, 0.0, psi, 0.5, 0.5);
  CHECK(!r.switched);
  const auto single = survival(p, psi, {0.5, 1.0});
  CHECK(r.survival_stage1 == doctest::Approx(single.probability[0]).epsilon(1e-6));
  CHECK(r.survival_stage2 == doctest::Approx(single.probability[1]).epsilon(1e-6));
}

TEST_CASE("moving the junction releases a trapped state") {
  const auto p = LassoParams::delta(1.0, 0.0, 0.0);
  const auto psi = LoopState::sine_mode(1.0, 2);
  const auto r = two_junction_scenario(p, p, 0.25, psi, 2.0, 2.0);
  CHECK(r.switched);
  CHECK(r.survival_stage1 == doctest::Approx(1.0).epsilon(1e-8));
  // sin(2 pi x) is odd about the first junction and even about the second.
  CHECK(r.stage1_j1.odd == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.stage1_j2.even == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.survival_stage2 < 0.05);
}

TEST_CASE("shifting the junction by a full loop is the identity") {
  const double Phi = 0.7;
  const auto p = LassoParams::delta(1.0, Phi, 0.0);
  // Twisted modes e^{i(Phi + 2 pi m)x} satisfy the loop boundary condition exactly.
  const auto psi = LoopState::exponential_sum(1.0, {0.6, cplx(0.0, 0.8)}, {Phi + 4 * pi, Phi - 2 * pi});
  CHECK(std::abs(shift_junction(p, psi, 0.0).inner(psi) - 1.0) < 1e-12);
  CHECK(std::abs(shift_junction(p, psi, 1.0).inner(psi) - 1.0) < 1e-12);
  const auto q = shift_junction(p, psi, 0.3);
  CHECK(q.norm2() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(shift_junction(p, q, 0.7).inner(psi) - 1.0) < 1e-12);
}

TEST_CASE("decay errors") {
  const auto psi = LoopState::sine_mode(1.0, 1);
  CHECK_THROWS_AS(survival(LassoParams::decoupled(1.0, 0.3), psi, {1.0}), InputError);
  CHECK_THROWS_AS(survival(LassoParams::general(1.0, 0.3, 0.0, 0.0, 0.0), psi, {1.0}), InputError);
  CHECK_THROWS_AS(survival(LassoParams::delta(1.0, 0.3, 0.0), psi, {1e7}), NumericalError);
  CHECK_THROWS_AS(survival(LassoParams::delta(1.0, 0.3, 0.0), psi, {-1.0}), InputError);
}
