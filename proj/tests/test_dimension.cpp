#include <doctest.h>

#include <cmath>
#include <numbers>

#include "thermo/dimension.hpp"

using namespace thermo;

namespace {
const double phi = std::numbers::phi;
}

TEST_CASE("Lyapunov: affine full shift and beta maps") {
  for (int k : {2, 3, 5}) {
    const Gdms S = moran(std::vector<double>(k, 1.0 / k));
    const auto r = lyapunov_birkhoff(gdms_step(S), [](Rng& g) { return g.uniform_open(); }, 30, 4, 3);
    CHECK(r.value == doctest::Approx(std::log(k)).epsilon(1e-12));
  }
  for (double beta : {phi, 1.8, std::numbers::pi}) {
    const auto r = lyapunov_beta(BetaSystem(beta), 1000, 4, 5);
    CHECK(r.value == doctest::Approx(std::log(beta)).epsilon(1e-14));
  }
}

TEST_CASE("Lyapunov: Gauss map with its invariant measure") {
  // pi^2 / (6 ln 2) = int_0^1 -2 log x / ((1 + x) ln 2) dx
  const double oracle = std::numbers::pi * std::numbers::pi / (6.0 * std::numbers::ln2);
  const auto r = lyapunov_gauss(200000, 16, 9);
  CHECK(std::abs(r.value - oracle) < 4.0 * r.standard_error + 1e-3);
  CHECK(std::abs(r.value / oracle - 1.0) < 0.005);
}

TEST_CASE("Lyapunov: GLS closed forms") {
  const BetaSystem G(phi);
  const double w2 = 0.3;
  CHECK(lyapunov_gls_closed_form(G, {0.7, 0.3}).value ==
        doctest::Approx(lyapunov_golden_closed_form(w2).value).epsilon(1e-15));
  CHECK(lyapunov_golden_closed_form(w2).value == doctest::Approx(std::log(phi) * 1.3));
  const BetaSystem P(std::numbers::pi);
  CHECK(lyapunov_gls_closed_form(P, {1.0}).value == doctest::Approx(std::log(std::numbers::pi)));
  CHECK_THROWS_AS(lyapunov_gls_closed_form(P, {0.5, 0.1}), ConvergenceError);
  const auto loose = lyapunov_gls_closed_form(P, {0.5, 0.1}, 0.5);
  CHECK(loose.tail_mass == doctest::Approx(0.4));
  CHECK(loose.tail_bound == doctest::Approx(std::log(std::numbers::pi) * 0.4));
}

TEST_CASE("Lyapunov: Birkhoff matches the GLS closed form") {
  for (double beta : {phi, 1.8}) {
    const BetaSystem B(beta);
    const GlsCells cells = gls_cells(B, 16);
    // A memory-1 weighting that is not the Lebesgue one.
    std::vector<double> w(cells.length.size());
    for (std::size_t n = 0; n < w.size(); ++n) w[n] = 1.0 / static_cast<double>((n + 1) * (n + 1));
    const Potential psi = gls_potential(cells, "bernoulli", w);
    const GibbsMarkovMeasure mu(rpf_eigendata(psi, IncidenceMatrix::full(), 1, cells.length.size()));
    const auto closed = lyapunov_gls_closed_form(B, mu.letter_marginal());
    const auto birk = lyapunov_gls_birkhoff(B, mu, 100000, 8, 11);
    CHECK(std::abs(birk.value - closed.value) < 3.0 * birk.standard_error + 1e-12);
    CHECK(std::abs(birk.value / closed.value - 1.0) < 0.005);
  }
}

TEST_CASE("entropy of the induced system") {
  const BetaSystem P(std::numbers::pi);
  const GlsCells cells = gls_cells(P, 5);
  const Potential zero = gls_potential(cells, "zero");
  const GibbsMarkovMeasure mu(rpf_eigendata(zero, IncidenceMatrix::full(), 1, 5));
  CHECK(entropy_of_induced(mu, zero) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  // psi + c leaves the Gibbs state and its entropy unchanged.
  const Potential shifted = zero.shifted(2.5);
  const GibbsMarkovMeasure mu2(rpf_eigendata(shifted, IncidenceMatrix::full(), 1, 5));
  CHECK(entropy_of_induced(mu2, shifted) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  // Lebesgue weighting on the golden cells: h = chi = log phi (1 + phi^-2).
  const BetaSystem G(phi);
  const GlsCells gc = gls_cells(G, 2);
  const Potential parry = gls_potential(gc, "parry");
  const GibbsMarkovMeasure mg(rpf_eigendata(parry, IncidenceMatrix::full(), 1, 2));
  const double h = entropy_of_induced(mg, parry);
  CHECK(h == doctest::Approx(std::log(phi) * (1.0 + 1.0 / (phi * phi))).epsilon(1e-12));
  CHECK(h == doctest::Approx(lyapunov_gls_closed_form(G, mg.letter_marginal()).value).epsilon(1e-12));
}

TEST_CASE("local dimension oracles") {
  LocalDimensionOptions one;
  one.centers = 400;
  const auto l1 = local_dimension(lebesgue_cloud(1, 100000, 1), one);
  CHECK(l1.mean == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(l1.upper_half_mean - l1.mean) < 2.0 * l1.std);
  for (double s : l1.slopes) CHECK(s >= 0.0);
  const auto c = local_dimension(cantor_cloud(100000, 2), one);
  CHECK(std::abs(c.mean - std::log(2.0) / std::log(3.0)) < 0.02);
  LocalDimensionOptions two{400, 2, 6, 50, true, 0, 3};
  const auto l2 = local_dimension(lebesgue_cloud(2, 100000, 4), two);
  CHECK(std::abs(l2.mean - 2.0) < 0.05);
  CHECK(l2.r_max == 0.25);
  // Too few points for any radius.
  CHECK_THROWS_AS(local_dimension(lebesgue_cloud(1, 40, 1), one), DomainError);
}

TEST_CASE("local dimension is deterministic and thread independent") {
  LocalDimensionOptions a;
  a.centers = 100;
  a.threads = 1;
  LocalDimensionOptions b = a;
  b.threads = 4;
  const PointCloud cloud = gauss_cloud(50000, 7);
  const auto x = local_dimension(cloud, a);
  const auto y = local_dimension(cloud, b);
  CHECK(x.slopes == y.slopes);
  CHECK(x.mean == y.mean);
}

TEST_CASE("GLS clouds") {
  const BetaSystem G(phi);
  const GlsCells cells = gls_cells(G, 2);
  const Potential psi = gls_potential(cells, "bernoulli", {0.5, 0.5});
  const GibbsMarkovMeasure mu(rpf_eigendata(psi, IncidenceMatrix::full(), 1, 2));
  const GlsClouds c = sample_gls_clouds(cells, mu, 20000, 5, 2);
  // Base marginal: mu([0, 1/phi)) = 1/2.
  std::size_t left = 0;
  for (double x : c.base.coords) left += x < 1.0 / phi;
  CHECK(std::abs(static_cast<double>(left) / 20000.0 - 0.5) < 0.02);
  for (std::size_t i = 0; i < c.joint.size(); ++i) {
    CHECK(c.joint.at(i, 0) >= 0.0);
    CHECK(c.joint.at(i, 1) < 1.0);
  }
  const GlsClouds again = sample_gls_clouds(cells, mu, 20000, 5, 7);
  CHECK(again.joint.coords == c.joint.coords);
}

TEST_CASE("dimension checks on golden GLS systems") {
  const BetaSystem G(phi);
  DimensionCheckOptions o;
  o.M = 60000;
  o.one_d.centers = 300;
  o.two_d.centers = 300;
  SUBCASE("Lebesgue weighting") {
    const auto r = global_dimension_check(G, o);
    CHECK(r.predicted_fiber == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.fiber_ok);
    CHECK(r.global_ok);
    CHECK(r.additivity_ok);
    CHECK(r.fiber->mean <= 1.05);
  }
  SUBCASE("Bernoulli(1/2, 1/2)") {
    o.potential = "bernoulli";
    o.weights = {0.5, 0.5};
    const auto r = conditional_dimension_check(G, o);
    CHECK(r.predicted_fiber == doctest::Approx(std::log(2.0) / (std::log(phi) * 1.5)).epsilon(1e-12));
    CHECK(r.fiber_ok);
  }
  SUBCASE("single cell") {
    const BetaSystem two(2.0);
    const GlsCells cells = gls_cells(two, 1);
    const Potential psi = gls_potential(cells, "zero");
    const GibbsMarkovMeasure mu(rpf_eigendata(psi, IncidenceMatrix::full(), 1, 1));
    const GlsClouds c = sample_gls_clouds(cells, mu, 1000, 1);
    LocalDimensionOptions l;
    l.centers = 20;
    l.edge_correction = false;
    CHECK(local_dimension(c.fiber, l).mean == doctest::Approx(0.0));
    CHECK(entropy_of_induced(mu, psi) == doctest::Approx(0.0));
  }
}

TEST_CASE("temperature and limit-set dimension") {
  const auto moran3 = temperature(moran({1.0 / 3.0, 1.0 / 3.0}), std::nullopt, 0.0);
  CHECK(moran3.t == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-10));
  CHECK(moran3.residual < 1e-9);
  CHECK(moran3.monotone);
  CHECK(moran3.probes.front().second > 0.0);
  CHECK(moran3.probes.back().second < 0.0);
  for (int k : {2, 4, 7}) CHECK(hd_limit_set(moran(std::vector<double>(k, 1.0 / k))) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(hd_limit_set(gls({{0.0, 1.0 / phi}, {1.0 / phi, 1.0}})) == doctest::Approx(1.0).epsilon(1e-10));
  // One branch: P(t) = t log r vanishes at t = 0.
  TemperatureOptions o;
  o.lo = -0.5;
  CHECK(std::abs(hd_limit_set(moran({0.4}), o)) < 1e-9);
  // Gauss restricted to {1, 2}; the value settles as the potential memory grows.
  const Gdms g12 = finite_subsystem(gauss_cf(), 2);
  o = {};
  o.memory = 12;
  CHECK(hd_limit_set(g12, o) == doctest::Approx(0.5312805).epsilon(1e-6));
  // No root on the bracket.
  o = {};
  o.hi = 0.5;
  CHECK_THROWS_AS(hd_limit_set(moran({1.0 / 3.0, 1.0 / 3.0}), o), ConvergenceError);
}

TEST_CASE("temperature with q != 0") {
  // Two affine branches with ratios r_i and theta = log p_i: root of sum p_i^q r_i^t = 1
  // after normalising by P(theta) = log sum p_i.
  const Gdms S = moran({0.5, 0.25});
  const Potential theta = Potential::memory1({std::log(0.3), std::log(0.7)});
  for (double q : {-1.0, 0.5, 2.0}) {
    TemperatureOptions o;
    o.lo = -4.0;
    o.hi = 6.0;
    const auto r = temperature(S, theta, q, o);
    CHECK(r.residual < 1e-9);
    const double lhs = std::pow(0.3, q) * std::pow(0.5, r.t) + std::pow(0.7, q) * std::pow(0.25, r.t);
    CHECK(lhs == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("temperature on a countable system probes summability") {
  TemperatureOptions o;
  o.N = 32;
  o.memory = 3;
  o.summability_tolerance = 0.05;
  const auto r = temperature(gauss_cf(), std::nullopt, 0.0, o);
  CHECK_FALSE(r.summable.front());
  CHECK(r.summable.back());
  CHECK(r.lo > o.lo);
  // Restricted to 32 letters the dimension is close to, and below, 1 - 6 / (pi^2 N).
  CHECK(r.t > 0.95);
  CHECK(r.t < 1.0);
}
