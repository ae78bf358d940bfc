#include <doctest.h>

#include <cmath>
#include <numbers>

#include "thermo/errors.hpp"
#include "thermo/shift_core.hpp"

using namespace thermo;

namespace {

const double phi = std::numbers::phi;

Potential first_letter_times(double c) {
  return Potential::memory1([c](Letter e) { return c * static_cast<double>(e); });
}

Potential sample_memory2() {
  return Potential::memory2({{0.1, -0.4, 0.3}, {-0.2, 0.5, -0.7}, {0.25, 0.0, -0.3}});
}

}  // namespace

TEST_CASE("admissibility") {
  const auto golden = IncidenceMatrix::golden_mean();
  const Word single{0}, ones{1, 1}, alt{0, 1, 0};
  CHECK(is_admissible(single, IncidenceMatrix::full()));
  CHECK_FALSE(is_admissible(ones, golden));
  CHECK(is_admissible(alt, golden));
  CHECK_THROWS_AS(is_admissible(Word{}, golden), DomainError);
}

TEST_CASE("cylinder enumeration") {
  const auto full = enumerate_cylinders(2, 2, IncidenceMatrix::full());
  CHECK(full == std::vector<Word>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto golden = enumerate_cylinders(2, 2, IncidenceMatrix::golden_mean());
  CHECK(golden == std::vector<Word>{{0, 0}, {0, 1}, {1, 0}});
  CHECK(enumerate_cylinders(1, 5, IncidenceMatrix::full()).size() == 5);
  CHECK_THROWS_AS(enumerate_cylinders(12, 4, IncidenceMatrix::full(), 1000), BudgetExceeded);
}

TEST_CASE("witness discovery") {
  auto w = discover_witness(IncidenceMatrix::golden_mean(), 2);
  REQUIRE(w);
  const auto disconnected = IncidenceMatrix::from_table({{1, 0}, {0, 1}});
  CHECK_FALSE(discover_witness(disconnected, 2));
}

TEST_CASE("birkhoff sums") {
  const Word w{1, 0, 1, 1};
  CHECK(birkhoff_sum(Potential::constant(0.7), w, 3) == doctest::Approx(2.1));
  CHECK(birkhoff_sum(first_letter_times(1.0), Word{1, 0, 1}, 2) == 1.0);
  const auto psi = sample_memory2();
  const Word v{0, 2, 1, 1};
  const double direct = psi(Word{0, 2}) + psi(Word{2, 1}) + psi(Word{1, 1});
  CHECK(birkhoff_sum(psi, v, 3) == doctest::Approx(direct).epsilon(1e-15));
  CHECK_THROWS_AS(birkhoff_sum(psi, Word{0, 2, 1}, 3), DomainError);
}

TEST_CASE("summability") {
  CHECK_FALSE(summability_report(Potential::constant(0.0), IncidenceMatrix::full(), 4096).converged);
  auto gauss_sup = Potential::memory1([](Letter e) { return -2.0 * std::log(e + 1.0); });
  const auto report = summability_report(gauss_sup, IncidenceMatrix::full(), 1 << 14);
  CHECK(report.converged);
  double direct = 0.0;
  for (int n = 1; n <= (1 << 14); ++n) direct += 1.0 / (double(n) * n);
  CHECK(report.rows.back().partial_sum == doctest::Approx(direct).epsilon(1e-12));
  const auto finite = IncidenceMatrix::from_table({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  CHECK(summability_report(Potential::constant(3.0), finite, 3).converged);
}

TEST_CASE("pressure oracles") {
  const auto full = IncidenceMatrix::full();
  CHECK(pressure(Potential::constant(0.0), full, 10, 2).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(pressure(Potential::constant(0.3), full, 10, 7).value ==
        doctest::Approx(std::log(7.0) + 0.3).epsilon(1e-14));
  const auto p = pressure(first_letter_times(-std::log(3.0)), full, 10, 2);
  CHECK(p.value == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-13));
  // Levels are constant in n for memory-1 potentials on full shifts.
  for (std::size_t n = 1; n < p.levels.size(); ++n) CHECK(std::abs(p.levels[n] - p.levels[0]) < 1e-12);
}

TEST_CASE("pressure through the transfer recursion") {
  const auto golden = IncidenceMatrix::golden_mean();
  const auto p = pressure(Potential::constant(0.0), golden, 40, 2);
  CHECK(p.value == doctest::Approx(std::log(phi)).epsilon(1e-12));
  // Ratio levels log(Lambda_n / Lambda_{n-1}) settle geometrically.
  CHECK(std::abs(p.ratio_levels.back() - std::log(phi)) < 1e-12);

  const auto psi = sample_memory2();
  const auto full = IncidenceMatrix::full();
  const auto q = pressure(psi, full, 40, 3);
  const auto eig = rpf_eigendata(psi, full, 1, 3);
  CHECK(q.value == doctest::Approx(eig.log_rho).epsilon(1e-10));
}

TEST_CASE("pressure sweep over truncations") {
  auto psi = Potential::memory1([](Letter e) { return -2.0 * std::log(e + 1.0); });
  const auto sweep = pressure_sweep(psi, IncidenceMatrix::full(), 4, 32, 1024);
  CHECK(sweep.rows.front().truncation == 32);
  CHECK(sweep.rows.back().truncation == 1024);
  CHECK(sweep.rows.back().pressure == doctest::Approx(std::log(std::numbers::pi * std::numbers::pi / 6.0)).epsilon(1e-3));
}

TEST_CASE("RPF eigendata") {
  const auto full = IncidenceMatrix::full();
  const auto e0 = rpf_eigendata(Potential::constant(0.0), full, 1, 2);
  CHECK(e0.rho == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(e0.right[0] == doctest::Approx(e0.right[1]).epsilon(1e-13));
  const auto eg = rpf_eigendata(Potential::constant(0.0), IncidenceMatrix::golden_mean(), 1, 2);
  CHECK(eg.rho == doctest::Approx(phi).epsilon(1e-13));
  const auto ew = rpf_eigendata(Potential::memory1({std::log(0.3), std::log(1.9)}), full, 1, 2);
  CHECK(ew.rho == doctest::Approx(2.2).epsilon(1e-13));
  double dot = 0.0, left = 0.0;
  for (std::size_t u = 0; u < ew.right.size(); ++u) {
    dot += ew.left[u] * ew.right[u];
    left += ew.left[u];
  }
  CHECK(dot == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(left == doctest::Approx(1.0).epsilon(1e-14));
  const auto split = IncidenceMatrix::from_table({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(rpf_eigendata(Potential::constant(0.0), split, 1, 2), DomainError);
}

TEST_CASE("Parry chain of the golden shift") {
  const auto mu = gibbs_measure(rpf_eigendata(Potential::constant(0.0), IncidenceMatrix::golden_mean(), 1, 2));
  const double pi0 = phi * phi / (1.0 + phi * phi);
  CHECK(mu.stationary()[0] == doctest::Approx(pi0).epsilon(1e-13));
  CHECK(mu.cylinder_measure(Word{0, 0}) / pi0 == doctest::Approx(1.0 / phi).epsilon(1e-13));
  CHECK(mu.cylinder_measure(Word{0, 1}) / pi0 == doctest::Approx(1.0 / (phi * phi)).epsilon(1e-13));
  CHECK(mu.cylinder_measure(Word{1, 0}) == doctest::Approx(1.0 - pi0).epsilon(1e-13));
  CHECK(mu.cylinder_measure(Word{1, 1}) == 0.0);
  CHECK(mu.cylinder_measure(Word{0}) == doctest::Approx(pi0).epsilon(1e-13));
  CHECK(entropy_from_pressure(mu, Potential::constant(0.0)) == doctest::Approx(std::log(phi)).epsilon(1e-12));
}

TEST_CASE("fair coin") {
  const auto mu = gibbs_measure(rpf_eigendata(Potential::constant(0.0), IncidenceMatrix::full(), 1, 2));
  CHECK(mu.cylinder_measure(Word{0, 1, 1}) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(mu.entropy() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const auto a = mu.sample_forward(10, 99);
  CHECK(a == mu.sample_forward(10, 99));
  CHECK(a != mu.sample_forward(10, 100));
}

TEST_CASE("entropy ignores additive constants") {
  const auto A = IncidenceMatrix::full();
  const auto psi = sample_memory2();
  const auto mu = gibbs_measure(rpf_eigendata(psi, A, 2, 3));
  const auto shifted = psi.shifted(2.5);
  const auto nu = gibbs_measure(rpf_eigendata(shifted, A, 2, 3));
  CHECK(entropy_from_pressure(mu, psi) == doctest::Approx(entropy_from_pressure(nu, shifted)).epsilon(1e-11));
  CHECK(nu.pressure() - mu.pressure() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("chain invariants for memory-2 potentials") {
  const auto A = IncidenceMatrix::full();
  const auto psi = sample_memory2();
  for (std::size_t m : {1u, 2u}) {
    const auto mu = gibbs_measure(rpf_eigendata(psi, A, m, 3));
    const auto& sp = mu.space();
    for (std::size_t u = 0; u < sp.size(); ++u) {
      double row = 0.0;
      for (std::size_t j = 0; j < sp.successors(u).size(); ++j)
        row += mu.transition_probability(sp.successor_offset(u) + j);
      CHECK(std::abs(row - 1.0) < 1e-12);
    }
    // Stationarity to 1e-10.
    std::vector<double> next(sp.size(), 0.0);
    for (std::size_t u = 0; u < sp.size(); ++u)
      for (std::size_t j = 0; j < sp.successors(u).size(); ++j)
        next[sp.successors(u)[j]] += mu.stationary()[u] * mu.transition_probability(sp.successor_offset(u) + j);
    for (std::size_t u = 0; u < sp.size(); ++u) CHECK(std::abs(next[u] - mu.stationary()[u]) < 1e-10);
    // Reversed-chain identity.
    for (std::size_t w = 0; w < sp.size(); ++w) {
      const auto pred = sp.predecessors(w);
      const auto trans = sp.predecessor_transitions(w);
      for (std::size_t k = 0; k < pred.size(); ++k) {
        const double lhs = mu.stationary()[pred[k]] * mu.transition_probability(trans[k]);
        const double rhs = mu.stationary()[w] * mu.reversed_probability(w, k);
        CHECK(std::abs(lhs - rhs) < 1e-12);
      }
    }
    CHECK(entropy_from_pressure(mu, psi) == doctest::Approx(mu.entropy()).epsilon(1e-9));
  }
}

TEST_CASE("cylinder measure is additive and shift invariant") {
  const auto A = IncidenceMatrix::full();
  const auto mu = gibbs_measure(rpf_eigendata(sample_memory2(), A, 2, 3));
  for (const Word& w : enumerate_cylinders(3, 3, A)) {
    double ext = 0.0, pre = 0.0;
    for (Letter e = 0; e < 3; ++e) {
      Word right = w, left{e};
      right.push_back(e);
      left.insert(left.end(), w.begin(), w.end());
      ext += mu.cylinder_measure(right);
      pre += mu.cylinder_measure(left);
    }
    CHECK(std::abs(ext - mu.cylinder_measure(w)) < 1e-12);
    CHECK(std::abs(pre - mu.cylinder_measure(w)) < 1e-12);
  }
}

TEST_CASE("sampling") {
  const auto golden = IncidenceMatrix::golden_mean();
  const auto mu = gibbs_measure(rpf_eigendata(Potential::constant(0.0), golden, 1, 2));
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Word past = mu.sample_past(Word{1, 0}, 6, s);
    CHECK(past.back() == 0);
    Word joined = past;
    joined.push_back(1);
    CHECK(is_admissible(joined, golden));
  }
  CHECK_THROWS_AS(mu.sample_past(Word{1, 1}, 4, 1), DomainError);
  // One-letter frequencies against a 3-sigma binomial band.
  const std::size_t n = 200000;
  const Word w = mu.sample_forward(n, 7);
  double zeros = 0.0;
  for (Letter e : w) zeros += e == 0 ? 1.0 : 0.0;
  const double p = mu.stationary()[0];
  // Markov correlation inflates the variance; (1 + lambda2)/(1 - lambda2) with lambda2 = -1/phi^2.
  const double inflation = (1.0 - 1.0 / (phi * phi)) / (1.0 + 1.0 / (phi * phi));
  CHECK(std::abs(zeros / n - p) < 3.0 * std::sqrt(p * (1 - p) * inflation / n) + 1e-12);
}

TEST_CASE("Gibbs audit") {
  const auto full3 = IncidenceMatrix::full();
  auto psi1 = Potential::memory1({0.2, -0.5, 1.0});
  const auto mu1 = gibbs_measure(rpf_eigendata(psi1, full3, 1, 3));
  const auto a1 = gibbs_audit(mu1, psi1, full3, 1, 8, 1000, 5);
  CHECK(a1.constant >= 1.0);
  CHECK(a1.constant <= 1.0 + 1e-9);

  const auto golden = IncidenceMatrix::golden_mean();
  const auto psi0 = Potential::constant(0.0);
  const auto mug = gibbs_measure(rpf_eigendata(psi0, golden, 1, 2));
  const auto ag = gibbs_audit(mug, psi0, golden, 1, 12, 5000, 5);
  CHECK(ag.normalized_constant <= 1.0 + 1e-9);
  CHECK(ag.flat);

  const auto psi2 = sample_memory2();
  const auto mu2 = gibbs_measure(rpf_eigendata(psi2, full3, 1, 3));
  const auto a2 = gibbs_audit(mu2, psi2, full3, 2, 12, 4000, 11);
  CHECK(std::isfinite(a2.constant));
  CHECK(a2.flat);
  CHECK(a2.normalized_constant <= 1.0 + 1e-9);
}
