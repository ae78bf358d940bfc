#include <doctest.h>

#include <cmath>
#include <numbers>

#include "thermo/beta_ext.hpp"

using namespace thermo;

namespace {

const double phi = std::numbers::phi;

// Smallest x whose first n digits are >=_lex w, by bisection on [0, 1).
double realize(const BetaSystem& B, const std::vector<int>& w) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    if (B.digits(m, w.size()) < w)
      lo = m;
    else
      hi = m;
  }
  return hi;
}

}  // namespace

TEST_CASE("beta transformation") {
  const BetaSystem G(phi);
  CHECK(G.t_beta(0.0) == 0.0);
  const double v = G.t_beta(1.0 / phi);
  CHECK(std::min(v, 1.0 - v) < 1e-15);
  CHECK(BetaSystem(2.5).t_beta(0.5) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("digits and reconstruction") {
  const BetaSystem G(phi);
  for (int d : G.digits(0.0, 20)) CHECK(d == 0);
  Rng rng(3);
  for (int s = 0; s < 200; ++s) {
    const auto d = G.digits(rng.uniform(), 60);
    for (std::size_t j = 0; j + 1 < d.size(); ++j) CHECK_FALSE((d[j] == 1 && d[j + 1] == 1));
  }
  for (const char* name : {"phi", "1.8", "pi"}) {
    const BasicBetaSystem<HighReal> B(parse_beta<HighReal>(name), 200);
    Rng r(11);
    for (int s = 0; s < 50; ++s) {
      const HighReal x = HighReal(r.uniform());
      for (std::size_t k : {1u, 10u, 40u, 48u}) {
        const auto d = B.digits(x, k);
        HighReal sum = 0, scale = 1;
        for (int c : d) {
          scale /= B.beta();
          sum += HighReal(c) * scale;
        }
        CHECK(x - sum >= 0);
        CHECK(x - sum < scale);
        CHECK(B.is_admissible(d));
      }
    }
  }
}

TEST_CASE("expansion of 1") {
  const BetaSystem G(phi);
  CHECK(G.digits_of_one() == std::vector<int>{1, 1});
  CHECK(G.finite());
  const BetaSystem two(2.0);
  CHECK(two.digits_of_one() == std::vector<int>{2});
  CHECK(two.finite());
  const BetaSystem P(std::numbers::pi);
  CHECK_FALSE(P.finite());
  CHECK(P.digits_of_one().front() == 3);
  const BasicBetaSystem<HighReal> H(parse_beta<HighReal>("pi"), 300);
  CHECK_FALSE(H.finite());
  HighReal sum = 0, scale = 1;
  for (int b : H.digits_of_one()) {
    scale /= H.beta();
    sum += HighReal(b) * scale;
  }
  CHECK(static_cast<double>(1 - sum) < 1e-140);
  // The double and multiprecision expansions agree where doubles are reliable.
  for (std::size_t j = 1; j <= P.digits_of_one().size(); ++j) CHECK(P.b(j) == H.b(j));
}

TEST_CASE("Parry admissibility") {
  const BetaSystem G(phi);
  CHECK_FALSE(G.is_admissible({1, 1}));
  CHECK(G.is_admissible(std::vector<int>(10, 0)));
  CHECK(G.is_admissible({1, 0, 1, 0, 1}));
  CHECK_FALSE(G.is_admissible({2}));
  // Exhaustive at length 12: admissible words are exactly the realized ones.
  std::size_t admissible = 0;
  for (int mask = 0; mask < (1 << 12); ++mask) {
    std::vector<int> w(12);
    for (int j = 0; j < 12; ++j) w[j] = (mask >> (11 - j)) & 1;
    const bool adm = G.is_admissible(w);
    const double x = realize(G, w);
    const bool realized = x < 1.0 && G.digits(x, 12) == w;
    CHECK(adm == realized);
    admissible += adm;
  }
  CHECK(admissible == 377);  // Fibonacci
  const BetaSystem B(1.8);
  Rng rng(5);
  for (int s = 0; s < 500; ++s) CHECK(B.is_admissible(B.digits(rng.uniform(), 30)));
}

TEST_CASE("GLS partition") {
  const BetaSystem G(phi);
  REQUIRE(G.cell_count() == 2u);
  CHECK(G.cell(1).left == 0.0);
  CHECK(G.cell(1).right() == doctest::Approx(1.0 / phi).epsilon(1e-15));
  CHECK(G.cell(2).left == doctest::Approx(1.0 / phi).epsilon(1e-15));
  CHECK(G.cell(2).right() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(G.cell(2).index.k == 1);
  CHECK_THROWS_AS(G.cell(3), DomainError);
  const BetaSystem P(std::numbers::pi);
  CHECK(P.cell(1).index.k == 0);
  CHECK(P.cell(3).index.i == 3);
  CHECK(P.cell(4).index.k == 2);  // b_2 = 0 for pi
  for (const char* name : {"1.8", "pi", "e"}) {
    const BasicBetaSystem<HighReal> B(parse_beta<HighReal>(name));
    HighReal total = 0;
    for (std::size_t n = 1; n <= 300; ++n) {
      const auto c = B.cell(n);
      total += c.length;
      CHECK(static_cast<double>(abs(c.length * pow(B.beta(), static_cast<int>(c.index.k + 1)) - 1)) < 1e-100);
      if (n > 1) CHECK(static_cast<double>(abs(B.cell(n - 1).right() - c.left)) < 1e-14);
    }
    CHECK(static_cast<double>(1 - total) < 1e-30);
  }
}

TEST_CASE("tower map steps") {
  const BetaSystem G(phi);
  // d_1 = b_1 at level 0: up one level, y / beta.
  const auto p = G.step(BetaSystem::base_point(0.8, 0.5));
  CHECK(p.level == 1);
  CHECK(G.y_value(p) == doctest::Approx(0.5 / phi).epsilon(1e-15));
  CHECK(p.x == doctest::Approx(phi * 0.8 - 1.0).epsilon(1e-15));
  // d_1 < b_1: stays in Z_0, y -> (y + d_1) / beta.
  const auto q = G.step(BetaSystem::base_point(0.3, 0.5));
  CHECK(q.level == 0);
  CHECK(G.y_value(q) == doctest::Approx(0.5 / phi).epsilon(1e-15));
  CHECK_THROWS_AS(G.step(ExtensionPoint<double>{0.7, 1, {}, 0.1}), DomainError);
  CHECK_THROWS_AS(G.step(ExtensionPoint<double>{0.2, 2, {}, 0.1}), DomainError);
}

TEST_CASE("first return time") {
  const BetaSystem G(phi);
  CHECK(G.first_return_time(0.3, 0.9) == 1);
  CHECK(G.first_return_time(0.7, 0.4) == 2);
  CHECK(G.first_return_time(0.7, 0.9) == 2);
  for (const char* name : {"1.8", "pi", "2.7"}) {
    const BetaSystem B(parse_beta<double>(name));
    const auto r = first_return_law(B, 40, 8, 17);
    CHECK(r.cells == std::min<std::size_t>(40, B.available_cells()));
    CHECK(r.mismatches == 0);
  }
  const BasicBetaSystem<HighReal> H(parse_beta<HighReal>("1.8"));
  const auto r = first_return_law(H, 200, 2, 19);
  CHECK(r.cells == 200);
  CHECK(r.mismatches == 0);
}

TEST_CASE("induced map on Z_0") {
  const BetaSystem G(phi);
  Rng rng(23);
  for (int s = 0; s < 1000; ++s) {
    const double x = rng.uniform(), y = rng.uniform();
    const auto [ix, iy] = G.induced_map_z0(x, y);
    if (x < 1.0 / phi) {
      CHECK(ix == doctest::Approx(phi * x).epsilon(1e-13));
      CHECK(iy == doctest::Approx(y / phi).epsilon(1e-13));
    } else if (y < 1.0 / phi) {
      CHECK(std::abs(ix - (phi * phi * x - phi)) < 1e-13);
      CHECK(std::abs(iy - (y + phi) / (phi * phi)) < 1e-13);
    }
  }
  const BetaSystem B(2.7);
  for (int s = 0; s < 1000; ++s) {
    const double x = rng.uniform(), y = rng.uniform();
    const auto a = B.induced_map_z0(x, y);
    const auto b = B.induced_by_iteration(x, y);
    CHECK(std::abs(a.first - b.first) < 1e-12);
    CHECK(std::abs(a.second - b.second) < 1e-12);
  }
}

TEST_CASE("GLS natural extension") {
  const BetaSystem G(phi);
  const auto [x1, y1] = G.gls_extension(0.8, 0.3);
  CHECK(x1 == doctest::Approx(phi * phi * 0.8 - phi).epsilon(1e-14));
  CHECK(y1 == doctest::Approx((0.3 + phi) / (phi * phi)).epsilon(1e-14));
  const BetaSystem P(std::numbers::pi);
  Rng rng(29);
  for (int s = 0; s < 500; ++s) {
    const double x = rng.uniform(), y = rng.uniform();
    const auto c = P.locate(x);
    const auto [sx, sy] = P.gls_extension(x, y);
    CHECK(sy == doctest::Approx(c.left + y * c.length).epsilon(1e-14));
    CHECK(sy >= c.left);
    CHECK(sy < c.right());
  }
  // The same map through an affine GDMS.
  const Gdms S = beta_gls_system(P, 20);
  for (int s = 0; s < 200; ++s) {
    const double x = 0.9 * rng.uniform(), y = rng.uniform();
    const auto a = gls_natural_extension(S, x, y);
    const auto b = P.gls_extension(x, y);
    CHECK(a.first == doctest::Approx(b.first).epsilon(1e-12));
    CHECK(a.second == doctest::Approx(b.second).epsilon(1e-14));
  }
  const Gdms L = luroth();
  const auto [lx, ly] = gls_natural_extension(L, 0.4, 0.5);  // cell [1/3, 1/2)
  CHECK(lx == doctest::Approx((0.4 - 1.0 / 3.0) * 6.0));
  CHECK(ly == doctest::Approx(1.0 / 3.0 + 0.5 / 6.0));
}

TEST_CASE("identity S = T_{beta, Z_0}") {
  CHECK(identity_check(BetaSystem(phi), 10000, 1).max_deviation < 1e-12);
  for (const char* name : {"1.8", "pi"}) {
    const auto r = identity_check(BetaSystem(parse_beta<double>(name)), 10000, 1);
    CHECK(r.max_deviation < 1e-11);
    CHECK(r.closed_form_deviation < 1e-11);
  }
}

TEST_CASE("golden conjugacy") {
  CHECK(golden_conjugacy_deviation(10000, 7) < 1e-12);
  const auto [x, y] = golden_induced_w(0.7, 0.5);
  const auto [cx, cy] = golden_induced_w_closed(0.7, 0.5);
  CHECK(x == doctest::Approx(cx).epsilon(1e-14));
  CHECK(y == doctest::Approx(cy).epsilon(1e-14));
}

TEST_CASE("induced images are the cells") {
  const BetaSystem B(1.8);
  Rng rng(31);
  for (int s = 0; s < 1000; ++s) {
    const double x = rng.uniform(), y = rng.uniform();
    const auto c = B.locate(x);
    const auto [ix, iy] = B.induced_by_iteration(x, y);
    (void)ix;
    CHECK(B.locate(iy).index.n == c.index.n);
  }
}

TEST_CASE("beta parsing") {
  CHECK(parse_beta<double>("phi") == doctest::Approx(phi));
  CHECK_THROWS_AS(parse_beta<double>("1.8x"), ConfigError);
  CHECK_THROWS_AS(BetaSystem(0.5), ConfigError);
  CHECK(static_cast<double>(parse_beta<HighReal>("1.8")) == 1.8);
}
