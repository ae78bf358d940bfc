#include <doctest.h>

#include <cmath>
#include <numbers>

#include "thermo/errors.hpp"
#include "thermo/gdms.hpp"

using namespace thermo;

namespace {

const double g = (std::sqrt(5.0) - 1.0) / 2.0;

Gdms golden_mp() {
  const Gdms mp = manneville_pomeau(0.5);
  Gdms S("mp-golden", mp.vertices(), [mp](Letter e) { return mp.branch(e); }, 2, IncidenceMatrix::golden_mean());
  S.with_parabolic({{0, 0.0}});
  return S;
}

}  // namespace

TEST_CASE("branch composition") {
  const Gdms G = gauss_cf();
  const auto c = compose_branch(G, Word{0});
  CHECK(c.image.lo == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.image.hi == doctest::Approx(1.0).epsilon(1e-15));
  Word w{2, 0, 4};
  const auto outer = compose_branch(G, w);
  for (Letter e = 0; e < 6; ++e) {
    Word longer = w;
    longer.push_back(e);
    const auto inner = compose_branch(G, longer);
    CHECK(inner.image.lo >= outer.image.lo);
    CHECK(inner.image.hi <= outer.image.hi);
  }
  const Gdms L = luroth();
  for (Letter e = 0; e < 10; ++e) {
    const Branch b = L.branch(e);
    const auto img = compose_branch(L, Word{e}).image;
    CHECK(img.lo == doctest::Approx(b.affine->offset).epsilon(1e-15));
    CHECK(img.hi == doctest::Approx(b.affine->offset + b.affine->slope).epsilon(1e-15));
  }
}

TEST_CASE("chain rule along the orbit") {
  const Gdms G = gauss_cf();
  const Word w{3, 0, 1, 6, 2};
  double x = 0.5, product = 1.0;
  for (std::size_t k = w.size(); k-- > 0;) {
    const Branch b = G.branch(w[k]);
    product *= b.derivative(x);
    x = b.map(x);
  }
  CHECK(compose_branch(G, w).derivative_mid == doctest::Approx(product).epsilon(1e-10));
}

TEST_CASE("coding map") {
  const Gdms G = gauss_cf();
  const auto p = coding_point(G, [](std::size_t) { return Letter{0}; }, 1e-12);
  CHECK(std::abs(p.x - g) <= 1e-12);
  const auto finer = coding_point(G, [](std::size_t) { return Letter{0}; }, 1e-13);
  CHECK(std::abs(finer.x - p.x) < 1e-12);
  const Gdms M = moran({0.25, 0.5});
  const auto q = coding_point(M, [](std::size_t) { return Letter{1}; }, 1e-13);
  CHECK(q.x == doctest::Approx(0.5 / (1.0 - 0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(coding_point(manneville_pomeau(1.0), [](std::size_t) { return Letter{0}; }, 1e-12, 4096),
                  ConvergenceError);
}

TEST_CASE("GDMS map") {
  const Gdms G = gauss_cf();
  for (double x : {0.37, 0.81, 0.0123, 0.26}) {
    const double expected = 1.0 / x - std::floor(1.0 / x);
    CHECK(gdms_map_apply(G, x) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gdms_map_apply(G, 0.5), BoundaryError);
  const Gdms L = luroth();
  const Branch b = L.branch(3);
  const double x = 0.215;
  CHECK(gdms_map_apply(L, x) ==
        doctest::Approx(x / b.affine->slope - b.affine->offset / b.affine->slope).epsilon(1e-12));
  // Outside every image: the preassigned point.
  const Gdms M = moran({1.0 / 3.0, 1.0 / 3.0});
  CHECK(gdms_map_apply(M, 0.5) == M.xi());
  CHECK(M.xi() == 0.0);
}

TEST_CASE("round trip f(phi_e(x)) = x") {
  for (const Gdms& S : {gauss_cf(), backward_cf(), luroth(), manneville_pomeau(0.5), moran({0.2, 0.3, 0.1})}) {
    for (Letter e = 0; e < S.truncate(12); ++e) {
      const Branch b = S.branch(e);
      for (double x : {0.013, 0.25, 0.5, 0.77, 0.991}) {
        CHECK(gdms_map_apply(S, b.map(x)) == doctest::Approx(x).epsilon(1e-12));
      }
    }
  }
  // Without a locator the scan path is used.
  const Gdms G = gauss_cf();
  const Gdms scan("gauss-scan", G.vertices(), [G](Letter e) { return G.branch(e); }, 200, G.incidence());
  CHECK(gdms_map_apply(scan, G.branch(17).map(0.4)) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("open set condition") {
  CHECK(verify_osc(gauss_cf(), 100).passed);
  CHECK(verify_osc(moran({0.5}), 1).passed);
  const Gdms bad(
      "overlap", {{0.0, 1.0}},
      [](Letter e) {
        Branch b;
        b.letter = e;
        b.label = std::to_string(e);
        const double off = e == 0 ? 0.0 : 0.4;
        b.map = [off](double x) { return 0.5 * x + off; };
        b.derivative = [](double) { return 0.5; };
        b.contraction = 0.5;
        return b;
      },
      2, IncidenceMatrix::full());
  const auto r = verify_osc(bad, 2);
  CHECK_FALSE(r.passed);
  REQUIRE(r.overlaps.size() == 1);
  CHECK(r.overlaps[0].length == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("bounded distortion") {
  const auto affine = bdp_constant(luroth(), 20, 4, 64);
  CHECK(affine.constant == 1.0);
  CHECK_FALSE(affine.renyi_flag);
  const auto gauss = bdp_constant(gauss_cf(), 20, 10, 64);
  CHECK(std::isfinite(gauss.constant));
  CHECK(gauss.constant < 5.0);
  CHECK_FALSE(gauss.renyi_flag);
  const auto mp = bdp_constant(manneville_pomeau(0.5), 2, 32, 64);
  CHECK(mp.renyi_flag);
}

TEST_CASE("built-in systems") {
  const Gdms G = gauss_cf();
  for (Letter e = 0; e < 20; ++e) CHECK(G.branch(e).map(0.0) == doctest::Approx(1.0 / (e + 1.0)));
  const Gdms B = backward_cf();
  CHECK(B.branch(0).map(1.0) == 1.0);
  CHECK(std::abs(B.branch(0).derivative(1.0)) == 1.0);
  CHECK(B.is_parabolic(0));
  const Gdms L = luroth();
  for (Letter e = 0; e < 20; ++e) {
    const double n = e + 1.0;
    CHECK(L.branch(e).affine->slope == doctest::Approx(1.0 / (n * (n + 1.0))).epsilon(1e-14));
  }
  const Gdms M = manneville_pomeau(0.5);
  CHECK(M.branch(0).map(0.0) == 0.0);
  CHECK(M.branch(1).contraction < 1.0);
  for (double y : {0.1, 0.6, 0.95}) {
    const double x = M.branch(1).map(y);
    CHECK(x + std::pow(x, 1.5) - 1.0 == doctest::Approx(y).epsilon(1e-14));
  }
  for (Letter e = 0; e < 8; ++e) CHECK(grid_injective(G.branch(e).map, {0.0, 1.0}));
  CHECK_THROWS_AS(manneville_pomeau(-1.0), ConfigError);
  CHECK_THROWS_AS(gls({{0.0, 0.5}, {0.5, 0.9}}), ConfigError);
}

TEST_CASE("jump transform of the backward continued fraction system") {
  JumpOptions opt;
  opt.n_cap = 64;
  opt.original_letters = 8;
  const Gdms J = jump_transform(backward_cf(), opt);
  const auto& words = *J.derived_words();
  CHECK(words.size() == 7 + 64 * 7);
  for (const Word& w : words) {
    CHECK(w.back() != 0);  // ends in some j >= 3
    for (std::size_t k = 0; k + 1 < w.size(); ++k) CHECK(w[k] == 0);
  }
  for (Letter e = 0; e < J.truncate(1000); ++e) CHECK(J.branch(e).contraction < 1.0);
  // Derived branches act as the compositions they name.
  const Branch b = J.branch(7 + 2 * 64 + 3);  // 2^4 5: runs are grouped by j
  CHECK(b.label == "2^4 5");
  const double direct = backward_cf().branch(0).map(backward_cf().branch(0).map(
      backward_cf().branch(0).map(backward_cf().branch(0).map(backward_cf().branch(3).map(0.3)))));
  CHECK(b.map(0.3) == doctest::Approx(direct).epsilon(1e-15));
  // Omega empty: nothing changes.
  const Gdms L = luroth();
  CHECK(jump_transform(L).name() == L.name());
}

TEST_CASE("jump transform of Manneville-Pomeau") {
  JumpOptions opt;
  opt.n_cap = 1024;
  const Gdms J = jump_transform(manneville_pomeau(0.5), opt);
  CHECK(J.derived_words()->size() == 1 + 1024);
  for (Letter e = 0; e < J.truncate(2000); ++e) CHECK(J.branch(e).contraction < 1.0);
  // The derived system is uniformly contracting: nested images shrink.
  const Word w{5, 0, 100, 3};
  const auto img = compose_branch(J, w).image;
  double lambda = 0.0;
  for (Letter e = 0; e < J.truncate(2000); ++e) lambda = std::max(lambda, J.branch(e).contraction);
  CHECK(img.diam() <= std::pow(lambda, 4.0));
}

TEST_CASE("jump admissibility matches concatenation") {
  JumpOptions opt;
  opt.n_cap = 20;
  const Gdms P = golden_mp();
  const Gdms J = jump_transform(P, opt);
  const auto& words = *J.derived_words();
  for (Letter a = 0; a < words.size(); ++a) {
    for (Letter b = 0; b < words.size(); ++b) {
      Word joined = words[a];
      joined.insert(joined.end(), words[b].begin(), words[b].end());
      CHECK(J.incidence()(a, b) == is_admissible(joined, P.incidence()));
    }
  }
}

TEST_CASE("parabolic asymptotics") {
  const auto a05 = parabolic_asymptotics(manneville_pomeau(0.5), 0, 16, 4096);
  CHECK(a05.slope == doctest::Approx(-3.0).epsilon(0.05));
  CHECK(a05.spread < 10.0);
  const auto a1 = parabolic_asymptotics(manneville_pomeau(1.0), 0, 16, 4096);
  CHECK(a1.slope == doctest::Approx(-2.0).epsilon(0.05));
  const auto bcf = parabolic_asymptotics(backward_cf(), 0, 16, 4096);
  CHECK(bcf.slope == doctest::Approx(-2.0).epsilon(0.05));
  CHECK(bcf.beta == doctest::Approx(1.0).epsilon(0.1));
  CHECK(bcf.spread < 10.0);
  CHECK_THROWS_AS(parabolic_asymptotics(gauss_cf(), 0, 16, 64), DomainError);
}

TEST_CASE("backward continued fraction closed form for the parabolic run") {
  const Gdms B = backward_cf();
  for (int n : {1, 2, 5, 40}) {
    for (double x : {0.0, 0.3, 0.9}) {
      double d = 0.0;
      const double v = apply_word(B, Word(n, 0), x, &d);
      CHECK(v == doctest::Approx((n - (n - 1) * x) / ((n + 1) - n * x)).epsilon(1e-13));
      CHECK(d == doctest::Approx(1.0 / (((n + 1) - n * x) * ((n + 1) - n * x))).epsilon(1e-12));
    }
  }
}

TEST_CASE("geometric potentials") {
  const Gdms G = gauss_cf();
  CHECK(geometric_potential(G, 0.0, 0.0, std::nullopt, 0.0)(Word{3, 1}) == 0.0);
  const Gdms L = luroth();
  const auto aff = geometric_potential(L, 1.7, 0.0, std::nullopt, 0.0, 1);
  for (Letter e = 0; e < 10; ++e)
    CHECK(aff(Word{e}) == doctest::Approx(1.7 * std::log(L.branch(e).affine->slope)).epsilon(1e-14));
  const auto psi = geometric_potential(G, 1.0, 0.0, std::nullopt, 0.0, 2);
  for (Letter e = 0; e < 10; ++e) {
    const double n = e + 1.0;
    CHECK(psi(Word{e, 0}) == doctest::Approx(-2.0 * std::log(g + n)).epsilon(1e-13));
  }
  const auto theta = Potential::memory1([](Letter e) { return -double(e); });
  const auto mixed = geometric_potential(G, 0.0, 2.0, theta, 0.5, 1);
  CHECK(mixed(Word{3}) == doctest::Approx(2.0 * (-3.0 - 0.5)));
  const auto periodic = geometric_potential(G, 1.0, 0.0, std::nullopt, 0.0, 2, TailRule::periodic);
  // (n, 1, n, 1, ...): sigma w = (1, n, 1, n, ...) codes the fixed point of phi_1 o phi_n.
  const double n = 3.0;
  const double x = (-n + std::sqrt(n * n + 4.0 * n)) / 2.0;
  CHECK(periodic(Word{2, 0}) == doctest::Approx(-2.0 * std::log(x + n)).epsilon(1e-12));
  CHECK(std::isfinite(periodic(Word{2, 0})));
}
