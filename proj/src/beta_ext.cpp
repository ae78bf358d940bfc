#include "thermo/beta_ext.hpp"

#include <cmath>
#include <numbers>

namespace thermo {

namespace {
constexpr double phi = std::numbers::phi;
}

std::pair<double, double> golden_z_step(double x, double y) {
  if (!(x >= 0.0 && x < 1.0 && y >= 0.0 && y < (x < 1.0 / phi ? 1.0 : 1.0 / phi)))
    throw DomainError("golden_z_step: point outside Z");
  const double v = phi * x;
  const double d = std::floor(v);
  return {v - d, (y + d) / phi};
}

std::pair<double, double> golden_induced_w(double x, double y) {
  if (!(y >= 0.0 && y < 1.0 / phi)) throw DomainError("golden_induced_w: point outside W");
  auto p = golden_z_step(x, y);
  for (int m = 1; p.second >= 1.0 / phi; ++m) {
    if (m > 64) throw BudgetExceeded("golden_induced_w: no return to W");
    p = golden_z_step(p.first, p.second);
  }
  return p;
}

std::pair<double, double> golden_induced_w_closed(double x, double y) {
  if (!(x >= 0.0 && x < 1.0 && y >= 0.0 && y < 1.0 / phi)) throw DomainError("golden_induced_w_closed: point outside W");
  if (x < 1.0 / phi) return {phi * x, y / phi};
  return {phi * phi * x - phi, (y + 1.0) / (phi * phi)};
}

std::pair<double, double> golden_psi(double x, double y) { return {x, y / phi}; }

double golden_conjugacy_deviation(std::size_t samples, std::uint64_t seed) {
  const BetaSystem B(phi);
  Rng rng(seed);
  double dev = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double x = rng.uniform(), y = rng.uniform();
    const auto [sx, sy] = B.gls_extension(x, y);
    const auto lhs = golden_psi(sx, sy);
    const auto [px, py] = golden_psi(x, y);
    const auto rhs = golden_induced_w(px, py);
    const auto closed = golden_induced_w_closed(px, py);
    dev = std::max({dev, std::abs(lhs.first - rhs.first), std::abs(lhs.second - rhs.second),
                    std::abs(lhs.first - closed.first), std::abs(lhs.second - closed.second)});
  }
  return dev;
}

std::pair<double, double> gls_natural_extension(const Gdms& S, double x, double y, std::size_t N) {
  if (!(y >= 0.0 && y < 1.0)) throw DomainError("gls_natural_extension: y outside [0, 1)");
  std::optional<Letter> e;
  if (S.locator()) {
    e = (*S.locator())(x);
  } else {
    for (Letter c = 0; c < S.truncate(N) && !e; ++c) {
      const Branch b = S.branch(c);
      if (b.map(0.0) <= x && x < b.map(1.0)) e = c;
    }
  }
  if (!e) throw DomainError("gls_natural_extension: x is not covered by a branch image");
  const Branch b = S.branch(*e);
  if (!b.affine) throw DomainError("gls_natural_extension: branch " + b.label + " is not affine");
  const auto [a, off] = *b.affine;
  if (x == off || x == off + a) {
    if (x != 0.0) throw BoundaryError("gls_natural_extension: x on a cell endpoint");
  }
  return {x / a - off / a, a * y + off};
}

Gdms beta_gls_system(const BetaSystem& B, std::size_t cells) {
  const std::size_t count = B.cell_count() ? std::min(cells, *B.cell_count()) : cells;
  if (count > B.available_cells())
    throw BudgetExceeded("beta_gls_system: only " + std::to_string(B.available_cells()) +
                         " cells are resolved at double precision");
  auto shared = std::make_shared<const BetaSystem>(B);
  return gls(
      [shared](Letter e) {
        const auto c = shared->cell(e + 1);
        return Interval{c.left, c.right()};
      },
      count,
      [shared, count](double x) -> std::optional<Letter> {
        if (!(x >= 0.0 && x < 1.0)) return std::nullopt;
        try {
          const auto n = shared->locate(x).index.n;
          if (n > count) return std::nullopt;
          return static_cast<Letter>(n - 1);
        } catch (const BudgetExceeded&) {
          return std::nullopt;
        }
      },
      "beta-gls");
}

}  // namespace thermo
