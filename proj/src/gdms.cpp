#include "thermo/gdms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "thermo/errors.hpp"
#include "thermo/random.hpp"

namespace thermo {

namespace {

constexpr double eps = std::numeric_limits<double>::epsilon();

bool near(double x, double y) { return std::abs(x - y) <= 4.0 * eps * std::max(1.0, std::abs(x)); }

// Solves map(x) = y on a domain where map is strictly monotone.
double invert_monotone(const Branch& b, const Interval& domain, double y) {
  double lo = domain.lo, hi = domain.hi;
  const bool increasing = b.map(hi) > b.map(lo);
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    const double v = b.map(m);
    if ((v < y) == increasing)
      lo = m;
    else
      hi = m;
  }
  double x = 0.5 * (lo + hi);
  // One Newton step against the last bisection rounding.
  const double d = b.derivative(x);
  if (d != 0.0) {
    const double refined = x - (b.map(x) - y) / d;
    if (domain.contains(refined)) x = refined;
  }
  return x;
}

double fixed_point(const Gdms& S, std::span<const Letter> cycle) {
  double x = S.vertex(S.branch(cycle.back()).source).mid();
  for (int it = 0; it < 200000; ++it) {
    const double next = apply_word(S, cycle, x);
    if (std::abs(next - x) <= 2.0 * eps * std::max(1e-300, std::abs(x)) || next == x) return next;
    x = next;
  }
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------

Gdms::Gdms(std::string name, std::vector<Interval> vertices, Generator edges,
           std::optional<std::size_t> edge_count, IncidenceMatrix incidence)
    : name_(std::move(name)),
      vertices_(std::move(vertices)),
      edges_(std::move(edges)),
      edge_count_(edge_count),
      incidence_(std::move(incidence)) {
  if (vertices_.empty()) throw ConfigError("a GDMS needs at least one vertex");
  for (const auto& v : vertices_)
    if (!(v.hi > v.lo)) throw ConfigError("vertex intervals must have positive length");
  if (edge_count_ && *edge_count_ == 0) throw ConfigError("a GDMS needs at least one edge");
}

Branch Gdms::branch(Letter e) const {
  if (edge_count_ && e >= *edge_count_)
    throw DomainError(name_ + ": edge " + std::to_string(e) + " does not exist");
  return edges_(e);
}

std::size_t Gdms::truncate(std::size_t N) const { return edge_count_ ? std::min(N, *edge_count_) : N; }

Gdms& Gdms::with_locator(Locator locator) {
  locator_ = std::move(locator);
  return *this;
}

double Gdms::xi() const {
  if (xi_) return *xi_;
  const Branch b = branch(0);
  return b.map(vertex(b.source).lo);
}

Gdms& Gdms::with_xi(double xi) {
  xi_ = xi;
  return *this;
}

bool Gdms::is_parabolic(Letter e) const {
  return std::any_of(parabolic_.begin(), parabolic_.end(), [e](const auto& p) { return p.letter == e; });
}

Gdms& Gdms::with_parabolic(std::vector<ParabolicPoint> points) {
  for (const auto& p : points) {
    const Branch b = branch(p.letter);
    if (std::abs(std::abs(b.derivative(p.fixed_point)) - 1.0) > 1e-10)
      throw ConfigError(name_ + ": |phi'| != 1 at the parabolic point of edge " + b.label);
    if (std::abs(b.map(p.fixed_point) - p.fixed_point) > 1e-12)
      throw ConfigError(name_ + ": parabolic point of edge " + b.label + " is not fixed");
    if (!incidence_(p.letter, p.letter)) throw ConfigError(name_ + ": parabolic edge must follow itself");
  }
  parabolic_ = std::move(points);
  return *this;
}

Gdms& Gdms::with_derived_words(std::shared_ptr<const std::vector<Word>> words) {
  derived_ = std::move(words);
  return *this;
}

double grid_contraction(const std::function<double(double)>& derivative, Interval domain, std::size_t points) {
  double best = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double x = domain.lo + domain.diam() * static_cast<double>(k) / static_cast<double>(points - 1);
    best = std::max(best, std::abs(derivative(x)));
  }
  return best;
}

bool grid_injective(const std::function<double(double)>& map, Interval domain, std::size_t points) {
  double previous = map(domain.lo);
  int direction = 0;
  for (std::size_t k = 1; k < points; ++k) {
    const double x = domain.lo + domain.diam() * static_cast<double>(k) / static_cast<double>(points - 1);
    const double v = map(x);
    const int d = v > previous ? 1 : (v < previous ? -1 : 0);
    if (d == 0 || (direction != 0 && d != direction)) return false;
    direction = d;
    previous = v;
  }
  return true;
}

// ---------------------------------------------------------------------------

double apply_word(const Gdms& S, std::span<const Letter> word, double x, double* derivative) {
  double d = 1.0;
  for (std::size_t k = word.size(); k-- > 0;) {
    const Branch b = S.branch(word[k]);
    d *= b.derivative(x);
    x = b.map(x);
  }
  if (derivative) *derivative = d;
  return x;
}

Composition compose_branch(const Gdms& S, std::span<const Letter> word) {
  if (word.empty()) throw DomainError("compose_branch: empty word");
  if (!is_admissible(word, S.incidence())) throw DomainError("compose_branch: inadmissible word");
  for (std::size_t k = 0; k + 1 < word.size(); ++k)
    if (S.branch(word[k]).source != S.branch(word[k + 1]).target)
      throw DomainError("compose_branch: vertex mismatch inside the word");
  const Interval& X = S.vertex(S.branch(word.back()).source);
  double dlo = 0.0, dhi = 0.0, dmid = 0.0;
  const double a = apply_word(S, word, X.lo, &dlo);
  const double b = apply_word(S, word, X.hi, &dhi);
  apply_word(S, word, X.mid(), &dmid);
  Composition c;
  c.image = {std::min(a, b), std::max(a, b)};
  c.derivative_min = std::min({std::abs(dlo), std::abs(dhi), std::abs(dmid)});
  c.derivative_max = std::max({std::abs(dlo), std::abs(dhi), std::abs(dmid)});
  c.derivative_mid = dmid;
  return c;
}

CodingPoint coding_point(const Gdms& S, const std::function<Letter(std::size_t)>& letter, double tol,
                         std::size_t max_length) {
  if (!(tol > 0.0)) throw DomainError("coding_point: tol must be positive");
  Word prefix;
  auto image_at = [&](std::size_t n) {
    while (prefix.size() < n) prefix.push_back(letter(prefix.size()));
    return compose_branch(S, std::span<const Letter>(prefix).first(n)).image;
  };
  std::size_t hi = 1;
  Interval img = image_at(1);
  while (!(img.diam() < tol)) {
    if (hi >= max_length)
      throw ConvergenceError("coding_point: prefixes up to length " + std::to_string(max_length) +
                             " do not contract below tol (parabolic systems need the jump transform)");
    hi = std::min(2 * hi, max_length);
    img = image_at(hi);
  }
  std::size_t lo = hi / 2;  // image(lo) too large (or lo == 0)
  while (hi - lo > 1) {
    const std::size_t m = (lo + hi) / 2;
    const Interval probe = image_at(m);
    if (probe.diam() < tol) {
      hi = m;
      img = probe;
    } else {
      lo = m;
    }
  }
  return {img.mid(), 0.5 * img.diam(), hi};
}

double gdms_map_apply(const Gdms& S, double x, std::size_t N) {
  auto image_of = [&](const Branch& b) {
    const Interval& X = S.vertex(b.source);
    const double a = b.map(X.lo), c = b.map(X.hi);
    return Interval{std::min(a, c), std::max(a, c)};
  };
  auto invert = [&](const Branch& b) {
    if (b.inverse) return b.inverse(x);
    return invert_monotone(b, S.vertex(b.source), x);
  };
  if (S.locator()) {
    const auto e = (*S.locator())(x);
    if (!e) return S.xi();
    const Branch b = S.branch(*e);
    const Interval img = image_of(b);
    if (near(x, img.lo) || near(x, img.hi))
      throw BoundaryError("gdms_map_apply: x on the boundary of the image of edge " + b.label);
    if (!img.interior(x)) return S.xi();
    return invert(b);
  }
  std::optional<Branch> hit;
  const std::size_t count = S.truncate(N);
  for (Letter e = 0; e < count; ++e) {
    Branch b = S.branch(e);
    const Interval img = image_of(b);
    if (near(x, img.lo) || near(x, img.hi))
      throw BoundaryError("gdms_map_apply: x on the boundary of the image of edge " + b.label);
    if (!img.interior(x)) continue;
    if (hit) throw BoundaryError("gdms_map_apply: x lies in two branch images (" + hit->label + ", " + b.label + ")");
    hit = std::move(b);
  }
  if (!hit) return S.xi();
  return invert(*hit);
}

OscReport verify_osc(const Gdms& S, std::size_t N) {
  struct Item {
    Interval img;
    Letter e;
    std::size_t target;
  };
  std::vector<Item> items;
  const std::size_t count = S.truncate(N);
  for (Letter e = 0; e < count; ++e) {
    const Branch b = S.branch(e);
    const Interval& X = S.vertex(b.source);
    const double a = b.map(X.lo), c = b.map(X.hi);
    items.push_back({{std::min(a, c), std::max(a, c)}, e, b.target});
  }
  std::sort(items.begin(), items.end(), [](const Item& p, const Item& q) {
    return std::tie(p.target, p.img.lo, p.e) < std::tie(q.target, q.img.lo, q.e);
  });
  OscReport report;
  report.edges = count;
  for (std::size_t k = 0; k < items.size(); ++k) {
    for (std::size_t j = k + 1; j < items.size() && items[j].target == items[k].target; ++j) {
      if (items[j].img.lo >= items[k].img.hi) break;
      const double overlap = std::min(items[j].img.hi, items[k].img.hi) - items[j].img.lo;
      // Shared endpoints that differ by rounding are not overlaps of interiors.
      if (overlap <= 8.0 * eps * std::max(1.0, std::abs(items[j].img.lo))) continue;
      if (report.overlaps.size() < 1000)
        report.overlaps.push_back({std::min(items[k].e, items[j].e), std::max(items[k].e, items[j].e), overlap});
      report.passed = false;
    }
  }
  return report;
}

BdpReport bdp_constant(const Gdms& S, std::size_t N, std::size_t n_max, std::size_t grid,
                       std::size_t random_words, std::uint64_t seed) {
  if (n_max == 0 || grid < 2) throw DomainError("bdp_constant: n_max >= 1 and grid >= 2 required");
  const std::size_t count = S.truncate(N);
  const auto& A = S.incidence();
  BdpReport report;
  for (std::size_t n = 1; n <= n_max; ++n) {
    std::vector<Word> words;
    for (Letter e = 0; e < count; ++e)
      if (n == 1 || A(e, e)) words.emplace_back(n, e);
    Rng rng(derive_seed(seed, n));
    for (std::size_t r = 0; r < random_words; ++r) {
      Word w{static_cast<Letter>(rng.below(count))};
      for (int tries = 0; w.size() < n && tries < 10000; ++tries) {
        const Letter c = static_cast<Letter>(rng.below(count));
        if (A(w.back(), c) && S.branch(w.back()).source == S.branch(c).target) w.push_back(c);
      }
      if (w.size() == n) words.push_back(std::move(w));
    }
    double K = 1.0;
    for (const Word& w : words) {
      const Interval& X = S.vertex(S.branch(w.back()).source);
      double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
      for (std::size_t k = 0; k < grid; ++k) {
        const double x = X.lo + X.diam() * static_cast<double>(k) / static_cast<double>(grid - 1);
        double d = 0.0;
        apply_word(S, w, x, &d);
        dmin = std::min(dmin, std::abs(d));
        dmax = std::max(dmax, std::abs(d));
      }
      if (dmin > 0.0) K = std::max(K, dmax / dmin);
      else K = std::numeric_limits<double>::infinity();
    }
    report.per_length.push_back(K);
    report.constant = std::max(report.constant, K);
  }
  // Bounded distortion means K_n saturates; keep growing over the upper half flags it.
  const double upper = report.per_length.back();
  const double mid = report.per_length[(n_max - 1) / 2];
  report.renyi_flag = n_max >= 2 && (!std::isfinite(upper) || upper > 1.2 * mid);
  return report;
}

// ---------------------------------------------------------------------------
// Built-in systems

Gdms gauss_cf() {
  Gdms S(
      "gauss", {{0.0, 1.0}},
      [](Letter e) {
        const double n = static_cast<double>(e) + 1.0;
        Branch b;
        b.letter = e;
        b.label = std::to_string(e + 1);
        b.map = [n](double x) { return 1.0 / (x + n); };
        b.derivative = [n](double x) { return -1.0 / ((x + n) * (x + n)); };
        b.inverse = [n](double y) { return 1.0 / y - n; };
        b.contraction = 1.0 / (n * n);
        return b;
      },
      std::nullopt, IncidenceMatrix::full());
  S.with_locator([](double x) -> std::optional<Letter> {
    if (!(x > 0.0) || x > 1.0) return std::nullopt;
    const double n = std::floor(1.0 / x);
    if (n > 4.0e9) return std::nullopt;
    return static_cast<Letter>(n - 1.0);
  });
  return S;
}

Gdms backward_cf() {
  Gdms S(
      "backward-cf", {{0.0, 1.0}},
      [](Letter e) {
        const double i = static_cast<double>(e) + 2.0;
        Branch b;
        b.letter = e;
        b.label = std::to_string(e + 2);
        b.map = [i](double x) { return 1.0 / (i - x); };
        b.derivative = [i](double x) { return 1.0 / ((i - x) * (i - x)); };
        b.inverse = [i](double y) { return i - 1.0 / y; };
        b.contraction = 1.0 / ((i - 1.0) * (i - 1.0));
        return b;
      },
      std::nullopt, IncidenceMatrix::full());
  S.with_locator([](double y) -> std::optional<Letter> {
    if (!(y > 0.0) || y > 1.0) return std::nullopt;
    // phi_i has image [1 / i, 1 / (i - 1)].
    const double i = std::ceil(1.0 / y);
    if (i < 2.0 || i > 4.0e9) return std::nullopt;
    return static_cast<Letter>(i - 2.0);
  });
  S.with_parabolic({{0, 1.0}});
  return S;
}

Gdms manneville_pomeau(double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("manneville_pomeau: alpha must be positive");
  auto f = [alpha](double x) { return x + std::pow(x, 1.0 + alpha); };
  auto fprime = [alpha](double x) { return 1.0 + (1.0 + alpha) * std::pow(x, alpha); };
  // Breakpoint c with f(c) = 1.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (lo + hi);
    (f(m) < 1.0 ? lo : hi) = m;
  }
  const double c = 0.5 * (lo + hi);
  // x in [a, b] with f(x) - shift = y, by safeguarded Newton.
  auto solve = [f, fprime](double y, double shift, double a, double b) {
    const double target = y + shift;
    double x = std::clamp(shift == 0.0 ? y : 0.5 * (a + b), a, b);
    for (int it = 0; it < 100; ++it) {
      const double g = f(x) - target;
      if (g == 0.0) return x;
      (g < 0.0 ? a : b) = x;
      double next = x - g / fprime(x);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - x) <= 1e-17 * std::max(std::abs(x), 1e-300)) return next;
      x = next;
    }
    return x;
  };
  Gdms S(
      "manneville-pomeau", {{0.0, 1.0}},
      [=](Letter e) {
        Branch b;
        b.letter = e;
        b.label = std::to_string(e);
        const double shift = e == 0 ? 0.0 : 1.0;
        const double a = e == 0 ? 0.0 : c, bb = e == 0 ? c : 1.0;
        b.map = [=](double y) { return solve(y, shift, a, bb); };
        b.derivative = [=](double y) { return 1.0 / fprime(solve(y, shift, a, bb)); };
        b.inverse = [=](double x) { return f(x) - shift; };
        b.contraction = e == 0 ? 1.0 : 1.0 / fprime(c);
        return b;
      },
      2, IncidenceMatrix::full());
  S.with_locator([c](double y) -> std::optional<Letter> {
    if (y < 0.0 || y > 1.0) return std::nullopt;
    return y < c ? 0u : 1u;
  });
  S.with_parabolic({{0, 0.0}});
  return S;
}

Gdms gls(std::vector<Interval> cells, std::string name) {
  if (cells.empty()) throw ConfigError("gls: no cells");
  std::sort(cells.begin(), cells.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  double total = 0.0;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!(cells[k].hi > cells[k].lo) || cells[k].lo < 0.0 || cells[k].hi > 1.0)
      throw ConfigError("gls: cells must be nondegenerate subintervals of [0, 1]");
    if (k > 0 && cells[k].lo < cells[k - 1].hi - 1e-15) throw ConfigError("gls: cells overlap");
    total += cells[k].diam();
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("gls: cell lengths must sum to 1");
  auto shared = std::make_shared<std::vector<Interval>>(std::move(cells));
  const std::size_t count = shared->size();
  return gls([shared](Letter e) { return (*shared)[e]; }, count,
             [shared](double x) -> std::optional<Letter> {
               auto it = std::upper_bound(shared->begin(), shared->end(), x,
                                          [](double v, const Interval& c) { return v < c.lo; });
               if (it == shared->begin()) return std::nullopt;
               --it;
               if (x > it->hi) return std::nullopt;
               return static_cast<Letter>(it - shared->begin());
             },
             std::move(name));
}

Gdms gls(std::function<Interval(Letter)> cell, std::optional<std::size_t> count,
         std::function<std::optional<Letter>(double)> locator, std::string name) {
  Gdms S(
      std::move(name), {{0.0, 1.0}},
      [cell](Letter e) {
        const Interval I = cell(e);
        const double a = I.diam(), off = I.lo;
        Branch b;
        b.letter = e;
        b.label = std::to_string(e);
        b.map = [a, off](double x) { return a * x + off; };
        b.derivative = [a](double) { return a; };
        b.inverse = [a, off](double y) { return (y - off) / a; };
        b.contraction = a;
        b.affine = AffineParams{a, off};
        return b;
      },
      count, IncidenceMatrix::full());
  if (locator) S.with_locator(std::move(locator));
  return S;
}

Gdms luroth() {
  auto S = gls(
      [](Letter e) {
        const double n = static_cast<double>(e) + 1.0;
        return Interval{1.0 / (n + 1.0), 1.0 / n};
      },
      std::nullopt,
      [](double x) -> std::optional<Letter> {
        if (!(x > 0.0) || x > 1.0) return std::nullopt;
        const double n = std::floor(1.0 / x);
        if (n > 4.0e9) return std::nullopt;
        return static_cast<Letter>(n - 1.0);
      },
      "luroth");
  return S;
}

Gdms moran(std::vector<double> ratios) {
  if (ratios.empty()) throw ConfigError("moran: no ratios");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("moran: ratios must lie in (0, 1)");
    total += r;
  }
  if (total > 1.0 + 1e-12) throw ConfigError("moran: ratios sum above 1 (images would overlap)");
  const double gap = ratios.size() > 1 ? (1.0 - total) / static_cast<double>(ratios.size() - 1) : 0.0;
  std::vector<AffineParams> params;
  double left = 0.0;
  for (double r : ratios) {
    params.push_back({r, left});
    left += r + gap;
  }
  auto shared = std::make_shared<std::vector<AffineParams>>(std::move(params));
  const std::size_t count = shared->size();
  return Gdms(
      "moran", {{0.0, 1.0}},
      [shared](Letter e) {
        const auto [a, off] = (*shared)[e];
        Branch b;
        b.letter = e;
        b.label = std::to_string(e);
        b.map = [a, off](double x) { return a * x + off; };
        b.derivative = [a](double) { return a; };
        b.inverse = [a, off](double y) { return (y - off) / a; };
        b.contraction = a;
        b.affine = AffineParams{a, off};
        return b;
      },
      count, IncidenceMatrix::full());
}

// ---------------------------------------------------------------------------
// Jump transform

Gdms jump_transform(const Gdms& P, const JumpOptions& options) {
  if (P.parabolic().empty()) return P;
  if (options.n_cap == 0 || options.grid < 2) throw ConfigError("jump_transform: n_cap >= 1 and grid >= 2");
  const std::size_t N = P.truncate(options.original_letters);
  const IncidenceMatrix& A = P.incidence();

  auto words = std::make_shared<std::vector<Word>>();
  auto bounds = std::make_shared<std::vector<double>>();
  for (Letter e = 0; e < N; ++e) {
    if (P.is_parabolic(e)) continue;
    words->push_back({e});
    const Branch b = P.branch(e);
    bounds->push_back(grid_contraction(b.derivative, P.vertex(b.source), options.grid));
  }
  for (const auto& point : P.parabolic()) {
    const Letter i = point.letter;
    const Branch bi = P.branch(i);
    for (Letter j = 0; j < N; ++j) {
      if (j == i || !A(i, j)) continue;
      const Branch bj = P.branch(j);
      if (bj.target != bi.source) continue;
      // One pass over n = 1..n_cap per (i, j): push the grid through phi_j, then phi_i repeatedly.
      const Interval& X = P.vertex(bj.source);
      std::vector<double> y(options.grid), d(options.grid);
      for (std::size_t k = 0; k < options.grid; ++k) {
        const double z = X.lo + X.diam() * static_cast<double>(k) / static_cast<double>(options.grid - 1);
        d[k] = std::abs(bj.derivative(z));
        y[k] = bj.map(z);
      }
      std::vector<double> per_n(options.n_cap);
      for (std::size_t n = 1; n <= options.n_cap; ++n) {
        double best = 0.0;
        for (std::size_t k = 0; k < options.grid; ++k) {
          d[k] *= std::abs(bi.derivative(y[k]));
          y[k] = bi.map(y[k]);
          best = std::max(best, d[k]);
        }
        per_n[n - 1] = best;
      }
      for (std::size_t n = 1; n <= options.n_cap; ++n) {
        Word w(n, i);
        w.push_back(j);
        words->push_back(std::move(w));
        bounds->push_back(per_n[n - 1]);
      }
    }
  }
  for (std::size_t k = 0; k < words->size(); ++k) {
    if (!((*bounds)[k] < 1.0)) {
      std::ostringstream os;
      os << "jump_transform: derived branch of length " << (*words)[k].size() << " ending in "
         << P.branch((*words)[k].back()).label << " is not contracting (bound " << (*bounds)[k] << ")";
      throw ConvergenceError(os.str());
    }
  }

  const Gdms original = P;
  const std::shared_ptr<const std::vector<Word>> table = words;
  IncidenceMatrix star(
      [table, A](Letter a, Letter b) {
        if (a >= table->size() || b >= table->size()) return false;
        return A((*table)[a].back(), (*table)[b].front());
      },
      false, "jump(" + A.name() + ")");
  star = star.with_witness({});
  Gdms S(
      P.name() + "*", P.vertices(),
      [original, table, bounds](Letter e) {
        const Word& w = (*table)[e];
        Branch b;
        b.letter = e;
        const Branch first = original.branch(w.front());
        const Branch last = original.branch(w.back());
        b.source = last.source;
        b.target = first.target;
        b.label = w.size() == 1 ? last.label
                                : first.label + "^" + std::to_string(w.size() - 1) + " " + last.label;
        b.map = [original, table, e](double x) { return apply_word(original, (*table)[e], x); };
        b.derivative = [original, table, e](double x) {
          double d = 0.0;
          apply_word(original, (*table)[e], x, &d);
          return d;
        };
        b.contraction = (*bounds)[e];
        return b;
      },
      table->size(), star);
  S.with_derived_words(table);
  return S;
}

// ---------------------------------------------------------------------------

AsymptoticsReport parabolic_asymptotics(const Gdms& P, Letter i, std::size_t n_lo, std::size_t n_hi,
                                        std::size_t z_samples, double max_residual) {
  if (!P.is_parabolic(i)) throw DomainError("parabolic_asymptotics: letter is not parabolic");
  if (n_lo == 0 || n_hi <= n_lo) throw DomainError("parabolic_asymptotics: need 1 <= n_lo < n_hi");
  const Branch bi = P.branch(i);
  // z from X_i = union of phi_j(X) over a few admissible j != i.
  std::vector<double> zs;
  std::vector<Letter> others;
  for (Letter j = 0; j < P.truncate(8); ++j)
    if (j != i && P.incidence()(i, j) && P.branch(j).target == bi.source) others.push_back(j);
  if (others.empty()) throw DomainError("parabolic_asymptotics: no letter can follow the parabolic one");
  for (std::size_t k = 0; k < z_samples; ++k) {
    const Branch bj = P.branch(others[k % others.size()]);
    const Interval& X = P.vertex(bj.source);
    const double u = (static_cast<double>(k / others.size()) + 0.5) /
                     static_cast<double>((z_samples + others.size() - 1) / others.size());
    zs.push_back(bj.map(X.lo + u * X.diam()));
  }
  // Geometrically spaced sample lengths.
  std::vector<std::size_t> ns;
  for (double t = std::log(double(n_lo)); t <= std::log(double(n_hi)) + 1e-12; t += std::log(10.0) / 32.0) {
    const auto n = static_cast<std::size_t>(std::llround(std::exp(t)));
    if (ns.empty() || n != ns.back()) ns.push_back(std::min(n, n_hi));
  }
  if (ns.back() != n_hi) ns.push_back(n_hi);
  std::vector<std::vector<double>> logd(ns.size(), std::vector<double>(zs.size()));
  for (std::size_t k = 0; k < zs.size(); ++k) {
    double y = zs[k], d = 0.0;  // log|derivative|
    std::size_t next = 0;
    for (std::size_t n = 1; n <= n_hi; ++n) {
      d += std::log(std::abs(bi.derivative(y)));
      y = bi.map(y);
      if (n == ns[next]) logd[next++][k] = d;
    }
  }
  std::vector<double> xs(ns.size()), ys(ns.size());
  for (std::size_t r = 0; r < ns.size(); ++r) {
    xs[r] = std::log(static_cast<double>(ns[r]));
    double s = 0.0;
    for (double v : logd[r]) s += v;
    ys[r] = s / static_cast<double>(zs.size());
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    sxy += (xs[r] - mx) * (ys[r] - my);
    sxx += (xs[r] - mx) * (xs[r] - mx);
  }
  AsymptoticsReport rep;
  rep.slope = sxy / sxx;
  rep.samples = xs.size() * zs.size();
  double ss = 0.0;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const double fit = my + rep.slope * (xs[r] - mx);
    ss += (ys[r] - fit) * (ys[r] - fit);
  }
  rep.residual = std::sqrt(ss / xs.size());
  rep.beta = rep.slope < -1.0 ? 1.0 / (-rep.slope - 1.0) : std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t r = 0; r < ns.size(); ++r)
    for (double v : logd[r]) {
      const double c = v - rep.slope * xs[r];
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  rep.spread = std::exp(hi - lo);
  if (rep.residual > max_residual)
    throw ConvergenceError("parabolic_asymptotics: power-law fit residual " + std::to_string(rep.residual) +
                           " exceeds " + std::to_string(max_residual));
  return rep;
}

// ---------------------------------------------------------------------------

Potential geometric_potential(const Gdms& S, double t, double q, std::optional<Potential> theta,
                              double p_theta, std::size_t memory, TailRule tail) {
  if (memory == 0) throw ConfigError("geometric_potential: memory must be >= 1");
  const std::size_t m = theta ? std::max(memory, theta->memory()) : memory;
  const Gdms system = S;
  const IncidenceMatrix& A = S.incidence();
  auto f = [system, t, q, theta, p_theta, memory, tail, A](std::span<const Letter> w) {
    double value = 0.0;
    if (t != 0.0) {
      // pi(sigma w): w_1 .. w_{memory-1} followed by the tail rule.
      Word cycle;
      bool repeat = tail == TailRule::repeat_last && A(w[memory - 1], w[memory - 1]);
      if (repeat) {
        cycle = {w[memory - 1]};
      } else {
        cycle.assign(w.begin() + 1, w.begin() + static_cast<std::ptrdiff_t>(memory));
        cycle.push_back(w[0]);
        if (!is_admissible(cycle, A) || !A(cycle.back(), cycle.front()))
          throw DomainError("geometric_potential: no admissible periodic continuation");
      }
      const double p = fixed_point(system, cycle);
      double x = p;
      if (repeat && memory > 1)
        x = apply_word(system, std::span<const Letter>(w).subspan(1, memory - 2), p);
      else if (!repeat)
        x = p;
      const Branch b = system.branch(w[0]);
      value += t * std::log(std::abs(b.derivative(x)));
    }
    if (q != 0.0 && theta) value += q * ((*theta)(w) - p_theta);
    return value;
  };
  return Potential(f, m, "geometric");
}

}  // namespace thermo
