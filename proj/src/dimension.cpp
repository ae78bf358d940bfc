#include "thermo/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "thermo/errors.hpp"
#include "thermo/parallel.hpp"

namespace thermo {

namespace {

struct MeanStd {
  double mean = 0.0, std = 0.0, se = 0.0;
};

MeanStd summarize(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  const double n = static_cast<double>(v.size());
  r.mean = pairwise_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - r.mean) * (v[i] - r.mean);
  r.std = v.size() > 1 ? std::sqrt(pairwise_sum(sq) / (n - 1.0)) : 0.0;
  r.se = r.std / std::sqrt(n);
  return r;
}

double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

std::optional<Letter> find_letter(const Gdms& S, double x, std::size_t N) {
  if (S.locator()) return (*S.locator())(x);
  const std::size_t count = S.truncate(N);
  for (Letter e = 0; e < count; ++e) {
    const Branch b = S.branch(e);
    const Interval& X = S.vertex(b.source);
    const double a = b.map(X.lo), c = b.map(X.hi);
    if (std::min(a, c) < x && x < std::max(a, c)) return e;
  }
  return std::nullopt;
}

// Index of the cell containing x; cells are sorted and abut.
std::size_t cell_of(const GlsCells& cells, double x) {
  const auto it = std::upper_bound(cells.left.begin(), cells.left.end(), x);
  return static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cells.left.begin() - 1, 0));
}

// phi_{w_0} o phi_{w_1} o ... (1/2) for affine cell maps, evaluated innermost first.
double code(const GlsCells& cells, const Word& w) {
  double x = 0.5;
  for (std::size_t j = w.size(); j-- > 0;) x = cells.left[w[j]] + cells.length[w[j]] * x;
  return x;
}

std::size_t coding_depth(const GlsCells& cells) {
  const double longest = *std::max_element(cells.length.begin(), cells.length.end());
  if (longest >= 1.0) return 1;
  return static_cast<std::size_t>(std::ceil(64.0 * std::numbers::ln2 / -std::log(longest))) + 2;
}

}  // namespace

LyapunovEstimate lyapunov_birkhoff(const MapStep& step, const PointSampler& initial, std::size_t n_steps,
                                   std::size_t n_orbits, std::uint64_t seed, unsigned threads) {
  if (n_steps == 0 || n_orbits == 0) throw ConfigError("lyapunov_birkhoff: need at least one orbit and one step");
  std::vector<double> per_orbit(n_orbits);
  std::vector<std::size_t> restarts(n_orbits);
  parallel_for(n_orbits, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    double x = initial(rng);
    double sum = 0.0;
    for (std::size_t j = 0; j < n_steps; ++j) {
      double ld = 0.0;
      const double next = step(x, ld);
      if (!std::isfinite(ld) || !(next >= 0.0 && next <= 1.0))
        throw DomainError("lyapunov_birkhoff: orbit escaped the domain at x = " + std::to_string(x));
      sum += ld;
      x = next;
      if (x == 0.0) {
        x = initial(rng);
        ++restarts[i];
      }
    }
    per_orbit[i] = sum / static_cast<double>(n_steps);
  });
  const MeanStd m = summarize(per_orbit);
  LyapunovEstimate r;
  r.value = m.mean;
  r.standard_error = m.se;
  r.method = "birkhoff";
  r.orbits = n_orbits;
  r.steps = n_steps;
  for (std::size_t c : restarts) r.restarts += c;
  return r;
}

MapStep gdms_step(const Gdms& S, std::size_t N) {
  return [S, N](double x, double& ld) {
    const auto e = find_letter(S, x, N);
    if (!e) throw DomainError("gdms_step: x outside every branch image");
    const double y = gdms_map_apply(S, x, N);
    ld = -std::log(std::abs(S.branch(*e).derivative(y)));
    return y;
  };
}

double gauss_measure_draw(Rng& rng) { return std::exp2(rng.uniform()) - 1.0; }

LyapunovEstimate lyapunov_gauss(std::size_t n_steps, std::size_t n_orbits, std::uint64_t seed, unsigned threads) {
  const MapStep step = [](double x, double& ld) {
    const double v = 1.0 / x;
    ld = 2.0 * std::log(v);
    return v - std::floor(v);
  };
  return lyapunov_birkhoff(step, gauss_measure_draw, n_steps, n_orbits, seed, threads);
}

LyapunovEstimate lyapunov_beta(const BetaSystem& B, std::size_t n_steps, std::size_t n_orbits, std::uint64_t seed,
                               unsigned threads) {
  const double beta = B.beta();
  const MapStep step = [beta](double x, double& ld) {
    ld = std::log(beta);
    const double v = beta * x;
    return v - std::floor(v);
  };
  return lyapunov_birkhoff(step, [](Rng& rng) { return rng.uniform_open(); }, n_steps, n_orbits, seed, threads);
}

GlsCells gls_cells(const BetaSystem& B, std::size_t N) {
  std::size_t count = std::min(N, B.available_cells());
  if (B.cell_count()) count = std::min(count, *B.cell_count());
  if (count == 0) throw ConfigError("gls_cells: need at least one cell");
  GlsCells c;
  c.beta = B.beta();
  for (std::size_t n = 1; n <= count; ++n) {
    const auto cell = B.cell(n);
    c.left.push_back(cell.left);
    c.length.push_back(cell.length);
    c.level.push_back(cell.index.k);
  }
  return c;
}

Potential gls_potential(const GlsCells& cells, const std::string& kind, const std::vector<double>& weights) {
  std::vector<double> v(cells.length.size());
  if (kind == "parry") {
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = std::log(cells.length[n]);
  } else if (kind == "zero") {
    std::fill(v.begin(), v.end(), 0.0);
  } else if (kind == "bernoulli") {
    if (weights.size() != v.size())
      throw ConfigError("gls_potential: bernoulli needs one weight per cell (" + std::to_string(v.size()) + ")");
    for (std::size_t n = 0; n < v.size(); ++n) {
      if (!(weights[n] > 0.0)) throw ConfigError("gls_potential: weights must be positive");
      v[n] = std::log(weights[n]);
    }
  } else {
    throw ConfigError("gls_potential: unknown kind '" + kind + "'");
  }
  return Potential::memory1(std::move(v));
}

LyapunovEstimate lyapunov_gls_birkhoff(const BetaSystem& B, const GibbsMarkovMeasure& mu, std::size_t n_steps,
                                       std::size_t n_orbits, std::uint64_t seed, unsigned threads) {
  const GlsCells cells = gls_cells(B, mu.space().truncation());
  if (cells.length.size() < mu.space().truncation())
    throw DomainError("lyapunov_gls_birkhoff: chain alphabet exceeds the resolved cells");
  const std::size_t depth = coding_depth(cells);
  constexpr std::size_t block = 4096;
  std::vector<double> per_orbit(n_orbits);
  parallel_for(n_orbits, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    std::size_t state = mu.draw_state(rng);
    Word w(mu.space().state(state).begin(), mu.space().state(state).end());
    auto extend = [&](std::size_t target) {
      while (w.size() < target) {
        Letter e = 0;
        state = mu.step_forward(state, rng, e);
        w.push_back(e);
      }
    };
    std::vector<double> terms;
    terms.reserve(n_steps);
    std::size_t done = 0;
    while (done < n_steps) {
      const std::size_t len = std::min(block, n_steps - done);
      extend(len + depth);
      // x_t = phi_{w_t}(x_{t+1}): backward over the block, forward in time.
      std::vector<double> xs(len);
      double x = 0.5;
      for (std::size_t t = len + depth; t-- > 0;) {
        x = cells.left[w[t]] + cells.length[w[t]] * x;
        if (t < len) xs[t] = x;
      }
      for (std::size_t t = 0; t < len; ++t) terms.push_back(-std::log(cells.length[cell_of(cells, xs[t])]));
      w.erase(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(len));
      done += len;
    }
    per_orbit[i] = pairwise_sum(terms) / static_cast<double>(n_steps);
  });
  const MeanStd m = summarize(per_orbit);
  LyapunovEstimate r;
  r.value = m.mean;
  r.standard_error = m.se;
  r.method = "birkhoff";
  r.orbits = n_orbits;
  r.steps = n_steps;
  return r;
}

LyapunovEstimate lyapunov_gls_closed_form(const BetaSystem& B, const std::vector<double>& weights,
                                          double max_tail_mass) {
  const GlsCells cells = gls_cells(B, weights.size());
  if (cells.level.size() < weights.size())
    throw DomainError("lyapunov_gls_closed_form: more weights than resolved cells");
  std::vector<double> terms(weights.size());
  for (std::size_t n = 0; n < weights.size(); ++n) {
    if (weights[n] < 0.0) throw ConfigError("lyapunov_gls_closed_form: negative weight");
    terms[n] = static_cast<double>(cells.level[n] + 1) * weights[n];
  }
  const double log_beta = std::log(B.beta());
  LyapunovEstimate r;
  r.method = "closed-form-gls";
  r.value = log_beta * pairwise_sum(terms);
  r.tail_mass = std::max(0.0, 1.0 - pairwise_sum(weights));
  r.tail_bound = log_beta * static_cast<double>(cells.level.back() + 1) * r.tail_mass;
  if (r.tail_mass > max_tail_mass)
    throw ConvergenceError("lyapunov_gls_closed_form: tail mass " + std::to_string(r.tail_mass) +
                           " above the bound " + std::to_string(max_tail_mass));
  return r;
}

LyapunovEstimate lyapunov_golden_closed_form(double w2) {
  LyapunovEstimate r;
  r.method = "closed-form-golden";
  r.value = std::log(std::numbers::phi) * (1.0 + w2);
  return r;
}

double entropy_of_induced(const GibbsMarkovMeasure& mu, const Potential& psi) {
  return entropy_from_pressure(mu, psi);
}

PointCloud lebesgue_cloud(std::size_t dim, std::size_t M, std::uint64_t seed) {
  PointCloud c{dim, std::vector<double>(dim * M)};
  Rng rng(seed);
  for (double& v : c.coords) v = rng.uniform();
  return c;
}

PointCloud cantor_cloud(std::size_t M, std::uint64_t seed, std::size_t digits) {
  PointCloud c{1, std::vector<double>(M)};
  Rng rng(seed);
  for (double& v : c.coords) {
    double x = 0.0, scale = 1.0;
    for (std::size_t j = 0; j < digits; ++j) {
      scale /= 3.0;
      if (rng.bits() >> 63) x += 2.0 * scale;
    }
    v = x;
  }
  return c;
}

PointCloud gauss_cloud(std::size_t M, std::uint64_t seed) {
  PointCloud c{1, std::vector<double>(M)};
  Rng rng(seed);
  for (double& v : c.coords) v = gauss_measure_draw(rng);
  return c;
}

LocalDimensionEstimate local_dimension(const PointCloud& cloud, const LocalDimensionOptions& o) {
  const std::size_t M = cloud.size();
  const std::size_t d = cloud.dim;
  if (M < 2 || d == 0) throw DomainError("local_dimension: cloud too small");
  if (o.j_min > o.j_max || o.j_min < 0) throw ConfigError("local_dimension: bad radii range");

  std::vector<std::size_t> centers(o.centers);
  {
    Rng rng(o.seed);
    for (auto& c : centers) c = rng.below(M);
  }
  struct Slot {
    bool ok = false;
    double slope = 0.0, upper = 0.0;
    int j_lo = 0, j_hi = 0;
  };
  std::vector<Slot> slots(centers.size());
  parallel_for(centers.size(), o.threads, [&](std::size_t ci) {
    const std::size_t c = centers[ci];
    // Squared distance d2 < 2^{-2j} iff frexp exponent of d2 is <= -2j.
    std::vector<std::size_t> hist(static_cast<std::size_t>(2 * o.j_max + 2), 0);
    std::size_t coincident = 0;
    for (std::size_t p = 0; p < M; ++p) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double delta = cloud.at(p, k) - cloud.at(c, k);
        d2 += delta * delta;
      }
      if (d2 == 0.0) {
        ++coincident;
        continue;
      }
      int e = 0;
      std::frexp(d2, &e);
      if (e > -2 * o.j_min) continue;
      hist[static_cast<std::size_t>(std::min(-e, 2 * o.j_max + 1))] += 1;
    }
    std::vector<double> xs, ys;
    std::vector<int> js;
    for (int j = o.j_min; j <= o.j_max; ++j) {
      const double r = std::ldexp(1.0, -j);
      if (o.edge_correction) {
        bool inside = true;
        for (std::size_t k = 0; k < d; ++k)
          inside = inside && cloud.at(c, k) - r >= 0.0 && cloud.at(c, k) + r <= 1.0;
        if (!inside) continue;
      }
      std::size_t count = coincident - 1;  // leave the center out
      for (std::size_t idx = static_cast<std::size_t>(2 * j); idx < hist.size(); ++idx) count += hist[idx];
      if (count < o.min_count) continue;
      xs.push_back(std::log(r));
      ys.push_back(std::log(static_cast<double>(count) / static_cast<double>(M - 1)));
      js.push_back(j);
    }
    if (xs.size() < 2) return;
    Slot& s = slots[ci];
    s.ok = true;
    s.slope = ls_slope(xs, ys);
    const std::size_t half = std::min(xs.size() - 2, xs.size() / 2);
    s.upper = ls_slope(std::vector<double>(xs.begin() + static_cast<std::ptrdiff_t>(half), xs.end()),
                       std::vector<double>(ys.begin() + static_cast<std::ptrdiff_t>(half), ys.end()));
    s.j_lo = js.front();
    s.j_hi = js.back();
  });

  LocalDimensionEstimate r;
  r.centers_drawn = centers.size();
  std::vector<double> upper;
  int j_lo = o.j_max + 1, j_hi = o.j_min - 1;
  for (const Slot& s : slots) {
    if (!s.ok) continue;
    r.slopes.push_back(s.slope);
    upper.push_back(s.upper);
    j_lo = std::min(j_lo, s.j_lo);
    j_hi = std::max(j_hi, s.j_hi);
  }
  if (r.slopes.empty())
    throw DomainError("local_dimension: no center has two radii with at least " + std::to_string(o.min_count) +
                      " neighbours");
  const MeanStd m = summarize(r.slopes);
  r.mean = m.mean;
  r.std = m.std;
  r.standard_error = m.se;
  r.upper_half_mean = summarize(upper).mean;
  r.r_max = std::ldexp(1.0, -j_lo);
  r.r_min = std::ldexp(1.0, -j_hi);
  return r;
}

GlsClouds sample_gls_clouds(const GlsCells& cells, const GibbsMarkovMeasure& mu, std::size_t M, std::uint64_t seed,
                            unsigned threads) {
  const StateSpace& sp = mu.space();
  if (sp.truncation() > cells.length.size()) throw DomainError("sample_gls_clouds: chain alphabet exceeds the cells");
  const std::size_t depth = coding_depth(cells);
  GlsClouds out;
  out.base = {1, std::vector<double>(M)};
  out.fiber = {1, std::vector<double>(M)};
  out.joint = {2, std::vector<double>(2 * M)};

  auto future = [&](std::size_t state, Rng& rng) {
    Word w(sp.state(state).begin(), sp.state(state).end());
    while (w.size() < depth) {
      Letter e = 0;
      state = mu.step_forward(state, rng, e);
      w.push_back(e);
    }
    return w;
  };
  // Letters w_{-1}, w_{-2}, ... in the order the y-maps apply them.
  auto past = [&](std::size_t state, Rng& rng) {
    Word w;
    w.reserve(depth);
    while (w.size() < depth) {
      Letter e = 0;
      state = mu.step_backward(state, rng, e);
      w.push_back(e);
    }
    return w;
  };

  // The fiber is conditioned on one base point drawn from the chain.
  Rng anchor_rng(derive_seed(seed, ~std::uint64_t{0}));
  const std::size_t anchor = mu.draw_state(anchor_rng);

  parallel_for(M, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const std::size_t s = mu.draw_state(rng);
    const double x = code(cells, future(s, rng));
    const double y = code(cells, past(s, rng));
    out.base.coords[i] = x;
    out.joint.coords[2 * i] = x;
    out.joint.coords[2 * i + 1] = y;
    out.fiber.coords[i] = code(cells, past(anchor, rng));
  });
  return out;
}

namespace {

struct GlsSetup {
  GlsCells cells;
  Potential psi;
  GibbsMarkovMeasure mu;
};

GlsSetup gls_setup(const BetaSystem& B, const DimensionCheckOptions& o) {
  GlsCells cells = gls_cells(B, o.cells);
  Potential psi = gls_potential(cells, o.potential, o.weights);
  const auto eigen = rpf_eigendata(psi, IncidenceMatrix::full(), 1, cells.length.size());
  return {std::move(cells), psi, GibbsMarkovMeasure(eigen)};
}

bool within(double measured, double predicted, double tol) {
  if (predicted == 0.0) return std::abs(measured) <= tol;
  return std::abs(measured - predicted) <= tol * std::abs(predicted);
}

DimensionReport predictions(const BetaSystem& B, const GlsSetup& g) {
  DimensionReport r;
  r.beta = B.beta();
  r.cells = g.cells.length.size();
  r.cell_weights = g.mu.letter_marginal();
  r.entropy = entropy_of_induced(g.mu, g.psi);
  r.lyapunov = lyapunov_gls_closed_form(B, r.cell_weights, 1e-9);
  r.predicted_fiber = r.entropy / r.lyapunov.value;
  r.predicted_global = 2.0 * r.predicted_fiber;
  return r;
}

LocalDimensionOptions with_run(LocalDimensionOptions l, const DimensionCheckOptions& o, std::uint64_t salt) {
  l.threads = o.threads;
  l.seed = derive_seed(o.seed, salt);
  return l;
}

}  // namespace

DimensionReport conditional_dimension_check(const BetaSystem& B, const DimensionCheckOptions& o) {
  const GlsSetup g = gls_setup(B, o);
  DimensionReport r = predictions(B, g);
  const GlsClouds clouds = sample_gls_clouds(g.cells, g.mu, o.M, o.seed, o.threads);
  r.fiber = local_dimension(clouds.fiber, with_run(o.one_d, o, 1));
  r.fiber_ok = within(r.fiber->mean, r.predicted_fiber, o.tolerance);
  return r;
}

DimensionReport global_dimension_check(const BetaSystem& B, const DimensionCheckOptions& o) {
  const GlsSetup g = gls_setup(B, o);
  DimensionReport r = predictions(B, g);
  const GlsClouds clouds = sample_gls_clouds(g.cells, g.mu, o.M, o.seed, o.threads);
  r.fiber = local_dimension(clouds.fiber, with_run(o.one_d, o, 1));
  r.base = local_dimension(clouds.base, with_run(o.one_d, o, 2));
  r.global = local_dimension(clouds.joint, with_run(o.two_d, o, 3));
  r.fiber_ok = within(r.fiber->mean, r.predicted_fiber, o.tolerance);
  r.global_ok = within(r.global->mean, r.predicted_global, o.tolerance);
  r.additivity_gap = std::abs(r.global->mean - (r.base->mean + r.fiber->mean));
  r.additivity_error = std::sqrt(r.global->std * r.global->std + r.base->std * r.base->std +
                                 r.fiber->std * r.fiber->std);
  r.additivity_ok = r.additivity_gap < r.additivity_error;
  return r;
}

Gdms finite_subsystem(const Gdms& S, std::size_t N) {
  const std::size_t count = S.truncate(N);
  auto shared = std::make_shared<const Gdms>(S);
  Gdms out(S.name() + "|" + std::to_string(count), S.vertices(), [shared](Letter e) { return shared->branch(e); },
           count, S.incidence());
  return out;
}

double geometric_pressure(const Gdms& S, double t, double q, const std::optional<Potential>& theta, double p_theta,
                          const TemperatureOptions& o) {
  const Potential psi = geometric_potential(S, t, q, theta, p_theta, o.memory, o.tail);
  const std::size_t states = std::max<std::size_t>(1, o.memory - 1);
  return rpf_eigendata(psi, S.incidence(), states, S.truncate(o.N)).log_rho;
}

TemperatureResult temperature(const Gdms& S, const std::optional<Potential>& theta, double q,
                              const TemperatureOptions& o) {
  TemperatureResult r;
  r.q = q;
  const std::size_t N = S.truncate(o.N);
  if (theta) {
    const std::size_t m = std::max<std::size_t>(1, theta->memory() - 1);
    r.p_theta = rpf_eigendata(*theta, S.incidence(), m, N).log_rho;
  }
  const double lo = o.lo;
  const double hi = o.hi.value_or(2.0);
  if (!(lo < hi)) throw ConfigError("temperature: empty bracket");
  const bool countable = !S.edge_count().has_value();

  auto P = [&](double t) {
    ++r.evaluations;
    return geometric_pressure(S, t, q, theta, r.p_theta, o);
  };
  for (std::size_t k = 0; k <= o.probes + 1; ++k) {
    const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(o.probes + 1);
    bool summable = true;
    if (countable) {
      const Potential psi = geometric_potential(S, t, q, theta, r.p_theta, o.memory, o.tail);
      summable = summability_report(psi, S.incidence(), N, o.summability_tolerance).converged;
    }
    r.summable.push_back(summable);
    r.probes.emplace_back(t, P(t));
  }
  for (std::size_t k = 1; k < r.probes.size(); ++k)
    if (!(r.probes[k].second < r.probes[k - 1].second)) r.monotone = false;

  // The bracket starts at the first summable probe; losing summability above it is an error.
  std::size_t first = 0;
  while (first < r.summable.size() && !r.summable[first]) ++first;
  if (first == r.summable.size()) throw DomainError("temperature: not summable anywhere on the bracket");
  for (std::size_t k = first; k < r.summable.size(); ++k)
    if (!r.summable[k])
      throw DomainError("temperature: summability lost inside the bracket at t = " + std::to_string(r.probes[k].first));

  std::optional<std::size_t> cross;
  for (std::size_t k = first; k + 1 < r.probes.size() && !cross; ++k)
    if (r.probes[k].second >= 0.0 && r.probes[k + 1].second <= 0.0) cross = k;
  if (!cross)
    throw ConvergenceError("temperature: no sign change of the pressure on [" + std::to_string(r.probes[first].first) +
                           ", " + std::to_string(hi) + "]");
  double a = r.probes[*cross].first, b = r.probes[*cross + 1].first;
  double fa = r.probes[*cross].second, fb = r.probes[*cross + 1].second;
  r.lo = r.probes[first].first;
  r.hi = hi;
  if (fa == 0.0) {
    r.t = a;
  } else if (fb == 0.0) {
    r.t = b;
  } else {
    std::uintmax_t iterations = 200;
    const auto [x0, x1] = boost::math::tools::toms748_solve(P, a, b, fa, fb,
                                                            boost::math::tools::eps_tolerance<double>(50), iterations);
    const double p0 = P(x0), p1 = P(x1);
    r.t = std::abs(p0) <= std::abs(p1) ? x0 : x1;
  }
  r.residual = std::abs(P(r.t));
  if (!(r.residual < o.max_residual))
    throw ConvergenceError("temperature: residual " + std::to_string(r.residual) + " above " +
                           std::to_string(o.max_residual));
  return r;
}

double hd_limit_set(const Gdms& S, const TemperatureOptions& options) {
  return temperature(S, std::nullopt, 0.0, options).t;
}

}  // namespace thermo
