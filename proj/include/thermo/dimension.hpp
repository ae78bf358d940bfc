#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "thermo/beta_ext.hpp"
#include "thermo/gdms.hpp"
#include "thermo/random.hpp"
#include "thermo/shift_core.hpp"

namespace thermo {

// Lyapunov exponents.

struct LyapunovEstimate {
  double value = 0.0;  // nats
  double standard_error = 0.0;
  std::string method;  // "birkhoff", "closed-form-gls", "closed-form-golden"
  std::size_t orbits = 0;
  std::size_t steps = 0;
  std::size_t restarts = 0;  // orbits that hit the zero-measure set {0} and were redrawn
  double tail_mass = 0.0;
  double tail_bound = 0.0;
};

/// One step of an interval map: returns f(x) and writes log|f'(x)|.
using MapStep = std::function<double(double x, double& log_derivative)>;
using PointSampler = std::function<double(Rng&)>;

/// Mean over orbits of (1/n) sum log|f'(f^j x)|; the standard error is taken across orbits.
/// Orbits landing exactly on 0 are redrawn from the sampler; other escapes throw DomainError.
LyapunovEstimate lyapunov_birkhoff(const MapStep& step, const PointSampler& initial, std::size_t n_steps,
                                   std::size_t n_orbits, std::uint64_t seed, unsigned threads = 0);

/// The GDMS map f_S, inverted branch by branch.
MapStep gdms_step(const Gdms& S, std::size_t N = 1 << 16);
/// x = 2^u - 1 with u uniform: exact draws from the Gauss measure dx / ((1 + x) ln 2).
double gauss_measure_draw(Rng& rng);
LyapunovEstimate lyapunov_gauss(std::size_t n_steps, std::size_t n_orbits, std::uint64_t seed,
                                unsigned threads = 0);
LyapunovEstimate lyapunov_beta(const BetaSystem& B, std::size_t n_steps, std::size_t n_orbits,
                               std::uint64_t seed, unsigned threads = 0);

/// Geometry of the first N GLS cells of a beta partition, indexed by letter n - 1.
struct GlsCells {
  std::vector<double> left;
  std::vector<double> length;
  std::vector<std::size_t> level;  // k(n)
  double beta = 0.0;
};
GlsCells gls_cells(const BetaSystem& B, std::size_t N);

/// Memory-1 potentials over GLS cells. "parry" is log L_n: its Gibbs state is the
/// Bernoulli(L_n) measure, i.e. Lebesgue on the unit square.
Potential gls_potential(const GlsCells& cells, const std::string& kind,
                        const std::vector<double>& weights = {});

/// Birkhoff average of log|S'| along orbits of the induced map. Points are built by
/// pushing a Gibbs chain through the backward coding, and the derivative is read from
/// the cell that contains each point.
LyapunovEstimate lyapunov_gls_birkhoff(const BetaSystem& B, const GibbsMarkovMeasure& mu, std::size_t n_steps,
                                       std::size_t n_orbits, std::uint64_t seed, unsigned threads = 0);

/// log beta * sum (k(n) + 1) w_n over the given cell weights, with the tail bound
/// log beta * (k_max + 1) * (1 - sum w). Throws ConvergenceError if the tail mass is
/// above `max_tail_mass`.
LyapunovEstimate lyapunov_gls_closed_form(const BetaSystem& B, const std::vector<double>& weights,
                                          double max_tail_mass = 1e-6);
/// log phi * (1 + w_2).
LyapunovEstimate lyapunov_golden_closed_form(double w2);

/// Entropy of the induced natural extension, taken as h_nu(f) = P(psi) - int psi.
double entropy_of_induced(const GibbsMarkovMeasure& mu, const Potential& psi);

// Pointwise dimension.

struct PointCloud {
  std::size_t dim = 1;
  std::vector<double> coords;  // row-major, dim per point
  std::size_t size() const { return dim ? coords.size() / dim : 0; }
  double at(std::size_t i, std::size_t c) const { return coords[i * dim + c]; }
};

PointCloud lebesgue_cloud(std::size_t dim, std::size_t M, std::uint64_t seed);
PointCloud cantor_cloud(std::size_t M, std::uint64_t seed, std::size_t digits = 40);
PointCloud gauss_cloud(std::size_t M, std::uint64_t seed);

struct LocalDimensionOptions {
  std::size_t centers = 1000;
  int j_min = 6;  // radii 2^-j
  int j_max = 18;
  std::size_t min_count = 50;
  // Only radii whose ball stays inside [0, 1)^dim are used.
  bool edge_correction = true;
  unsigned threads = 0;
  std::uint64_t seed = 1;
};

struct LocalDimensionEstimate {
  std::vector<double> slopes;  // per usable center
  double mean = 0.0;
  double std = 0.0;
  double standard_error = 0.0;
  // Same regression restricted to the smaller half of each center's radii.
  double upper_half_mean = 0.0;
  double r_min = 0.0, r_max = 0.0;  // radii actually used, over all centers
  std::size_t centers_drawn = 0;
};

/// Least-squares slope of log(ball mass) against log r for each center, using radii with
/// at least `min_count` neighbours. Centers are drawn from the cloud and excluded from
/// their own counts. Throws DomainError when no center has two usable radii.
LocalDimensionEstimate local_dimension(const PointCloud& cloud, const LocalDimensionOptions& options);

// Dimension of Gibbs states of the beta GLS natural extension.

struct GlsClouds {
  PointCloud base;   // x: forward coding
  PointCloud fiber;  // y: coding of the past, conditioned on one base point
  PointCloud joint;  // (x, y) from the two-sided stationary chain
};

/// Draws M points of each cloud. Pasts come from the reversed chain.
GlsClouds sample_gls_clouds(const GlsCells& cells, const GibbsMarkovMeasure& mu, std::size_t M,
                            std::uint64_t seed, unsigned threads = 0);

struct DimensionCheckOptions {
  std::size_t cells = 64;  // truncation of infinite partitions
  std::string potential = "parry";
  std::vector<double> weights;  // for "bernoulli"
  std::size_t M = 200000;
  LocalDimensionOptions one_d{};
  LocalDimensionOptions two_d{1000, 2, 6, 50, true, 0, 1};
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double tolerance = 0.05;
};

struct DimensionReport {
  double beta = 0.0;
  std::size_t cells = 0;
  double entropy = 0.0;
  LyapunovEstimate lyapunov;
  double predicted_fiber = 0.0;   // h / chi
  double predicted_global = 0.0;  // 2 h / chi
  std::optional<LocalDimensionEstimate> base, fiber, global;
  double additivity_gap = 0.0;    // |global - (base + fiber)|
  double additivity_error = 0.0;  // combined pooled std
  bool fiber_ok = false;
  bool global_ok = false;
  bool additivity_ok = false;
  std::vector<double> cell_weights;
};

/// Fiber slope against h / chi.
DimensionReport conditional_dimension_check(const BetaSystem& B, const DimensionCheckOptions& options);
/// Fiber, base and joint slopes against h / chi, h / chi and 2 h / chi.
DimensionReport global_dimension_check(const BetaSystem& B, const DimensionCheckOptions& options);

// Pressure roots.

struct TemperatureOptions {
  double lo = 1e-3;
  std::optional<double> hi;  // default: ambient dimension + 1
  std::size_t N = 64;        // truncation of countable alphabets
  std::size_t memory = 2;    // letters seen by the geometric potential
  TailRule tail = TailRule::repeat_last;
  std::size_t probes = 8;
  double max_residual = 1e-9;
  double summability_tolerance = 1e-3;  // countable systems only
};

struct TemperatureResult {
  double q = 0.0;
  double t = 0.0;
  double lo = 0.0, hi = 0.0;
  double residual = 0.0;
  double p_theta = 0.0;
  std::vector<std::pair<double, double>> probes;  // (t, P)
  bool monotone = true;                           // probes strictly decreasing
  std::vector<bool> summable;                     // per probe; all true for finite systems
  std::size_t evaluations = 0;
};

/// The first N edges of S as a finite system; roots are then taken for the subsystem itself.
Gdms finite_subsystem(const Gdms& S, std::size_t N);

/// P(t log|phi'| + q (theta - P theta)) on the truncated state graph.
double geometric_pressure(const Gdms& S, double t, double q, const std::optional<Potential>& theta, double p_theta,
                          const TemperatureOptions& options);
/// The root t = T(q) of the pressure equation. Throws ConvergenceError without a sign
/// change on the bracket or when the residual is above the bound, and DomainError when
/// an endpoint of a countable system is not summable.
TemperatureResult temperature(const Gdms& S, const std::optional<Potential>& theta, double q,
                              const TemperatureOptions& options = {});
/// T(0): the dimension of the limit set.
double hd_limit_set(const Gdms& S, const TemperatureOptions& options = {});

}  // namespace thermo
