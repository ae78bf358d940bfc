#pragma once

// Conformal graph directed Markov systems with one-dimensional fibres: every vertex
// carries a compact interval X_v and every edge e an injective C^1 contraction
// phi_e : X_{t(e)} -> X_{i(e)}. Letter e of the coding shift is edge e.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thermo/shift_core.hpp"

namespace thermo {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double diam() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool interior(double x) const { return lo < x && x < hi; }
};

struct AffineParams {
  double slope = 0.0;   // a_e
  double offset = 0.0;  // b_e
};

struct Branch {
  Letter letter = 0;
  std::string label;
  std::size_t source = 0;  // t(e)
  std::size_t target = 0;  // i(e)
  std::function<double(double)> map;
  std::function<double(double)> derivative;
  std::function<double(double)> inverse;  // may be empty; bisection is used then
  double contraction = 0.0;               // sup |phi'| on X_{t(e)}, grid estimate
  std::optional<AffineParams> affine;
};

struct ParabolicPoint {
  Letter letter = 0;
  double fixed_point = 0.0;
};

class Gdms {
 public:
  using Generator = std::function<Branch(Letter)>;
  /// Letter whose branch image contains x in its interior, when a closed form exists.
  using Locator = std::function<std::optional<Letter>(double)>;

  Gdms(std::string name, std::vector<Interval> vertices, Generator edges,
       std::optional<std::size_t> edge_count, IncidenceMatrix incidence);

  const std::string& name() const { return name_; }
  const std::vector<Interval>& vertices() const { return vertices_; }
  const Interval& vertex(std::size_t v) const { return vertices_.at(v); }
  /// nullopt for a countable edge set.
  std::optional<std::size_t> edge_count() const { return edge_count_; }
  const IncidenceMatrix& incidence() const { return incidence_; }
  Branch branch(Letter e) const;
  /// Number of edges used by operations given a truncation N.
  std::size_t truncate(std::size_t N) const;

  const std::optional<Locator>& locator() const { return locator_; }
  Gdms& with_locator(Locator locator);

  /// The preassigned point for points outside every branch image.
  double xi() const;
  Gdms& with_xi(double xi);

  const std::vector<ParabolicPoint>& parabolic() const { return parabolic_; }
  bool is_parabolic(Letter e) const;
  Gdms& with_parabolic(std::vector<ParabolicPoint> points);

  /// Letters of the original system for each letter of a derived (jump) system.
  const std::shared_ptr<const std::vector<Word>>& derived_words() const { return derived_; }
  Gdms& with_derived_words(std::shared_ptr<const std::vector<Word>> words);

 private:
  std::string name_;
  std::vector<Interval> vertices_;
  Generator edges_;
  std::optional<std::size_t> edge_count_;
  IncidenceMatrix incidence_;
  std::optional<Locator> locator_;
  std::optional<double> xi_;
  std::vector<ParabolicPoint> parabolic_;
  std::shared_ptr<const std::vector<Word>> derived_;
};

/// sup |phi'| over a uniform grid of `points` points of the interval.
double grid_contraction(const std::function<double(double)>& derivative, Interval domain,
                        std::size_t points = 4096);
/// True when the map is strictly monotone on the grid.
bool grid_injective(const std::function<double(double)>& map, Interval domain, std::size_t points = 4096);

struct Composition {
  Interval image;
  double derivative_min = 0.0;  // of |(phi_omega)'| at endpoints and midpoint
  double derivative_max = 0.0;
  double derivative_mid = 0.0;  // signed chain-rule derivative at the midpoint
};

/// Image of phi_{w_1} o ... o phi_{w_n} on X_{t(w_n)}. Throws DomainError for
/// inadmissible words or words whose vertices do not match.
Composition compose_branch(const Gdms& S, std::span<const Letter> word);

/// phi_{w_1} o ... o phi_{w_n}(x), with the chain-rule derivative in `derivative`.
double apply_word(const Gdms& S, std::span<const Letter> word, double x, double* derivative = nullptr);

struct CodingPoint {
  double x = 0.0;
  double error = 0.0;  // half the diameter of the last image
  std::size_t length = 0;
};

/// pi(omega) for the infinite word letter(0), letter(1), ...: midpoint of the first
/// nested image of diameter < tol. Throws ConvergenceError if no prefix of length
/// <= max_length gets there (non-contracting, e.g. parabolic).
CodingPoint coding_point(const Gdms& S, const std::function<Letter(std::size_t)>& letter, double tol,
                         std::size_t max_length = 1 << 16);

/// The GDMS map f: inverse branch on branch images, xi elsewhere. Throws
/// BoundaryError within a few ulps of a shared image endpoint. Edges >= N are
/// not searched unless the system has a locator.
double gdms_map_apply(const Gdms& S, double x, std::size_t N = 1 << 16);

struct OscOverlap {
  Letter a = 0, b = 0;
  double length = 0.0;
};

struct OscReport {
  std::size_t edges = 0;
  std::vector<OscOverlap> overlaps;
  bool passed = true;
};

/// Pairwise interior-disjointness of the first N branch images.
OscReport verify_osc(const Gdms& S, std::size_t N);

struct BdpReport {
  std::vector<double> per_length;  // K_n, n = 1..n_max
  double constant = 0.0;           // max K_n
  bool renyi_flag = false;         // K_n keeps growing with n
};

/// Distortion ratios |phi_w'(y)| / |phi_w'(z)| over grid pairs, words of length
/// <= n_max on the first N letters (the repeated words e^n plus seeded random ones).
BdpReport bdp_constant(const Gdms& S, std::size_t N, std::size_t n_max, std::size_t grid,
                       std::size_t random_words = 64, std::uint64_t seed = 1);

// Built-in systems.
Gdms gauss_cf();
/// phi_i(x) = 1 / (i - x) for i >= 2 (letter e is i = e + 2); letter 0 is parabolic at 1.
Gdms backward_cf();
/// Inverse branches of x + x^{1+alpha} mod 1; letter 0 fixes 0 and is parabolic.
Gdms manneville_pomeau(double alpha);
/// Increasing affine branches onto the given cells of [0, 1].
Gdms gls(std::vector<Interval> cells, std::string name = "gls");
/// Countable GLS system with cells generated on demand; `cell(e)` must tile [0, 1).
Gdms gls(std::function<Interval(Letter)> cell, std::optional<std::size_t> count,
         std::function<std::optional<Letter>(double)> locator, std::string name);
/// Classic Lueroth partition I_n = [1 / (n + 1), 1 / n), letter e is n = e + 1.
Gdms luroth();
/// Affine similarities with the given ratios, placed left to right with equal gaps.
Gdms moran(std::vector<double> ratios);

struct JumpOptions {
  std::size_t n_cap = 1024;          // largest run length i^n
  std::size_t original_letters = 16; // letters of the original system used for j and E \ Omega
  std::size_t grid = 256;            // contraction grid per derived branch
};

/// The jump transform S*: the hyperbolic letters first, then i^n j (i parabolic,
/// j != i, A_ij = 1, n <= n_cap), with A*(a, b) = A(last(a), first(b)).
/// Throws ConvergenceError if some derived branch is not contracting.
Gdms jump_transform(const Gdms& P, const JumpOptions& options = {});

struct AsymptoticsReport {
  double slope = 0.0;     // of log |phi_{i^n}'| against log n
  double beta = 0.0;      // implied exponent, slope = -(1 + beta) / beta
  double spread = 0.0;    // max / min of |phi_{i^n}'(z)| n^{-slope}
  double residual = 0.0;  // rms residual of the fit
  std::size_t samples = 0;
};

/// Least-squares fit over n in [n_lo, n_hi] with z sampled from the images of the
/// other letters. Throws ConvergenceError if the rms residual exceeds max_residual.
AsymptoticsReport parabolic_asymptotics(const Gdms& P, Letter i, std::size_t n_lo, std::size_t n_hi,
                                        std::size_t z_samples = 16, double max_residual = 0.05);

enum class TailRule { repeat_last, periodic };

/// t log|phi'_{w_0}(pi(sigma w))| + q (theta(w) - P_theta) with sigma w continued
/// past the word by `tail`. memory is the number of letters the value depends on.
Potential geometric_potential(const Gdms& S, double t, double q, std::optional<Potential> theta,
                              double p_theta, std::size_t memory = 2, TailRule tail = TailRule::repeat_last);

}  // namespace thermo
