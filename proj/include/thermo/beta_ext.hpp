#pragma once

// beta-transformations, the GLS partition I_n built from the expansion of 1, the
// stacked-rectangle natural extension and its first-return map on Z_0 = [0, 1)^2.
// Templated on the number type so deep cells can be handled in multiprecision.

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "thermo/errors.hpp"
#include "thermo/gdms.hpp"
#include "thermo/random.hpp"

namespace thermo {

/// 320 significant decimal digits; enough for cells of length ~1e-150.
using HighReal = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<320>,
                                               boost::multiprecision::et_off>;

template <class Real>
struct ExtensionPoint {
  Real x = 0;
  std::size_t level = 0;
  // y = beta^{-level} (sum_j digits[j] beta^{-(j+1)} + beta^{-digits.size()} tail):
  // the level's leading zeros are implicit, so splicing b_1..b_i d_1 in front is exact.
  std::vector<int> digits;
  Real tail = 0;
};

struct CellIndex {
  std::size_t n = 0;  // 1-based
  std::size_t k = 0;  // block: cell length beta^{-(k+1)}
  std::size_t i = 0;  // 1 <= i <= b_{k+1}
};

template <class Real>
struct Cell {
  CellIndex index;
  Real left = 0;
  Real length = 0;
  Real right() const { return left + length; }
};

template <class Real>
class BasicBetaSystem {
 public:
  static constexpr std::size_t kMaxDigits = 64;

  /// Expands 1 to `depth` digits (fewer if the expansion is finite).
  explicit BasicBetaSystem(Real beta, std::size_t depth = 4096) : beta_(beta) {
    using std::floor;
    if (!(beta_ > Real(1))) throw ConfigError("beta must be > 1");
    const int digits10 = std::numeric_limits<Real>::digits10;
    // Orbit errors grow like beta^k; digits past this depth would be noise.
    const double log_beta = std::log(static_cast<double>(beta_));
    reliable_depth_ = static_cast<std::size_t>(std::max(1.0, (digits10 - 3) * std::log(10.0) / log_beta));
    const Real snap = pow10(-(digits10 <= 20 ? 9 : digits10 / 2));
    Real t = 1;
    orbit_.push_back(t);
    for (std::size_t k = 0; k < std::min(depth, reliable_depth_); ++k) {
      Real v = beta_ * t;
      Real d = floor(v);
      // Near-integer hits are treated as exact: this is how finite expansions are found.
      if (v - d > Real(1) - snap) {
        d += 1;
        v = d;
      } else if (v - d < snap) {
        v = d;
      }
      b_.push_back(static_cast<int>(d));
      t = v - d;
      orbit_.push_back(t);
      if (t == Real(0)) {
        finite_ = true;
        break;
      }
    }
    partial_.push_back(0);
    for (int d : b_) partial_.push_back(partial_.back() + static_cast<std::size_t>(d));
    // Left ends of the blocks: s_k = sum_{j <= k} b_j beta^{-j}.
    Real s = 0, scale = 1;
    block_start_.push_back(s);
    inv_pow_.push_back(scale);
    for (int d : b_) {
      scale /= beta_;
      s += Real(d) * scale;
      block_start_.push_back(s);
      inv_pow_.push_back(scale);
    }
    inv_pow_.push_back(scale / beta_);
  }

  const Real& beta() const { return beta_; }
  int floor_beta() const { return b_.front(); }
  const std::vector<int>& digits_of_one() const { return b_; }
  bool finite() const { return finite_; }
  std::size_t reliable_depth() const { return reliable_depth_; }
  /// T^i(1); zero from the length of a finite expansion on.
  Real orbit_of_one(std::size_t i) const {
    if (i < orbit_.size()) return orbit_[i];
    if (finite_) return Real(0);
    throw BudgetExceeded("orbit of 1 requested past the computed depth " + std::to_string(b_.size()));
  }
  /// b_j for j >= 1 (zero past a finite expansion).
  int b(std::size_t j) const {
    if (j == 0) return 0;
    if (j <= b_.size()) return b_[j - 1];
    if (finite_) return 0;
    throw BudgetExceeded("digit b_" + std::to_string(j) + " of 1 is past the computed depth " +
                         std::to_string(b_.size()));
  }
  /// Number of stacked rectangles Z_i (nullopt: infinite tower).
  std::optional<std::size_t> tower_height() const {
    return finite_ ? std::optional<std::size_t>(b_.size()) : std::nullopt;
  }

  Real t_beta(const Real& x) const {
    using std::floor;
    const Real v = beta_ * x;
    return v - floor(v);
  }

  std::vector<int> digits(Real x, std::size_t k) const {
    using std::floor;
    check_unit(x);
    std::vector<int> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      const Real v = beta_ * x;
      const Real d = floor(v);
      out.push_back(static_cast<int>(d));
      x = v - d;
    }
    return out;
  }

  /// The quasi-greedy expansion of 1, which is the Parry reference sequence.
  int quasi_greedy(std::size_t j) const {  // 1-based
    if (!finite_) return b(j);
    const std::size_t m = b_.size();
    const std::size_t r = (j - 1) % m;
    return r + 1 == m ? b_[r] - 1 : b_[r];
  }

  /// Parry criterion on a finite word: each suffix is <=_lex the reference sequence.
  bool is_admissible(const std::vector<int>& word) const {
    for (int d : word)
      if (d < 0 || d > floor_beta()) return false;
    for (std::size_t s = 0; s < word.size(); ++s) {
      for (std::size_t j = s; j < word.size(); ++j) {
        const int ref = quasi_greedy(j - s + 1);
        if (word[j] < ref) break;
        if (word[j] > ref) return false;
      }
    }
    return true;
  }

  CellIndex index(std::size_t n) const {
    if (n == 0) throw DomainError("cells are numbered from 1");
    // Smallest k with b_1 + ... + b_{k+1} >= n.
    auto it = std::lower_bound(partial_.begin() + 1, partial_.end(), n);
    if (it == partial_.end()) {
      if (finite_) throw DomainError("cell " + std::to_string(n) + " does not exist: the partition has " +
                                     std::to_string(partial_.back()) + " cells");
      throw BudgetExceeded("cell " + std::to_string(n) + " needs more digits of 1 than the computed " +
                           std::to_string(b_.size()));
    }
    const std::size_t k = static_cast<std::size_t>(it - partial_.begin()) - 1;
    return {n, k, n - partial_[k]};
  }

  Cell<Real> cell(std::size_t n) const {
    const CellIndex c = index(n);
    Cell<Real> out;
    out.index = c;
    out.length = pow_beta_inv(c.k + 1);
    out.left = block_start_[c.k] + Real(static_cast<long long>(c.i - 1)) * out.length;
    return out;
  }

  /// Total number of cells (finite expansions only).
  std::optional<std::size_t> cell_count() const {
    return finite_ ? std::optional<std::size_t>(partial_.back()) : std::nullopt;
  }

  /// Cells whose block k is below the computed depth.
  std::size_t available_cells() const { return partial_.back(); }

  /// The cell containing x, found geometrically from the block boundaries.
  Cell<Real> locate(const Real& x) const {
    using std::floor;
    check_unit(x);
    for (std::size_t k = 0; k < b_.size(); ++k) {
      const Real len = pow_beta_inv(k + 1);
      const Real end = block_start_[k] + Real(b_[k]) * len;
      if (x < end) {
        const Real pos = (x - block_start_[k]) / len;
        auto i = static_cast<std::size_t>(floor(pos)) + 1;
        if (pos == floor(pos)) {
          if (x != Real(0)) throw BoundaryError("x lies on a cell endpoint");
        }
        i = std::min<std::size_t>(i, static_cast<std::size_t>(b_[k]));
        return cell(partial_[k] + i);
      }
    }
    if (finite_) throw DomainError("x outside [0, 1)");
    throw BudgetExceeded("x lies in a cell deeper than the computed expansion of 1");
  }

  /// One step of the tower map on Z = union of Z_i.
  ExtensionPoint<Real> step(const ExtensionPoint<Real>& p) const {
    using std::floor;
    check_membership(p);
    const Real v = beta_ * p.x;
    const Real d = floor(v);
    const int d1 = static_cast<int>(d);
    const int bnext = b(p.level + 1);
    ExtensionPoint<Real> out;
    out.x = v - d;
    if (d1 > bnext) throw DomainError("digit exceeds b_{i+1}: point outside its rectangle");
    if (d1 == bnext) {
      // y / beta: one more implicit leading zero.
      out.level = p.level + 1;
      out.digits = p.digits;
      out.tail = p.tail;
    } else {
      out.level = 0;
      out.digits.reserve(p.level + 1 + p.digits.size());
      for (std::size_t j = 1; j <= p.level; ++j) out.digits.push_back(b(j));
      out.digits.push_back(d1);
      out.digits.insert(out.digits.end(), p.digits.begin(), p.digits.end());
      out.tail = p.tail;
      fold(out);
    }
    return out;
  }

  Real y_value(const ExtensionPoint<Real>& p) const {
    Real v = p.tail;
    for (std::size_t j = p.digits.size(); j-- > 0;) v = (Real(p.digits[j]) + v) / beta_;
    return v * pow_beta_inv(p.level);
  }

  static ExtensionPoint<Real> base_point(const Real& x, const Real& y) {
    ExtensionPoint<Real> p;
    p.x = x;
    p.tail = y;
    return p;
  }

  /// Least m >= 1 with T^m(x, y) back in Z_0.
  std::size_t first_return_time(const Real& x, const Real& y, std::size_t budget = 100000) const {
    check_unit(y);
    ExtensionPoint<Real> p = base_point(x, y);
    for (std::size_t m = 1; m <= budget; ++m) {
      p = step(p);
      if (p.level == 0) return m;
    }
    throw BudgetExceeded("first return time exceeds " + std::to_string(budget) + " steps");
  }

  /// Induced map on Z_0 by iterating the tower map.
  std::pair<Real, Real> induced_by_iteration(const Real& x, const Real& y, std::size_t budget = 100000) const {
    check_unit(y);
    ExtensionPoint<Real> p = base_point(x, y);
    for (std::size_t m = 1; m <= budget; ++m) {
      p = step(p);
      if (p.level == 0) return {p.x, y_value(p)};
    }
    throw BudgetExceeded("first return time exceeds " + std::to_string(budget) + " steps");
  }

  /// Closed form on Z_0^k: (T^k x, b_1/beta + ... + b_{k-1}/beta^{k-1} + d_k/beta^k + y/beta^k).
  std::pair<Real, Real> induced_map_z0(Real x, const Real& y, std::size_t budget = 100000) const {
    using std::floor;
    check_unit(x);
    check_unit(y);
    Real prefix = 0, scale = 1;
    for (std::size_t k = 1; k <= budget; ++k) {
      const Real v = beta_ * x;
      const Real d = floor(v);
      x = v - d;
      scale /= beta_;
      const int dk = static_cast<int>(d);
      const int bk = b(k);
      if (dk < bk) return {x, prefix + Real(dk) * scale + y * scale};
      if (dk > bk) throw DomainError("digit sequence of x is not admissible");
      prefix += Real(bk) * scale;
    }
    throw BudgetExceeded("first return time exceeds " + std::to_string(budget) + " steps");
  }

  /// The GLS natural extension S(x, y) = (f(x), left(I_n) + y L_n) on the partition I_n.
  std::pair<Real, Real> gls_extension(const Real& x, const Real& y) const {
    check_unit(y);
    const Cell<Real> c = locate(x);
    const Real slope = Real(1) / c.length;
    return {(x - c.left) * slope, c.left + y * c.length};
  }

 private:
  static Real pow10(int e) {
    Real r = 1;
    const Real ten = 10;
    for (int k = 0; k < std::abs(e); ++k) r = e < 0 ? r / ten : r * ten;
    return r;
  }

  Real pow_beta_inv(std::size_t e) const {
    if (e < inv_pow_.size()) return inv_pow_[e];
    Real r = inv_pow_.back();
    for (std::size_t k = inv_pow_.size() - 1; k < e; ++k) r /= beta_;
    return r;
  }

  static void check_unit(const Real& x) {
    if (!(x >= Real(0) && x < Real(1))) throw DomainError("coordinate outside [0, 1)");
  }

  void check_membership(const ExtensionPoint<Real>& p) const {
    if (const auto h = tower_height(); h && p.level >= *h)
      throw DomainError("level " + std::to_string(p.level) + " is above the tower");
    if (!(p.x >= Real(0) && p.x < orbit_of_one(p.level)))
      throw DomainError("x outside [0, T^i(1)) for level " + std::to_string(p.level));
  }

  void fold(ExtensionPoint<Real>& p) const {
    while (p.digits.size() > kMaxDigits) {
      p.tail = (Real(p.digits.back()) + p.tail) / beta_;
      p.digits.pop_back();
    }
  }

  Real beta_;
  std::vector<int> b_;
  std::vector<Real> orbit_;
  std::vector<std::size_t> partial_;  // partial_[k] = b_1 + ... + b_k
  std::vector<Real> block_start_;
  std::vector<Real> inv_pow_;  // beta^{-e}
  bool finite_ = false;
  std::size_t reliable_depth_ = 0;
};

using BetaSystem = BasicBetaSystem<double>;

/// beta given as "phi", "golden", "pi", "e", or a decimal literal, in the requested precision.
template <class Real>
Real parse_beta(const std::string& text) {
  using std::sqrt;
  if (text == "phi" || text == "golden") return (Real(1) + sqrt(Real(5))) / Real(2);
  if (text == "pi") return boost::math::constants::pi<Real>();
  if (text == "e") return boost::math::constants::e<Real>();
  try {
    std::size_t used = 0;
    (void)std::stod(text, &used);
    if (used != text.size()) throw ConfigError("bad beta: " + text);
  } catch (const std::logic_error&) {
    throw ConfigError("bad beta: " + text);
  }
  return Real(text);
}

template <>
inline double parse_beta<double>(const std::string& text) {
  if (text == "phi" || text == "golden") return (1.0 + std::sqrt(5.0)) / 2.0;
  if (text == "pi") return boost::math::constants::pi<double>();
  if (text == "e") return boost::math::constants::e<double>();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::logic_error&) {
    throw ConfigError("bad beta: " + text);
  }
  if (used != text.size()) throw ConfigError("bad beta: " + text);
  return v;
}

struct IdentityReport {
  std::size_t samples = 0;
  double max_deviation = 0.0;     // |S - T_{beta, Z_0}| sup-norm, tower iteration
  double closed_form_deviation = 0.0;  // |closed form - tower iteration|
  std::size_t max_return_time = 0;
};

/// Compares the GLS extension S with the induced tower map on seeded uniform samples.
template <class Real>
IdentityReport identity_check(const BasicBetaSystem<Real>& B, std::size_t samples, std::uint64_t seed) {
  using std::abs;
  IdentityReport r;
  r.samples = samples;
  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const Real x = Real(rng.uniform());
    const Real y = Real(rng.uniform());
    const auto [sx, sy] = B.gls_extension(x, y);
    const auto [tx, ty] = B.induced_by_iteration(x, y);
    const auto [cx, cy] = B.induced_map_z0(x, y);
    const double dev = static_cast<double>(std::max(abs(sx - tx), abs(sy - ty)));
    const double cdev = static_cast<double>(std::max(abs(cx - tx), abs(cy - ty)));
    r.max_deviation = std::max(r.max_deviation, dev);
    r.closed_form_deviation = std::max(r.closed_form_deviation, cdev);
    r.max_return_time = std::max(r.max_return_time, B.first_return_time(x, y));
  }
  return r;
}

struct FirstReturnReport {
  std::size_t cells = 0;
  std::size_t points = 0;
  std::size_t mismatches = 0;
  std::optional<std::size_t> first_mismatch;  // cell n
};

/// Checks first_return_time == k(n) + 1 on `per_cell` seeded points of each cell n <= n_max.
template <class Real>
FirstReturnReport first_return_law(const BasicBetaSystem<Real>& B, std::size_t n_max, std::size_t per_cell,
                                   std::uint64_t seed) {
  FirstReturnReport r;
  const std::size_t last = std::min(n_max, B.available_cells());
  Rng rng(seed);
  for (std::size_t n = 1; n <= last; ++n) {
    const Cell<Real> c = B.cell(n);
    ++r.cells;
    for (std::size_t s = 0; s < per_cell; ++s) {
      const double u = 0.01 + 0.98 * rng.uniform();
      const Real x = c.left + Real(u) * c.length;
      const Real y = Real(rng.uniform());
      ++r.points;
      if (B.first_return_time(x, y) != c.index.k + 1 || B.locate(x).index.n != n) {
        ++r.mismatches;
        if (!r.first_mismatch) r.first_mismatch = n;
      }
    }
  }
  return r;
}

// Golden-ratio pictures.

/// The natural extension on Z = [0, 1/beta) x [0, 1) u [1/beta, 1) x [0, 1/beta):
/// (x, y) -> (T x, (y + [beta x]) / beta).
std::pair<double, double> golden_z_step(double x, double y);
/// Induced map of the Z picture on W = [0, 1) x [0, 1/beta), by iteration.
std::pair<double, double> golden_induced_w(double x, double y);
/// The displayed closed form of the same map.
std::pair<double, double> golden_induced_w_closed(double x, double y);
/// Psi(x, y) = (x, y / beta).
std::pair<double, double> golden_psi(double x, double y);
/// sup |Psi(S(x, y)) - T_W(Psi(x, y))| over seeded samples.
double golden_conjugacy_deviation(std::size_t samples, std::uint64_t seed);

/// (a_e^{-1} x - a_e^{-1} b_e, a_e y + b_e) for the affine branch whose image holds x.
std::pair<double, double> gls_natural_extension(const Gdms& S, double x, double y, std::size_t N = 1 << 16);

/// The GLS system of the beta partition, truncated to its first `cells` cells when
/// the partition is infinite (the truncated cells then do not tile [0, 1)).
Gdms beta_gls_system(const BetaSystem& B, std::size_t cells);

}  // namespace thermo
