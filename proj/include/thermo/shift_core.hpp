#pragma once

// One-sided shifts over countable alphabets truncated to their first N letters:
// admissibility, finite-memory potentials, pressure, and Gibbs states realised
// as stationary Markov chains on m-word states.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "thermo/random.hpp"

namespace thermo {

using Letter = std::uint32_t;
using Word = std::vector<Letter>;

/// Letters are 0, 1, 2, ...; numeric work only ever sees the first `size` of them.
struct Alphabet {
  std::size_t size = 0;
  bool countable = false;  // the untruncated alphabet is infinite
};

/// 0/1 transition rule on letter pairs. Letters are unbounded; truncation is
/// applied by the operations that enumerate.
class IncidenceMatrix {
 public:
  using Predicate = std::function<bool(Letter, Letter)>;

  IncidenceMatrix(Predicate allowed, bool full, std::string name);

  static IncidenceMatrix full();
  /// Two letters, the word 11 forbidden.
  static IncidenceMatrix golden_mean();
  /// Explicit 0/1 table; letters outside the table are never admissible.
  static IncidenceMatrix from_table(std::vector<std::vector<int>> table);

  bool operator()(Letter a, Letter b) const { return full_ || allowed_(a, b); }
  bool is_full() const { return full_; }
  const std::string& name() const { return name_; }
  /// Largest letter count the rule can ever admit (tables), or nullopt.
  std::optional<std::size_t> letter_bound() const { return letter_bound_; }

  /// Finite connecting-word set F: for all a, b < N some g in F makes a g b admissible.
  const std::optional<std::vector<Word>>& witness() const { return witness_; }
  IncidenceMatrix with_witness(std::vector<Word> words) const;

 private:
  Predicate allowed_;
  bool full_ = false;
  std::string name_;
  std::optional<std::size_t> letter_bound_;
  std::optional<std::vector<Word>> witness_;
};

/// True iff every consecutive pair is allowed. Throws DomainError on an empty word.
bool is_admissible(std::span<const Letter> word, const IncidenceMatrix& A);

/// All admissible words of length n over letters < N, lexicographic.
/// Throws BudgetExceeded once more than `cap` words would be produced.
std::vector<Word> enumerate_cylinders(std::size_t n, std::size_t N, const IncidenceMatrix& A,
                                      std::size_t cap = std::size_t{1} << 22);

/// Searches (BFS over connecting words of length <= max_length) for a witness set F
/// on the truncation. Returns nullopt when some pair cannot be connected.
std::optional<std::vector<Word>> discover_witness(const IncidenceMatrix& A, std::size_t N,
                                                  std::size_t max_length = 8);

/// A real function on one-sided sequences that only looks at the first
/// `memory` letters (locally constant on memory-cylinders).
class Potential {
 public:
  using Evaluator = std::function<double(std::span<const Letter>)>;

  Potential(Evaluator f, std::size_t memory, std::string kind = "custom", double holder_beta = 1.0);

  static Potential constant(double c);
  static Potential memory1(std::vector<double> values);
  static Potential memory1(std::function<double(Letter)> values, std::string kind = "memory1-function");
  static Potential memory2(std::vector<std::vector<double>> values);

  /// Value at any sequence starting with `word`; needs word.size() >= memory().
  double operator()(std::span<const Letter> word) const;

  std::size_t memory() const { return memory_; }
  double holder_beta() const { return holder_beta_; }
  const std::string& kind() const { return kind_; }

  /// psi + c (same memory).
  Potential shifted(double c) const;

 private:
  Evaluator f_;
  std::size_t memory_;
  std::string kind_;
  double holder_beta_;
};

/// S_n psi at `word`: sum of psi over the first n shifts.
/// Throws DomainError if word.size() < n + memory - 1.
double birkhoff_sum(const Potential& psi, std::span<const Letter> word, std::size_t n);

struct SummabilityReport {
  struct Row {
    std::size_t truncation;
    double partial_sum;
  };
  std::vector<Row> rows;  // truncations 1, 2, 4, ..., N
  double last_relative_increment = 0.0;
  bool converged = false;
  double tolerance = 0.0;
};

/// Partial sums of exp(sup psi|[e]) over e < N' for N' = 1, 2, 4, ..., N. The verdict
/// is "converged" when the last doubling increased the sum by a relative amount
/// below `tolerance`, and "not summable at this truncation" otherwise.
SummabilityReport summability_report(const Potential& psi, const IncidenceMatrix& A, std::size_t N,
                                     double tolerance = 1e-3);

/// sup psi over the 1-cylinder [e] restricted to the truncation.
double sup_on_letter(const Potential& psi, const IncidenceMatrix& A, Letter e, std::size_t N);

struct PressureEstimate {
  std::vector<double> levels;        // (1/n) log Lambda_n, n = 1..n_max
  std::vector<double> ratio_levels;  // log(Lambda_n / Lambda_{n-1}), n = 2..n_max
  double value = 0.0;                // extrapolated pressure
  double gap = 0.0;                  // |last two ratio levels|
  std::size_t truncation = 0;
};

/// Lambda_n = sum over admissible n-words of exp(sup S_n psi on the cylinder),
/// accumulated in log-space by a transfer recursion over memory-words.
PressureEstimate pressure(const Potential& psi, const IncidenceMatrix& A, std::size_t n_max,
                          std::size_t N);

struct PressureSweepRow {
  std::size_t truncation;
  double pressure;
};

struct PressureSweep {
  std::vector<PressureSweepRow> rows;
  bool converged = false;  // successive values within `tolerance`
  double tolerance = 0.0;
};

/// Pressure on truncations N = n_from, 2 n_from, ... up to n_to.
PressureSweep pressure_sweep(const Potential& psi, const IncidenceMatrix& A, std::size_t n_max,
                             std::size_t n_from, std::size_t n_to, double tolerance = 1e-6);

/// Admissible m-words over the truncation with the shift transitions between them.
class StateSpace {
 public:
  StateSpace(const IncidenceMatrix& A, std::size_t memory, std::size_t N,
             std::size_t transition_cap = std::size_t{1} << 25);

  std::size_t memory() const { return memory_; }
  std::size_t truncation() const { return N_; }
  std::size_t size() const { return states_.size(); }
  std::size_t transition_count() const { return succ_state_.size(); }
  const Word& state(std::size_t i) const { return states_[i]; }
  std::optional<std::size_t> find(std::span<const Letter> m_word) const;

  // CSR successor lists: transitions u -> (u_2..u_m, e).
  std::span<const std::size_t> successors(std::size_t u) const;
  std::span<const Letter> successor_letters(std::size_t u) const;
  std::size_t successor_offset(std::size_t u) const { return succ_offset_[u]; }

  // CSR predecessor lists, with the index of the matching forward transition.
  std::span<const std::size_t> predecessors(std::size_t w) const;
  std::span<const std::size_t> predecessor_transitions(std::size_t w) const;

  bool strongly_connected() const;

 private:
  std::uint64_t key(std::span<const Letter> w) const;

  std::size_t memory_;
  std::size_t N_;
  std::vector<Word> states_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::size_t> succ_offset_, succ_state_;
  std::vector<Letter> succ_letter_;
  std::vector<std::size_t> pred_offset_, pred_state_, pred_transition_;
};

struct EigenOptions {
  double tolerance = 1e-13;  // relative width of the Collatz-Wielandt bracket
  std::size_t max_iterations = 1'000'000;
};

/// Leading eigendata of M[u -> w] = exp(psi(u . last(w))) on the m-word state graph;
/// psi may have memory up to m + 1.
struct Eigendata {
  std::shared_ptr<const StateSpace> space;
  std::vector<double> transition_log_weight;  // log M per forward transition
  double log_rho = 0.0;
  double rho = 0.0;
  std::vector<double> right;  // h
  std::vector<double> left;   // nu_L, sum 1, nu_L . h = 1
  std::size_t iterations = 0;
};

/// Power iteration on the state matrix. Throws DomainError if the truncated state
/// graph is not strongly connected and ConvergenceError past the iteration cap.
Eigendata rpf_eigendata(const Potential& psi, const IncidenceMatrix& A, std::size_t memory,
                        std::size_t N, const EigenOptions& options = {});

/// Stationary Markov chain on m-word states representing the Gibbs state.
class GibbsMarkovMeasure {
 public:
  explicit GibbsMarkovMeasure(const Eigendata& eigen);

  const StateSpace& space() const { return *space_; }
  std::size_t memory() const { return space_->memory(); }
  double pressure() const { return log_rho_; }
  double rho() const { return rho_; }
  const Eigendata& eigendata() const { return eigen_; }

  std::span<const double> stationary() const { return stationary_; }
  /// p(u -> w) for the k-th forward transition (CSR order of StateSpace).
  double transition_probability(std::size_t transition) const { return kernel_[transition]; }
  /// Reversed kernel pbar(w -> u) for the k-th predecessor entry of w.
  double reversed_probability(std::size_t w, std::size_t k) const;

  /// mu([word]); zero for inadmissible words or letters outside the truncation.
  /// Words shorter than the memory are summed over their extensions.
  double cylinder_measure(std::span<const Letter> word) const;

  /// A word drawn from the stationary chain.
  Word sample_forward(std::size_t length, std::uint64_t seed) const;
  /// tau with tau . future_prefix admissible, drawn from the time-reversed chain
  /// conditioned on the first m letters of the prefix. Returned in reading order.
  Word sample_past(std::span<const Letter> future_prefix, std::size_t length,
                   std::uint64_t seed) const;

  /// Rng-driven variants used by the dimension samplers.
  std::size_t draw_state(Rng& rng) const;
  std::size_t step_forward(std::size_t state, Rng& rng, Letter& letter) const;
  std::size_t step_backward(std::size_t state, Rng& rng, Letter& letter) const;

  /// Exact integral of a potential whose memory does not exceed the chain's.
  double integrate(const Potential& psi) const;
  /// -sum pi(u) sum p(u->w) log p(u->w).
  double entropy() const;
  /// Marginal of the first letter: mu([e]) for e < N.
  std::vector<double> letter_marginal() const;

 private:
  std::shared_ptr<const StateSpace> space_;
  Eigendata eigen_;
  double log_rho_;
  double rho_;
  std::vector<double> kernel_;
  std::vector<double> kernel_cdf_;  // per-state cumulative, CSR aligned
  std::vector<double> reversed_;    // CSR aligned with predecessors
  std::vector<double> reversed_cdf_;
  std::vector<double> stationary_;
  std::vector<double> stationary_cdf_;
};

GibbsMarkovMeasure gibbs_measure(const Eigendata& eigen);

/// h = P(psi) - integral psi dmu for the Gibbs chain of psi.
double entropy_from_pressure(const GibbsMarkovMeasure& mu, const Potential& psi);

struct GibbsAuditLevel {
  std::size_t n = 0;
  std::size_t cylinders = 0;
  bool exhaustive = false;
  double ratio_min = 0.0, ratio_max = 0.0;
  double constant = 0.0;  // max(ratio_max, 1 / ratio_min)
  // Ratio divided by its boundary factor nu_L(u_0) h(u_last) rho^m exp(-tail),
  // which the Gibbs inequality leaves free; exactly 1 for the constructed chain.
  double normalized_min = 0.0, normalized_max = 0.0;
  double normalized_constant = 0.0;
};

struct GibbsAudit {
  std::vector<GibbsAuditLevel> levels;
  double constant = 0.0;             // overall D
  double normalized_constant = 0.0;  // overall boundary-normalised D
  bool flat = false;                 // D does not grow over the upper half of the range
};

/// Gibbs ratios mu([w]) / exp(S_n psi(tau) - P n) over cylinders of each length in
/// [n_min, n_max]; all cylinders when there are at most `sample_size` of them,
/// otherwise `sample_size` cylinders drawn from mu.
GibbsAudit gibbs_audit(const GibbsMarkovMeasure& mu, const Potential& psi, const IncidenceMatrix& A,
                       std::size_t n_min, std::size_t n_max, std::size_t sample_size,
                       std::uint64_t seed);

/// Smallest-letter admissible continuation of `word` by `extra` letters.
Word extend_admissibly(std::span<const Letter> word, std::size_t extra, const IncidenceMatrix& A,
                       std::size_t N);

}  // namespace thermo
