#include "thermo/shift_core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "thermo/errors.hpp"
#include "thermo/random.hpp"

namespace thermo {

namespace {

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::string describe(std::span<const Letter> w) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << w[i];
  os << ')';
  return os.str();
}

// Index of the first CSR entry in [begin, end) whose cumulative value exceeds u.
std::size_t pick(const std::vector<double>& cdf, std::size_t begin, std::size_t end, double u) {
  const double total = cdf[end - 1];
  const double target = u * total;
  auto it = std::upper_bound(cdf.begin() + static_cast<std::ptrdiff_t>(begin),
                             cdf.begin() + static_cast<std::ptrdiff_t>(end), target);
  if (it == cdf.begin() + static_cast<std::ptrdiff_t>(end)) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

// ---------------------------------------------------------------------------
// IncidenceMatrix

IncidenceMatrix::IncidenceMatrix(Predicate allowed, bool full, std::string name)
    : allowed_(std::move(allowed)), full_(full), name_(std::move(name)) {}

IncidenceMatrix IncidenceMatrix::full() {
  return IncidenceMatrix([](Letter, Letter) { return true; }, true, "full");
}

IncidenceMatrix IncidenceMatrix::golden_mean() {
  auto m = from_table({{1, 1}, {1, 0}});
  m.name_ = "golden-mean";
  return m;
}

IncidenceMatrix IncidenceMatrix::from_table(std::vector<std::vector<int>> table) {
  const std::size_t n = table.size();
  for (const auto& row : table) {
    if (row.size() != n) throw ConfigError("incidence table must be square");
    for (int v : row)
      if (v != 0 && v != 1) throw ConfigError("incidence table entries must be 0 or 1");
  }
  auto shared = std::make_shared<std::vector<std::vector<int>>>(std::move(table));
  IncidenceMatrix m(
      [shared](Letter a, Letter b) {
        const auto& t = *shared;
        return a < t.size() && b < t.size() && t[a][b] == 1;
      },
      false, "table");
  m.letter_bound_ = n;
  return m;
}

IncidenceMatrix IncidenceMatrix::with_witness(std::vector<Word> words) const {
  IncidenceMatrix copy = *this;
  copy.witness_ = std::move(words);
  return copy;
}

bool is_admissible(std::span<const Letter> word, const IncidenceMatrix& A) {
  if (word.empty()) throw DomainError("is_admissible: empty word");
  for (std::size_t i = 0; i + 1 < word.size(); ++i)
    if (!A(word[i], word[i + 1])) return false;
  return true;
}

std::vector<Word> enumerate_cylinders(std::size_t n, std::size_t N, const IncidenceMatrix& A,
                                      std::size_t cap) {
  if (n == 0 || N == 0) throw DomainError("enumerate_cylinders: n and N must be positive");
  std::vector<Word> out;
  Word current;
  current.reserve(n);
  // Iterative DFS in lexicographic order.
  std::vector<Letter> next(n, 0);
  std::size_t depth = 0;
  next[0] = 0;
  while (true) {
    if (next[depth] >= N) {
      if (depth == 0) break;
      current.pop_back();
      --depth;
      ++next[depth];
      continue;
    }
    const Letter e = next[depth];
    if (depth > 0 && !A(current.back(), e)) {
      ++next[depth];
      continue;
    }
    current.push_back(e);
    if (depth + 1 == n) {
      if (out.size() >= cap)
        throw BudgetExceeded("enumerate_cylinders: more than " + std::to_string(cap) + " cylinders");
      out.push_back(current);
      current.pop_back();
      ++next[depth];
    } else {
      ++depth;
      next[depth] = 0;
    }
  }
  return out;
}

std::optional<std::vector<Word>> discover_witness(const IncidenceMatrix& A, std::size_t N,
                                                  std::size_t max_length) {
  std::set<Word> found;
  for (Letter a = 0; a < N; ++a) {
    // BFS over connecting words; a node is (connecting word), expanded by letters.
    std::vector<bool> settled(N, false);
    std::size_t remaining = N;
    std::deque<Word> queue{Word{}};
    while (!queue.empty() && remaining > 0) {
      Word g = queue.front();
      queue.pop_front();
      const Letter last = g.empty() ? a : g.back();
      for (Letter b = 0; b < N; ++b) {
        if (!settled[b] && A(last, b)) {
          settled[b] = true;
          --remaining;
          found.insert(g);
        }
      }
      if (g.size() < max_length) {
        for (Letter c = 0; c < N; ++c) {
          if (!A(last, c)) continue;
          Word h = g;
          h.push_back(c);
          queue.push_back(std::move(h));
        }
      }
      if (queue.size() > (std::size_t{1} << 20)) break;
    }
    if (remaining > 0) return std::nullopt;
  }
  return std::vector<Word>(found.begin(), found.end());
}

Word extend_admissibly(std::span<const Letter> word, std::size_t extra, const IncidenceMatrix& A,
                       std::size_t N) {
  Word out(word.begin(), word.end());
  for (std::size_t k = 0; k < extra; ++k) {
    bool placed = false;
    for (Letter e = 0; e < N; ++e) {
      if (out.empty() || A(out.back(), e)) {
        out.push_back(e);
        placed = true;
        break;
      }
    }
    if (!placed) throw DomainError("no admissible continuation of " + describe(word));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Potential

Potential::Potential(Evaluator f, std::size_t memory, std::string kind, double holder_beta)
    : f_(std::move(f)), memory_(memory), kind_(std::move(kind)), holder_beta_(holder_beta) {
  if (memory_ == 0) throw ConfigError("potential memory must be >= 1");
  if (!(holder_beta_ > 0.0)) throw ConfigError("holder_beta must be positive");
}

Potential Potential::constant(double c) {
  return Potential([c](std::span<const Letter>) { return c; }, 1, "constant");
}

Potential Potential::memory1(std::vector<double> values) {
  auto table = std::make_shared<std::vector<double>>(std::move(values));
  return Potential(
      [table](std::span<const Letter> w) {
        if (w[0] >= table->size())
          throw DomainError("memory1-table: letter " + std::to_string(w[0]) + " outside table");
        return (*table)[w[0]];
      },
      1, "memory1-table");
}

Potential Potential::memory1(std::function<double(Letter)> values, std::string kind) {
  return Potential([values = std::move(values)](std::span<const Letter> w) { return values(w[0]); }, 1,
                   std::move(kind));
}

Potential Potential::memory2(std::vector<std::vector<double>> values) {
  auto table = std::make_shared<std::vector<std::vector<double>>>(std::move(values));
  return Potential(
      [table](std::span<const Letter> w) {
        if (w[0] >= table->size() || w[1] >= (*table)[w[0]].size())
          throw DomainError("memory2-table: word outside table");
        return (*table)[w[0]][w[1]];
      },
      2, "memory2-table");
}

double Potential::operator()(std::span<const Letter> word) const {
  if (word.size() < memory_)
    throw DomainError("potential of memory " + std::to_string(memory_) + " evaluated on a word of length " +
                      std::to_string(word.size()));
  return f_(word.first(memory_));
}

Potential Potential::shifted(double c) const {
  auto f = f_;
  return Potential([f, c](std::span<const Letter> w) { return f(w) + c; }, memory_, kind_ + "+c",
                   holder_beta_);
}

double birkhoff_sum(const Potential& psi, std::span<const Letter> word, std::size_t n) {
  if (word.size() + 1 < n + psi.memory())
    throw DomainError("birkhoff_sum: word of length " + std::to_string(word.size()) + " too short for n=" +
                      std::to_string(n) + " with memory " + std::to_string(psi.memory()));
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += psi(word.subspan(k));
  return s;
}

// ---------------------------------------------------------------------------
// Summability

double sup_on_letter(const Potential& psi, const IncidenceMatrix& A, Letter e, std::size_t N) {
  const std::size_t extra = psi.memory() - 1;
  if (extra == 0) {
    const Letter w[1] = {e};
    return psi(w);
  }
  // sup over admissible continuations; continuation letters are capped so that a
  // memory-2 sweep stays quadratic in a bounded range.
  const std::size_t letters = std::min<std::size_t>(N, 512);
  double best = -std::numeric_limits<double>::infinity();
  Word w{e};
  std::vector<Letter> next(extra, 0);
  std::size_t depth = 0;
  while (true) {
    if (next[depth] >= letters) {
      if (depth == 0) break;
      w.pop_back();
      --depth;
      ++next[depth];
      continue;
    }
    const Letter c = next[depth];
    if (!A(w.back(), c)) {
      ++next[depth];
      continue;
    }
    w.push_back(c);
    if (depth + 1 == extra) {
      best = std::max(best, psi(w));
      w.pop_back();
      ++next[depth];
    } else {
      ++depth;
      next[depth] = 0;
    }
  }
  return best;
}

SummabilityReport summability_report(const Potential& psi, const IncidenceMatrix& A, std::size_t N,
                                     double tolerance) {
  if (N == 0) throw DomainError("summability_report: N must be positive");
  SummabilityReport report;
  report.tolerance = tolerance;
  double sum = 0.0;
  double previous = 0.0;
  std::size_t next_checkpoint = 1;
  for (std::size_t e = 0; e < N; ++e) {
    sum += std::exp(sup_on_letter(psi, A, static_cast<Letter>(e), N));
    if (e + 1 == next_checkpoint || e + 1 == N) {
      report.rows.push_back({e + 1, sum});
      if (report.rows.size() >= 2) previous = report.rows[report.rows.size() - 2].partial_sum;
      next_checkpoint *= 2;
    }
  }
  const bool finite_rule = A.letter_bound() && *A.letter_bound() <= N;
  report.last_relative_increment = report.rows.size() >= 2 && sum > 0.0 ? (sum - previous) / sum : 0.0;
  report.converged = std::isfinite(sum) && (finite_rule || report.last_relative_increment < tolerance);
  return report;
}

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(const IncidenceMatrix& A, std::size_t memory, std::size_t N,
                       std::size_t transition_cap)
    : memory_(memory), N_(N) {
  if (memory == 0 || N == 0) throw DomainError("StateSpace: memory and N must be positive");
  double keyspace = std::pow(static_cast<double>(N), static_cast<double>(memory));
  if (keyspace > 9.0e18) throw BudgetExceeded("StateSpace: N^m does not fit a 64-bit key");
  states_ = enumerate_cylinders(memory, N, A, transition_cap);
  index_.reserve(states_.size() * 2);
  for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(key(states_[i]), i);

  succ_offset_.assign(states_.size() + 1, 0);
  Word next_word(memory);
  for (std::size_t u = 0; u < states_.size(); ++u) {
    const Word& s = states_[u];
    std::copy(s.begin() + 1, s.end(), next_word.begin());
    for (Letter e = 0; e < N; ++e) {
      if (!A(s.back(), e)) continue;
      next_word.back() = e;
      auto w = find(next_word);
      if (!w) continue;  // possible only when memory == 1 and e is not a state
      if (succ_state_.size() >= transition_cap)
        throw BudgetExceeded("StateSpace: more than " + std::to_string(transition_cap) + " transitions");
      succ_state_.push_back(*w);
      succ_letter_.push_back(e);
    }
    succ_offset_[u + 1] = succ_state_.size();
  }

  std::vector<std::size_t> in_degree(states_.size(), 0);
  for (std::size_t w : succ_state_) ++in_degree[w];
  pred_offset_.assign(states_.size() + 1, 0);
  for (std::size_t w = 0; w < states_.size(); ++w) pred_offset_[w + 1] = pred_offset_[w] + in_degree[w];
  pred_state_.resize(succ_state_.size());
  pred_transition_.resize(succ_state_.size());
  std::vector<std::size_t> fill(pred_offset_.begin(), pred_offset_.end() - 1);
  for (std::size_t u = 0; u < states_.size(); ++u) {
    for (std::size_t k = succ_offset_[u]; k < succ_offset_[u + 1]; ++k) {
      const std::size_t w = succ_state_[k];
      pred_state_[fill[w]] = u;
      pred_transition_[fill[w]] = k;
      ++fill[w];
    }
  }
}

std::uint64_t StateSpace::key(std::span<const Letter> w) const {
  std::uint64_t k = 0;
  for (Letter e : w) k = k * N_ + e;
  return k;
}

std::optional<std::size_t> StateSpace::find(std::span<const Letter> m_word) const {
  if (m_word.size() != memory_) return std::nullopt;
  for (Letter e : m_word)
    if (e >= N_) return std::nullopt;
  auto it = index_.find(key(m_word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> StateSpace::successors(std::size_t u) const {
  return {succ_state_.data() + succ_offset_[u], succ_offset_[u + 1] - succ_offset_[u]};
}

std::span<const Letter> StateSpace::successor_letters(std::size_t u) const {
  return {succ_letter_.data() + succ_offset_[u], succ_offset_[u + 1] - succ_offset_[u]};
}

std::span<const std::size_t> StateSpace::predecessors(std::size_t w) const {
  return {pred_state_.data() + pred_offset_[w], pred_offset_[w + 1] - pred_offset_[w]};
}

std::span<const std::size_t> StateSpace::predecessor_transitions(std::size_t w) const {
  return {pred_transition_.data() + pred_offset_[w], pred_offset_[w + 1] - pred_offset_[w]};
}

bool StateSpace::strongly_connected() const {
  if (states_.empty()) return false;
  auto reach_all = [&](bool forward) {
    std::vector<bool> seen(states_.size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : forward ? successors(u) : predecessors(u)) {
        if (!seen[v]) {
          seen[v] = true;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == states_.size();
  };
  return reach_all(true) && reach_all(false);
}

// ---------------------------------------------------------------------------
// Pressure

namespace {

// sup over admissible continuations x (|x| = q - 1) of the q - 1 terms of S_n psi that
// straddle the end of a word whose last q letters... are `tail`.
double tail_sup(const Potential& psi, const IncidenceMatrix& A, std::span<const Letter> tail,
                std::size_t terms, std::size_t N) {
  const std::size_t q = psi.memory();
  if (terms == 0) return 0.0;
  const std::size_t extra = q - 1;
  double best = -std::numeric_limits<double>::infinity();
  Word w(tail.begin(), tail.end());
  const std::size_t base = w.size();
  std::vector<Letter> next(extra, 0);
  std::size_t depth = 0;
  while (true) {
    if (next[depth] >= N) {
      if (depth == 0) break;
      w.pop_back();
      --depth;
      ++next[depth];
      continue;
    }
    const Letter c = next[depth];
    if (!A(w.back(), c)) {
      ++next[depth];
      continue;
    }
    w.push_back(c);
    if (depth + 1 == extra) {
      double s = 0.0;
      for (std::size_t k = base - terms; k < base; ++k) s += psi(std::span<const Letter>(w).subspan(k));
      best = std::max(best, s);
      w.pop_back();
      ++next[depth];
    } else {
      ++depth;
      next[depth] = 0;
    }
  }
  return best;
}

}  // namespace

PressureEstimate pressure(const Potential& psi, const IncidenceMatrix& A, std::size_t n_max,
                          std::size_t N) {
  if (n_max == 0 || N == 0) throw DomainError("pressure: n_max and N must be positive");
  const std::size_t q = psi.memory();
  if (q > n_max) throw DomainError("pressure: memory exceeds n_max");
  std::vector<double> log_lambda(n_max + 1, 0.0);

  // Short words: direct enumeration with a sup over continuations.
  for (std::size_t n = 1; n < q && n <= n_max; ++n) {
    std::vector<double> terms;
    for (const Word& w : enumerate_cylinders(n, N, A)) terms.push_back(tail_sup(psi, A, w, n, N));
    log_lambda[n] = log_sum_exp(terms);
  }

  if (q == 1 && A.is_full()) {
    // Lambda_n = (sum_e exp psi(e))^n.
    std::vector<double> values(N);
    for (Letter e = 0; e < N; ++e) {
      const Letter w[1] = {e};
      values[e] = psi(w);
    }
    const double one = log_sum_exp(values);
    for (std::size_t n = 1; n <= n_max; ++n) log_lambda[n] = static_cast<double>(n) * one;
  } else {
    const StateSpace space(A, q, N);
    const std::size_t S = space.size();
    std::vector<double> log_weight(S), log_tail(S);
    for (std::size_t u = 0; u < S; ++u) {
      log_weight[u] = psi(space.state(u));
      log_tail[u] = q > 1 ? tail_sup(psi, A, std::span<const Letter>(space.state(u)).subspan(1), q - 1, N)
                          : 0.0;
    }
    // G_n(u) = scale * g[u]: words of length n ending in u, weight of the inside terms.
    std::vector<double> g(S), next(S);
    double log_scale = 0.0;
    double mx = *std::max_element(log_weight.begin(), log_weight.end());
    for (std::size_t u = 0; u < S; ++u) g[u] = std::exp(log_weight[u] - mx);
    log_scale = mx;
    for (std::size_t n = q; n <= n_max; ++n) {
      if (n > q) {
        double top = 0.0;
        for (std::size_t w = 0; w < S; ++w) {
          double s = 0.0;
          for (std::size_t u : space.predecessors(w)) s += g[u];
          next[w] = s * std::exp(log_weight[w] - mx);
          top = std::max(top, next[w]);
        }
        if (top == 0.0) {
          log_lambda[n] = -std::numeric_limits<double>::infinity();
          for (std::size_t k = n + 1; k <= n_max; ++k) log_lambda[k] = log_lambda[n];
          break;
        }
        for (std::size_t w = 0; w < S; ++w) g[w] = next[w] / top;
        log_scale += mx + std::log(top);
      }
      std::vector<double> terms(S);
      for (std::size_t u = 0; u < S; ++u)
        terms[u] = g[u] > 0.0 ? std::log(g[u]) + log_tail[u] : -std::numeric_limits<double>::infinity();
      log_lambda[n] = log_scale + log_sum_exp(terms);
    }
  }

  PressureEstimate est;
  est.truncation = N;
  for (std::size_t n = 1; n <= n_max; ++n) est.levels.push_back(log_lambda[n] / static_cast<double>(n));
  for (std::size_t n = 2; n <= n_max; ++n) est.ratio_levels.push_back(log_lambda[n] - log_lambda[n - 1]);
  if (std::isnan(log_lambda[n_max]) || !std::isfinite(log_lambda[n_max])) {
    est.value = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const auto& r = est.ratio_levels;
  if (r.empty()) {
    est.value = est.levels.back();
  } else if (r.size() < 3) {
    est.value = r.back();
    est.gap = r.size() == 2 ? std::abs(r[1] - r[0]) : 0.0;
  } else {
    const double a = r[r.size() - 3], b = r[r.size() - 2], c = r[r.size() - 1];
    est.gap = std::abs(c - b);
    const double d1 = c - b, d0 = b - a;
    const double denom = d1 - d0;
    est.value = c;
    if (std::abs(d1) > 1e-14 * std::max(1.0, std::abs(c)) && std::abs(denom) > 1e-300) {
      const double corrected = c - d1 * d1 / denom;
      if (std::isfinite(corrected)) est.value = corrected;
    }
  }
  return est;
}

PressureSweep pressure_sweep(const Potential& psi, const IncidenceMatrix& A, std::size_t n_max,
                             std::size_t n_from, std::size_t n_to, double tolerance) {
  if (n_from == 0 || n_to < n_from) throw DomainError("pressure_sweep: bad truncation range");
  PressureSweep sweep;
  sweep.tolerance = tolerance;
  for (std::size_t N = n_from; N <= n_to; N *= 2) {
    sweep.rows.push_back({N, pressure(psi, A, n_max, N).value});
    if (N > n_to / 2 && N != n_to && N * 2 > n_to) {
      if (N != n_to) sweep.rows.push_back({n_to, pressure(psi, A, n_max, n_to).value});
      break;
    }
  }
  const auto& rows = sweep.rows;
  sweep.converged = rows.size() >= 2 && std::abs(rows.back().pressure - rows[rows.size() - 2].pressure) < tolerance;
  return sweep;
}

// ---------------------------------------------------------------------------
// Eigendata

Eigendata rpf_eigendata(const Potential& psi, const IncidenceMatrix& A, std::size_t memory,
                        std::size_t N, const EigenOptions& options) {
  if (psi.memory() > memory + 1)
    throw DomainError("rpf_eigendata: potential memory " + std::to_string(psi.memory()) +
                      " exceeds state memory + 1");
  auto space = std::make_shared<const StateSpace>(A, memory, N);
  if (!space->strongly_connected())
    throw DomainError("rpf_eigendata: truncated state graph is not strongly connected");
  const std::size_t S = space->size();
  const std::size_t T = space->transition_count();

  Eigendata out;
  out.space = space;
  out.transition_log_weight.resize(T);
  Word buffer(memory + 1);
  for (std::size_t u = 0; u < S; ++u) {
    const Word& s = space->state(u);
    std::copy(s.begin(), s.end(), buffer.begin());
    const auto letters = space->successor_letters(u);
    for (std::size_t j = 0; j < letters.size(); ++j) {
      buffer.back() = letters[j];
      out.transition_log_weight[space->successor_offset(u) + j] = psi(buffer);
    }
  }
  const double mx = *std::max_element(out.transition_log_weight.begin(), out.transition_log_weight.end());
  std::vector<double> weight(T);
  for (std::size_t k = 0; k < T; ++k) weight[k] = std::exp(out.transition_log_weight[k] - mx);

  // Shift by a positive multiple of the identity so periodic graphs converge too.
  double row_total = 0.0;
  for (double w : weight) row_total += w;
  const double shift = 0.5 * row_total / static_cast<double>(S);

  auto iterate = [&](bool right_side, std::vector<double>& x) -> std::pair<double, std::size_t> {
    x.assign(S, 1.0 / static_cast<double>(S));
    std::vector<double> y(S);
    double lambda = 0.0, previous = -1.0;
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
      if (right_side) {
        for (std::size_t u = 0; u < S; ++u) {
          double s = shift * x[u];
          const auto succ = space->successors(u);
          const std::size_t off = space->successor_offset(u);
          for (std::size_t j = 0; j < succ.size(); ++j) s += weight[off + j] * x[succ[j]];
          y[u] = s;
        }
      } else {
        for (std::size_t w = 0; w < S; ++w) {
          double s = shift * x[w];
          const auto pred = space->predecessors(w);
          const auto trans = space->predecessor_transitions(w);
          for (std::size_t j = 0; j < pred.size(); ++j) s += weight[trans[j]] * x[pred[j]];
          y[w] = s;
        }
      }
      double total = 0.0;
      for (double v : y) total += v;
      lambda = total;  // x sums to one
      // The eigenvalue estimate can settle long before the vector (rank-one M), so
      // both must stop moving.
      double change = 0.0, top = 0.0;
      for (std::size_t u = 0; u < S; ++u) {
        const double v = y[u] / total;
        change = std::max(change, std::abs(v - x[u]));
        top = std::max(top, v);
        x[u] = v;
      }
      if (it > 3 && std::abs(lambda - previous) < options.tolerance * lambda &&
          change < options.tolerance * top)
        return {lambda, it};
      previous = lambda;
    }
    throw ConvergenceError("rpf_eigendata: no convergence within " + std::to_string(options.max_iterations) +
                           " iterations");
  };

  auto [lambda_r, it_r] = iterate(true, out.right);
  auto [lambda_l, it_l] = iterate(false, out.left);
  (void)lambda_l;
  const double rho_scaled = lambda_r - shift;
  if (!(rho_scaled > 0.0)) throw ConvergenceError("rpf_eigendata: non-positive leading eigenvalue");
  out.log_rho = std::log(rho_scaled) + mx;
  out.rho = std::exp(out.log_rho);
  out.iterations = std::max(it_r, it_l);
  for (double& v : out.left) v = std::max(v, 0.0);
  for (double& v : out.right) v = std::max(v, 0.0);
  const double left_total = std::accumulate(out.left.begin(), out.left.end(), 0.0);
  for (double& v : out.left) v /= left_total;
  double dot = 0.0;
  for (std::size_t u = 0; u < S; ++u) dot += out.left[u] * out.right[u];
  for (double& v : out.right) v /= dot;
  return out;
}

// ---------------------------------------------------------------------------
// GibbsMarkovMeasure

GibbsMarkovMeasure::GibbsMarkovMeasure(const Eigendata& eigen)
    : space_(eigen.space), eigen_(eigen), log_rho_(eigen.log_rho), rho_(eigen.rho) {
  const StateSpace& sp = *space_;
  const std::size_t S = sp.size();
  const std::size_t T = sp.transition_count();
  kernel_.resize(T);
  kernel_cdf_.resize(T);
  for (std::size_t u = 0; u < S; ++u) {
    const auto succ = sp.successors(u);
    const std::size_t off = sp.successor_offset(u);
    double row = 0.0;
    for (std::size_t j = 0; j < succ.size(); ++j) {
      const double p =
          std::exp(eigen.transition_log_weight[off + j] - log_rho_) * eigen.right[succ[j]] / eigen.right[u];
      kernel_[off + j] = p;
      row += p;
    }
    double cumulative = 0.0;
    for (std::size_t j = 0; j < succ.size(); ++j) {
      kernel_[off + j] /= row;
      cumulative += kernel_[off + j];
      kernel_cdf_[off + j] = cumulative;
    }
  }
  // pi = nu_L * h, polished by a few applications of the kernel.
  stationary_.resize(S);
  for (std::size_t u = 0; u < S; ++u) stationary_[u] = eigen.left[u] * eigen.right[u];
  std::vector<double> next(S);
  for (int pass = 0; pass < 4; ++pass) {
    double total = 0.0;
    for (double v : stationary_) total += v;
    for (double& v : stationary_) v /= total;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t u = 0; u < S; ++u) {
      const auto succ = sp.successors(u);
      const std::size_t off = sp.successor_offset(u);
      for (std::size_t j = 0; j < succ.size(); ++j) next[succ[j]] += stationary_[u] * kernel_[off + j];
    }
    // Only accept the polish while it moves the vector by roundoff amounts.
    double delta = 0.0;
    for (std::size_t u = 0; u < S; ++u) delta = std::max(delta, std::abs(next[u] - stationary_[u]));
    if (delta > 1e-8) break;
    stationary_.swap(next);
  }
  {
    double total = 0.0;
    for (double v : stationary_) total += v;
    for (double& v : stationary_) v /= total;
  }
  stationary_cdf_.resize(S);
  double cumulative = 0.0;
  for (std::size_t u = 0; u < S; ++u) {
    cumulative += stationary_[u];
    stationary_cdf_[u] = cumulative;
  }
  reversed_.resize(T);
  reversed_cdf_.resize(T);
  // Predecessor CSR offsets coincide with the order used by StateSpace.
  std::size_t pos = 0;
  for (std::size_t w = 0; w < S; ++w) {
    const auto pred = sp.predecessors(w);
    const auto trans = sp.predecessor_transitions(w);
    double column = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      reversed_[pos + j] = stationary_[pred[j]] * kernel_[trans[j]] / stationary_[w];
      column += reversed_[pos + j];
    }
    double c = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      reversed_[pos + j] /= column;
      c += reversed_[pos + j];
      reversed_cdf_[pos + j] = c;
    }
    pos += pred.size();
  }
}

double GibbsMarkovMeasure::reversed_probability(std::size_t w, std::size_t k) const {
  const auto pred = space_->predecessors(w);
  const std::size_t base = static_cast<std::size_t>(pred.data() - space_->predecessors(0).data());
  return reversed_[base + k];
}

double GibbsMarkovMeasure::cylinder_measure(std::span<const Letter> word) const {
  const StateSpace& sp = *space_;
  const std::size_t m = sp.memory();
  if (word.empty()) return 1.0;
  if (word.size() < m) {
    double total = 0.0;
    for (std::size_t u = 0; u < sp.size(); ++u)
      if (std::equal(word.begin(), word.end(), sp.state(u).begin())) total += stationary_[u];
    return total;
  }
  auto state = sp.find(word.first(m));
  if (!state) return 0.0;
  double mass = stationary_[*state];
  for (std::size_t k = m; k < word.size(); ++k) {
    const auto letters = sp.successor_letters(*state);
    auto it = std::find(letters.begin(), letters.end(), word[k]);
    if (it == letters.end()) return 0.0;
    const std::size_t j = static_cast<std::size_t>(it - letters.begin());
    mass *= kernel_[sp.successor_offset(*state) + j];
    *state = sp.successors(*state)[j];
  }
  return mass;
}

std::size_t GibbsMarkovMeasure::draw_state(Rng& rng) const {
  return pick(stationary_cdf_, 0, stationary_cdf_.size(), rng.uniform());
}

std::size_t GibbsMarkovMeasure::step_forward(std::size_t state, Rng& rng, Letter& letter) const {
  const StateSpace& sp = *space_;
  const std::size_t off = sp.successor_offset(state);
  const std::size_t deg = sp.successors(state).size();
  const std::size_t k = pick(kernel_cdf_, off, off + deg, rng.uniform());
  letter = sp.successor_letters(state)[k - off];
  return sp.successors(state)[k - off];
}

std::size_t GibbsMarkovMeasure::step_backward(std::size_t state, Rng& rng, Letter& letter) const {
  const StateSpace& sp = *space_;
  const auto pred = sp.predecessors(state);
  const std::size_t base = static_cast<std::size_t>(pred.data() - sp.predecessors(0).data());
  const std::size_t k = pick(reversed_cdf_, base, base + pred.size(), rng.uniform());
  const std::size_t u = pred[k - base];
  letter = sp.state(u).front();
  return u;
}

Word GibbsMarkovMeasure::sample_forward(std::size_t length, std::uint64_t seed) const {
  Rng rng(seed);
  Word out;
  out.reserve(length);
  std::size_t state = draw_state(rng);
  for (Letter e : space_->state(state)) {
    if (out.size() == length) break;
    out.push_back(e);
  }
  while (out.size() < length) {
    Letter e = 0;
    state = step_forward(state, rng, e);
    out.push_back(e);
  }
  return out;
}

Word GibbsMarkovMeasure::sample_past(std::span<const Letter> future_prefix, std::size_t length,
                                     std::uint64_t seed) const {
  const StateSpace& sp = *space_;
  const std::size_t m = sp.memory();
  if (future_prefix.empty()) throw DomainError("sample_past: empty future prefix");
  Rng rng(seed);
  std::size_t state;
  if (future_prefix.size() >= m) {
    auto s = sp.find(future_prefix.first(m));
    if (!s) throw DomainError("sample_past: prefix " + describe(future_prefix) + " inadmissible or outside truncation");
    state = *s;
  } else {
    std::vector<double> cdf;
    std::vector<std::size_t> candidates;
    double c = 0.0;
    for (std::size_t u = 0; u < sp.size(); ++u) {
      if (std::equal(future_prefix.begin(), future_prefix.end(), sp.state(u).begin())) {
        c += stationary_[u];
        cdf.push_back(c);
        candidates.push_back(u);
      }
    }
    if (candidates.empty() || c <= 0.0) throw DomainError("sample_past: prefix has zero measure");
    state = candidates[pick(cdf, 0, cdf.size(), rng.uniform())];
  }
  // Later prefix letters must follow the chain too.
  if (cylinder_measure(future_prefix) <= 0.0)
    throw DomainError("sample_past: prefix " + describe(future_prefix) + " has zero measure");
  Word reversed;
  reversed.reserve(length);
  for (std::size_t k = 0; k < length; ++k) {
    Letter e = 0;
    state = step_backward(state, rng, e);
    reversed.push_back(e);
  }
  return Word(reversed.rbegin(), reversed.rend());
}

double GibbsMarkovMeasure::integrate(const Potential& psi) const {
  const StateSpace& sp = *space_;
  const std::size_t m = sp.memory();
  if (psi.memory() > m + 1) throw DomainError("integrate: potential memory exceeds chain memory + 1");
  std::vector<double> terms(sp.size());
  Word buffer(m + 1);
  for (std::size_t u = 0; u < sp.size(); ++u) {
    const Word& s = sp.state(u);
    if (psi.memory() <= m) {
      terms[u] = stationary_[u] * psi(s);
      continue;
    }
    std::copy(s.begin(), s.end(), buffer.begin());
    double acc = 0.0;
    const auto letters = sp.successor_letters(u);
    for (std::size_t j = 0; j < letters.size(); ++j) {
      buffer.back() = letters[j];
      acc += kernel_[sp.successor_offset(u) + j] * psi(buffer);
    }
    terms[u] = stationary_[u] * acc;
  }
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

double GibbsMarkovMeasure::entropy() const {
  const StateSpace& sp = *space_;
  double h = 0.0;
  for (std::size_t u = 0; u < sp.size(); ++u) {
    double row = 0.0;
    const std::size_t off = sp.successor_offset(u);
    for (std::size_t j = 0; j < sp.successors(u).size(); ++j) {
      const double p = kernel_[off + j];
      if (p > 0.0) row -= p * std::log(p);
    }
    h += stationary_[u] * row;
  }
  return h;
}

std::vector<double> GibbsMarkovMeasure::letter_marginal() const {
  const StateSpace& sp = *space_;
  std::vector<double> out(sp.truncation(), 0.0);
  for (std::size_t u = 0; u < sp.size(); ++u) out[sp.state(u).front()] += stationary_[u];
  return out;
}

GibbsMarkovMeasure gibbs_measure(const Eigendata& eigen) { return GibbsMarkovMeasure(eigen); }

double entropy_from_pressure(const GibbsMarkovMeasure& mu, const Potential& psi) {
  return mu.pressure() - mu.integrate(psi);
}

// ---------------------------------------------------------------------------
// Gibbs audit

GibbsAudit gibbs_audit(const GibbsMarkovMeasure& mu, const Potential& psi, const IncidenceMatrix& A,
                       std::size_t n_min, std::size_t n_max, std::size_t sample_size,
                       std::uint64_t seed) {
  if (n_min == 0 || n_max < n_min) throw DomainError("gibbs_audit: bad length range");
  const StateSpace& sp = mu.space();
  const std::size_t m = sp.memory();
  const std::size_t N = sp.truncation();
  const double P = mu.pressure();
  const Eigendata& eig = mu.eigendata();
  GibbsAudit audit;

  for (std::size_t n = n_min; n <= n_max; ++n) {
    GibbsAuditLevel level;
    level.n = n;
    std::vector<Word> words;
    // Count admissible n-words on the truncation without materialising them.
    double count = 0.0;
    {
      std::vector<double> c(sp.size(), 1.0), d(sp.size());
      if (n >= m) {
        for (std::size_t k = m; k < n; ++k) {
          for (std::size_t u = 0; u < sp.size(); ++u) {
            double s = 0.0;
            for (std::size_t w : sp.successors(u)) s += c[w];
            d[u] = s;
          }
          c.swap(d);
        }
        for (double v : c) count += v;
      } else {
        count = static_cast<double>(sp.size());
      }
    }
    if (count <= static_cast<double>(sample_size)) {
      words = enumerate_cylinders(n, N, A, sample_size + 1);
      level.exhaustive = true;
    } else {
      words.reserve(sample_size);
      for (std::size_t s = 0; s < sample_size; ++s)
        words.push_back(mu.sample_forward(n, derive_seed(seed, n * 1'000'003ULL + s)));
    }
    level.cylinders = words.size();
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
    for (const Word& w : words) {
      const double mass = mu.cylinder_measure(w);
      if (mass <= 0.0) continue;
      const Word tau = extend_admissibly(w, psi.memory() - 1, A, N);
      const double sn = birkhoff_sum(psi, tau, n);
      const double log_r = std::log(mass) - sn + P * static_cast<double>(n);
      const double r = std::exp(log_r);
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      if (n >= m) {
        const auto u0 = sp.find(std::span<const Letter>(w).first(m));
        const auto ul = sp.find(std::span<const Letter>(w).subspan(n - m, m));
        double tail = 0.0;
        for (std::size_t k = n - m; k < n; ++k) tail += psi(std::span<const Letter>(tau).subspan(k));
        const double log_pred =
            std::log(eig.left[*u0]) + std::log(eig.right[*ul]) + static_cast<double>(m) * P - tail;
        const double q = std::exp(log_r - log_pred);
        qmin = std::min(qmin, q);
        qmax = std::max(qmax, q);
      }
    }
    level.ratio_min = rmin;
    level.ratio_max = rmax;
    level.constant = std::max(rmax, 1.0 / rmin);
    if (n >= m) {
      level.normalized_min = qmin;
      level.normalized_max = qmax;
      level.normalized_constant = std::max(qmax, 1.0 / qmin);
    } else {
      level.normalized_min = level.normalized_max = level.normalized_constant = 1.0;
    }
    audit.levels.push_back(level);
  }
  double lower = 0.0, upper = 0.0;
  const std::size_t half = audit.levels.size() / 2;
  for (std::size_t i = 0; i < audit.levels.size(); ++i) {
    const auto& l = audit.levels[i];
    audit.constant = std::max(audit.constant, l.constant);
    audit.normalized_constant = std::max(audit.normalized_constant, l.normalized_constant);
    (i < half ? lower : upper) = std::max(i < half ? lower : upper, l.constant);
  }
  audit.flat = half == 0 || upper <= lower * (1.0 + 1e-9);
  return audit;
}

}  // namespace thermo
