#include "thermo/run.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "thermo/beta_ext.hpp"
#include "thermo/dimension.hpp"
#include "thermo/errors.hpp"
#include "thermo/gdms.hpp"
#include "thermo/shift_core.hpp"

namespace thermo {

using json = nlohmann::json;

namespace {

// A config object being validated. Every value read is copied, with its default
// filled in, into the resolved config that the report embeds.
class Node {
 public:
  Node(const json& in, json& out, std::string path) : in_(&in), out_(&out), path_(std::move(path)) {
    if (!in.is_object()) throw ConfigError(where() + "expected an object");
    if (!out.is_object()) out = json::object();
  }

  bool has(const std::string& key) const { return in_->contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) {
      used_.insert(key);
      (*out_)[key] = fallback;
      return fallback;
    }
    return need<T>(key);
  }

  template <class T>
  T need(const std::string& key) {
    used_.insert(key);
    if (!has(key)) throw ConfigError(where() + "missing key '" + key + "'");
    const json& v = in_->at(key);
    T value = convert<T>(v, key);
    (*out_)[key] = v;
    return value;
  }

  /// Raw JSON value, copied unchanged.
  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!has(key)) throw ConfigError(where() + "missing key '" + key + "'");
    (*out_)[key] = in_->at(key);
    return in_->at(key);
  }

  Node child(const std::string& key) {
    used_.insert(key);
    if (!has(key)) throw ConfigError(where() + "missing section '" + key + "'");
    return Node(in_->at(key), (*out_)[key], path_ + key + ".");
  }

  /// Unknown keys are configuration errors.
  void done() const {
    for (const auto& [key, value] : in_->items())
      if (!used_.count(key)) throw ConfigError(where() + "unknown key '" + key + "'");
  }

  std::string where() const { return "config " + (path_.empty() ? std::string("<root>") : path_) + ": "; }

 private:
  template <class T>
  T convert(const json& v, const std::string& key) const {
    const std::string at = where() + "'" + key + "' ";
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(at + "must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(at + "must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(at + "must be a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
        throw ConfigError(at + "must be a nonnegative integer");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw ConfigError(at + "must be an array of numbers");
      std::vector<double> out;
      for (const json& x : v) {
        if (!x.is_number()) throw ConfigError(at + "must be an array of numbers");
        out.push_back(x.get<double>());
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  const json* in_;
  json* out_;
  std::string path_;
  std::set<std::string> used_;
};

// Systems.

struct System {
  std::optional<Gdms> gdms;
  IncidenceMatrix incidence = IncidenceMatrix::full();
  std::size_t N = 0;
  std::string kind;
};

IncidenceMatrix parse_incidence(const json& v, const std::string& where) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "full") return IncidenceMatrix::full();
    if (s == "golden") return IncidenceMatrix::golden_mean();
    throw ConfigError(where + "incidence must be 'full', 'golden' or a 0/1 table");
  }
  if (!v.is_array() || v.empty()) throw ConfigError(where + "incidence must be 'full', 'golden' or a 0/1 table");
  std::vector<std::vector<int>> table;
  for (const json& row : v) {
    if (!row.is_array() || row.size() != v.size()) throw ConfigError(where + "incidence table must be square");
    std::vector<int> r;
    for (const json& x : row) {
      if (!x.is_number_integer() || (x.get<int>() != 0 && x.get<int>() != 1))
        throw ConfigError(where + "incidence entries must be 0 or 1");
      r.push_back(x.get<int>());
    }
    table.push_back(std::move(r));
  }
  return IncidenceMatrix::from_table(std::move(table));
}

std::string beta_text(Node& n, const std::string& key, const std::string& fallback) {
  if (!n.has(key)) return n.get<std::string>(key, fallback);
  const json& v = n.raw(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw ConfigError(n.where() + "'" + key + "' must be a number or one of phi, golden, pi, e");
}

double parse_beta_checked(const std::string& text) {
  try {
    return parse_beta<double>(text);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("beta: ") + e.what());
  }
}

System parse_system(Node n, std::size_t default_N) {
  System s;
  s.kind = n.need<std::string>("kind");
  if (s.kind == "shift") {
    s.incidence = parse_incidence(n.raw("incidence"), n.where());
    s.N = n.need<std::size_t>("N");
  } else {
    if (s.kind == "gauss") {
      s.gdms = gauss_cf();
    } else if (s.kind == "backward_cf") {
      s.gdms = backward_cf();
    } else if (s.kind == "manneville_pomeau") {
      const double alpha = n.need<double>("alpha");
      if (!(alpha > 0.0)) throw ConfigError(n.where() + "alpha must be positive");
      s.gdms = manneville_pomeau(alpha);
    } else if (s.kind == "moran") {
      const auto r = n.need<std::vector<double>>("ratios");
      try {
        s.gdms = moran(r);
      } catch (const Error& e) {
        throw ConfigError(n.where() + e.what());
      }
    } else if (s.kind == "gls") {
      const json& cells = n.raw("cells");
      std::vector<Interval> iv;
      if (!cells.is_array()) throw ConfigError(n.where() + "cells must be an array of [lo, hi] pairs");
      for (const json& c : cells) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
          throw ConfigError(n.where() + "cells must be an array of [lo, hi] pairs");
        iv.push_back({c[0].get<double>(), c[1].get<double>()});
      }
      try {
        s.gdms = gls(iv);
      } catch (const Error& e) {
        throw ConfigError(n.where() + e.what());
      }
    } else if (s.kind == "luroth") {
      s.gdms = luroth();
    } else if (s.kind == "beta_gls") {
      const BetaSystem B(parse_beta_checked(beta_text(n, "beta", "phi")));
      s.gdms = beta_gls_system(B, n.get<std::size_t>("cells", 64));
    } else {
      throw ConfigError(n.where() + "unknown system kind '" + s.kind + "'");
    }
    s.N = n.get<std::size_t>("N", default_N);
    if (s.N == 0) throw ConfigError(n.where() + "N must be positive");
    if (n.get<bool>("finite", false)) s.gdms = finite_subsystem(*s.gdms, s.N);
    s.incidence = s.gdms->incidence();
    s.N = s.gdms->truncate(s.N);
  }
  n.done();
  return s;
}

TailRule parse_tail(const std::string& t, const std::string& where) {
  if (t == "repeat_last") return TailRule::repeat_last;
  if (t == "periodic") return TailRule::periodic;
  throw ConfigError(where + "tail must be 'repeat_last' or 'periodic'");
}

Potential parse_potential(Node n, const System& sys) {
  const auto kind = n.need<std::string>("kind");
  std::optional<Potential> out;
  if (kind == "zero") {
    out = Potential::constant(0.0);
  } else if (kind == "constant") {
    out = Potential::constant(n.need<double>("value"));
  } else if (kind == "memory1") {
    auto v = n.need<std::vector<double>>("values");
    if (v.size() < sys.N) throw ConfigError(n.where() + "memory1 needs a value for each of the N letters");
    out = Potential::memory1(std::move(v));
  } else if (kind == "memory2") {
    const json& rows = n.raw("values");
    std::vector<std::vector<double>> table;
    if (!rows.is_array()) throw ConfigError(n.where() + "memory2 values must be a table");
    for (const json& r : rows) {
      if (!r.is_array()) throw ConfigError(n.where() + "memory2 values must be a table");
      std::vector<double> row;
      for (const json& x : r) {
        if (!x.is_number()) throw ConfigError(n.where() + "memory2 values must be numbers");
        row.push_back(x.get<double>());
      }
      table.push_back(std::move(row));
    }
    if (table.size() < sys.N) throw ConfigError(n.where() + "memory2 table smaller than N");
    for (const auto& r : table)
      if (r.size() != table.size()) throw ConfigError(n.where() + "memory2 table must be square");
    out = Potential::memory2(std::move(table));
  } else if (kind == "geometric") {
    if (!sys.gdms) throw ConfigError(n.where() + "geometric potentials need a GDMS system");
    const double t = n.get<double>("t", 1.0);
    const auto memory = n.get<std::size_t>("memory", 2);
    if (memory < 2) throw ConfigError(n.where() + "geometric memory must be at least 2");
    const TailRule tail = parse_tail(n.get<std::string>("tail", "repeat_last"), n.where());
    out = geometric_potential(*sys.gdms, t, 0.0, std::nullopt, 0.0, memory, tail);
  } else {
    throw ConfigError(n.where() + "unknown potential kind '" + kind + "'");
  }
  n.done();
  return *out;
}

json word_json(const Word& w) { return json(std::vector<Letter>(w.begin(), w.end())); }

struct Context {
  json resolved = json::object();
  std::uint64_t seed = 1;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

Context begin(const json& config, const RunOptions& o, Node*& root_out, std::optional<Node>& root) {
  Context c;
  root.emplace(config, c.resolved, "");
  root_out = &*root;
  const auto configured = root->get<std::uint64_t>("seed", 1);
  c.seed = o.seed.value_or(configured);
  c.resolved["seed"] = c.seed;
  return c;
}

json finish(const std::string& command, Context& c, json results, json diagnostics, const RunOptions& o) {
  json report;
  report["command"] = command;
  report["version"] = kVersion;
  report["config"] = c.resolved;
  report["seed"] = c.seed;
  report["results"] = std::move(results);
  report["diagnostics"] = std::move(diagnostics);
  if (!o.stable)
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - c.start).count();
  return report;
}

// Transitions of the memory-word graph used by the transfer recursion.
double dp_transitions(const IncidenceMatrix& A, std::size_t memory, std::size_t N) {
  return std::pow(static_cast<double>(N), static_cast<double>(memory) + (A.is_full() && memory == 1 ? 0.0 : 1.0));
}

}  // namespace

json cmd_pressure(const json& config, const RunOptions& o) {
  std::optional<Node> holder;
  Node* root = nullptr;
  Context c = begin(config, o, root, holder);
  const System sys = parse_system(root->child("system"), 64);
  const Potential psi = parse_potential(root->child("potential"), sys);
  const auto n_max = root->get<std::size_t>("n_max", 12);
  auto method = root->get<std::string>("method", "auto");
  const auto tol = root->get<double>("summability_tolerance", 1e-3);
  std::optional<std::pair<std::size_t, std::size_t>> sweep;
  if (root->has("sweep")) {
    Node s = root->child("sweep");
    sweep = {s.get<std::size_t>("from", 64), s.get<std::size_t>("to", sys.N)};
    s.done();
    if (sweep->first == 0 || sweep->first > sweep->second) throw ConfigError("config sweep: need 0 < from <= to");
  }
  root->done();
  if (method != "auto" && method != "dp" && method != "rpf") throw ConfigError("config: method must be auto, dp or rpf");
  if (n_max < psi.memory()) throw ConfigError("config: n_max below the potential memory");
  if (method == "auto") method = dp_transitions(sys.incidence, psi.memory(), sys.N) <= 4e6 ? "dp" : "rpf";

  json results, diagnostics;
  const std::size_t states = std::max<std::size_t>(1, psi.memory() - 1);
  if (method == "dp") {
    const PressureEstimate p = pressure(psi, sys.incidence, n_max, sys.N);
    results["pressure"] = p.value;
    diagnostics["levels"] = p.levels;
    diagnostics["ratio_levels"] = p.ratio_levels;
    diagnostics["gap"] = p.gap;
  } else {
    const Eigendata e = rpf_eigendata(psi, sys.incidence, states, sys.N);
    results["pressure"] = e.log_rho;
    diagnostics["power_iterations"] = e.iterations;
  }
  results["method"] = method;
  results["truncation"] = sys.N;

  const SummabilityReport s = summability_report(psi, sys.incidence, sys.N, tol);
  json rows = json::array();
  for (const auto& r : s.rows) rows.push_back({{"N", r.truncation}, {"partial_sum", r.partial_sum}});
  results["summability"] = {{"rows", rows},
                            {"converged", s.converged},
                            {"last_relative_increment", s.last_relative_increment},
                            {"tolerance", s.tolerance}};
  if (sweep) {
    json table = json::array();
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t N = sweep->first; N <= sweep->second; N *= 2) {
      const double p = rpf_eigendata(psi, sys.incidence, states, N).log_rho;
      table.push_back({{"N", N}, {"pressure", p}, {"change", std::isnan(previous) ? 0.0 : p - previous}});
      previous = p;
      if (N > sweep->second / 2 && N != sweep->second) N = sweep->second / 2;  // end exactly at `to`
    }
    results["truncation_sweep"] = table;
  }
  return finish("pressure", c, results, diagnostics, o);
}

json cmd_gibbs(const json& config, const RunOptions& o) {
  std::optional<Node> holder;
  Node* root = nullptr;
  Context c = begin(config, o, root, holder);
  const System sys = parse_system(root->child("system"), 64);
  const Potential psi = parse_potential(root->child("potential"), sys);
  const auto memory = root->get<std::size_t>("memory", std::max<std::size_t>(1, psi.memory() - 1));
  std::size_t n_min = 1, n_max = 8, sample_size = 2000;
  if (root->has("audit")) {
    Node a = root->child("audit");
    n_min = a.get<std::size_t>("n_min", 1);
    n_max = a.get<std::size_t>("n_max", 8);
    sample_size = a.get<std::size_t>("sample_size", 2000);
    a.done();
  }
  const auto export_limit = root->get<std::size_t>("export_limit", 4096);
  root->done();
  if (memory == 0 || psi.memory() > memory + 1) throw ConfigError("config: chain memory too small for the potential");
  if (n_min == 0 || n_min > n_max) throw ConfigError("config audit: need 1 <= n_min <= n_max");

  const Eigendata e = rpf_eigendata(psi, sys.incidence, memory, sys.N);
  const GibbsMarkovMeasure mu(e);
  json results, diagnostics;
  results["pressure"] = mu.pressure();
  results["rho"] = mu.rho();
  results["entropy"] = mu.entropy();
  results["entropy_from_pressure"] = entropy_from_pressure(mu, psi);
  results["letter_marginal"] = mu.letter_marginal();
  diagnostics["power_iterations"] = e.iterations;
  diagnostics["states"] = mu.space().size();
  diagnostics["transitions"] = mu.space().transition_count();

  const StateSpace& sp = mu.space();
  if (sp.transition_count() <= export_limit) {
    json states = json::array(), transitions = json::array();
    for (std::size_t u = 0; u < sp.size(); ++u) {
      states.push_back({{"word", word_json(sp.state(u))}, {"stationary", mu.stationary()[u]},
                        {"h", e.right[u]}, {"nu", e.left[u]}});
      const auto succ = sp.successors(u);
      const auto letters = sp.successor_letters(u);
      for (std::size_t k = 0; k < succ.size(); ++k)
        transitions.push_back({{"from", u},
                               {"to", succ[k]},
                               {"letter", letters[k]},
                               {"p", mu.transition_probability(sp.successor_offset(u) + k)}});
    }
    results["chain"] = {{"memory", memory}, {"states", states}, {"transitions", transitions}};
  } else {
    results["chain"] = {{"memory", memory}, {"exported", false}};
  }

  const GibbsAudit audit = gibbs_audit(mu, psi, sys.incidence, n_min, n_max, sample_size, c.seed);
  json table = json::array();
  for (const auto& l : audit.levels)
    table.push_back({{"n", l.n},
                     {"cylinders", l.cylinders},
                     {"exhaustive", l.exhaustive},
                     {"ratio_min", l.ratio_min},
                     {"ratio_max", l.ratio_max},
                     {"D", l.constant},
                     {"D_normalized", l.normalized_constant}});
  results["audit"] = {{"levels", table},
                      {"D", audit.constant},
                      {"D_normalized", audit.normalized_constant},
                      {"flat", audit.flat}};
  return finish("gibbs", c, results, diagnostics, o);
}

json cmd_beta(const json& config, const RunOptions& o) {
  std::optional<Node> holder;
  Node* root = nullptr;
  Context c = begin(config, o, root, holder);
  const std::string text = beta_text(*root, "beta", "phi");
  const auto depth = root->get<std::size_t>("depth", 4096);
  const auto cells = root->get<std::size_t>("cells", 16);
  const auto samples = root->get<std::size_t>("identity_samples", 10000);
  std::size_t fr_n = 0, fr_per = 4;
  std::string precision = "auto";
  if (root->has("first_return")) {
    Node f = root->child("first_return");
    fr_n = f.get<std::size_t>("n_max", 200);
    fr_per = f.get<std::size_t>("per_cell", 4);
    precision = f.get<std::string>("precision", "auto");
    f.done();
  }
  root->done();
  if (depth == 0) throw ConfigError("config: depth must be positive");
  if (precision != "auto" && precision != "double" && precision != "high")
    throw ConfigError("config first_return: precision must be auto, double or high");

  const BetaSystem B(parse_beta_checked(text), depth);
  json results, diagnostics;
  results["beta"] = B.beta();
  const auto& b = B.digits_of_one();
  results["digits_of_one"] = std::vector<int>(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(b.size(), 64)));
  results["finite"] = B.finite();
  results["expansion_length"] = b.size();
  if (B.cell_count()) results["cell_count"] = *B.cell_count();
  diagnostics["reliable_depth"] = B.reliable_depth();
  diagnostics["available_cells"] = B.available_cells();

  const std::size_t shown = B.cell_count() ? std::min(cells, *B.cell_count()) : cells;
  if (shown > B.available_cells())
    throw BudgetExceeded("partition table needs " + std::to_string(shown) + " cells but depth " +
                         std::to_string(depth) + " resolves " + std::to_string(B.available_cells()));
  json table = json::array();
  for (std::size_t n = 1; n <= shown; ++n) {
    const auto cell = B.cell(n);
    table.push_back({{"n", n}, {"k", cell.index.k}, {"i", cell.index.i}, {"left", cell.left}, {"length", cell.length}});
  }
  results["partition"] = table;

  const IdentityReport id = identity_check(B, samples, c.seed);
  results["identity"] = {{"samples", id.samples},
                         {"max_deviation", id.max_deviation},
                         {"closed_form_deviation", id.closed_form_deviation},
                         {"max_return_time", id.max_return_time}};
  if (std::abs(B.beta() - std::numbers::phi) < 1e-15)
    results["golden_conjugacy_deviation"] = golden_conjugacy_deviation(samples, c.seed);

  if (fr_n > 0) {
    const std::size_t need = B.cell_count() ? std::min(fr_n, *B.cell_count()) : fr_n;
    const bool high = precision == "high" || (precision == "auto" && need > B.available_cells());
    FirstReturnReport fr;
    std::size_t available = 0;
    if (high) {
      const BasicBetaSystem<HighReal> H(parse_beta<HighReal>(text), depth);
      available = H.available_cells();
      fr = first_return_law(H, fr_n, fr_per, c.seed);
    } else {
      available = B.available_cells();
      fr = first_return_law(B, fr_n, fr_per, c.seed);
    }
    if (fr.cells < need)
      throw BudgetExceeded("first-return law needs " + std::to_string(need) + " cells but only " +
                           std::to_string(available) + " are resolved at depth " + std::to_string(depth));
    results["first_return"] = {{"cells", fr.cells},
                               {"points", fr.points},
                               {"mismatches", fr.mismatches},
                               {"precision", high ? "high" : "double"}};
  }
  return finish("beta", c, results, diagnostics, o);
}

namespace {

json ld_json(const LocalDimensionEstimate& l) {
  return {{"mean", l.mean},          {"std", l.std},     {"standard_error", l.standard_error},
          {"upper_half_mean", l.upper_half_mean},        {"centers", l.slopes.size()},
          {"r_min", l.r_min},        {"r_max", l.r_max}};
}

json lyap_json(const LyapunovEstimate& l) {
  json j = {{"value", l.value}, {"standard_error", l.standard_error}, {"method", l.method}};
  if (l.method == "birkhoff") {
    j["orbits"] = l.orbits;
    j["steps"] = l.steps;
    j["restarts"] = l.restarts;
  } else {
    j["tail_mass"] = l.tail_mass;
    j["tail_bound"] = l.tail_bound;
  }
  return j;
}

std::pair<int, int> radii(Node& n, const std::string& key, std::pair<int, int> fallback) {
  if (!n.has(key)) {
    n.get<std::vector<double>>(key, {double(fallback.first), double(fallback.second)});
    return fallback;
  }
  const auto v = n.need<std::vector<double>>(key);
  if (v.size() != 2 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[0] < 0 || v[0] > v[1])
    throw ConfigError(n.where() + "'" + key + "' must be [j_min, j_max] with 0 <= j_min <= j_max");
  return {int(v[0]), int(v[1])};
}

void write_cloud(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open cloud file " + path);
  out << (cloud.dim == 2 ? "x,y\n" : "x\n");
  char buf[64];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t k = 0; k < cloud.dim; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", cloud.at(i, k));
      out << (k ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace

json cmd_dimension(const json& config, const RunOptions& o) {
  std::optional<Node> holder;
  Node* root = nullptr;
  Context c = begin(config, o, root, holder);
  json results = json::object(), diagnostics = json::object();
  bool any = false;

  if (root->has("gls")) {
    any = true;
    Node g = root->child("gls");
    const std::string text = beta_text(g, "beta", "phi");
    DimensionCheckOptions d;
    d.cells = g.get<std::size_t>("cells", 64);
    d.potential = g.get<std::string>("potential", "parry");
    if (d.potential == "bernoulli") d.weights = g.need<std::vector<double>>("weights");
    d.M = g.get<std::size_t>("M", 200000);
    d.one_d.centers = d.two_d.centers = g.get<std::size_t>("centers", 1000);
    std::tie(d.one_d.j_min, d.one_d.j_max) = radii(g, "radii_1d", {6, 18});
    std::tie(d.two_d.j_min, d.two_d.j_max) = radii(g, "radii_2d", {2, 6});
    d.tolerance = g.get<double>("tolerance", 0.05);
    const auto steps = g.get<std::size_t>("lyapunov_steps", 1000000);
    const auto orbits = g.get<std::size_t>("lyapunov_orbits", 32);
    const auto check = g.get<std::string>("check", "global");
    g.done();
    if (check != "global" && check != "conditional") throw ConfigError("config gls: check must be global or conditional");
    if (d.M < 2) throw ConfigError("config gls: M must be at least 2");
    d.seed = c.seed;
    d.threads = o.threads;

    const BetaSystem B(parse_beta_checked(text));
    const DimensionReport r = check == "global" ? global_dimension_check(B, d) : conditional_dimension_check(B, d);
    const GlsCells cells = gls_cells(B, d.cells);
    const Potential psi = gls_potential(cells, d.potential, d.weights);
    const GibbsMarkovMeasure mu(rpf_eigendata(psi, IncidenceMatrix::full(), 1, cells.length.size()));
    const LyapunovEstimate birk = lyapunov_gls_birkhoff(B, mu, steps, orbits, c.seed, o.threads);

    json j;
    j["beta"] = r.beta;
    j["cells"] = r.cells;
    j["entropy"] = r.entropy;
    j["lyapunov_closed_form"] = lyap_json(r.lyapunov);
    j["lyapunov_birkhoff"] = lyap_json(birk);
    j["h_over_chi"] = r.predicted_fiber;
    j["two_h_over_chi"] = r.predicted_global;
    j["fiber"] = ld_json(*r.fiber);
    j["fiber_ok"] = r.fiber_ok;
    if (r.global) {
      j["base"] = ld_json(*r.base);
      j["global"] = ld_json(*r.global);
      j["global_ok"] = r.global_ok;
      j["additivity_gap"] = r.additivity_gap;
      j["additivity_error"] = r.additivity_error;
      j["additivity_ok"] = r.additivity_ok;
    }
    j["cell_weights"] = r.cell_weights;
    results["gls"] = j;
    if (o.emit_cloud) {
      const GlsClouds clouds = sample_gls_clouds(cells, mu, d.M, d.seed, d.threads);
      write_cloud(*o.emit_cloud, clouds.joint);
      diagnostics["cloud_points"] = clouds.joint.size();
    }
  }

  if (root->has("temperature")) {
    any = true;
    Node t = root->child("temperature");
    const System sys = parse_system(t.child("system"), 64);
    if (!sys.gdms) throw ConfigError("config temperature: system must be a GDMS");
    std::vector<double> qs = {0.0};
    if (t.has("q")) {
      const json& q = t.raw("q");
      if (q.is_number()) {
        qs = {q.get<double>()};
      } else if (q.is_array() && !q.empty() && std::all_of(q.begin(), q.end(), [](const json& x) { return x.is_number(); })) {
        qs = q.get<std::vector<double>>();
      } else {
        throw ConfigError(t.where() + "q must be a number or a nonempty array of numbers");
      }
    } else {
      t.get<std::vector<double>>("q", qs);
    }
    std::optional<Potential> theta;
    if (t.has("theta")) theta = parse_potential(t.child("theta"), sys);
    TemperatureOptions opt;
    opt.N = sys.N;
    const auto bracket = t.get<std::vector<double>>("bracket", {1e-3, 2.0});
    if (bracket.size() != 2 || !(bracket[0] < bracket[1])) throw ConfigError(t.where() + "bracket must be [lo, hi] with lo < hi");
    opt.lo = bracket[0];
    opt.hi = bracket[1];
    opt.memory = t.get<std::size_t>("memory", 2);
    opt.tail = parse_tail(t.get<std::string>("tail", "repeat_last"), t.where());
    opt.summability_tolerance = t.get<double>("summability_tolerance", 1e-3);
    t.done();
    if (opt.memory < 2) throw ConfigError(t.where() + "memory must be at least 2");
    if (qs.size() > 1 && !theta) throw ConfigError(t.where() + "several q values need a theta potential");

    json rows = json::array();
    for (double q : qs) {
      const TemperatureResult r = temperature(*sys.gdms, theta, q, opt);
      json probes = json::array();
      for (std::size_t k = 0; k < r.probes.size(); ++k)
        probes.push_back({{"t", r.probes[k].first}, {"pressure", r.probes[k].second}, {"summable", bool(r.summable[k])}});
      rows.push_back({{"q", q},
                      {"T", r.t},
                      {"residual", r.residual},
                      {"bracket", {r.lo, r.hi}},
                      {"monotone", r.monotone},
                      {"p_theta", r.p_theta},
                      {"probes", probes}});
    }
    results["temperature"] = rows;
    if (std::find(qs.begin(), qs.end(), 0.0) != qs.end() && !theta) results["hd_limit_set"] = rows[0]["T"];
  }

  if (root->has("gauss")) {
    any = true;
    Node g = root->child("gauss");
    const auto steps = g.get<std::size_t>("steps", 1000000);
    const auto orbits = g.get<std::size_t>("orbits", 32);
    const auto M = g.get<std::size_t>("M", 200000);
    LocalDimensionOptions l;
    l.centers = g.get<std::size_t>("centers", 1000);
    std::tie(l.j_min, l.j_max) = radii(g, "radii", {6, 18});
    g.done();
    l.seed = derive_seed(c.seed, 4);
    l.threads = o.threads;
    const LyapunovEstimate ly = lyapunov_gauss(steps, orbits, c.seed, o.threads);
    const LocalDimensionEstimate ld = local_dimension(gauss_cloud(M, derive_seed(c.seed, 5)), l);
    results["gauss"] = {{"lyapunov", lyap_json(ly)},
                        {"lyapunov_oracle", std::numbers::pi * std::numbers::pi / (6.0 * std::numbers::ln2)},
                        {"local_dimension", ld_json(ld)}};
  }

  root->done();
  if (!any) throw ConfigError("config: dimension needs at least one of gls, temperature, gauss");
  return finish("dimension", c, results, diagnostics, o);
}

json run_command(const std::string& command, const json& config, const RunOptions& options) {
  if (command == "pressure") return cmd_pressure(config, options);
  if (command == "gibbs") return cmd_gibbs(config, options);
  if (command == "beta") return cmd_beta(config, options);
  if (command == "dimension") return cmd_dimension(config, options);
  throw ConfigError("unknown command '" + command + "'");
}

int exit_code(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error)) return 3;
  if (dynamic_cast<const nlohmann::json::exception*>(&error)) return 3;
  return 2;
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

}  // namespace thermo
