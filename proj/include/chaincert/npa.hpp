#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaincert/bellcat.hpp"
#include "chaincert/common.hpp"
#include "chaincert/qcore.hpp"
#include "chaincert/sdp.hpp"

namespace chaincert::npa {

// One projector in an operator word. party: 0 = Alice, 1 = Bob; input and
// outcome are 1-based (outcome 1 is "+1" for two-outcome inputs).
struct Symbol {
  int party = 0;
  int input = 1;
  int outcome = 1;

  auto operator<=>(const Symbol&) const = default;
};

using Word = std::vector<Symbol>;

// Canonical operator word, or the distinguished zero monomial produced by
// orthogonal projectors.
struct Monomial {
  Word word;
  bool zero = false;

  bool is_identity() const { return !zero && word.empty(); }
  size_t length() const { return word.size(); }

  static Monomial zero_monomial() { return Monomial{{}, true}; }

  auto operator<=>(const Monomial&) const = default;
};

// Canonical form: Alice symbols before Bob symbols (stable within party),
// adjacent duplicates collapsed, and orthogonal same-input neighbours
// annihilating the word.
inline Monomial reduce(Word word) {
  for (const auto& s : word) {
    if ((s.party != 0 && s.party != 1) || s.input < 1 || s.outcome < 1) {
      throw ValidationError("reduce: malformed projector symbol");
    }
  }
  std::stable_partition(word.begin(), word.end(), [](const Symbol& s) { return s.party == 0; });
  Word out;
  for (const auto& s : word) {
    if (!out.empty() && out.back() == s) continue;
    if (!out.empty() && out.back().party == s.party && out.back().input == s.input &&
        out.back().outcome != s.outcome) {
      return Monomial::zero_monomial();
    }
    out.push_back(s);
  }
  return Monomial{std::move(out), false};
}

inline Monomial adjoint(const Monomial& m) {
  if (m.zero) return m;
  Word reversed(m.word.rbegin(), m.word.rend());
  return reduce(std::move(reversed));
}

// Representative of the pair {w, w+} merged by the real-symmetry of the
// moment matrix.
inline Monomial moment_key(const Monomial& m) {
  if (m.zero) return m;
  return std::min(m, adjoint(m));
}

inline Monomial concat(const Monomial& a, const Monomial& b) {
  if (a.zero || b.zero) return Monomial::zero_monomial();
  Word w = a.word;
  w.insert(w.end(), b.word.begin(), b.word.end());
  return reduce(std::move(w));
}

inline std::string to_string(const Monomial& m) {
  if (m.zero) return "0";
  if (m.word.empty()) return "1";
  std::string out;
  for (const auto& s : m.word) {
    out += (s.party == 0 ? 'A' : 'B');
    out += std::to_string(s.input);
    out += ':';
    out += std::to_string(s.outcome);
    out += ' ';
  }
  out.pop_back();
  return out;
}

// All distinct canonical monomials of length <= level over the retained
// projectors (outcome +1 per input), merged under adjoint symmetry,
// identity first. Requires a fully two-outcome scenario.
inline std::vector<Monomial> generate_monomials(const qcore::Scenario& scenario, int level = 2) {
  for (const auto* outcomes : {&scenario.alice_outcomes, &scenario.bob_outcomes}) {
    for (int n : *outcomes) {
      if (n != 2) {
        throw CapacityError(
            "generate_monomials: NPA mode supports two-outcome inputs only (got " +
            std::to_string(n) + " outcomes)");
      }
    }
  }
  std::vector<Symbol> alphabet;
  for (int i = 1; i <= scenario.alice_inputs(); ++i) alphabet.push_back({0, i, 1});
  for (int j = 1; j <= scenario.bob_inputs(); ++j) alphabet.push_back({1, j, 1});

  std::vector<Monomial> basis{Monomial{}};
  std::map<Monomial, bool> seen{{Monomial{}, true}};
  std::vector<Word> frontier{{}};
  for (int len = 1; len <= level; ++len) {
    std::vector<Word> next;
    for (const auto& w : frontier) {
      for (const auto& s : alphabet) {
        Word extended = w;
        extended.push_back(s);
        Monomial red = reduce(extended);
        if (red.zero || red.length() < extended.size()) continue;
        next.push_back(red.word);
        const Monomial key = moment_key(red);
        if (!seen.count(key)) {
          seen[key] = true;
          basis.push_back(key);
        }
      }
    }
    frontier = std::move(next);
  }
  return basis;
}

// Linear form over moment-variable ids.
struct AffineForm {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;
};

struct AffineConstraint {
  std::string name;
  AffineForm lhs;
  double rhs = 0.0;
  bool equality = true;
};

struct Target {
  int a_label = 1;
  int b_label = 1;
  int i = 1;
  int j = 1;
};

// The Q2 moment-matrix relaxation of a guessing-probability (or bound)
// problem: canonical monomial basis, symmetric cell-to-variable map,
// linear objective, and affine constraints over the moment variables.
struct MomentProblem {
  std::vector<Monomial> basis;
  int psd_dim = 0;
  std::vector<std::vector<int>> matrix_map;  // -1 marks an annihilated cell
  std::vector<Monomial> variables;           // id -> representative monomial
  std::vector<std::pair<int, int>> representative_cell;  // id -> (row, col)
  int identity_variable = -1;
  AffineForm objective;
  std::vector<AffineConstraint> constraints;
  std::optional<std::string> warning;
};

namespace detail {

struct MomentBuilder {
  std::vector<Monomial> basis;
  std::map<Monomial, int> variable_ids;
  MomentProblem problem;

  explicit MomentBuilder(std::vector<Monomial> b) {
    basis = std::move(b);
    const int n = static_cast<int>(basis.size());
    problem.basis = basis;
    problem.psd_dim = n;
    problem.matrix_map.assign(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n), -1));
    for (int r = 0; r < n; ++r) {
      for (int c = r; c < n; ++c) {
        const Monomial cell = concat(adjoint(basis[static_cast<size_t>(r)]),
                                     basis[static_cast<size_t>(c)]);
        int id = -1;
        if (!cell.zero) {
          const Monomial key = moment_key(cell);
          auto it = variable_ids.find(key);
          if (it == variable_ids.end()) {
            id = static_cast<int>(problem.variables.size());
            variable_ids.emplace(key, id);
            problem.variables.push_back(key);
            problem.representative_cell.emplace_back(r, c);
          } else {
            id = it->second;
          }
        }
        problem.matrix_map[static_cast<size_t>(r)][static_cast<size_t>(c)] = id;
        problem.matrix_map[static_cast<size_t>(c)][static_cast<size_t>(r)] = id;
      }
    }
    problem.identity_variable = variable_id(Monomial{});
    AffineConstraint norm;
    norm.name = "normalization";
    norm.lhs.terms.emplace_back(problem.identity_variable, 1.0);
    norm.rhs = 1.0;
    problem.constraints.push_back(std::move(norm));
  }

  int variable_id(const Monomial& key) const {
    const auto it = variable_ids.find(key);
    if (it == variable_ids.end()) {
      throw SolverError("moment variable missing for monomial " + to_string(key));
    }
    return it->second;
  }

  // p(a, b | i, j) over the retained projectors, via completeness.
  AffineForm probability(int a_label, int b_label, int i, int j) const {
    const int p = variable_id(moment_key(Monomial{{Symbol{0, i, 1}}, false}));
    const int q = variable_id(moment_key(Monomial{{Symbol{1, j, 1}}, false}));
    const int pq = variable_id(moment_key(Monomial{{Symbol{0, i, 1}, Symbol{1, j, 1}}, false}));
    AffineForm form;
    if (a_label == 1 && b_label == 1) {
      form.terms = {{pq, 1.0}};
    } else if (a_label == 1 && b_label == -1) {
      form.terms = {{p, 1.0}, {pq, -1.0}};
    } else if (a_label == -1 && b_label == 1) {
      form.terms = {{q, 1.0}, {pq, -1.0}};
    } else if (a_label == -1 && b_label == -1) {
      form.constant = 1.0;
      form.terms = {{p, -1.0}, {q, -1.0}, {pq, 1.0}};
    } else {
      throw ValidationError("probability: outcome labels must be +1/-1 in NPA mode");
    }
    return form;
  }

  AffineForm functional(const bellcat::BellFunctional& f) const {
    AffineForm total;
    std::map<int, double> acc;
    for (const auto& [key, c] : f.coeffs()) {
      const AffineForm p = probability(key[0], key[1], key[2], key[3]);
      total.constant += c * p.constant;
      for (const auto& [id, v] : p.terms) acc[id] += c * v;
    }
    for (const auto& [id, v] : acc) {
      if (std::abs(v) > 1e-15) total.terms.emplace_back(id, v);
    }
    return total;
  }
};

}  // namespace detail

// Relaxation of: maximize p(target) over the Q2 moment set subject to the
// functional evaluating to `violation`. The equality can be relaxed to >=
// via `equality = false`. `quantum_bound_hint`, when known, attaches an
// infeasibility warning for out-of-range violations.
inline MomentProblem build_moment_problem(const bellcat::BellFunctional& f, double violation,
                                          const Target& target, bool equality = true,
                                          std::optional<double> quantum_bound_hint = std::nullopt) {
  f.scenario().check_inputs(target.i, target.j);
  detail::MomentBuilder builder(generate_monomials(f.scenario()));
  builder.problem.objective = builder.probability(target.a_label, target.b_label, target.i, target.j);
  AffineConstraint vio;
  vio.name = "violation";
  vio.lhs = builder.functional(f);
  vio.rhs = violation;
  vio.equality = equality;
  builder.problem.constraints.push_back(std::move(vio));
  if (quantum_bound_hint && std::abs(violation) > *quantum_bound_hint + 1e-9) {
    builder.problem.warning = "violation " + std::to_string(violation) +
                              " lies outside [-" + std::to_string(*quantum_bound_hint) + ", " +
                              std::to_string(*quantum_bound_hint) + "]; the problem is infeasible";
  }
  return builder.problem;
}

// Relaxation of: maximize the functional itself over the Q2 moment set.
inline MomentProblem build_quantum_bound_problem(const bellcat::BellFunctional& f) {
  detail::MomentBuilder builder(generate_monomials(f.scenario()));
  builder.problem.objective = builder.functional(f);
  return builder.problem;
}

// Standard-form SDP over the moment matrix itself: cells tied to their
// representative, normalization pinned, affine constraints expressed on
// representative cells. The affine objective constant rides on the
// identity/identity cell, which normalization fixes to one.
inline sdp::Problem to_sdp_problem(const MomentProblem& mp) {
  sdp::Problem prob;
  const int n = mp.psd_dim;
  prob.block_dims = {n};
  bool needs_slack = false;
  for (const auto& c : mp.constraints) {
    if (!c.equality) needs_slack = true;
  }
  if (needs_slack) prob.block_dims.push_back(1);

  const auto push_cell = [](sdp::SymMatrix& mat, int block, int r, int c, double coeff) {
    const int row = std::min(r, c);
    const int col = std::max(r, c);
    mat.push_back({block, row, col, coeff / (row == col ? 1.0 : 2.0)});
  };

  // Cell identifications.
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      const int id = mp.matrix_map[static_cast<size_t>(r)][static_cast<size_t>(c)];
      if (id < 0) {
        sdp::SymMatrix a;
        push_cell(a, 0, r, c, 1.0);
        prob.constraints.push_back(std::move(a));
        prob.rhs.push_back(0.0);
        continue;
      }
      const auto [rr, rc] = mp.representative_cell[static_cast<size_t>(id)];
      if (rr == r && rc == c) continue;
      sdp::SymMatrix a;
      push_cell(a, 0, r, c, 1.0);
      push_cell(a, 0, rr, rc, -1.0);
      prob.constraints.push_back(std::move(a));
      prob.rhs.push_back(0.0);
    }
  }

  const auto form_cells = [&](const AffineForm& form, sdp::SymMatrix& mat) {
    const auto [ir, ic] = mp.representative_cell[static_cast<size_t>(mp.identity_variable)];
    if (form.constant != 0.0) push_cell(mat, 0, ir, ic, form.constant);
    for (const auto& [id, v] : form.terms) {
      const auto [r, c] = mp.representative_cell[static_cast<size_t>(id)];
      push_cell(mat, 0, r, c, v);
    }
  };

  for (const auto& c : mp.constraints) {
    sdp::SymMatrix a;
    form_cells(c.lhs, a);
    if (!c.equality) {
      // lhs - slack = rhs encodes lhs >= rhs.
      a.push_back({1, 0, 0, -1.0});
    }
    prob.constraints.push_back(std::move(a));
    prob.rhs.push_back(c.rhs);
  }

  form_cells(mp.objective, prob.objective);
  return prob;
}

struct SolveOutcome {
  sdp::Status status = sdp::Status::failure;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double max_residual = 0.0;
  int iterations = 0;
};

class SolverAdapter {
 public:
  virtual ~SolverAdapter() = default;
  virtual std::string name() const = 0;
  virtual SolveOutcome submit(const MomentProblem& problem) const = 0;
};

class InteriorPointAdapter final : public SolverAdapter {
 public:
  explicit InteriorPointAdapter(sdp::Options options = {}) : options_(options) {}

  std::string name() const override { return "ipm"; }

  SolveOutcome submit(const MomentProblem& problem) const override {
    const sdp::Problem sp = to_sdp_problem(problem);
    const sdp::Result r = sdp::solve(sp, options_);
    SolveOutcome out;
    out.status = r.status;
    out.primal_value = r.primal_objective;
    out.dual_value = r.dual_objective;
    out.max_residual = std::max(r.primal_residual, r.dual_residual);
    out.iterations = r.iterations;
    return out;
  }

 private:
  sdp::Options options_;
};

inline std::unique_ptr<SolverAdapter> make_adapter(const std::string& name) {
  if (name == "ipm" || name == "internal" || name.empty()) {
    return std::make_unique<InteriorPointAdapter>();
  }
  throw ValidationError("unknown solver adapter '" + name + "' (available: ipm)");
}

// Certified upper bound on the functional over the Q2 moment set. The
// dual value is reported: it bounds the relaxation from above even at
// finite solver accuracy.
inline double quantum_bound(const bellcat::BellFunctional& f, const SolverAdapter& adapter) {
  const SolveOutcome out = adapter.submit(build_quantum_bound_problem(f));
  if (out.status != sdp::Status::optimal && out.status != sdp::Status::near_optimal) {
    throw SolverError("quantum_bound: solver returned status " + sdp::to_string(out.status));
  }
  return out.dual_value;
}

inline double quantum_bound(const bellcat::BellFunctional& f) {
  return quantum_bound(f, InteriorPointAdapter{});
}

struct PairPolicy {
  bool best = true;
  int i = 1;
  int j = 1;

  static PairPolicy best_pair() { return {true, 1, 1}; }
  static PairPolicy fixed(int i, int j) { return {false, i, j}; }
};

struct CurveRow {
  double p = 0.0;
  double violation = 0.0;
  double guessing_probability = 1.0;
  double min_entropy_bits = 0.0;
  sdp::Status status = sdp::Status::failure;
  int input_i = 0;
  int input_j = 0;
};

namespace detail {

inline int severity(sdp::Status s) {
  switch (s) {
    case sdp::Status::optimal: return 0;
    case sdp::Status::near_optimal: return 1;
    case sdp::Status::infeasible: return 2;
    case sdp::Status::unbounded: return 2;
    case sdp::Status::failure: return 3;
  }
  return 3;
}

struct PairResult {
  double guessing = 1.0;
  sdp::Status status = sdp::Status::failure;
};

// Max of the four per-outcome optima at one input pair. The certified
// (dual) values are used, clamped into [0, 1].
inline PairResult solve_pair(const bellcat::BellFunctional& f, double violation, int i, int j,
                             const SolverAdapter& adapter, bool equality, double qb) {
  PairResult out;
  out.guessing = 0.0;
  out.status = sdp::Status::optimal;
  for (int a : {1, -1}) {
    for (int b : {1, -1}) {
      const MomentProblem mp =
          build_moment_problem(f, violation, Target{a, b, i, j}, equality, qb);
      const SolveOutcome s = adapter.submit(mp);
      if (severity(s.status) > severity(out.status)) out.status = s.status;
      if (s.status == sdp::Status::optimal || s.status == sdp::Status::near_optimal) {
        out.guessing = std::max(out.guessing, std::clamp(s.dual_value, 0.0, 1.0));
      }
    }
  }
  if (out.status != sdp::Status::optimal && out.status != sdp::Status::near_optimal) {
    out.guessing = 1.0;
  }
  out.guessing = std::clamp(out.guessing, 1e-12, 1.0);
  return out;
}

}  // namespace detail

// Guessing probability and min-entropy along V = p * quantum_bound(f).
// Under best_pair the input pair maximizing min-entropy is selected per
// grid point; rows keep grid order. Failed grid points are flagged and the
// sweep continues.
inline std::vector<CurveRow> randomness_curve(const bellcat::BellFunctional& f,
                                              const std::vector<double>& p_grid,
                                              PairPolicy policy, const SolverAdapter& adapter,
                                              bool violation_equality = true, int threads = 0) {
  const double qb = quantum_bound(f, adapter);
  std::vector<std::pair<int, int>> pairs;
  if (policy.best) {
    for (int i = 1; i <= f.scenario().alice_inputs(); ++i) {
      for (int j = 1; j <= f.scenario().bob_inputs(); ++j) {
        pairs.emplace_back(i, j);
      }
    }
  } else {
    f.scenario().check_inputs(policy.i, policy.j);
    pairs.emplace_back(policy.i, policy.j);
  }

  const auto solve_row = [&](double p) {
    CurveRow row;
    row.p = p;
    row.violation = p * qb;
    bool have = false;
    for (const auto& [i, j] : pairs) {
      const detail::PairResult r =
          detail::solve_pair(f, row.violation, i, j, adapter, violation_equality, qb);
      if (detail::severity(r.status) > detail::severity(row.status) && have) {
        // keep the worst status seen across pairs
      }
      if (!have || r.guessing < row.guessing_probability) {
        row.guessing_probability = r.guessing;
        row.input_i = i;
        row.input_j = j;
      }
      if (!have || detail::severity(r.status) > detail::severity(row.status)) {
        row.status = r.status;
      }
      have = true;
    }
    row.min_entropy_bits = std::max(0.0, -std::log2(row.guessing_probability));
    return row;
  };

  std::vector<CurveRow> rows(p_grid.size());
  if (threads == 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  if (threads <= 1 || p_grid.size() <= 1) {
    for (size_t k = 0; k < p_grid.size(); ++k) rows[k] = solve_row(p_grid[k]);
  } else {
    std::vector<std::future<CurveRow>> futures;
    futures.reserve(p_grid.size());
    for (double p : p_grid) {
      futures.push_back(std::async(std::launch::async, solve_row, p));
    }
    for (size_t k = 0; k < futures.size(); ++k) rows[k] = futures[k].get();
  }
  return rows;
}

// Moment matrix of an explicit realization over a monomial basis: cell
// (u, v) holds Re tr(rho (op_u)^dag op_v). Projector symbols index the
// realization's measurement effects.
inline Eigen::MatrixXd realization_moment_matrix(const qcore::Realization& r,
                                                 const std::vector<Monomial>& basis) {
  using qcore::Matrix;
  const auto effect = [&](const Symbol& s) -> const Matrix& {
    const auto& party = s.party == 0 ? r.alice() : r.bob();
    if (s.input < 1 || s.input > static_cast<int>(party.size())) {
      throw ValidationError("realization_moment_matrix: input out of range");
    }
    const auto& m = party[static_cast<size_t>(s.input - 1)];
    if (s.outcome < 1 || s.outcome > m.outcomes()) {
      throw ValidationError("realization_moment_matrix: outcome out of range");
    }
    return m.effects()[static_cast<size_t>(s.outcome - 1)].matrix();
  };
  const auto word_ops = [&](const Monomial& m) {
    Matrix a = Matrix::Identity(2, 2);
    Matrix b = Matrix::Identity(2, 2);
    for (const auto& s : m.word) {
      if (s.party == 0) {
        a = (a * effect(s)).eval();
      } else {
        b = (b * effect(s)).eval();
      }
    }
    return std::make_pair(a, b);
  };

  const int n = static_cast<int>(basis.size());
  std::vector<std::pair<Matrix, Matrix>> ops;
  ops.reserve(static_cast<size_t>(n));
  for (const auto& m : basis) ops.push_back(word_ops(m));

  const Matrix& rho = r.state().op().matrix();
  Eigen::MatrixXd gamma(n, n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      Matrix a = ops[static_cast<size_t>(u)].first.adjoint() * ops[static_cast<size_t>(v)].first;
      Matrix b = ops[static_cast<size_t>(u)].second.adjoint() * ops[static_cast<size_t>(v)].second;
      Matrix joint(4, 4);
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          joint.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        }
      }
      gamma(u, v) = (rho * joint).trace().real();
    }
  }
  return gamma;
}

}  // namespace chaincert::npa
