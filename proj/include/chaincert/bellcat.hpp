#pragma once

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chaincert/common.hpp"
#include "chaincert/qcore.hpp"

namespace chaincert::bellcat {

// Coefficient key (a, b, i, j): outcome labels plus 1-based inputs.
using TermKey = std::array<int, 4>;
using CoeffMap = std::map<TermKey, double>;

// Linear form sum c_{abij} p(ab|ij) over a fixed scenario. Correlator
// terms are stored expanded into probability coefficients so downstream
// consumers see one uniform tensor.
class BellFunctional {
 public:
  BellFunctional(std::string name, qcore::Scenario scenario, CoeffMap coeffs)
      : name_(std::move(name)), scenario_(std::move(scenario)), coeffs_(std::move(coeffs)) {
    for (const auto& [key, value] : coeffs_) {
      const auto [a, b, i, j] = key;
      scenario_.check_inputs(i, j);
      qcore::Scenario::label_to_index(a, scenario_.alice_outcomes[static_cast<size_t>(i - 1)]);
      qcore::Scenario::label_to_index(b, scenario_.bob_outcomes[static_cast<size_t>(j - 1)]);
      (void)value;
    }
  }

  const std::string& name() const { return name_; }
  const qcore::Scenario& scenario() const { return scenario_; }
  const CoeffMap& coeffs() const { return coeffs_; }

  std::optional<double> classical_bound_cache;

 private:
  std::string name_;
  qcore::Scenario scenario_;
  CoeffMap coeffs_;
};

inline double evaluate(const BellFunctional& f, const qcore::Behavior& b) {
  if (f.scenario() != b.scenario()) {
    throw ValidationError("evaluate: functional and behavior scenarios differ");
  }
  double value = 0.0;
  for (const auto& [key, c] : f.coeffs()) {
    value += c * b.p(key[2], key[3], key[0], key[1]);
  }
  return value;
}

// Outcome label assignment per input for one party.
using StrategyLabels = std::vector<int>;

struct DeterministicStrategy {
  StrategyLabels alice;
  StrategyLabels bob;
};

struct ClassicalBoundResult {
  double value = 0.0;
  DeterministicStrategy witness;
};

namespace detail {

inline long long strategy_count(const std::vector<int>& outcomes) {
  long long count = 1;
  for (int n : outcomes) {
    count *= n;
    if (count > 100'000'000LL) return count;
  }
  return count;
}

inline void advance(StrategyLabels& labels, const std::vector<int>& outcomes, bool& done) {
  for (size_t k = 0; k < labels.size(); ++k) {
    const int n = outcomes[k];
    const int idx = qcore::Scenario::label_to_index(labels[k], n) + 1;
    if (idx < n) {
      labels[k] = qcore::Scenario::index_to_label(idx, n);
      return;
    }
    labels[k] = qcore::Scenario::index_to_label(0, n);
  }
  done = true;
}

inline StrategyLabels first_strategy(const std::vector<int>& outcomes) {
  StrategyLabels labels;
  for (int n : outcomes) labels.push_back(qcore::Scenario::index_to_label(0, n));
  return labels;
}

}  // namespace detail

// Exhaustive maximum over local deterministic strategies, with the
// attaining strategy as witness.
inline ClassicalBoundResult classical_bound_witness(const BellFunctional& f) {
  const auto& sc = f.scenario();
  const long long na = detail::strategy_count(sc.alice_outcomes);
  const long long nb = detail::strategy_count(sc.bob_outcomes);
  if (na > 10'000'000LL / std::max(nb, 1LL)) {
    throw CapacityError("classical_bound: deterministic strategy count exceeds 10^7");
  }

  ClassicalBoundResult best;
  bool have_best = false;
  StrategyLabels alice = detail::first_strategy(sc.alice_outcomes);
  bool a_done = false;
  while (!a_done) {
    StrategyLabels bob = detail::first_strategy(sc.bob_outcomes);
    bool b_done = false;
    while (!b_done) {
      double value = 0.0;
      for (const auto& [key, c] : f.coeffs()) {
        const auto [a, b, i, j] = key;
        if (alice[static_cast<size_t>(i - 1)] == a && bob[static_cast<size_t>(j - 1)] == b) {
          value += c;
        }
      }
      if (!have_best || value > best.value) {
        best.value = value;
        best.witness = {alice, bob};
        have_best = true;
      }
      detail::advance(bob, sc.bob_outcomes, b_done);
    }
    detail::advance(alice, sc.alice_outcomes, a_done);
  }
  return best;
}

inline double classical_bound(const BellFunctional& f) {
  if (f.classical_bound_cache) return *f.classical_bound_cache;
  return classical_bound_witness(f).value;
}

// The deterministic behavior of a strategy (entries 0/1).
inline qcore::Behavior deterministic_behavior(const qcore::Scenario& sc,
                                              const DeterministicStrategy& s) {
  std::vector<double> table;
  for (int i = 0; i < sc.alice_inputs(); ++i) {
    for (int j = 0; j < sc.bob_inputs(); ++j) {
      const int na = sc.alice_outcomes[static_cast<size_t>(i)];
      const int nb = sc.bob_outcomes[static_cast<size_t>(j)];
      for (int a = 0; a < na; ++a) {
        for (int b = 0; b < nb; ++b) {
          const bool hit =
              s.alice[static_cast<size_t>(i)] == qcore::Scenario::index_to_label(a, na) &&
              s.bob[static_cast<size_t>(j)] == qcore::Scenario::index_to_label(b, nb);
          table.push_back(hit ? 1.0 : 0.0);
        }
      }
    }
  }
  return qcore::Behavior(sc, std::move(table));
}

namespace detail {

inline void add_correlator(CoeffMap& coeffs, int i, int j, double sign) {
  for (int a : {1, -1}) {
    for (int b : {1, -1}) {
      coeffs[{a, b, i, j}] += sign * a * b;
    }
  }
}

}  // namespace detail

// <A1B1> + <A2B1> + <A2B2> + <A3B2> + <A3B3> - <A1B3>, classical bound 4.
inline BellFunctional build_c3() {
  CoeffMap coeffs;
  detail::add_correlator(coeffs, 1, 1, 1.0);
  detail::add_correlator(coeffs, 2, 1, 1.0);
  detail::add_correlator(coeffs, 2, 2, 1.0);
  detail::add_correlator(coeffs, 3, 2, 1.0);
  detail::add_correlator(coeffs, 3, 3, 1.0);
  detail::add_correlator(coeffs, 1, 3, -1.0);
  return BellFunctional("C3", qcore::Scenario{{2, 2, 2}, {2, 2, 2}}, std::move(coeffs));
}

// C3 minus alpha times the three probabilities that vanish when Alice's
// fourth input is the antialigned three-outcome POVM.
inline BellFunctional build_c3_prime(double alpha) {
  if (!(alpha > 0.0)) {
    throw ValidationError("build_c3_prime: alpha must be strictly positive");
  }
  BellFunctional c3 = build_c3();
  CoeffMap coeffs = c3.coeffs();
  coeffs[{1, 1, 4, 1}] -= alpha;
  coeffs[{2, -1, 4, 2}] -= alpha;
  coeffs[{3, 1, 4, 3}] -= alpha;
  return BellFunctional("C3prime", qcore::Scenario{{2, 2, 2, 3}, {2, 2, 2}},
                        std::move(coeffs));
}

// C3' minus beta times the mirror probabilities for Bob's fourth input.
inline BellFunctional build_c3_double_prime(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw ValidationError("build_c3_double_prime: alpha and beta must be strictly positive");
  }
  BellFunctional prime = build_c3_prime(alpha);
  CoeffMap coeffs = prime.coeffs();
  coeffs[{-1, 1, 1, 4}] -= beta;
  coeffs[{1, 2, 2, 4}] -= beta;
  coeffs[{-1, 3, 3, 4}] -= beta;
  return BellFunctional("C3doubleprime", qcore::Scenario{{2, 2, 2, 3}, {2, 2, 2, 3}},
                        std::move(coeffs));
}

// <A1B1> + <A1B2> + <A2B1> - <A2B2>, classical bound 2.
inline BellFunctional build_chsh() {
  CoeffMap coeffs;
  detail::add_correlator(coeffs, 1, 1, 1.0);
  detail::add_correlator(coeffs, 1, 2, 1.0);
  detail::add_correlator(coeffs, 2, 1, 1.0);
  detail::add_correlator(coeffs, 2, 2, -1.0);
  return BellFunctional("CHSH", qcore::Scenario{{2, 2}, {2, 2}}, std::move(coeffs));
}

// Built-in inequalities by (case-insensitive) name.
inline std::optional<BellFunctional> catalog_lookup(const std::string& name, double alpha = 1.0,
                                                    double beta = 1.0) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower == "c3") return build_c3();
  if (lower == "c3prime" || lower == "c3'") return build_c3_prime(alpha);
  if (lower == "c3doubleprime" || lower == "c3''") return build_c3_double_prime(alpha, beta);
  if (lower == "chsh") return build_chsh();
  return std::nullopt;
}

}  // namespace chaincert::bellcat
