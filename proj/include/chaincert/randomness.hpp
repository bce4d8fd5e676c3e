#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "chaincert/bellcat.hpp"
#include "chaincert/common.hpp"
#include "chaincert/qcore.hpp"

namespace chaincert::randomness {

enum class Mode { local, global };

struct CertifiedRandomness {
  double guessing_probability = 1.0;
  double min_entropy_bits = 0.0;
  Mode mode = Mode::local;
  bool certified = false;
  // Shortfall of the observed value below 3*sqrt(3), floored at zero.
  double violation_gap = 0.0;
};

inline double min_entropy(double g) {
  if (!(g > 0.0) || g > 1.0) {
    throw ValidationError("min_entropy: guessing probability " + std::to_string(g) +
                          " outside (0, 1]");
  }
  return -std::log2(g);
}

namespace detail {

// The unique three-outcome input of one party, or 0 if absent/ambiguous.
inline int povm_input(const std::vector<int>& outcomes) {
  int found = 0;
  for (size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i] == 3) {
      if (found != 0) return 0;
      found = static_cast<int>(i) + 1;
    }
  }
  return found;
}

}  // namespace detail

// Local randomness from Alice's POVM input. Certification is gated on the
// observed C3' value reaching 3*sqrt(3) within tol; the certified guessing
// probability is the analytic 1/3, not a quantity recomputed from the
// behavior. Sub-maximal violations certify nothing.
inline CertifiedRandomness certify_local(const qcore::Behavior& b,
                                         const bellcat::BellFunctional& c3_prime,
                                         double tol = kCertificationTol) {
  if (c3_prime.scenario() != b.scenario()) {
    throw ValidationError("certify_local: functional and behavior scenarios differ");
  }
  if (detail::povm_input(b.scenario().alice_outcomes) == 0) {
    throw ValidationError("certify_local: behavior lacks a unique three-outcome Alice input");
  }
  const double value = bellcat::evaluate(c3_prime, b);
  CertifiedRandomness out;
  out.mode = Mode::local;
  out.violation_gap = std::max(0.0, kC3QuantumMax - value);
  out.certified = out.violation_gap <= tol;
  if (out.certified) {
    out.guessing_probability = 1.0 / 3.0;
    out.min_entropy_bits = min_entropy(out.guessing_probability);
  }
  return out;
}

// Global randomness from the joint POVM pair: the guessing probability is
// the largest entry of the 3x3 joint table at (A4, B4), valid once C3''
// reaches 3*sqrt(3) within tol.
inline CertifiedRandomness certify_global(const qcore::Behavior& b,
                                          const bellcat::BellFunctional& c3_double_prime,
                                          double tol = kCertificationTol) {
  if (c3_double_prime.scenario() != b.scenario()) {
    throw ValidationError("certify_global: functional and behavior scenarios differ");
  }
  const int ia = detail::povm_input(b.scenario().alice_outcomes);
  const int jb = detail::povm_input(b.scenario().bob_outcomes);
  if (ia == 0 || jb == 0) {
    throw ValidationError("certify_global: behavior lacks unique three-outcome inputs");
  }
  const double value = bellcat::evaluate(c3_double_prime, b);
  CertifiedRandomness out;
  out.mode = Mode::global;
  out.violation_gap = std::max(0.0, kC3QuantumMax - value);
  out.certified = out.violation_gap <= tol;
  if (out.certified) {
    double g = 0.0;
    for (int k = 1; k <= 3; ++k) {
      for (int l = 1; l <= 3; ++l) {
        g = std::max(g, b.p(ia, jb, k, l));
      }
    }
    out.guessing_probability = g;
    out.min_entropy_bits = min_entropy(g);
  }
  return out;
}

}  // namespace chaincert::randomness
