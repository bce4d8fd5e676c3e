#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "chaincert/common.hpp"
#include "chaincert/qcore.hpp"

namespace chaincert::selftest {

// Pauli coefficients of a qubit effect: weight*I + z*sz + y*sy + x*sx.
struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double weight = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }

  // Effect validity: weight in [0,1] and vector length within
  // min(weight, 1 - weight).
  bool describes_valid_effect() const {
    return weight >= -kEigenTol && weight <= 1.0 + kEigenTol &&
           norm() <= std::min(weight, 1.0 - weight) + kEigenTol;
  }

  qcore::HermitianOperator reconstruct() const {
    return qcore::pauli_compose(weight, z, y, x);
  }
};

struct PovmCertificate {
  qcore::Measurement povm;
  double antialignment_residual = 0.0;
  bool extremal = false;
  std::vector<int> rank_profile;
};

// One vanishing joint probability p(a_label, b_label | A_i, B_j).
struct AntialignmentTarget {
  int alice_input;
  int a_label;
  int bob_input;
  int b_label;
};

// State |phi+> with the six observables achieving the maximal chained
// violation 3*sqrt(3).
inline qcore::Realization reference_realization_c3() {
  using qcore::HermitianOperator;
  using qcore::Matrix;
  const double s3 = std::sqrt(3.0);
  Matrix phi = Matrix::Zero(4, 4);
  // |phi+><phi+| with |phi+> = (|00> + |11>)/sqrt(2)
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  qcore::DensityMatrix state{HermitianOperator(std::move(phi))};

  const Matrix sx = HermitianOperator::sigma_x().matrix();
  const Matrix sz = HermitianOperator::sigma_z().matrix();
  const auto obs = [](Matrix m) { return HermitianOperator(std::move(m)); };

  std::vector<qcore::Measurement> alice;
  alice.push_back(qcore::Measurement::from_observable(obs(sz)));
  alice.push_back(qcore::Measurement::from_observable(obs((s3 * sx + sz) / 2.0)));
  alice.push_back(qcore::Measurement::from_observable(obs((s3 * sx - sz) / 2.0)));

  std::vector<qcore::Measurement> bob;
  bob.push_back(qcore::Measurement::from_observable(obs((sx + s3 * sz) / 2.0)));
  bob.push_back(qcore::Measurement::from_observable(obs(sx)));
  bob.push_back(qcore::Measurement::from_observable(obs((sx - s3 * sz) / 2.0)));

  return qcore::Realization(std::move(state), std::move(alice), std::move(bob));
}

inline qcore::Realization with_alice_input(const qcore::Realization& r, qcore::Measurement m) {
  auto alice = r.alice();
  alice.push_back(std::move(m));
  return qcore::Realization(r.state(), std::move(alice), r.bob());
}

inline qcore::Realization with_bob_input(const qcore::Realization& r, qcore::Measurement m) {
  auto bob = r.bob();
  bob.push_back(std::move(m));
  return qcore::Realization(r.state(), r.alice(), std::move(bob));
}

// Three-outcome POVM with effects (1/3)(I - n_k . sigma) for unit
// directions summing to zero (required for completeness at weight 1/3).
// Directions are (x, y, z) Bloch components.
inline qcore::Measurement antialigned_povm(const std::array<std::array<double, 3>, 3>& dirs) {
  std::array<double, 3> sum = {0.0, 0.0, 0.0};
  for (const auto& d : dirs) {
    const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (std::abs(n - 1.0) > kEigenTol) {
      throw ConstructionError("antialigned_povm: direction has norm " + std::to_string(n) +
                              ", expected a unit vector");
    }
    for (int t = 0; t < 3; ++t) sum[static_cast<size_t>(t)] += d[static_cast<size_t>(t)];
  }
  const double s = std::sqrt(sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]);
  if (s > kEigenTol) {
    throw ConstructionError(
        "antialigned_povm: directions sum to a vector of norm " + std::to_string(s) +
        "; completeness with weights 1/3 is impossible");
  }
  std::vector<qcore::HermitianOperator> effects;
  for (const auto& d : dirs) {
    effects.push_back(
        qcore::pauli_compose(1.0 / 3.0, -d[2] / 3.0, -d[1] / 3.0, -d[0] / 3.0));
  }
  return qcore::Measurement(std::move(effects), qcore::MeasurementKind::general);
}

// Alice's three-outcome POVM antialigned with B(+1|1), B(-1|2), B(+1|3).
inline qcore::Measurement alice_povm_a4() {
  const double s3 = std::sqrt(3.0);
  return antialigned_povm({{{0.5, 0.0, s3 / 2.0}, {-1.0, 0.0, 0.0}, {0.5, 0.0, -s3 / 2.0}}});
}

// Bob's three-outcome POVM antialigned with A(-1|1), A(+1|2), A(-1|3).
inline qcore::Measurement bob_povm_b4() {
  const double s3 = std::sqrt(3.0);
  return antialigned_povm({{{0.0, 0.0, -1.0}, {s3 / 2.0, 0.0, 0.5}, {-s3 / 2.0, 0.0, 0.5}}});
}

// Reference realization extended with the paper's POVMs.
inline qcore::Realization reference_realization_c3_prime() {
  return with_alice_input(reference_realization_c3(), alice_povm_a4());
}

inline qcore::Realization reference_realization_c3_double_prime() {
  return with_bob_input(reference_realization_c3_prime(), bob_povm_b4());
}

// Targets whose probabilities vanish exactly at maximal violation.
inline std::vector<AntialignmentTarget> c3_prime_targets() {
  return {{4, 1, 1, 1}, {4, 2, 2, -1}, {4, 3, 3, 1}};
}

inline std::vector<AntialignmentTarget> c3_double_prime_bob_targets() {
  return {{1, -1, 4, 1}, {2, 1, 4, 2}, {3, -1, 4, 3}};
}

// Max of the target probabilities; certification requires <= 1e-10.
inline double verify_antialignment(const qcore::Realization& r,
                                   const std::vector<AntialignmentTarget>& targets) {
  double residual = 0.0;
  for (const auto& t : targets) {
    if (t.alice_input < 1 || t.alice_input > static_cast<int>(r.alice().size())) {
      throw ValidationError("verify_antialignment: Alice input " +
                            std::to_string(t.alice_input) + " missing from realization");
    }
    if (t.bob_input < 1 || t.bob_input > static_cast<int>(r.bob().size())) {
      throw ValidationError("verify_antialignment: Bob input " +
                            std::to_string(t.bob_input) + " missing from realization");
    }
    const auto& ma = r.alice()[static_cast<size_t>(t.alice_input - 1)];
    const auto& mb = r.bob()[static_cast<size_t>(t.bob_input - 1)];
    const double p = qcore::born_joint(r.state(), ma.effect_for_label(t.a_label),
                                       mb.effect_for_label(t.b_label));
    residual = std::max(residual, p);
  }
  return residual;
}

// Extremality of a qubit POVM: all effects rank one and linearly
// independent in the real space of Hermitian 2x2 matrices.
inline PovmCertificate is_extremal_qubit_povm(const qcore::Measurement& m) {
  PovmCertificate cert{m, 0.0, false, {}};
  for (const auto& e : m.effects()) {
    if (e.dim() != 2) {
      throw ValidationError("is_extremal_qubit_povm: effects must be qubit operators");
    }
    int rank = 0;
    for (double ev : e.eigenvalues()) {
      if (ev > kEigenTol) ++rank;
    }
    cert.rank_profile.push_back(rank);
  }
  bool all_rank_one = true;
  for (int rank : cert.rank_profile) {
    if (rank != 1) all_rank_one = false;
  }
  if (!all_rank_one || m.outcomes() > 4) {
    return cert;
  }
  Eigen::MatrixXd stacked(m.outcomes(), 4);
  for (int k = 0; k < m.outcomes(); ++k) {
    const auto coeffs = qcore::pauli_decompose(m.effects()[static_cast<size_t>(k)]);
    for (int t = 0; t < 4; ++t) stacked(k, t) = coeffs[static_cast<size_t>(t)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
  const double smallest = svd.singularValues().tail(1)(0);
  cert.extremal = smallest > kIndependenceTol;
  return cert;
}

// Pauli coefficients of POVM effects recovered from a behavior:
//   weight = p(k|A4)
//   z = (E_{k|4,1} - E_{k|4,3}) / sqrt(3)
//   y = -E_{k|4,1} + E_{k|4,2} - E_{k|4,3}
//   x = E_{k|4,2}
// with E_{k|4,j} = sum_b b p(k,b|A4,Bj). Requires the POVM marginal to be
// consistent across Bob's inputs (no-signaling) within 1e-8.
inline std::vector<BlochVector> bloch_from_behavior(const qcore::Behavior& b, int povm_input,
                                                    std::array<int, 3> bob_inputs = {1, 2, 3}) {
  const auto& sc = b.scenario();
  if (povm_input < 1 || povm_input > sc.alice_inputs() ||
      sc.alice_outcomes[static_cast<size_t>(povm_input - 1)] != 3) {
    throw ValidationError("bloch_from_behavior: Alice input " + std::to_string(povm_input) +
                          " is not a three-outcome input");
  }
  for (int j : bob_inputs) {
    sc.check_inputs(1, j);
    if (sc.bob_outcomes[static_cast<size_t>(j - 1)] != 2) {
      throw ValidationError("bloch_from_behavior: Bob input " + std::to_string(j) +
                            " is not two-outcome");
    }
  }

  std::vector<BlochVector> out;
  for (int k = 1; k <= 3; ++k) {
    double marginal_sum = 0.0;
    std::array<double, 3> correlations{};
    double reference_marginal = 0.0;
    for (size_t t = 0; t < 3; ++t) {
      const int j = bob_inputs[t];
      const double marg = b.alice_marginal(povm_input, k, j);
      if (t == 0) {
        reference_marginal = marg;
      } else if (std::abs(marg - reference_marginal) > kSignalingTol) {
        throw SignalingError("bloch_from_behavior: marginal p(" + std::to_string(k) +
                             "|A" + std::to_string(povm_input) + ") varies across Bob inputs by " +
                             std::to_string(std::abs(marg - reference_marginal)));
      }
      marginal_sum += marg;
      correlations[t] = b.p(povm_input, j, k, 1) - b.p(povm_input, j, k, -1);
    }
    BlochVector v;
    v.weight = marginal_sum / 3.0;
    v.z = (correlations[0] - correlations[2]) / std::sqrt(3.0);
    v.y = -correlations[0] + correlations[1] - correlations[2];
    v.x = correlations[1];
    out.push_back(v);
  }
  return out;
}

}  // namespace chaincert::selftest
