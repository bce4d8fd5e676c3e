#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaincert/common.hpp"

namespace chaincert::qcore {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// Dense complex Hermitian matrix of dimension 2 or 4. Immutable after
// construction; hermiticity is checked entrywise at 1e-12.
class HermitianOperator {
 public:
  explicit HermitianOperator(Matrix m) : mat_(std::move(m)) {
    const auto dim = mat_.rows();
    if (dim != mat_.cols() || (dim != 2 && dim != 4)) {
      throw ValidationError("HermitianOperator: dimension must be 2 or 4");
    }
    const double dev = (mat_ - mat_.adjoint().eval()).cwiseAbs().maxCoeff();
    if (dev > kAlgebraTol) {
      throw ValidationError("HermitianOperator: matrix is not Hermitian (max deviation " +
                            std::to_string(dev) + ")");
    }
    // Exact symmetrization removes the sub-tolerance residue so chained
    // products stay Hermitian.
    mat_ = ((mat_ + mat_.adjoint().eval()) / 2.0).eval();
  }

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Matrix& matrix() const { return mat_; }

  double trace_real() const { return mat_.trace().real(); }

  // Eigenvalues sorted ascending. 2x2 uses the closed form; 4x4 a
  // self-adjoint solver.
  std::vector<double> eigenvalues() const {
    if (dim() == 2) {
      const double a = mat_(0, 0).real();
      const double d = mat_(1, 1).real();
      const double mean = (a + d) / 2.0;
      const double radius = std::sqrt((a - d) * (a - d) / 4.0 + std::norm(mat_(0, 1)));
      return {mean - radius, mean + radius};
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(mat_, Eigen::EigenvaluesOnly);
    std::vector<double> out(solver.eigenvalues().data(),
                            solver.eigenvalues().data() + solver.eigenvalues().size());
    return out;
  }

  static HermitianOperator identity(int dim) {
    return HermitianOperator(Matrix::Identity(dim, dim));
  }
  static HermitianOperator sigma_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return HermitianOperator(m);
  }
  static HermitianOperator sigma_y() {
    Matrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return HermitianOperator(m);
  }
  static HermitianOperator sigma_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return HermitianOperator(m);
  }

 private:
  Matrix mat_;
};

// Coefficients (c0, cz, cy, cx) of op = c0*I + cz*sz + cy*sy + cx*sx.
inline std::array<double, 4> pauli_decompose(const HermitianOperator& op) {
  if (op.dim() != 2) {
    throw ValidationError("pauli_decompose: operator must be 2x2");
  }
  const Matrix& m = op.matrix();
  const double c0 = (m(0, 0).real() + m(1, 1).real()) / 2.0;
  const double cz = (m(0, 0).real() - m(1, 1).real()) / 2.0;
  const double cx = m(0, 1).real();
  const double cy = -m(0, 1).imag();
  return {c0, cz, cy, cx};
}

inline HermitianOperator pauli_compose(double c0, double cz, double cy, double cx) {
  Matrix m(2, 2);
  m << Complex(c0 + cz, 0), Complex(cx, -cy), Complex(cx, cy), Complex(c0 - cz, 0);
  return HermitianOperator(m);
}

// Kronecker product of two qubit operators.
inline HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
  if (a.dim() != 2 || b.dim() != 2) {
    throw ValidationError("tensor: both operators must be 2x2");
  }
  Matrix out(4, 4);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out.block<2, 2>(2 * i, 2 * j) = a.matrix()(i, j) * b.matrix();
    }
  }
  return HermitianOperator(std::move(out));
}

class DensityMatrix {
 public:
  explicit DensityMatrix(HermitianOperator op) : op_(std::move(op)) {
    if (std::abs(op_.trace_real() - 1.0) > kAlgebraTol) {
      throw ValidationError("DensityMatrix: trace must be 1");
    }
    const auto eigs = op_.eigenvalues();
    if (eigs.front() < -kEigenTol) {
      throw ValidationError("DensityMatrix: negative eigenvalue " +
                            std::to_string(eigs.front()));
    }
  }

  const HermitianOperator& op() const { return op_; }
  int dim() const { return op_.dim(); }

 private:
  HermitianOperator op_;
};

// True when eigenvalues lie in [-kEigenTol, 1 + kEigenTol].
inline bool is_valid_effect(const HermitianOperator& op) {
  const auto eigs = op.eigenvalues();
  return eigs.front() >= -kEigenTol && eigs.back() <= 1.0 + kEigenTol;
}

enum class MeasurementKind { projective, general };

// Ordered list of qubit effects summing to identity. Two-outcome
// measurements carry labels {+1, -1}; n-outcome POVMs carry 1..n.
class Measurement {
 public:
  Measurement(std::vector<HermitianOperator> effects, MeasurementKind kind)
      : Measurement(std::move(effects), kind, {}) {}

  Measurement(std::vector<HermitianOperator> effects, MeasurementKind kind,
              std::vector<int> labels)
      : effects_(std::move(effects)), kind_(kind), labels_(std::move(labels)) {
    if (effects_.empty()) {
      throw ValidationError("Measurement: needs at least one effect");
    }
    if (labels_.empty()) {
      labels_ = default_labels(static_cast<int>(effects_.size()));
    }
    if (labels_.size() != effects_.size()) {
      throw ValidationError("Measurement: label count does not match effect count");
    }
    Matrix sum = Matrix::Zero(effects_.front().dim(), effects_.front().dim());
    for (const auto& e : effects_) {
      if (e.dim() != effects_.front().dim()) {
        throw ValidationError("Measurement: effects have mixed dimensions");
      }
      if (!is_valid_effect(e)) {
        throw ValidationError("Measurement: effect eigenvalues outside [0, 1]");
      }
      sum += e.matrix();
    }
    const double dev =
        (sum - Matrix::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff();
    if (dev > kAlgebraTol) {
      throw ValidationError("Measurement: effects do not sum to identity (deviation " +
                            std::to_string(dev) + ")");
    }
    if (kind_ == MeasurementKind::projective) {
      for (const auto& e : effects_) {
        const Matrix& m = e.matrix();
        if ((m * m - m).cwiseAbs().maxCoeff() > kAlgebraTol) {
          throw ValidationError("Measurement: projective effect is not idempotent");
        }
      }
    }
  }

  // Two-outcome projective measurement (I + O)/2, (I - O)/2 from a +-1
  // observable.
  static Measurement from_observable(const HermitianOperator& obs) {
    const Matrix eye = Matrix::Identity(obs.dim(), obs.dim());
    std::vector<HermitianOperator> effects;
    effects.emplace_back((eye + obs.matrix()) / 2.0);
    effects.emplace_back((eye - obs.matrix()) / 2.0);
    return Measurement(std::move(effects), MeasurementKind::projective, {1, -1});
  }

  static std::vector<int> default_labels(int outcomes) {
    if (outcomes == 2) return {1, -1};
    std::vector<int> labels(outcomes);
    for (int k = 0; k < outcomes; ++k) labels[k] = k + 1;
    return labels;
  }

  const std::vector<HermitianOperator>& effects() const { return effects_; }
  MeasurementKind kind() const { return kind_; }
  const std::vector<int>& labels() const { return labels_; }
  int outcomes() const { return static_cast<int>(effects_.size()); }

  int index_of_label(int label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
      throw ValidationError("Measurement: unknown outcome label " + std::to_string(label));
    }
    return static_cast<int>(it - labels_.begin());
  }

  const HermitianOperator& effect_for_label(int label) const {
    return effects_[static_cast<size_t>(index_of_label(label))];
  }

 private:
  std::vector<HermitianOperator> effects_;
  MeasurementKind kind_;
  std::vector<int> labels_;
};

// Input/outcome structure of a bipartite scenario. Inputs are 1-based in
// every public interface; outcome labels are {+1, -1} for two-outcome
// inputs and 1..n otherwise.
struct Scenario {
  std::vector<int> alice_outcomes;
  std::vector<int> bob_outcomes;

  int alice_inputs() const { return static_cast<int>(alice_outcomes.size()); }
  int bob_inputs() const { return static_cast<int>(bob_outcomes.size()); }

  bool operator==(const Scenario&) const = default;

  static std::vector<int> labels_for(int outcomes) {
    return Measurement::default_labels(outcomes);
  }

  static int label_to_index(int label, int outcomes) {
    if (outcomes == 2) {
      if (label == 1) return 0;
      if (label == -1) return 1;
      throw ValidationError("label " + std::to_string(label) +
                            " invalid for a two-outcome input (expected +1/-1)");
    }
    if (label < 1 || label > outcomes) {
      throw ValidationError("label " + std::to_string(label) + " outside 1.." +
                            std::to_string(outcomes));
    }
    return label - 1;
  }

  static int index_to_label(int index, int outcomes) {
    if (outcomes == 2) return index == 0 ? 1 : -1;
    return index + 1;
  }

  void check_inputs(int i, int j) const {
    if (i < 1 || i > alice_inputs()) {
      throw ValidationError("Alice input " + std::to_string(i) + " outside 1.." +
                            std::to_string(alice_inputs()));
    }
    if (j < 1 || j > bob_inputs()) {
      throw ValidationError("Bob input " + std::to_string(j) + " outside 1.." +
                            std::to_string(bob_inputs()));
    }
  }
};

// Full joint probability table p(a,b|i,j) over a scenario.
class Behavior {
 public:
  Behavior(Scenario scenario, std::vector<double> table)
      : scenario_(std::move(scenario)), table_(std::move(table)) {
    build_offsets();
    if (table_.size() != total_size_) {
      throw ValidationError("Behavior: table has " + std::to_string(table_.size()) +
                            " entries, scenario needs " + std::to_string(total_size_));
    }
    for (double& p : table_) {
      if (p < -kAlgebraTol || p > 1.0 + kAlgebraTol) {
        throw ValidationError("Behavior: probability " + std::to_string(p) +
                              " outside [0, 1]");
      }
      p = std::clamp(p, 0.0, 1.0);
    }
    for (int i = 0; i < scenario_.alice_inputs(); ++i) {
      for (int j = 0; j < scenario_.bob_inputs(); ++j) {
        double sum = 0.0;
        for (int a = 0; a < scenario_.alice_outcomes[static_cast<size_t>(i)]; ++a) {
          for (int b = 0; b < scenario_.bob_outcomes[static_cast<size_t>(j)]; ++b) {
            sum += p_index(i, j, a, b);
          }
        }
        if (std::abs(sum - 1.0) > kTableTol) {
          throw ValidationError("Behavior: input pair (" + std::to_string(i + 1) + "," +
                                std::to_string(j + 1) + ") sums to " + std::to_string(sum));
        }
      }
    }
  }

  const Scenario& scenario() const { return scenario_; }

  // 0-based inputs and outcome indices.
  double p_index(int i, int j, int a, int b) const {
    return table_[offset(i, j) + static_cast<size_t>(a) *
                                     static_cast<size_t>(
                                         scenario_.bob_outcomes[static_cast<size_t>(j)]) +
                  static_cast<size_t>(b)];
  }

  // 1-based inputs, outcome labels.
  double p(int i, int j, int a_label, int b_label) const {
    scenario_.check_inputs(i, j);
    const int na = scenario_.alice_outcomes[static_cast<size_t>(i - 1)];
    const int nb = scenario_.bob_outcomes[static_cast<size_t>(j - 1)];
    return p_index(i - 1, j - 1, Scenario::label_to_index(a_label, na),
                   Scenario::label_to_index(b_label, nb));
  }

  // Alice marginal of outcome label a for input i, computed against Bob
  // input j.
  double alice_marginal(int i, int a_label, int j) const {
    scenario_.check_inputs(i, j);
    const int na = scenario_.alice_outcomes[static_cast<size_t>(i - 1)];
    const int a = Scenario::label_to_index(a_label, na);
    double sum = 0.0;
    for (int b = 0; b < scenario_.bob_outcomes[static_cast<size_t>(j - 1)]; ++b) {
      sum += p_index(i - 1, j - 1, a, b);
    }
    return sum;
  }

  static Behavior uniform(Scenario scenario) {
    std::vector<double> table;
    for (size_t i = 0; i < scenario.alice_outcomes.size(); ++i) {
      for (size_t j = 0; j < scenario.bob_outcomes.size(); ++j) {
        const double p = 1.0 / (scenario.alice_outcomes[i] * scenario.bob_outcomes[j]);
        for (int k = 0; k < scenario.alice_outcomes[i] * scenario.bob_outcomes[j]; ++k) {
          table.push_back(p);
        }
      }
    }
    return Behavior(std::move(scenario), std::move(table));
  }

 private:
  void build_offsets() {
    offsets_.assign(static_cast<size_t>(scenario_.alice_inputs()) *
                        static_cast<size_t>(scenario_.bob_inputs()),
                    0);
    size_t off = 0;
    for (int i = 0; i < scenario_.alice_inputs(); ++i) {
      for (int j = 0; j < scenario_.bob_inputs(); ++j) {
        offsets_[static_cast<size_t>(i) * static_cast<size_t>(scenario_.bob_inputs()) +
                 static_cast<size_t>(j)] = off;
        off += static_cast<size_t>(scenario_.alice_outcomes[static_cast<size_t>(i)]) *
               static_cast<size_t>(scenario_.bob_outcomes[static_cast<size_t>(j)]);
      }
    }
    total_size_ = off;
  }

  size_t offset(int i, int j) const {
    return offsets_[static_cast<size_t>(i) * static_cast<size_t>(scenario_.bob_inputs()) +
                    static_cast<size_t>(j)];
  }

  Scenario scenario_;
  std::vector<double> table_;
  std::vector<size_t> offsets_;
  size_t total_size_ = 0;
};

// Shared state plus per-party measurement lists.
class Realization {
 public:
  Realization(DensityMatrix state, std::vector<Measurement> alice,
              std::vector<Measurement> bob)
      : state_(std::move(state)), alice_(std::move(alice)), bob_(std::move(bob)) {
    if (state_.dim() != 4) {
      throw ValidationError("Realization: state must be two-qubit (4x4)");
    }
    if (alice_.empty() || bob_.empty()) {
      throw ValidationError("Realization: both parties need measurements");
    }
    for (const auto* party : {&alice_, &bob_}) {
      for (const auto& m : *party) {
        for (const auto& e : m.effects()) {
          if (e.dim() != 2) {
            throw ValidationError("Realization: effects must be qubit operators");
          }
        }
      }
    }
  }

  const DensityMatrix& state() const { return state_; }
  const std::vector<Measurement>& alice() const { return alice_; }
  const std::vector<Measurement>& bob() const { return bob_; }

  Scenario scenario() const {
    Scenario sc;
    for (const auto& m : alice_) sc.alice_outcomes.push_back(m.outcomes());
    for (const auto& m : bob_) sc.bob_outcomes.push_back(m.outcomes());
    return sc;
  }

 private:
  DensityMatrix state_;
  std::vector<Measurement> alice_;
  std::vector<Measurement> bob_;
};

// tr(rho * ea (x) eb), validated real and clamped into [0, 1].
inline double born_joint(const DensityMatrix& state, const HermitianOperator& ea,
                         const HermitianOperator& eb) {
  if (state.dim() != 4) {
    throw ValidationError("born_joint: state must be 4x4");
  }
  if (!is_valid_effect(ea) || !is_valid_effect(eb)) {
    throw ValidationError("born_joint: operands are not valid effects");
  }
  const Complex value = (state.op().matrix() * tensor(ea, eb).matrix()).trace();
  if (std::abs(value.imag()) > kAlgebraTol) {
    throw ValidationError("born_joint: probability has imaginary part " +
                          std::to_string(value.imag()));
  }
  const double p = value.real();
  if (p < -kAlgebraTol || p > 1.0 + kAlgebraTol) {
    throw ValidationError("born_joint: probability " + std::to_string(p) +
                          " outside [0, 1]");
  }
  return std::clamp(p, 0.0, 1.0);
}

inline Behavior behavior_from_realization(const Realization& r) {
  std::vector<double> table;
  for (const auto& ma : r.alice()) {
    for (const auto& mb : r.bob()) {
      for (const auto& ea : ma.effects()) {
        for (const auto& eb : mb.effects()) {
          table.push_back(born_joint(r.state(), ea, eb));
        }
      }
    }
  }
  return Behavior(r.scenario(), std::move(table));
}

// <A_i B_j> = sum_ab a*b*p(ab|ij) for two-outcome inputs with +-1 labels.
inline double correlator(const Behavior& b, int i, int j) {
  b.scenario().check_inputs(i, j);
  if (b.scenario().alice_outcomes[static_cast<size_t>(i - 1)] != 2 ||
      b.scenario().bob_outcomes[static_cast<size_t>(j - 1)] != 2) {
    throw ValidationError("correlator: inputs (" + std::to_string(i) + "," +
                          std::to_string(j) + ") are not both two-outcome");
  }
  double sum = 0.0;
  for (int a : {1, -1}) {
    for (int bb : {1, -1}) {
      sum += a * bb * b.p(i, j, a, bb);
    }
  }
  return sum;
}

}  // namespace chaincert::qcore
