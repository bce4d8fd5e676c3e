#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "chaincert/common.hpp"

namespace chaincert::sdp {

// One entry of a symmetric block matrix, row <= col within the block.
struct Cell {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

using SymMatrix = std::vector<Cell>;

// maximize <C, X>  s.t.  <A_k, X> = b_k,  X block-diagonal PSD.
struct Problem {
  std::vector<int> block_dims;
  SymMatrix objective;
  std::vector<SymMatrix> constraints;
  std::vector<double> rhs;

  int total_dim() const {
    int n = 0;
    for (int d : block_dims) n += d;
    return n;
  }
};

enum class Status { optimal, near_optimal, infeasible, unbounded, failure };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::near_optimal: return "near_optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::failure: return "failure";
  }
  return "failure";
}

struct Options {
  double feas_tol = 1e-9;
  double gap_tol = 1e-9;
  // Acceptance thresholds for classifying a finished run.
  double accept_feas = 1e-7;
  double accept_gap = 1e-6;
  int max_iterations = 250;
  double step_fraction = 0.98;
  bool verbose = false;
};

struct Result {
  Status status = Status::failure;
  double primal_objective = 0.0;  // <C, X>
  double dual_objective = 0.0;    // b^T y; upper bound when dual-feasible
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;  // relative
  int iterations = 0;
  std::vector<Eigen::MatrixXd> X;
  std::vector<double> y;
};

namespace detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using BlockMat = std::vector<MatrixXd>;

inline BlockMat zeros(const std::vector<int>& dims) {
  BlockMat out;
  for (int d : dims) out.push_back(MatrixXd::Zero(d, d));
  return out;
}

inline BlockMat identity_scaled(const std::vector<int>& dims, double s) {
  BlockMat out;
  for (int d : dims) out.push_back(s * MatrixXd::Identity(d, d));
  return out;
}

inline double inner_sparse(const SymMatrix& a, const BlockMat& x) {
  double sum = 0.0;
  for (const auto& c : a) {
    const double w = c.row == c.col ? 1.0 : 2.0;
    sum += w * c.value * x[static_cast<size_t>(c.block)](c.row, c.col);
  }
  return sum;
}

inline void add_sparse(BlockMat& x, const SymMatrix& a, double scale) {
  for (const auto& c : a) {
    x[static_cast<size_t>(c.block)](c.row, c.col) += scale * c.value;
    if (c.row != c.col) x[static_cast<size_t>(c.block)](c.col, c.row) += scale * c.value;
  }
}

inline double frob_norm_sparse(const SymMatrix& a, const std::vector<int>& dims) {
  BlockMat m = zeros(dims);
  add_sparse(m, a, 1.0);
  double sum = 0.0;
  for (const auto& blk : m) sum += blk.squaredNorm();
  return std::sqrt(sum);
}

inline double block_inner(const BlockMat& a, const BlockMat& b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i].cwiseProduct(b[i]).sum();
  return sum;
}

inline double block_frob(const BlockMat& a) {
  double sum = 0.0;
  for (const auto& blk : a) sum += blk.squaredNorm();
  return std::sqrt(sum);
}

// Symmetric square root and inverse square root via eigendecomposition,
// with eigenvalues floored to keep the factors finite.
inline void sym_sqrt(const MatrixXd& m, MatrixXd& root, MatrixXd& inv_root) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const double floor_ev = std::max(1e-300, eig.eigenvalues().maxCoeff() * 1e-16);
  VectorXd sq = eig.eigenvalues().cwiseMax(floor_ev).cwiseSqrt();
  root = eig.eigenvectors() * sq.asDiagonal() * eig.eigenvectors().transpose();
  inv_root = eig.eigenvectors() * sq.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

// Largest alpha with M + alpha * D staying positive definite, via the
// minimum eigenvalue of L^-1 D L^-T.
inline double max_step(const MatrixXd& m, const MatrixXd& d) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd h = llt.matrixL().solve(d);
  h = llt.matrixL().solve(h.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig((h + h.transpose()) / 2.0,
                                              Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

inline double max_step_blocks(const BlockMat& m, const BlockMat& d) {
  double alpha = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < m.size(); ++i) alpha = std::min(alpha, max_step(m[i], d[i]));
  return alpha;
}

struct Iterate {
  BlockMat X, S;
  VectorXd y;
};

}  // namespace detail

// Infeasible primal-dual path-following with Nesterov-Todd scaling and a
// two-pass adaptive centering parameter. Sized for moment matrices of a
// few dozen rows and a few hundred constraints.
inline Result solve(const Problem& prob, const Options& opt = {}) {
  using namespace detail;

  const auto& dims = prob.block_dims;
  const int n = prob.total_dim();
  const int m = static_cast<int>(prob.constraints.size());
  if (n == 0 || m == 0) {
    throw SolverError("sdp::solve: empty problem");
  }
  if (prob.rhs.size() != prob.constraints.size()) {
    throw SolverError("sdp::solve: rhs size does not match constraint count");
  }

  const VectorXd b = Eigen::Map<const VectorXd>(prob.rhs.data(),
                                                static_cast<long>(prob.rhs.size()));
  const double norm_b = 1.0 + b.norm();
  const double norm_c = 1.0 + frob_norm_sparse(prob.objective, dims);

  // Initial point: scaled identities, sized by data magnitudes.
  double a_scale = 1.0;
  for (const auto& a : prob.constraints) {
    a_scale = std::max(a_scale, frob_norm_sparse(a, dims));
  }
  const double xi = std::max({10.0, std::sqrt(static_cast<double>(n)),
                              static_cast<double>(n) * b.cwiseAbs().maxCoeff() / a_scale});
  const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), norm_c, a_scale});

  Iterate it{identity_scaled(dims, xi), identity_scaled(dims, eta), VectorXd::Zero(m)};

  Result best;
  double best_score = std::numeric_limits<double>::infinity();
  int stall = 0;

  BlockMat C = zeros(dims);
  add_sparse(C, prob.objective, 1.0);

  Result res;
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    // Residuals and merit.
    VectorXd rp(m);
    for (int k = 0; k < m; ++k) {
      rp(k) = b(k) - inner_sparse(prob.constraints[static_cast<size_t>(k)], it.X);
    }
    BlockMat Rd = zeros(dims);  // A^T(y) - C - S
    for (int k = 0; k < m; ++k) {
      add_sparse(Rd, prob.constraints[static_cast<size_t>(k)], it.y(k));
    }
    for (size_t blk = 0; blk < Rd.size(); ++blk) Rd[blk] -= C[blk] + it.S[blk];

    const double pobj = inner_sparse(prob.objective, it.X);
    const double dobj = b.dot(it.y);
    const double gap = block_inner(it.X, it.S);
    const double mu = gap / n;
    const double pinf = rp.norm() / norm_b;
    const double dinf = block_frob(Rd) / norm_c;
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));

    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.primal_residual = pinf;
    res.dual_residual = dinf;
    res.duality_gap = relgap;

    const double score = std::max({pinf, dinf, relgap});
    if (score < best_score) {
      best_score = score;
      best = res;
      best.X = it.X;
      best.y.assign(it.y.data(), it.y.data() + m);
      stall = 0;
    } else if (++stall > 20) {
      break;
    }

    if (opt.verbose) {
      std::printf("iter %3d  pobj % .9e  dobj % .9e  gap %.2e  pinf %.2e  dinf %.2e\n",
                  res.iterations, pobj, dobj, relgap, pinf, dinf);
    }
    if (pinf <= opt.feas_tol && dinf <= opt.feas_tol && relgap <= opt.gap_tol) {
      break;
    }

    // Heuristic divergence checks.
    if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(mu)) break;
    if (dinf <= 1e-9 && dobj < -1e9 * norm_b) {
      best.status = Status::infeasible;
      return best;
    }
    if (pinf <= 1e-9 && pobj > 1e9 * norm_c) {
      best.status = Status::unbounded;
      return best;
    }

    // Nesterov-Todd scaling W per block: W S W = X.
    BlockMat W(dims.size());
    bool scaling_ok = true;
    for (size_t blk = 0; blk < W.size(); ++blk) {
      MatrixXd s_root, s_inv_root;
      sym_sqrt(it.S[blk], s_root, s_inv_root);
      MatrixXd t = s_root * it.X[blk] * s_root;
      MatrixXd t_root, t_inv_root;
      sym_sqrt((t + t.transpose()) / 2.0, t_root, t_inv_root);
      W[blk] = s_inv_root * t_root * s_inv_root;
      W[blk] = ((W[blk] + W[blk].transpose()) / 2.0).eval();
      if (!W[blk].allFinite()) scaling_ok = false;
    }
    if (!scaling_ok) break;

    // Schur complement M_{kl} = <A_k, W A_l W>.
    std::vector<BlockMat> WAW(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
      BlockMat acc = zeros(dims);
      for (const auto& c : prob.constraints[static_cast<size_t>(k)]) {
        const auto& w = W[static_cast<size_t>(c.block)];
        auto& out = acc[static_cast<size_t>(c.block)];
        const VectorXd wr = w.col(c.row);
        const VectorXd wc = w.col(c.col);
        if (c.row == c.col) {
          out.noalias() += c.value * wr * wr.transpose();
        } else {
          out.noalias() += c.value * (wr * wc.transpose() + wc * wr.transpose());
        }
      }
      WAW[static_cast<size_t>(k)] = std::move(acc);
    }
    MatrixXd schur(m, m);
    for (int k = 0; k < m; ++k) {
      for (int l = k; l < m; ++l) {
        const double v = inner_sparse(prob.constraints[static_cast<size_t>(l)],
                                      WAW[static_cast<size_t>(k)]);
        schur(k, l) = v;
        schur(l, k) = v;
      }
    }
    Eigen::LLT<MatrixXd> schur_llt(schur);
    if (schur_llt.info() != Eigen::Success) {
      // Tiny ridge against late-stage conditioning loss.
      schur.diagonal().array() += 1e-12 * (1.0 + schur.diagonal().cwiseAbs().maxCoeff());
      schur_llt.compute(schur);
      if (schur_llt.info() != Eigen::Success) break;
    }

    BlockMat WRdW(dims.size());
    for (size_t blk = 0; blk < W.size(); ++blk) {
      WRdW[blk] = W[blk] * Rd[blk] * W[blk];
    }

    // Direction for a given centering parameter sigma.
    BlockMat Sinv(dims.size());
    for (size_t blk = 0; blk < W.size(); ++blk) {
      MatrixXd s_root, s_inv_root;
      sym_sqrt(it.S[blk], s_root, s_inv_root);
      Sinv[blk] = s_inv_root * s_inv_root;
    }
    const auto direction = [&](double sigma, BlockMat& dX, VectorXd& dy, BlockMat& dS) {
      BlockMat Rc(dims.size());
      for (size_t blk = 0; blk < W.size(); ++blk) {
        Rc[blk] = sigma * mu * Sinv[blk] - it.X[blk];
      }
      VectorXd rhs(m);
      for (int k = 0; k < m; ++k) {
        rhs(k) = inner_sparse(prob.constraints[static_cast<size_t>(k)], Rc) -
                 inner_sparse(prob.constraints[static_cast<size_t>(k)], WRdW) - rp(k);
      }
      dy = schur_llt.solve(rhs);
      dS = zeros(dims);
      for (int k = 0; k < m; ++k) {
        add_sparse(dS, prob.constraints[static_cast<size_t>(k)], dy(k));
      }
      for (size_t blk = 0; blk < dS.size(); ++blk) dS[blk] += Rd[blk];
      dX = BlockMat(dims.size());
      for (size_t blk = 0; blk < dS.size(); ++blk) {
        MatrixXd wdw = W[blk] * dS[blk] * W[blk];
        dX[blk] = Rc[blk] - (wdw + wdw.transpose()) / 2.0;
        dX[blk] = ((dX[blk] + dX[blk].transpose()) / 2.0).eval();
      }
    };

    // Predictor pass fixes sigma, second pass takes the step.
    BlockMat dX, dS;
    VectorXd dy;
    direction(0.0, dX, dy, dS);
    double ap = std::min(1.0, opt.step_fraction * max_step_blocks(it.X, dX));
    double ad = std::min(1.0, opt.step_fraction * max_step_blocks(it.S, dS));
    double gap_aff = 0.0;
    for (size_t blk = 0; blk < dX.size(); ++blk) {
      gap_aff += ((it.X[blk] + ap * dX[blk]).cwiseProduct(it.S[blk] + ad * dS[blk])).sum();
    }
    const double sigma =
        std::clamp(std::pow(std::max(gap_aff, 0.0) / std::max(gap, 1e-300), 3.0), 1e-8, 0.999);

    direction(sigma, dX, dy, dS);
    ap = std::min(1.0, opt.step_fraction * max_step_blocks(it.X, dX));
    ad = std::min(1.0, opt.step_fraction * max_step_blocks(it.S, dS));
    if (ap < 1e-10 && ad < 1e-10) break;

    for (size_t blk = 0; blk < dX.size(); ++blk) {
      it.X[blk] += ap * dX[blk];
      it.X[blk] = ((it.X[blk] + it.X[blk].transpose()) / 2.0).eval();
      it.S[blk] += ad * dS[blk];
      it.S[blk] = ((it.S[blk] + it.S[blk].transpose()) / 2.0).eval();
    }
    it.y += ad * dy;
  }

  best.iterations = res.iterations;
  const double score = std::max({best.primal_residual, best.dual_residual, best.duality_gap});
  if (best.primal_residual <= opt.accept_feas && best.dual_residual <= opt.accept_feas &&
      best.duality_gap <= opt.accept_gap) {
    best.status = Status::optimal;
  } else if (score <= 100.0 * std::max(opt.accept_feas, opt.accept_gap)) {
    best.status = Status::near_optimal;
  } else {
    best.status = Status::failure;
  }
  return best;
}

}  // namespace chaincert::sdp
