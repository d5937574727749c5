#ifndef BAPQP_MODEL_HPP
#define BAPQP_MODEL_HPP

#include <bapqp/block_vector.hpp>
#include <bapqp/core.hpp>
#include <bapqp/sparse.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bapqp {

// ---------------------------------------------------------------------------
// Cones
// ---------------------------------------------------------------------------

struct Cone {
  enum class Kind { Free, NonNeg, Box };

  Kind kind = Kind::Free;
  Index dim = 0;
  Vector lower;  // Box only; -inf/+inf allowed
  Vector upper;

  static Cone free(Index n) { return {Kind::Free, n, {}, {}}; }
  static Cone nonneg(Index n) { return {Kind::NonNeg, n, {}, {}}; }
  static Cone box(Vector lo, Vector hi) {
    Index n = lo.size();
    return {Kind::Box, n, std::move(lo), std::move(hi)};
  }

  double lower_at(Index j) const {
    switch (kind) {
      case Kind::Free: return -kInf;
      case Kind::NonNeg: return 0.0;
      case Kind::Box: return lower[j];
    }
    return -kInf;
  }
  double upper_at(Index j) const { return kind == Kind::Box ? upper[j] : kInf; }

  bool operator==(const Cone& o) const {
    return kind == o.kind && dim == o.dim && lower.size() == o.lower.size() &&
           upper.size() == o.upper.size() && lower == o.lower && upper == o.upper;
  }
};

// ---------------------------------------------------------------------------
// Separable convex terms theta_i
// ---------------------------------------------------------------------------

/// Tagged description of a separable closed convex function.
///   Zero                0
///   L1(w)               w * sum |t_j|
///   Kleinrock(cap)      sum t_j / (cap_j - t_j) on [0, cap)
///   BPR(cap, r, B, b)   sum r_j t_j (1 + B (t_j / cap_j)^b) on [0, inf)
struct SeparableFunction {
  enum class Kind { Zero, L1, Kleinrock, BPR };

  Kind kind = Kind::Zero;
  Index dim = 0;
  double weight = 0.0;  // L1
  Vector cap;           // Kleinrock, BPR
  Vector freeflow;      // BPR
  double bpr_b = 0.15;
  double bpr_beta = 4.0;

  static SeparableFunction zero(Index n) { return {Kind::Zero, n, 0.0, {}, {}, 0.15, 4.0}; }
  static SeparableFunction l1(Index n, double w) { return {Kind::L1, n, w, {}, {}, 0.15, 4.0}; }
  static SeparableFunction kleinrock(Vector cap) {
    Index n = cap.size();
    return {Kind::Kleinrock, n, 0.0, std::move(cap), {}, 0.15, 4.0};
  }
  static SeparableFunction bpr(Vector cap, Vector freeflow, double b, double beta) {
    Index n = cap.size();
    return {Kind::BPR, n, 0.0, std::move(cap), std::move(freeflow), b, beta};
  }

  bool is_zero() const { return kind == Kind::Zero; }

  /// Value of the scalar piece at coordinate j; +inf outside the domain.
  double value_at(Index j, double t) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::L1: return weight * std::abs(t);
      case Kind::Kleinrock:
        if (t < 0.0 || t >= cap[j]) return kInf;
        return t / (cap[j] - t);
      case Kind::BPR:
        if (t < 0.0) return kInf;
        return freeflow[j] * t * (1.0 + bpr_b * std::pow(t / cap[j], bpr_beta));
    }
    return kInf;
  }

  double value(const Vector& x) const {
    if (kind == Kind::Zero) return 0.0;
    double acc = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
      double v = value_at(j, x[j]);
      if (std::isinf(v)) return kInf;
      acc += v;
    }
    return acc;
  }

  bool operator==(const SeparableFunction& o) const {
    return kind == o.kind && dim == o.dim && weight == o.weight && cap.size() == o.cap.size() &&
           cap == o.cap && freeflow.size() == o.freeflow.size() && freeflow == o.freeflow &&
           bpr_b == o.bpr_b && bpr_beta == o.bpr_beta;
  }
};

// ---------------------------------------------------------------------------
// Quadratic term Q_i
// ---------------------------------------------------------------------------

struct QuadTerm {
  enum class Kind { Zero, Diagonal, Sparse };

  Kind kind = Kind::Zero;
  Index dim = 0;
  Vector diag;                               // Diagonal
  std::shared_ptr<const SparseMatrix> mat;   // Sparse (symmetric, full storage)

  static QuadTerm zero(Index n) { return {Kind::Zero, n, {}, nullptr}; }
  static QuadTerm diagonal(Vector d) {
    Index n = d.size();
    return {Kind::Diagonal, n, std::move(d), nullptr};
  }
  static QuadTerm sparse(std::shared_ptr<const SparseMatrix> m) {
    Index n = m->rows();
    return {Kind::Sparse, n, {}, std::move(m)};
  }
  static QuadTerm sparse(SparseMatrix m) {
    return sparse(std::make_shared<const SparseMatrix>(std::move(m)));
  }

  bool is_zero() const { return kind == Kind::Zero; }

  Vector apply(const Vector& v) const {
    switch (kind) {
      case Kind::Zero: return Vector::Zero(v.size());
      case Kind::Diagonal: return diag.cwiseProduct(v);
      case Kind::Sparse: return spmv(*mat, v);
    }
    return Vector::Zero(v.size());
  }

  double max_diagonal() const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::Diagonal: return dim ? diag.maxCoeff() : 0.0;
      case Kind::Sparse: return dim ? Vector(mat->diagonal()).maxCoeff() : 0.0;
    }
    return 0.0;
  }

  SparseMatrix to_sparse() const {
    switch (kind) {
      case Kind::Zero: return SparseMatrix(dim, dim);
      case Kind::Diagonal: {
        SparseMatrix m(dim, dim);
        m.reserve(Eigen::VectorXi::Constant(dim, 1));
        for (Index j = 0; j < dim; ++j) m.insert(j, j) = diag[j];
        m.makeCompressed();
        return m;
      }
      case Kind::Sparse: return *mat;
    }
    return SparseMatrix(dim, dim);
  }
};

// ---------------------------------------------------------------------------
// Blocks and the problem
// ---------------------------------------------------------------------------

/// One column block of the block-angular constraint matrix together with
/// its objective pieces. `d` is null for block 0. Matrices are held through
/// shared pointers so that blocks can share storage (e.g. a common
/// incidence matrix across commodities).
struct Block {
  std::shared_ptr<const SparseMatrix> a;  // m0 x n_i
  std::shared_ptr<const SparseMatrix> d;  // m_i x n_i, null for block 0
  QuadTerm q;
  Vector c;
  Vector b;  // m_i, empty for block 0
  Cone cone;
  SeparableFunction theta;

  Index n() const { return c.size(); }
  Index m() const { return d ? d->rows() : 0; }
  bool has_local() const { return static_cast<bool>(d); }
};

struct ProblemMetadata {
  std::string name = "unnamed";
  std::uint64_t seed = 0;
  std::string family = "custom";
  std::string generator = "none";
  std::optional<BlockVector> witness;  // feasible point, when known
};

struct BlockAngularProblem {
  std::vector<Block> blocks;
  Vector b0;
  ProblemMetadata meta;

  std::size_t num_blocks() const { return blocks.size(); }
  Index m0() const { return b0.size(); }

  std::vector<Index> block_sizes() const {
    std::vector<Index> out;
    out.reserve(blocks.size());
    for (const auto& blk : blocks) out.push_back(blk.n());
    return out;
  }
  std::vector<Index> local_sizes() const {
    std::vector<Index> out;
    out.reserve(blocks.size());
    for (const auto& blk : blocks) out.push_back(blk.m());
    return out;
  }
  Index total_variables() const {
    Index n = 0;
    for (const auto& blk : blocks) n += blk.n();
    return n;
  }
  Index total_constraints() const {
    Index m = m0();
    for (const auto& blk : blocks) m += blk.m();
    return m;
  }

  BlockVector zero_primal() const { return BlockVector(block_sizes()); }

  bool all_q_zero() const {
    for (const auto& blk : blocks)
      if (!blk.q.is_zero()) return false;
    return true;
  }
  bool all_theta_zero() const {
    for (const auto& blk : blocks)
      if (!blk.theta.is_zero()) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  int block = -1;
  std::string message;
  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

namespace detail {

inline bool sparse_is_symmetric(const SparseMatrix& m) {
  if (m.rows() != m.cols()) return false;
  SparseMatrix t = m.transpose();
  SparseMatrix diff = m - t;
  for (Index k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
      if (it.value() != 0.0) return false;
  return true;
}

inline double min_rayleigh(const QuadTerm& q, int probes, std::uint64_t seed) {
  if (q.kind != QuadTerm::Kind::Sparse || q.dim == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  double worst = kInf;
  for (int p = 0; p < probes; ++p) {
    Vector v(q.dim);
    for (Index j = 0; j < v.size(); ++j) v[j] = gauss(rng);
    worst = std::min(worst, v.dot(q.apply(v)) / v.squaredNorm());
  }
  return worst;
}

}  // namespace detail

/// Collects every dimensional, PSD and bound violation. Pure.
inline ValidationReport validate(const BlockAngularProblem& p) {
  ValidationReport rep;
  auto add = [&rep](int i, std::string msg) { rep.push_back({i, std::move(msg)}); };
  if (p.blocks.empty()) {
    add(-1, "problem has no blocks");
    return rep;
  }
  const Index m0 = p.m0();
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const int i = static_cast<int>(bi);
    const Block& blk = p.blocks[bi];
    const Index n = blk.n();
    const std::string tag = "A_" + std::to_string(i);
    if (!blk.a) {
      add(i, tag + " missing");
    } else {
      if (blk.a->rows() != m0)
        add(i, tag + " row count " + std::to_string(blk.a->rows()) + " ≠ " +
                   std::to_string(m0));
      if (blk.a->cols() != n)
        add(i, tag + " column count " + std::to_string(blk.a->cols()) + " ≠ " +
                   std::to_string(n));
    }
    if (i == 0 && blk.d) add(i, "block 0 must not carry local constraints");
    if (i > 0 && !blk.d) add(i, "D_" + std::to_string(i) + " missing");
    if (blk.d) {
      if (blk.d->cols() != n)
        add(i, "D_" + std::to_string(i) + " column count " + std::to_string(blk.d->cols()) +
                   " ≠ " + std::to_string(n));
      if (blk.b.size() != blk.d->rows())
        add(i, "b_" + std::to_string(i) + " length " + std::to_string(blk.b.size()) + " ≠ " +
                   std::to_string(blk.d->rows()));
    } else if (blk.b.size() != 0) {
      add(i, "b_" + std::to_string(i) + " given without D_" + std::to_string(i));
    }
    // Q
    if (blk.q.dim != n) add(i, "Q_" + std::to_string(i) + " dimension mismatch");
    if (blk.q.kind == QuadTerm::Kind::Diagonal) {
      if (blk.q.diag.size() != n) add(i, "Q_" + std::to_string(i) + " diagonal length mismatch");
      for (Index j = 0; j < blk.q.diag.size(); ++j)
        if (!(blk.q.diag[j] >= 0.0)) {
          add(i, "Q_" + std::to_string(i) + " negative diagonal at index " + std::to_string(j));
          break;
        }
    } else if (blk.q.kind == QuadTerm::Kind::Sparse) {
      if (!blk.q.mat || blk.q.mat->rows() != n || blk.q.mat->cols() != n) {
        add(i, "Q_" + std::to_string(i) + " matrix dimension mismatch");
      } else {
        if (!detail::sparse_is_symmetric(*blk.q.mat))
          add(i, "Q_" + std::to_string(i) + " not symmetric");
        if (detail::min_rayleigh(blk.q, 16, 0xC0FFEE + bi) < -1e-12)
          add(i, "Q_" + std::to_string(i) + " not positive semidefinite");
      }
    }
    // cone
    if (blk.cone.dim != n) add(i, "cone dimension mismatch in block " + std::to_string(i));
    if (blk.cone.kind == Cone::Kind::Box) {
      if (blk.cone.lower.size() != n || blk.cone.upper.size() != n) {
        add(i, "box bound length mismatch");
      } else {
        for (Index j = 0; j < n; ++j)
          if (blk.cone.lower[j] > blk.cone.upper[j]) {
            add(i, "box bounds crossed at index " + std::to_string(j));
            break;
          }
      }
    }
    // theta
    const auto& th = blk.theta;
    if (th.dim != n) add(i, "theta dimension mismatch in block " + std::to_string(i));
    switch (th.kind) {
      case SeparableFunction::Kind::Zero: break;
      case SeparableFunction::Kind::L1:
        if (!(th.weight >= 0.0)) add(i, "L1 weight must be nonnegative");
        break;
      case SeparableFunction::Kind::Kleinrock:
        if (th.cap.size() != n) add(i, "Kleinrock cap length mismatch");
        else if (n > 0 && !(th.cap.minCoeff() > 0.0)) add(i, "Kleinrock cap must be positive");
        break;
      case SeparableFunction::Kind::BPR:
        if (th.cap.size() != n || th.freeflow.size() != n) add(i, "BPR vector length mismatch");
        else {
          if (n > 0 && !(th.cap.minCoeff() > 0.0)) add(i, "BPR cap must be positive");
          if (n > 0 && !(th.freeflow.minCoeff() >= 0.0)) add(i, "BPR free-flow must be nonnegative");
        }
        if (!(th.bpr_b > 0.0) || !(th.bpr_beta > 0.0)) add(i, "BPR B and beta must be positive");
        break;
    }
  }
  return rep;
}

inline void require_valid(const BlockAngularProblem& p) {
  auto rep = validate(p);
  if (!rep.empty()) {
    std::string msg = "invalid problem:";
    for (const auto& v : rep) msg += " [block " + std::to_string(v.block) + "] " + v.message + ";";
    throw ValidationError(msg);
  }
}

// ---------------------------------------------------------------------------
// Objective and constraint maps
// ---------------------------------------------------------------------------

inline void require_conformal(const BlockAngularProblem& p, const BlockVector& x) {
  require_dim(x.size() == p.blocks.size(), "block count mismatch");
  for (std::size_t i = 0; i < x.size(); ++i)
    require_dim(x[i].size() == p.blocks[i].n(),
                "segment " + std::to_string(i) + " has wrong length");
}

inline BlockVector split_blocks(const BlockAngularProblem& p, const Vector& flat) {
  auto sizes = p.block_sizes();
  return split_blocks(std::span<const Index>(sizes), flat);
}

/// sum_i theta_i(x_i) + 1/2 <x_i, Q_i x_i> + <c_i, x_i>; +inf outside dom theta.
inline double objective(const BlockAngularProblem& p, const BlockVector& x) {
  require_conformal(p, x);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Block& blk = p.blocks[i];
    double th = blk.theta.value(x[i]);
    if (std::isinf(th)) return kInf;
    acc += th + 0.5 * x[i].dot(blk.q.apply(x[i])) + blk.c.dot(x[i]);
  }
  return acc;
}

/// A x = sum_i A_i x_i.
inline Vector linking_product(const BlockAngularProblem& p, const BlockVector& x) {
  Vector out = Vector::Zero(p.m0());
  for (std::size_t i = 0; i < x.size(); ++i) out += spmv(*p.blocks[i].a, x[i]);
  return out;
}

/// Stacked B x - b as (linking residual, local residuals per block >= 1).
struct ConstraintResidual {
  Vector linking;
  std::vector<Vector> local;  // index i holds block i (empty for block 0)

  double norm() const {
    double acc = linking.squaredNorm();
    for (const auto& v : local) acc += v.squaredNorm();
    return std::sqrt(acc);
  }
};

inline ConstraintResidual constraint_residual(const BlockAngularProblem& p, const BlockVector& x) {
  ConstraintResidual r;
  r.linking = linking_product(p, x) - p.b0;
  r.local.resize(p.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const Block& blk = p.blocks[i];
    r.local[i] = blk.d ? Vector(spmv(*blk.d, x[i]) - blk.b) : Vector(0);
  }
  return r;
}

/// ||b|| over all constraint blocks.
inline double rhs_norm(const BlockAngularProblem& p) {
  double acc = p.b0.squaredNorm();
  for (const auto& blk : p.blocks) acc += blk.b.squaredNorm();
  return std::sqrt(acc);
}

inline double cost_norm(const BlockAngularProblem& p) {
  double acc = 0.0;
  for (const auto& blk : p.blocks) acc += blk.c.squaredNorm();
  return std::sqrt(acc);
}

}  // namespace bapqp

#endif  // BAPQP_MODEL_HPP
