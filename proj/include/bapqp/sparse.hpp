#ifndef BAPQP_SPARSE_HPP
#define BAPQP_SPARSE_HPP

#include <bapqp/core.hpp>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>

namespace bapqp {

// ---------------------------------------------------------------------------
// Mat-vec and normal-matrix formation
// ---------------------------------------------------------------------------

/// Returns M v, or M^T v when `adjoint` is set.
inline Vector spmv(const SparseMatrix& m, const Vector& v, bool adjoint = false) {
  if (adjoint) {
    require_dim(v.size() == m.rows(), "spmv: adjoint operand has wrong length");
    return m.transpose() * v;
  }
  require_dim(v.size() == m.cols(), "spmv: operand has wrong length");
  return m * v;
}

enum class NormalMode { MMt, MtM };

/// Forms M M^T or M^T M with exactly symmetric storage (the strictly upper
/// triangle is a mirror of the lower one).
inline SparseMatrix form_normal(const SparseMatrix& m, NormalMode mode) {
  SparseMatrix product;
  if (mode == NormalMode::MMt) {
    SparseMatrix mt = m.transpose();
    product = (m * mt).pruned();
  } else {
    SparseMatrix mt = m.transpose();
    product = (mt * m).pruned();
  }
  SparseMatrix lower = product.triangularView<Eigen::Lower>();
  SparseMatrix full = lower.selfadjointView<Eigen::Lower>();
  full.makeCompressed();
  return full;
}

inline SparseMatrix sparse_identity(Index n, double scale = 1.0) {
  SparseMatrix eye(n, n);
  eye.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Index j = 0; j < n; ++j) eye.insert(j, j) = scale;
  eye.makeCompressed();
  return eye;
}

// ---------------------------------------------------------------------------
// Sparse Cholesky with ridge fallback
// ---------------------------------------------------------------------------

struct CholeskyOptions {
  double pivot_floor = 1e-12;   // relative to max |diag|
  double initial_ridge = 1e-10; // relative to max |diag|
  int max_doublings = 10;
};

/// P M P^T = L L^T for a symmetric positive definite M (possibly after a
/// tiny diagonal ridge). Immutable once built; copies share the factor.
class CholeskyFactor {
 public:
  using Llt = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

  CholeskyFactor() = default;

  static CholeskyFactor factor(const SparseMatrix& m, const CholeskyOptions& opt = {}) {
    if (m.rows() != m.cols()) throw DimensionError("cholesky: matrix is not square");
    CholeskyFactor f;
    f.dim_ = m.rows();
    if (f.dim_ == 0) return f;

    Vector diag = m.diagonal();
    const double max_diag = diag.cwiseAbs().maxCoeff();
    if (!(max_diag > 0.0)) throw NotPositiveDefinite("cholesky: matrix has no positive diagonal");
    const double floor = opt.pivot_floor * max_diag;
    for (Index j = 0; j < f.dim_; ++j) {
      // A Gram matrix with a vanishing diagonal entry comes from an empty
      // row; a ridge would only hide the rank defect.
      if (!(diag[j] > floor))
        throw NotPositiveDefinite("cholesky: diagonal entry " + std::to_string(j) +
                                  " is not positive");
    }

    auto llt = std::make_shared<Llt>();
    llt->analyzePattern(m);
    double ridge = 0.0;
    SparseMatrix work = m;
    for (int attempt = 0; attempt <= opt.max_doublings + 1; ++attempt) {
      if (ridge > 0.0) {
        work = m;
        for (Index j = 0; j < f.dim_; ++j) work.coeffRef(j, j) += ridge;
      }
      llt->factorize(work);
      if (llt->info() == Eigen::Success && min_pivot(*llt) > floor) {
        f.llt_ = std::move(llt);
        f.ridge_ = ridge;
        return f;
      }
      if (attempt > opt.max_doublings) break;
      ridge = (ridge == 0.0) ? opt.initial_ridge * max_diag : 2.0 * ridge;
    }
    throw NotPositiveDefinite("cholesky: pivot below floor after ridge attempts");
  }

  Vector solve(const Vector& r) const {
    require_dim(r.size() == dim_, "cholesky solve: rhs has wrong length");
    if (dim_ == 0) return Vector(0);
    return llt_->solve(r);
  }

  Index dim() const noexcept { return dim_; }
  double ridge() const noexcept { return ridge_; }
  bool empty() const noexcept { return !llt_; }
  const Llt& llt() const { return *llt_; }

 private:
  static double min_pivot(const Llt& llt) {
    SparseMatrix l = llt.matrixL();
    double mn = kInf;
    for (Index j = 0; j < l.cols(); ++j) {
      // The first stored entry of each column of L is its diagonal.
      SparseMatrix::InnerIterator it(l, j);
      double d = (it && it.row() == j) ? it.value() : 0.0;
      mn = std::min(mn, d * d);
    }
    return mn;
  }

  Index dim_ = 0;
  double ridge_ = 0.0;
  std::shared_ptr<const Llt> llt_;
};

inline CholeskyFactor cholesky(const SparseMatrix& m, const CholeskyOptions& opt = {}) {
  return CholeskyFactor::factor(m, opt);
}

// ---------------------------------------------------------------------------
// Implicit operators, PCG, spectral norm
// ---------------------------------------------------------------------------

struct LinearOperator {
  Index rows = 0;
  Index cols = 0;
  std::function<Vector(const Vector&)> apply;
  std::function<Vector(const Vector&)> adjoint;  // empty when unavailable

  Vector operator()(const Vector& v) const { return apply(v); }
  bool has_adjoint() const { return static_cast<bool>(adjoint); }
};

inline LinearOperator as_operator(std::shared_ptr<const SparseMatrix> m) {
  LinearOperator op;
  op.rows = m->rows();
  op.cols = m->cols();
  op.apply = [m](const Vector& v) { return spmv(*m, v); };
  op.adjoint = [m](const Vector& v) { return spmv(*m, v, true); };
  return op;
}

inline LinearOperator as_operator(const SparseMatrix& m) {
  return as_operator(std::make_shared<const SparseMatrix>(m));
}

inline LinearOperator jacobi_preconditioner(const Vector& diag) {
  Vector inv = diag.unaryExpr([](double d) { return d > 0.0 ? 1.0 / d : 1.0; });
  LinearOperator op;
  op.rows = op.cols = diag.size();
  op.apply = [inv](const Vector& v) -> Vector { return inv.cwiseProduct(v); };
  op.adjoint = op.apply;
  return op;
}

struct PcgResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;  // ||op(x) - r||
  bool converged = false;
};

/// Preconditioned conjugate gradients for an SPD operator. Stops when
/// ||op(x) - r|| <= tol (1 + ||r||); otherwise returns the best iterate seen.
inline PcgResult pcg(const LinearOperator& op, const Vector& r, double tol, int maxit,
                     const std::optional<LinearOperator>& precond = std::nullopt,
                     const std::optional<Vector>& x0 = std::nullopt) {
  require_dim(op.rows == op.cols && r.size() == op.rows, "pcg: dimension mismatch");
  PcgResult out;
  const double target = tol * (1.0 + r.norm());
  Vector x = x0 ? *x0 : Vector::Zero(r.size());
  Vector res = r - (x0 ? op(x) : Vector::Zero(r.size()));
  double rnorm = res.norm();
  out.x = x;
  out.residual = rnorm;
  if (rnorm <= target) {
    out.converged = true;
    return out;
  }
  Vector z = precond ? (*precond)(res) : res;
  Vector p = z;
  double rz = res.dot(z);
  for (int k = 1; k <= maxit; ++k) {
    Vector ap = op(p);
    double pap = p.dot(ap);
    if (!(pap > 0.0)) break;
    double alpha = rz / pap;
    x += alpha * p;
    res -= alpha * ap;
    rnorm = res.norm();
    out.iterations = k;
    if (rnorm < out.residual) {
      out.residual = rnorm;
      out.x = x;
    }
    if (rnorm <= target) {
      out.converged = true;
      return out;
    }
    z = precond ? (*precond)(res) : res;
    double rz_next = res.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return out;
}

/// Power iteration on op^T op. The estimate approaches ||op||_2 from below.
inline double spectral_norm(const LinearOperator& op, double rel_tol = 1e-6, int maxit = 300) {
  if (!op.has_adjoint()) throw ParameterError("spectral_norm: operator has no adjoint");
  if (op.cols == 0 || op.rows == 0) return 0.0;
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> gauss;
  Vector v(op.cols);
  for (Index j = 0; j < v.size(); ++j) v[j] = gauss(rng);
  v.normalize();
  double lambda = 0.0;
  for (int k = 0; k < maxit; ++k) {
    Vector w = op.adjoint(op(v));
    double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    bool done = k > 0 && std::abs(next - lambda) <= rel_tol * next;
    lambda = next;
    if (done) break;
  }
  return std::sqrt(lambda);
}

}  // namespace bapqp

#endif  // BAPQP_SPARSE_HPP
