#ifndef BAPQP_ORACLE_HPP
#define BAPQP_ORACLE_HPP

// Desk-scale reference solver. It enumerates the piece of every variable
// (at a bound, at an L1 kink, or interior with a fixed sign), solves the
// equality-constrained QP of each cell densely and accepts the first cell
// whose point passes a self-contained KKT test. Only dense Eigen and the
// problem data are used here.

#include <bapqp/block_vector.hpp>
#include <bapqp/model.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace bapqp {

struct OracleOptions {
  double kkt_tol = 1e-8;
  long max_cells = 1L << 20;
  Index max_variables = 24;
};

struct OracleResult {
  BlockVector x;
  double objective = 0.0;
  Vector multipliers;      // equality multipliers, linking rows first then local rows
  Vector reduced_gradient; // Q x + c - B^T lambda
  long cells_tried = 0;
  double kkt_error = 0.0;
};

namespace detail {

enum class Piece { Lower, Upper, Kink, Positive, Negative, Interior };

struct OracleData {
  Index n = 0;
  Index m = 0;
  Eigen::MatrixXd q;
  Eigen::MatrixXd b;
  Vector c;
  Vector rhs;
  Vector lo, hi, weight;  // bounds and L1 weights per variable
};

inline OracleData flatten(const BlockAngularProblem& p) {
  OracleData d;
  d.n = p.total_variables();
  d.m = p.total_constraints();
  d.q = Eigen::MatrixXd::Zero(d.n, d.n);
  d.b = Eigen::MatrixXd::Zero(d.m, d.n);
  d.c.resize(d.n);
  d.rhs.resize(d.m);
  d.lo.resize(d.n);
  d.hi.resize(d.n);
  d.weight = Vector::Zero(d.n);
  d.rhs.head(p.m0()) = p.b0;
  Index col = 0, row = p.m0();
  for (const Block& blk : p.blocks) {
    const Index n = blk.n();
    if (blk.theta.kind == SeparableFunction::Kind::Kleinrock ||
        blk.theta.kind == SeparableFunction::Kind::BPR)
      throw OracleError("oracle supports only zero and L1 separable terms");
    d.b.block(0, col, p.m0(), n) = Eigen::MatrixXd(*blk.a);
    if (blk.d) {
      d.b.block(row, col, blk.m(), n) = Eigen::MatrixXd(*blk.d);
      d.rhs.segment(row, blk.m()) = blk.b;
      row += blk.m();
    }
    d.q.block(col, col, n, n) = Eigen::MatrixXd(blk.q.to_sparse());
    d.c.segment(col, n) = blk.c;
    for (Index j = 0; j < n; ++j) {
      d.lo[col + j] = blk.cone.lower_at(j);
      d.hi[col + j] = blk.cone.upper_at(j);
      if (blk.theta.kind == SeparableFunction::Kind::L1) d.weight[col + j] = blk.theta.weight;
    }
    col += n;
  }
  return d;
}

inline std::vector<Piece> pieces_for(double lo, double hi, double w) {
  std::vector<Piece> out;
  if (std::isfinite(lo)) out.push_back(Piece::Lower);
  if (std::isfinite(hi) && hi != lo) out.push_back(Piece::Upper);
  if (lo == hi) return out;
  if (w > 0.0) {
    if (lo < 0.0 && hi > 0.0) out.push_back(Piece::Kink);
    if (hi > 0.0) out.push_back(Piece::Positive);
    if (lo < 0.0) out.push_back(Piece::Negative);
  } else {
    out.push_back(Piece::Interior);
  }
  return out;
}

}  // namespace detail

/// Self-contained KKT test: primal feasibility, bounds, and
/// -(Q x + c - B^T lambda) in the subdifferential of theta + indicator(K).
inline bool kkt_check(const detail::OracleData& d, const Vector& x, const Vector& lambda,
                      double tol, OracleResult& out) {
  const Index n = d.n;
  double err = 0.0;
  if (d.m) err = std::max(err, (d.b * x - d.rhs).cwiseAbs().maxCoeff());
  Vector g = d.q * x + d.c - (d.m ? Vector(d.b.transpose() * lambda) : Vector::Zero(n));
  for (Index j = 0; j < n; ++j) {
    const double xj = x[j];
    err = std::max({err, d.lo[j] - xj, xj - d.hi[j]});
    const bool at_lo = std::isfinite(d.lo[j]) && std::abs(xj - d.lo[j]) <= tol;
    const bool at_hi = std::isfinite(d.hi[j]) && std::abs(xj - d.hi[j]) <= tol;
    const double w = d.weight[j];
    // Subdifferential of w|t| at xj.
    double slo, shi;
    if (w == 0.0) slo = shi = 0.0;
    else if (std::abs(xj) <= tol) { slo = -w; shi = w; }
    else if (xj > 0.0) slo = shi = w;
    else slo = shi = -w;
    // Normal cone of the bounds.
    if (at_lo) slo = -kInf;
    if (at_hi) shi = kInf;
    const double v = -g[j];
    if (v < slo) err = std::max(err, slo - v);
    if (v > shi) err = std::max(err, v - shi);
  }
  out.kkt_error = err;
  out.reduced_gradient = g;
  return err <= tol;
}

inline OracleResult oracle_solve(const BlockAngularProblem& p, const OracleOptions& opt = {}) {
  using detail::Piece;
  if (p.total_variables() > opt.max_variables)
    throw OracleError("oracle: " + std::to_string(p.total_variables()) +
                      " variables exceed the limit of " + std::to_string(opt.max_variables));
  const detail::OracleData d = detail::flatten(p);
  const Index n = d.n, m = d.m;

  std::vector<std::vector<Piece>> options(n);
  double cells = 1.0;
  for (Index j = 0; j < n; ++j) {
    options[j] = detail::pieces_for(d.lo[j], d.hi[j], d.weight[j]);
    cells *= static_cast<double>(options[j].size());
  }
  if (cells > static_cast<double>(opt.max_cells))
    throw OracleError("oracle: " + std::to_string(static_cast<long long>(cells)) +
                      " cells exceed the enumeration cap");

  const double scale = 1.0 + std::max({d.c.cwiseAbs().maxCoeff(),
                                       m ? d.rhs.cwiseAbs().maxCoeff() : 0.0,
                                       n ? d.q.cwiseAbs().maxCoeff() : 0.0,
                                       n ? d.weight.maxCoeff() : 0.0});
  const double tol = opt.kkt_tol * scale;

  std::vector<std::size_t> pick(n, 0);
  OracleResult res;
  for (long cell = 0;; ++cell) {
    ++res.cells_tried;
    // Assemble the cell.
    Vector x = Vector::Zero(n);
    Vector slope = Vector::Zero(n);
    std::vector<Index> freev;
    for (Index j = 0; j < n; ++j) {
      switch (options[j][pick[j]]) {
        case Piece::Lower: x[j] = d.lo[j]; break;
        case Piece::Upper: x[j] = d.hi[j]; break;
        case Piece::Kink: x[j] = 0.0; break;
        case Piece::Positive: slope[j] = d.weight[j]; freev.push_back(j); break;
        case Piece::Negative: slope[j] = -d.weight[j]; freev.push_back(j); break;
        case Piece::Interior: freev.push_back(j); break;
      }
    }
    const Index nf = static_cast<Index>(freev.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + m, nf + m);
    Vector r(nf + m);
    Vector grad_fixed = d.q * x;  // x holds only the fixed part here
    for (Index a = 0; a < nf; ++a) {
      for (Index b = 0; b < nf; ++b) kkt(a, b) = d.q(freev[a], freev[b]);
      for (Index i = 0; i < m; ++i) {
        kkt(nf + i, a) = d.b(i, freev[a]);
        kkt(a, nf + i) = d.b(i, freev[a]);
      }
      r[a] = -(d.c[freev[a]] + slope[freev[a]] + grad_fixed[freev[a]]);
    }
    r.tail(m) = d.rhs - d.b * x;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    Vector sol = cod.solve(r);
    bool ok = (kkt * sol - r).norm() <= tol * (1.0 + r.norm());
    if (ok) {
      for (Index a = 0; a < nf; ++a) x[freev[a]] = sol[a];
      Vector lambda = -sol.tail(m);
      ok = kkt_check(d, x, lambda, tol, res);
      if (ok) {
        res.multipliers = lambda;
        res.x = split_blocks(p, x);
        res.objective = objective(p, res.x);
        return res;
      }
    }
    // Odometer increment.
    Index j = 0;
    while (j < n) {
      if (++pick[j] < options[j].size()) break;
      pick[j] = 0;
      ++j;
    }
    if (j == n) break;
  }
  throw OracleError("oracle: no cell satisfied the KKT conditions (infeasible or degenerate)");
}

}  // namespace bapqp

#endif  // BAPQP_ORACLE_HPP
