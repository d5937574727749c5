#ifndef BAPQP_TEST_SUPPORT_HPP
#define BAPQP_TEST_SUPPORT_HPP

#include <bapqp/model.hpp>
#include <bapqp/oracle.hpp>
#include <bapqp/prox.hpp>
#include <bapqp/residuals.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace bapqp::test {

inline std::shared_ptr<const SparseMatrix> sparse_ptr(const Eigen::MatrixXd& m) {
  return std::make_shared<const SparseMatrix>(m.sparseView());
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index j = 0;
  for (double x : v) out[j++] = x;
  return out;
}

inline Eigen::MatrixXd random_dense(Index rows, Index cols, std::mt19937_64& rng,
                                    double density = 1.0) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (u(rng) < density) m(i, j) = g(rng);
  return m;
}

/// A block with the given linking matrix and optional local rows; zero Q,
/// free cone and zero theta unless changed afterwards.
inline Block make_block(const Eigen::MatrixXd& a, const Eigen::MatrixXd* d = nullptr,
                        const Vector* b = nullptr) {
  Block blk;
  const Index n = a.cols();
  blk.a = sparse_ptr(a);
  if (d) {
    blk.d = sparse_ptr(*d);
    blk.b = *b;
  } else {
    blk.b = Vector(0);
  }
  blk.q = QuadTerm::zero(n);
  blk.c = Vector::Zero(n);
  blk.cone = Cone::free(n);
  blk.theta = SeparableFunction::zero(n);
  return blk;
}

/// min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0: optimum (1, 0), objective 1,
/// multiplier y0 = 1, cone multiplier z = c - A^T y0 = (0, 1).
inline BlockAngularProblem toy_lp() {
  BlockAngularProblem p;
  Eigen::MatrixXd a(1, 2);
  a << 1, 1;
  Block blk = make_block(a);
  blk.c = vec({1.0, 2.0});
  blk.cone = Cone::nonneg(2);
  p.blocks.push_back(blk);
  p.b0 = vec({1.0});
  p.meta.name = "toy-lp";
  return p;
}

// Golden-section minimization of a unimodal function on [lo, hi].
inline double golden(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters && b - a > 1e-15 * (1 + std::abs(a)); ++k) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// Bisection for an increasing function's root on [lo, hi].
inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Full primal-dual point assembled from an oracle solution: multipliers
/// are split into y0 and the local y_i, and the reduced gradient g = s + z
/// is divided between the separable term and the cone.
inline PrimalDualIterate oracle_iterate(const BlockAngularProblem& p, const OracleResult& o) {
  PrimalDualIterate u = PrimalDualIterate::zeros(p);
  u.x = o.x;
  u.y0 = o.multipliers.head(p.m0());
  Index row = p.m0(), col = 0;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    u.y[i] = o.multipliers.segment(row, blk.m());
    row += blk.m();
    for (Index j = 0; j < blk.n(); ++j) {
      const double g = o.reduced_gradient[col + j];
      auto [lo, hi] = derivative_interval(blk.theta, j, o.x[i][j]);
      const double sj = std::clamp(g, -hi, -lo);
      u.s[i][j] = sj;
      u.z[i][j] = g - sj;
    }
    u.q[i] = blk.q.apply(o.x[i]);
    col += blk.n();
  }
  return u;
}

}  // namespace bapqp::test

#endif
