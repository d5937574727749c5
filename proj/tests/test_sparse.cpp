#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <bapqp/generators.hpp>
#include <bapqp/sparse.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

using namespace bapqp;
using bapqp::test::random_dense;
using bapqp::test::vec;

namespace {

SparseMatrix to_sparse(const Eigen::MatrixXd& m) { return m.sparseView(); }

// Reduced-free incidence of the path 0 -> 1 -> 2.
SparseMatrix path_incidence() {
  GraphSpec g;
  g.nodes = 3;
  g.tails = {0, 1};
  g.heads = {1, 2};
  return incidence(g);
}

Eigen::MatrixXd path_laplacian() {
  Eigen::MatrixXd l(3, 3);
  l << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  return l;
}

}  // namespace

TEST_CASE("spmv on identity and a shift matrix") {
  CHECK(spmv(sparse_identity(3), vec({1, 2, 3})) == vec({1, 2, 3}));
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 0, 0;
  SparseMatrix s = to_sparse(m);
  CHECK(spmv(s, vec({5, 7})) == vec({7, 0}));
  CHECK(spmv(s, vec({5, 7}), true) == vec({0, 5}));
}

TEST_CASE("spmv matches a dense product") {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd m = random_dense(5, 4, rng, 0.6);
  Vector v = random_dense(4, 1, rng);
  Vector w = random_dense(5, 1, rng);
  CHECK((spmv(to_sparse(m), v) - m * v).norm() <= 1e-14 * (1 + (m * v).norm()));
  CHECK((spmv(to_sparse(m), w, true) - m.transpose() * w).norm() <=
        1e-14 * (1 + (m.transpose() * w).norm()));
}

TEST_CASE("form_normal gives the path Laplacian and is exactly symmetric") {
  SparseMatrix lap = form_normal(path_incidence(), NormalMode::MMt);
  CHECK((Eigen::MatrixXd(lap) - path_laplacian()).norm() == 0.0);
  CHECK((Eigen::MatrixXd(form_normal(sparse_identity(4), NormalMode::MMt)) -
         Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);

  std::mt19937_64 rng(5);
  Eigen::MatrixXd m = random_dense(4, 6, rng, 0.7);
  Eigen::MatrixXd mmt = Eigen::MatrixXd(form_normal(to_sparse(m), NormalMode::MMt));
  Eigen::MatrixXd mtm = Eigen::MatrixXd(form_normal(to_sparse(m), NormalMode::MtM));
  CHECK((mmt - m * m.transpose()).norm() <= 1e-14 * (1 + mmt.norm()));
  CHECK((mtm - m.transpose() * m).norm() <= 1e-14 * (1 + mtm.norm()));
  CHECK((mmt - mmt.transpose()).norm() == 0.0);
}

TEST_CASE("cholesky solves") {
  CHECK((cholesky(sparse_identity(2, 4.0)).solve(vec({8, 4})) - vec({2, 1})).norm() <= 1e-15);

  SparseMatrix l = to_sparse(path_laplacian()) + sparse_identity(3, 1e-8);
  Vector r = vec({1, -1, 0});
  Vector x = cholesky(l).solve(r);
  CHECK((Eigen::MatrixXd(l) * x - r).norm() <= 1e-6);
  Vector dense = Eigen::MatrixXd(l).ldlt().solve(r);
  CHECK((x - dense).norm() <= 1e-6 * (1 + dense.norm()));
}

TEST_CASE("cholesky rejects a zero row") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  m(1, 1) = 0.0;
  CHECK_THROWS_AS(cholesky(to_sparse(m)), NotPositiveDefinite);
}

TEST_CASE("pcg on identity, diagonal and Laplacian operators") {
  PcgResult id = pcg(as_operator(sparse_identity(4)), vec({1, 2, 3, 4}), 1e-12, 10);
  CHECK(id.converged);
  CHECK(id.iterations == 1);
  CHECK((id.x - vec({1, 2, 3, 4})).norm() <= 1e-14);

  Vector d(10);
  for (Index j = 0; j < 10; ++j) d[j] = static_cast<double>(j + 1);
  SparseMatrix dm(10, 10);
  for (Index j = 0; j < 10; ++j) dm.insert(j, j) = d[j];
  PcgResult dr = pcg(as_operator(dm), Vector::Ones(10), 1e-10, 100);
  CHECK((dr.x - d.cwiseInverse()).cwiseAbs().maxCoeff() <= 1e-9);

  SparseMatrix l = to_sparse(path_laplacian()) + sparse_identity(3, 1e-6);
  Vector r = vec({1, -1, 0});
  PcgResult lr = pcg(as_operator(l), r, 1e-14, 100, jacobi_preconditioner(Vector(l.diagonal())));
  CHECK((lr.x - cholesky(l).solve(r)).norm() <= 1e-6 * (1 + lr.x.norm()));
}

TEST_CASE("spectral norm estimates") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  CHECK(spectral_norm(as_operator(to_sparse(d))) == doctest::Approx(3.0).epsilon(0.01));
  CHECK(spectral_norm(as_operator(SparseMatrix(3, 3))) == 0.0);

  std::mt19937_64 rng(9);
  Eigen::MatrixXd m = random_dense(6, 6, rng);
  const double exact = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  CHECK(std::abs(spectral_norm(as_operator(to_sparse(m))) - exact) <= 0.01 * exact);
}
