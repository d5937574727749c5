#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <bapqp/model.hpp>

#include <random>

using namespace bapqp;
using bapqp::test::make_block;
using bapqp::test::vec;

namespace {

BlockAngularProblem two_block(Index a1_rows = 2) {
  BlockAngularProblem p;
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(2, 3)));
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(1, 3);
  Vector b = vec({1.0});
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(a1_rows, 3), &d, &b));
  p.b0 = Vector::Zero(2);
  return p;
}

}  // namespace

TEST_CASE("validate accepts conformal dimensions") {
  CHECK(validate(two_block()).empty());
}

TEST_CASE("validate reports a linking row mismatch") {
  auto rep = validate(two_block(3));
  REQUIRE(rep.size() == 1);
  CHECK(rep[0].block == 1);
  CHECK(rep[0].message == "A_1 row count 3 ≠ 2");
  CHECK_THROWS_AS(require_valid(two_block(3)), ValidationError);
}

TEST_CASE("validate reports crossed box bounds") {
  BlockAngularProblem p;
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(1, 1)));
  p.blocks[0].cone = Cone::box(vec({1.0}), vec({0.0}));
  p.b0 = vec({0.0});
  auto rep = validate(p);
  REQUIRE(rep.size() == 1);
  CHECK(rep[0].message == "box bounds crossed at index 0");
}

TEST_CASE("validate rejects an indefinite quadratic term") {
  BlockAngularProblem p;
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(1, 2)));
  Eigen::MatrixXd q(2, 2);
  q << 1, 2, 2, 1;
  p.blocks[0].q = QuadTerm::sparse(SparseMatrix(q.sparseView()));
  p.b0 = vec({0.0});
  auto rep = validate(p);
  REQUIRE(rep.size() == 1);
  CHECK(rep[0].message == "Q_0 not positive semidefinite");
}

TEST_CASE("split and concat are inverse") {
  BlockAngularProblem p;
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(1, 2)));
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(1, 1)));
  p.b0 = vec({0.0});
  BlockVector x = split_blocks(p, vec({1, 2, 3}));
  REQUIRE(x.size() == 2);
  CHECK(x[0] == vec({1, 2}));
  CHECK(x[1] == vec({3}));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Vector flat(3);
  for (Index j = 0; j < 3; ++j) flat[j] = g(rng);
  Vector back = concat_blocks(split_blocks(p, flat));
  CHECK(back == flat);
}

TEST_CASE("empty blocks give zero-length segments") {
  std::vector<Index> sizes{2, 0, 1};
  BlockVector x = split_blocks(std::span<const Index>(sizes), vec({1, 2, 3}));
  CHECK(x[1].size() == 0);
  CHECK(x[2] == vec({3}));
}

TEST_CASE("objective values") {
  BlockAngularProblem p;
  p.blocks.push_back(make_block(Eigen::MatrixXd::Ones(1, 2)));
  p.blocks[0].q = QuadTerm::diagonal(Vector::Ones(2));
  p.b0 = vec({0.0});
  CHECK(objective(p, BlockVector(std::vector<Vector>{vec({1, 1})})) == doctest::Approx(1.0));

  BlockAngularProblem k;
  k.blocks.push_back(make_block(Eigen::MatrixXd::Ones(1, 1)));
  k.blocks[0].theta = SeparableFunction::kleinrock(vec({2.0}));
  k.b0 = vec({0.0});
  CHECK(objective(k, BlockVector(std::vector<Vector>{vec({1.0})})) == doctest::Approx(1.0));
  CHECK(std::isinf(objective(k, BlockVector(std::vector<Vector>{vec({2.0})}))));
}

TEST_CASE("constraint residual stacks linking and local rows") {
  BlockAngularProblem p = two_block();
  BlockVector x(std::vector<Vector>{vec({1, 0, 0}), vec({0, 1, 1})});
  ConstraintResidual r = constraint_residual(p, x);
  CHECK(r.linking == vec({3, 3}));
  REQUIRE(r.local.size() == 2);
  CHECK(r.local[1] == vec({1}));
}
