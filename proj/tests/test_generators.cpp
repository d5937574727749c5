#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <bapqp/generators.hpp>
#include <bapqp/problem_io.hpp>
#include <bapqp/sgs_admm.hpp>

#include <Eigen/Eigenvalues>

using namespace bapqp;
using namespace bapqp::test;

namespace {

void check_witness(const BlockAngularProblem& p) {
  REQUIRE(p.meta.witness.has_value());
  const BlockVector& w = *p.meta.witness;
  CHECK(constraint_residual(p, w).norm() <= 1e-10 * (1.0 + rhs_norm(p)));
  for (std::size_t i = 0; i < p.num_blocks(); ++i)
    CHECK((project_cone(p.blocks[i].cone, w[i]) - w[i]).norm() == 0.0);
  CHECK(std::isfinite(objective(p, w)));
  CHECK(validate(p).empty());
}

GraphSpec two_parallel_arcs(double cap_first, double cap_second) {
  GraphSpec g;
  g.nodes = 2;
  g.tails = {0, 0};
  g.heads = {1, 1};
  g.cap = vec({cap_first, cap_second});
  g.freeflow = vec({1.0, 1.0});
  return g;
}

}  // namespace

TEST_CASE("node-arc incidence of a three-node path") {
  GraphSpec g;
  g.nodes = 3;
  g.tails = {0, 1};
  g.heads = {1, 2};
  Eigen::MatrixXd full = Eigen::MatrixXd(incidence(g));
  Eigen::MatrixXd expect(3, 2);
  expect << 1, 0, -1, 1, 0, -1;
  CHECK((full - expect).norm() == 0.0);
  CHECK(incidence(g, true).rows() == 2);
}

TEST_CASE("grid graph arc count") {
  GraphSpec g = grid_graph(3, 4);
  CHECK(g.nodes == 12);
  CHECK(g.arcs() == 2 * (3 * 3 + 2 * 4));
}

TEST_CASE("witness points are feasible for every family") {
  for (McfObjective obj : {McfObjective::Linear, McfObjective::Quad, McfObjective::Kleinrock,
                           McfObjective::Bpr}) {
    McfOptions opt;
    opt.objective = obj;
    CAPTURE(to_string(obj));
    check_witness(gen_mcf_random(12, 10, 4, opt, 1));
    check_witness(gen_mcf_grid(3, 3, 3, opt, 2));
  }
  check_witness(gen_random(4, 6, 3, RandomKind::T1, 3));
  check_witness(gen_random(4, 6, 3, RandomKind::T2, 3));
  check_witness(gen_cta(3, 4, 2, 5));
}

TEST_CASE("linear flow on two parallel arcs takes the cheaper arc") {
  McfOptions opt;
  BlockAngularProblem p = gen_mcf(two_parallel_arcs(10, 10), {{0, 1, 3.0}}, opt, 1);
  const Vector& c = p.blocks[1].c;
  const double best = 3.0 * c.minCoeff();
  SgsAdmmParams prm;
  prm.tol = 1e-10;
  SolveOutput out = sgs_admm_solve(p, prm);
  CHECK(out.report.status == SolveStatus::Converged);
  CHECK(out.report.final.primal_obj == doctest::Approx(best).epsilon(1e-7));
}

TEST_CASE("Kleinrock flow on two parallel arcs splits by the square root rule") {
  // Caps 9 and 4 with demand 6: 3 / (9 - f) = 2 / (4 - (6 - f)) gives f = 4.8,
  // objective 4.8 / 4.2 + 1.2 / 2.8 = 11 / 7.
  McfOptions opt;
  opt.objective = McfObjective::Kleinrock;
  BlockAngularProblem p = gen_mcf(two_parallel_arcs(9, 4), {{0, 1, 6.0}}, opt, 1);
  SgsAdmmParams prm;
  prm.tol = 1e-10;
  SolveOutput out = sgs_admm_solve(p, prm);
  CHECK(out.report.status == SolveStatus::Converged);
  CHECK(out.iterate.x[0][0] == doctest::Approx(4.8).epsilon(1e-6));
  CHECK(out.iterate.x[0][1] == doctest::Approx(1.2).epsilon(1e-6));
  CHECK(out.report.final.primal_obj == doctest::Approx(11.0 / 7.0).epsilon(1e-8));
}

TEST_CASE("multicommodity structure") {
  McfOptions opt;
  opt.objective = McfObjective::Quad;
  BlockAngularProblem p = gen_mcf_random(7, 5, 3, opt, 9);
  REQUIRE(p.num_blocks() == 4);
  const Index n = p.blocks[0].n();
  CHECK(p.m0() == n);
  for (const auto& blk : p.blocks) {
    REQUIRE(blk.q.kind == QuadTerm::Kind::Diagonal);
    CHECK((blk.q.diag.array() == 0.1).all());
  }
  for (std::size_t k = 1; k < p.num_blocks(); ++k) {
    CHECK(p.blocks[k].m() == 6);
    CHECK(p.blocks[k].a == p.blocks[1].a);
    CHECK(p.blocks[k].d == p.blocks[1].d);
  }
  CHECK_THROWS_AS(gen_mcf(two_parallel_arcs(1, 1), {{0, 1, 5.0}}, McfOptions{}, 1), GeneratorError);
  CHECK_THROWS_AS(gen_mcf(two_parallel_arcs(9, 9), {{0, 0, 1.0}}, McfOptions{}, 1), GeneratorError);
}

TEST_CASE("generators are deterministic in the seed") {
  McfOptions opt;
  opt.objective = McfObjective::Bpr;
  CHECK(problems_identical(gen_mcf_random(9, 6, 3, opt, 4), gen_mcf_random(9, 6, 3, opt, 4)));
  CHECK_FALSE(problems_identical(gen_mcf_random(9, 6, 3, opt, 4), gen_mcf_random(9, 6, 3, opt, 5)));
  CHECK(problem_to_string(gen_random(3, 5, 2, RandomKind::T2, 8)) ==
        problem_to_string(gen_random(3, 5, 2, RandomKind::T2, 8)));
  CHECK(problems_identical(gen_cta(3, 3, 2, 1), gen_cta(3, 3, 2, 1)));
}

TEST_CASE("random QP quadratic terms are positive semidefinite") {
  BlockAngularProblem p = gen_random(3, 8, 3, RandomKind::T2, 12);
  for (const auto& blk : p.blocks) {
    REQUIRE(blk.q.kind == QuadTerm::Kind::Sparse);
    Eigen::MatrixXd q = Eigen::MatrixXd(blk.q.to_sparse());
    CHECK((q - q.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
  BlockAngularProblem t1 = gen_random(3, 8, 3, RandomKind::T1, 12);
  for (const auto& blk : t1.blocks) CHECK(blk.q.diag.minCoeff() >= 0.0);
  CHECK_THROWS_AS(gen_random(5, 4, 1, RandomKind::T1, 1), GeneratorError);
}

TEST_CASE("tabular adjustment structure") {
  BlockAngularProblem p = gen_cta(2, 2, 3, 1);
  REQUIRE(p.num_blocks() == 4);
  for (std::size_t k = 1; k < p.num_blocks(); ++k) {
    CHECK(p.blocks[k].m() == 3);  // 2 row sums + 2 column sums, one redundant row dropped
    CHECK(p.blocks[k].n() == 4);
  }
  for (const auto& blk : p.blocks) {
    REQUIRE(blk.q.kind == QuadTerm::Kind::Diagonal);
    CHECK((blk.q.diag.array() == 1.0).all());
  }
  Eigen::MatrixXd d = Eigen::MatrixXd(*p.blocks[1].d);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(d);
  CHECK(lu.rank() == 3);
}
