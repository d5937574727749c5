#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <bapqp/generators.hpp>
#include <bapqp/oracle.hpp>
#include <bapqp/palm.hpp>

#include <Eigen/SVD>

using namespace bapqp;
using namespace bapqp::test;

namespace {

Block plain_block(Index n) {
  Block blk = make_block(Eigen::MatrixXd::Zero(0, n));
  return blk;
}

PalmParams tight(PalmVariant v, double tol = 1e-8) {
  PalmParams prm;
  prm.variant = v;
  prm.tol = tol;
  prm.max_outer = 20000;
  return prm;
}

}  // namespace

TEST_CASE("majorizers: blocks on disjoint rows need no proximal term") {
  BlockAngularProblem p;
  Eigen::MatrixXd a0(2, 2), a1(2, 1);
  a0 << 1, 2, 0, 0;
  a1 << 0, 3;
  p.blocks.push_back(make_block(a0));
  p.blocks.push_back(make_block(a1));
  p.b0 = vec({1, 1});
  Majorizer mj = build_majorizer(p, MajorizerKind::SpalmJ);
  CHECK(mj.beta[0] == 0.0);
  CHECK(mj.beta[1] == 0.0);
  CHECK(mj.chi == 1.0);
  CHECK(std::abs(majorizer_min_probe(p, mj, 20, 1)) <= 1e-12);
}

TEST_CASE("majorizers on a multicommodity flow") {
  McfOptions opt;
  BlockAngularProblem p = gen_mcf_random(6, 4, 3, opt, 5);
  const double n_comm = 3.0;
  Majorizer j = build_majorizer(p, MajorizerKind::SpalmJ);
  for (double b : j.beta) CHECK(b == doctest::Approx(n_comm * kSpectralSafety).epsilon(1e-5));
  Majorizer e = build_majorizer(p, MajorizerKind::DqaE);
  CHECK(e.coef == n_comm + 1.0);
  Majorizer chi = build_majorizer(p, MajorizerKind::DqaEChi);
  CHECK(chi.chi == n_comm + 1.0);
  for (const Majorizer* mj : {&j, &e, &chi}) CHECK(majorizer_min_probe(p, *mj, 50, 3) >= -1e-10);
}

TEST_CASE("majorizer of two random blocks brackets the exact coupling norm") {
  std::mt19937_64 rng(11);
  BlockAngularProblem p;
  Eigen::MatrixXd a0 = random_dense(4, 3, rng), a1 = random_dense(4, 5, rng);
  p.blocks.push_back(make_block(a0));
  p.blocks.push_back(make_block(a1));
  p.b0 = Vector::Zero(4);
  Majorizer mj = build_majorizer(p, MajorizerKind::SpalmJ);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a0.transpose() * a1);
  const double exact = svd.singularValues()[0];
  CHECK(mj.beta[0] >= exact * (1.0 - 1e-6));
  CHECK(mj.beta[0] <= exact * 1.0101);
  CHECK(mj.beta[0] == mj.beta[1]);
}

TEST_CASE("closed-form block subproblems") {
  Block blk = plain_block(2);
  const Vector g = vec({2, -4});
  SUBCASE("free") {
    BlockSubsolver s(blk, QuadTerm::diagonal(vec({2, 2})), 100);
    REQUIRE(s.closed_form());
    SubproblemResult r = s.solve(g, 1e-12);
    CHECK((r.x - vec({-1, 2})).norm() <= 1e-15);
  }
  SUBCASE("nonnegative") {
    blk.cone = Cone::nonneg(2);
    BlockSubsolver s(blk, QuadTerm::diagonal(vec({2, 2})), 100);
    SubproblemResult r = s.solve(g, 1e-12);
    CHECK((r.x - vec({0, 2})).norm() <= 1e-15);
    CHECK(r.z[0] == doctest::Approx(2.0));
  }
  SUBCASE("l1") {
    blk.theta = SeparableFunction::l1(2, 1.0);
    BlockSubsolver s(blk, QuadTerm::diagonal(vec({2, 2})), 100);
    SubproblemResult r = s.solve(g, 1e-12);
    CHECK((r.x - vec({-0.5, 1.5})).norm() <= 1e-14);
  }
  SUBCASE("box with a zero curvature coordinate") {
    blk.cone = Cone::box(vec({-1, -1}), vec({1, 1}));
    BlockSubsolver s(blk, QuadTerm::diagonal(vec({0, 2})), 100);
    SubproblemResult r = s.solve(g, 1e-12);
    CHECK((r.x - vec({-1, 1})).norm() <= 1e-15);
  }
}

TEST_CASE("block subproblem with local rows uses the inner solver") {
  Eigen::MatrixXd d(1, 2);
  d << 1, 1;
  Vector b = vec({0});
  Block blk = make_block(Eigen::MatrixXd::Zero(0, 2), &d, &b);
  BlockSubsolver s(blk, QuadTerm::diagonal(vec({2, 2})), 20000);
  REQUIRE_FALSE(s.closed_form());
  SubproblemResult r = s.solve(vec({2, -4}), 1e-10);
  CHECK((r.x - vec({-1.5, 1.5})).norm() <= 1e-8);
  CHECK(r.y[0] == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.d.norm() <= 1e-9);
}

TEST_CASE("every variant reaches the oracle objective") {
  BlockAngularProblem p = gen_random(2, 4, 2, RandomKind::T1, 3);
  OracleResult o = oracle_solve(p);
  for (PalmVariant v : {PalmVariant::Spalm, PalmVariant::SpalmB, PalmVariant::Dqa,
                        PalmVariant::Iapg}) {
    CAPTURE(to_string(v));
    PalmOutput out = palm_solve(p, tight(v));
    CHECK(out.report.status == SolveStatus::Converged);
    CHECK(out.report.final.primal_obj == doctest::Approx(o.objective).epsilon(1e-6));
    CHECK(out.recovery_residual.back() <= 1e-6);
  }
}

TEST_CASE("one DQA step with one inner step is one sPALM-b step") {
  BlockAngularProblem p = gen_random(3, 5, 3, RandomKind::T2, 4);
  PalmParams a = tight(PalmVariant::SpalmB), b = tight(PalmVariant::Dqa);
  for (PalmParams* prm : {&a, &b}) {
    prm->max_outer = 1;
    prm->inner_max = 1;
    prm->fixed_inner_tol = 1e-12;
    prm->record_trace = true;
  }
  PalmOutput oa = palm_solve(p, a), ob = palm_solve(p, b);
  CHECK((oa.trace.back().x - ob.trace.back().x).norm() <= 1e-12);
  CHECK((oa.trace.back().y0 - ob.trace.back().y0).norm() <= 1e-12);
}

TEST_CASE("IAPG without restart follows the classical momentum sequence") {
  double t = 1.0;
  t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
  CHECK(t == doctest::Approx(1.618034).epsilon(1e-6));
  BlockAngularProblem p = gen_random(2, 4, 2, RandomKind::T1, 8);
  PalmParams prm = tight(PalmVariant::Iapg, 1e-6);
  prm.iapg_restart = false;
  PalmOutput out = palm_solve(p, prm);
  CHECK(out.report.status == SolveStatus::Converged);
}

TEST_CASE("the Lyapunov certificate holds on a trace and detects a violation") {
  BlockAngularProblem p = gen_random(2, 4, 2, RandomKind::T1, 6);
  OracleResult o = oracle_solve(p);
  PalmParams prm = tight(PalmVariant::Spalm, 0.0);
  prm.tau = 1.0;
  prm.max_outer = 60;
  prm.fixed_inner_tol = 1e-11;
  prm.record_trace = true;
  PalmOutput out = palm_solve(p, prm);
  const Vector ybar = o.multipliers.head(p.m0());
  LyapunovCertificate c = check_lyapunov(p, out.majorizer, prm.sigma, prm.tau, out.trace, o.x, ybar);
  CHECK(c.passed);
  CHECK(c.lyapunov.size() == out.trace.size());

  std::vector<PalmTraceEntry> bad = out.trace;
  for (auto& seg : bad[5].x) seg.array() += 10.0;
  LyapunovCertificate cb = check_lyapunov(p, out.majorizer, prm.sigma, prm.tau, bad, o.x, ybar);
  CHECK_FALSE(cb.passed);
}

TEST_CASE("parameter validation") {
  BlockAngularProblem p = toy_lp();
  PalmParams prm;
  prm.tau = 2.0;
  CHECK_THROWS_AS(palm_solve(p, prm), ParameterError);
  prm = {};
  prm.inner_max = 0;
  CHECK_THROWS_AS(palm_solve(p, prm), ParameterError);
}
