#ifndef BAPQP_CLI_HPP
#define BAPQP_CLI_HPP

#include <bapqp/generators.hpp>
#include <bapqp/oracle.hpp>
#include <bapqp/palm.hpp>
#include <bapqp/problem_io.hpp>
#include <bapqp/report.hpp>
#include <bapqp/sgs_admm.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace bapqp {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitMaxIter = 2, kExitInput = 3 };

/// Solver-independent knobs; unset values fall back to each solver's default.
struct SolverOptions {
  std::string solver = "sgs-admm";
  double tol = 1e-5;
  std::optional<double> tau;
  std::optional<double> sigma;
  std::optional<long> max_iter;
  int threads = 1;
  std::string linear_solver = "direct";
};

struct SolverRun {
  PrimalDualIterate iterate;
  SolveReport report;
};

inline const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names{"sgs-admm", "spalm", "spalm-b", "dqa", "iapg"};
  return names;
}

inline PalmVariant palm_variant(const std::string& name) {
  if (name == "spalm") return PalmVariant::Spalm;
  if (name == "spalm-b") return PalmVariant::SpalmB;
  if (name == "dqa") return PalmVariant::Dqa;
  if (name == "iapg") return PalmVariant::Iapg;
  throw ParameterError("unknown solver '" + name + "'");
}

inline SolverRun run_solver(const BlockAngularProblem& p, const SolverOptions& o) {
  if (o.solver == "sgs-admm") {
    SgsAdmmParams prm;
    prm.tol = o.tol;
    prm.threads = o.threads;
    if (o.tau) prm.tau = *o.tau;
    if (o.sigma) prm.sigma0 = *o.sigma;
    if (o.max_iter) prm.max_iter = *o.max_iter;
    if (o.linear_solver == "pcg") prm.linear_solver = LinearSolverKind::Pcg;
    else if (o.linear_solver != "direct") throw ParameterError("unknown linear solver '" + o.linear_solver + "'");
    SolveOutput out = sgs_admm_solve(p, prm);
    return {std::move(out.iterate), std::move(out.report)};
  }
  PalmParams prm;
  prm.variant = palm_variant(o.solver);
  prm.tol = o.tol;
  prm.threads = o.threads;
  if (o.tau) prm.tau = *o.tau;
  if (o.sigma) prm.sigma = *o.sigma;
  if (o.max_iter) prm.max_outer = *o.max_iter;
  PalmOutput out = palm_solve(p, prm);
  return {std::move(out.iterate), std::move(out.report)};
}

inline int exit_code(const SolveReport& rep) {
  return rep.status == SolveStatus::Converged ? kExitOk : kExitMaxIter;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
  std::string family;
  std::uint64_t seed = 1;
  Index mi = 4, ni = 6, nblocks = 3;  // rand-t1 / rand-t2: m_i, n_i, N
  Index rows = 3, cols = 3;           // cta table, mcf grid
  Index nodes = 0, extra_arcs = 0;    // mcf random graph (nodes > 0 selects it)
  Index commodities = 3;
  std::string output;
};

inline const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names{"rand-t1",       "rand-t2", "cta",
                                              "mcf-linear",    "mcf-quad",
                                              "mcf-kleinrock", "mcf-bpr"};
  return names;
}

inline BlockAngularProblem generate(const GenOptions& g) {
  if (g.family == "rand-t1" || g.family == "rand-t2")
    return gen_random(g.mi, g.ni, g.nblocks, g.family == "rand-t1" ? RandomKind::T1 : RandomKind::T2,
                      g.seed);
  if (g.family == "cta") return gen_cta(g.rows, g.cols, g.nblocks, g.seed);
  McfOptions mo;
  if (g.family == "mcf-linear") mo.objective = McfObjective::Linear;
  else if (g.family == "mcf-quad") mo.objective = McfObjective::Quad;
  else if (g.family == "mcf-kleinrock") mo.objective = McfObjective::Kleinrock;
  else if (g.family == "mcf-bpr") mo.objective = McfObjective::Bpr;
  else throw ParameterError("unknown family '" + g.family + "'");
  if (g.nodes > 0) return gen_mcf_random(g.nodes, g.extra_arcs, g.commodities, mo, g.seed);
  return gen_mcf_grid(g.rows, g.cols, g.commodities, mo, g.seed);
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckOutcome {
  bool solver_ok = false;
  bool oracle_ok = false;
  bool certificate_ok = false;
  std::vector<std::string> lines;
};

/// Solve + oracle comparison + Lyapunov certificate of a tau = 1 sPALM run.
inline CheckOutcome check_problem(const BlockAngularProblem& p, const SolverOptions& o,
                                  long certificate_iterations = 50) {
  CheckOutcome c;
  SolverOptions tight = o;
  tight.tol = std::min(o.tol, 1e-7);
  SolverRun run = run_solver(p, tight);
  c.solver_ok = run.report.status == SolveStatus::Converged;
  c.lines.push_back(o.solver + ": " + to_string(run.report.status) + " after " +
                    std::to_string(run.report.iterations) + " iterations, eta " +
                    format_real(run.report.final.eta) + ", objective " +
                    format_real(run.report.final.primal_obj));
  OracleResult orc;
  try {
    orc = oracle_solve(p);
  } catch (const OracleError& e) {
    c.lines.push_back(std::string("oracle: unavailable (") + e.what() + ")");
    return c;
  }
  const double rel = std::abs(orc.objective - run.report.final.primal_obj) / (1.0 + std::abs(orc.objective));
  const double dx = (run.iterate.x - orc.x).max_abs() / (1.0 + orc.x.max_abs());
  c.oracle_ok = rel <= 1e-5 && dx <= 1e-4;
  c.lines.push_back("oracle: objective " + format_real(orc.objective) + ", relative gap " +
                    format_real(rel) + ", scaled max |x - x*| " + format_real(dx) + " -> " +
                    (c.oracle_ok ? "agree" : "DISAGREE"));

  PalmParams prm;
  prm.variant = PalmVariant::Spalm;
  prm.tau = 1.0;
  prm.tol = 0.0;
  prm.fixed_inner_tol = 1e-10;
  prm.max_outer = certificate_iterations;
  prm.record_trace = true;
  prm.check_every_outer = false;
  PalmOutput trace = palm_solve(p, prm);
  LyapunovCertificate cert = check_lyapunov(p, trace.majorizer, prm.sigma, prm.tau, trace.trace,
                                            orc.x, Vector(orc.multipliers.head(p.m0())));
  c.certificate_ok = cert.passed;
  c.lines.push_back("lyapunov certificate (" + std::to_string(cert.slack.size()) +
                    " steps): worst scaled slack " + format_real(cert.worst_scaled_slack) + " -> " +
                    (cert.passed ? "nonincreasing" : "VIOLATED") +
                    "; full descent bound worst slack " + format_real(cert.worst_scaled_descent));
  return c;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

inline std::vector<std::string> collect_problem_files(const std::vector<std::string>& inputs) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".bap") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw Error("no such file or directory: '" + in + "'");
    }
  }
  if (files.empty()) throw Error("no problem files (*.bap) found");
  return files;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Solvers for block-angular convex composite quadratic programs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "bapqp 1.0");

  auto add_solver_flags = [](CLI::App* sub, SolverOptions& o) {
    sub->add_option("--tol", o.tol, "Stop when the relative KKT residual eta <= tol")->capture_default_str();
    sub->add_option("--tau", o.tau, "Dual step length");
    sub->add_option("--sigma", o.sigma, "Penalty parameter (initial value for sgs-admm)");
    sub->add_option("--max-iter", o.max_iter, "Iteration limit (outer iterations for PALM solvers)");
    sub->add_option("--threads", o.threads, "Worker threads for block-parallel work")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--linear-solver", o.linear_solver, "sgs-admm linear systems: direct or pcg")
        ->check(CLI::IsMember({"direct", "pcg"}))->capture_default_str();
  };

  // gen
  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a problem file");
  gen_cmd->add_option("--family", gen.family, "Instance family")
      ->required()->check(CLI::IsMember(family_names()));
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--mi", gen.mi, "rand-*: rows of each A_i / D_i")->capture_default_str();
  gen_cmd->add_option("--ni", gen.ni, "rand-*: columns per block")->capture_default_str();
  gen_cmd->add_option("--N", gen.nblocks, "rand-*, cta: number of blocks after block 0")->capture_default_str();
  gen_cmd->add_option("--rows", gen.rows, "cta table rows / mcf grid rows")->capture_default_str();
  gen_cmd->add_option("--cols", gen.cols, "cta table columns / mcf grid columns")->capture_default_str();
  gen_cmd->add_option("--nodes", gen.nodes, "mcf: random graph with this many nodes instead of a grid");
  gen_cmd->add_option("--extra-arcs", gen.extra_arcs, "mcf random graph: arcs beyond the spanning tree");
  gen_cmd->add_option("--commodities", gen.commodities, "mcf: number of commodities")->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.output, "Output file (stdout when omitted)");

  // solve
  std::string solve_file;
  SolverOptions solve_opt;
  std::vector<std::string> report_paths;
  bool quiet = false;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve a problem file");
  solve_cmd->add_option("problem", solve_file, "Problem file")->required();
  solve_cmd->add_option("--solver", solve_opt.solver, "Algorithm")
      ->check(CLI::IsMember(solver_names()))->capture_default_str();
  add_solver_flags(solve_cmd, solve_opt);
  solve_cmd->add_option("--report", report_paths, "Report file(s): .json or .csv");
  solve_cmd->add_flag("-q,--quiet", quiet, "Print only the summary line");

  // bench
  std::vector<std::string> bench_inputs;
  std::vector<std::string> bench_solvers{"sgs-admm"};
  SolverOptions bench_opt;
  std::string bench_md, bench_csv_path;
  int jobs = 1;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Run solvers over problem files and tabulate");
  bench_cmd->add_option("inputs", bench_inputs, "Problem files or directories of *.bap files")->required();
  bench_cmd->add_option("--solvers", bench_solvers, "Solvers to run")
      ->check(CLI::IsMember(solver_names()))->delimiter(',');
  add_solver_flags(bench_cmd, bench_opt);
  bench_cmd->add_option("--markdown", bench_md, "Write the markdown table here (also printed)");
  bench_cmd->add_option("--csv", bench_csv_path, "Write the CSV table here");
  bench_cmd->add_option("--jobs", jobs, "Concurrent solves")->check(CLI::PositiveNumber)->capture_default_str();

  // check
  std::string check_file;
  SolverOptions check_opt;
  long cert_iters = 50;
  CLI::App* check_cmd = app.add_subcommand("check", "Solve, compare with the oracle and certify a sPALM run");
  check_cmd->add_option("problem", check_file, "Problem file")->required();
  check_cmd->add_option("--solver", check_opt.solver, "Algorithm")
      ->check(CLI::IsMember(solver_names()))->capture_default_str();
  add_solver_flags(check_cmd, check_opt);
  check_cmd->add_option("--certificate-iterations", cert_iters, "sPALM steps in the certificate")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*gen_cmd) {
      BlockAngularProblem p = generate(gen);
      if (gen.output.empty()) write_problem(p, out);
      else write_problem(p, gen.output);
      return kExitOk;
    }

    if (*solve_cmd) {
      BlockAngularProblem p = read_problem(solve_file);
      require_valid(p);
      SolverRun run = run_solver(p, solve_opt);
      const SolveReport& rep = run.report;
      if (!quiet) {
        for (const auto& h : rep.history)
          out << "iter " << h.iteration << "  eta " << detail::sci(h.res.eta) << "  pobj "
              << format_real(h.res.primal_obj) << "  sigma " << format_real(h.sigma) << '\n';
      }
      out << p.meta.name << ": " << rep.solver << ' ' << to_string(rep.status) << " iterations "
          << rep.iterations << " eta " << detail::sci(rep.final.eta) << " objective "
          << format_real(rep.final.primal_obj) << " time "
          << detail::fixed(rep.setup_seconds + rep.solve_seconds, 3) << "s\n";
      for (const auto& path : report_paths) write_report(path, p, rep);
      return exit_code(rep);
    }

    if (*bench_cmd) {
      const std::vector<std::string> files = collect_problem_files(bench_inputs);
      std::vector<BlockAngularProblem> problems;
      for (const auto& f : files) {
        problems.push_back(read_problem(f));
        require_valid(problems.back());
      }
      struct Task {
        std::size_t problem;
        std::string solver;
      };
      std::vector<Task> tasks;
      for (std::size_t i = 0; i < problems.size(); ++i)
        for (const auto& s : bench_solvers) tasks.push_back({i, s});
      std::vector<BenchRow> rows(tasks.size());
      std::vector<std::string> failures(tasks.size());
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
          try {
            SolverOptions o = bench_opt;
            o.solver = tasks[t].solver;
            SolverRun run = run_solver(problems[tasks[t].problem], o);
            rows[t] = bench_row(problems[tasks[t].problem], run.report);
          } catch (const std::exception& e) {
            failures[t] = e.what();
            rows[t].data = problems[tasks[t].problem].meta.name;
            rows[t].solver = tasks[t].solver;
            rows[t].status = "error";
          }
        }
      };
      std::vector<std::thread> pool;
      for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
      worker();
      for (auto& th : pool) th.join();
      const std::string md = bench_markdown(rows);
      out << md;
      if (!bench_md.empty()) {
        std::ofstream os(bench_md);
        os << md;
      }
      if (!bench_csv_path.empty()) {
        std::ofstream os(bench_csv_path);
        os << bench_csv(rows);
      }
      int rc = kExitOk;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (!failures[t].empty()) {
          err << rows[t].data << " / " << rows[t].solver << ": " << failures[t] << '\n';
          rc = kExitFailure;
        } else if (rows[t].status != to_string(SolveStatus::Converged) && rc == kExitOk) {
          rc = kExitMaxIter;
        }
      }
      return rc;
    }

    if (*check_cmd) {
      BlockAngularProblem p = read_problem(check_file);
      require_valid(p);
      CheckOutcome c = check_problem(p, check_opt, cert_iters);
      for (const auto& l : c.lines) out << l << '\n';
      const bool ok = c.solver_ok && c.oracle_ok && c.certificate_ok;
      out << (ok ? "check passed" : "check FAILED") << '\n';
      return ok ? kExitOk : kExitFailure;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GeneratorError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    // Unreadable files surface as plain Error from the I/O layer.
    err << "error: " << e.what() << '\n';
    return dynamic_cast<const Error*>(&e) ? kExitInput : kExitFailure;
  }
  return kExitFailure;
}

}  // namespace bapqp

#endif  // BAPQP_CLI_HPP
