#ifndef BAPQP_REPORT_HPP
#define BAPQP_REPORT_HPP

#include <bapqp/model.hpp>
#include <bapqp/residuals.hpp>
#include <bapqp/sgs_admm.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace bapqp {

using Json = nlohmann::ordered_json;

namespace detail {

// JSON has no infinity or NaN; those values are emitted as strings.
inline Json real_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

}  // namespace detail

inline Json residuals_json(const Residuals& r) {
  return Json{{"eta", detail::real_json(r.eta)},
              {"eta_P", detail::real_json(r.eta_P)},
              {"eta_D", detail::real_json(r.eta_D)},
              {"eta_Q", detail::real_json(r.eta_Q)},
              {"eta_K", detail::real_json(r.eta_K)},
              {"eta_S", detail::real_json(r.eta_S)},
              {"primal_obj", detail::real_json(r.primal_obj)},
              {"dual_obj", detail::real_json(r.dual_obj)}};
}

/// Machine-readable solve report. The trace arrays (iteration, eta,
/// objective, sigma, seconds) all have one entry per residual check.
inline Json report_json(const BlockAngularProblem& p, const SolveReport& rep) {
  Json trace{{"iteration", Json::array()}, {"eta", Json::array()}, {"primal_obj", Json::array()},
             {"sigma", Json::array()}, {"seconds", Json::array()}};
  for (const auto& h : rep.history) {
    trace["iteration"].push_back(h.iteration);
    trace["eta"].push_back(detail::real_json(h.res.eta));
    trace["primal_obj"].push_back(detail::real_json(h.res.primal_obj));
    trace["sigma"].push_back(detail::real_json(h.sigma));
    trace["seconds"].push_back(detail::real_json(h.seconds));
  }
  return Json{{"format", "bapqp-report"},
              {"version", 1},
              {"problem",
               {{"name", p.meta.name},
                {"family", p.meta.family},
                {"seed", p.meta.seed},
                {"blocks", p.num_blocks()},
                {"variables", p.total_variables()},
                {"linking_rows", p.m0()},
                {"constraints", p.total_constraints()}}},
              {"solver", rep.solver},
              {"status", to_string(rep.status)},
              {"iterations", rep.iterations},
              {"inner_iterations", rep.inner_iterations},
              {"setup_seconds", rep.setup_seconds},
              {"solve_seconds", rep.solve_seconds},
              {"factorizations", rep.factorizations},
              {"sigma_changes", rep.sigma_changes},
              {"final", residuals_json(rep.final)},
              {"trace", std::move(trace)},
              {"notes", rep.notes}};
}

/// Residual trace as CSV, one row per residual check.
inline std::string report_csv(const SolveReport& rep) {
  std::ostringstream os;
  os << "iteration,sigma,seconds,eta,eta_P,eta_D,eta_Q,eta_K,eta_S,primal_obj,dual_obj\n";
  auto g = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& h : rep.history) {
    const Residuals& r = h.res;
    os << h.iteration << ',' << g(h.sigma) << ',' << g(h.seconds) << ',' << g(r.eta) << ','
       << g(r.eta_P) << ',' << g(r.eta_D) << ',' << g(r.eta_Q) << ',' << g(r.eta_K) << ','
       << g(r.eta_S) << ',' << g(r.primal_obj) << ',' << g(r.dual_obj) << '\n';
  }
  return os.str();
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Writes a JSON report, or a CSV trace when the path ends in ".csv".
inline void write_report(const std::string& path, const BlockAngularProblem& p,
                         const SolveReport& rep) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  if (ends_with(path, ".csv")) os << report_csv(rep);
  else os << report_json(p, rep).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Benchmark tables
// ---------------------------------------------------------------------------

struct BenchRow {
  std::string data;
  std::string solver;
  Index variables = 0;
  Index constraints = 0;
  std::string status;
  long iterations = 0;
  long inner_iterations = 0;
  double eta = 0.0;
  double objective = 0.0;
  double seconds = 0.0;
};

inline BenchRow bench_row(const BlockAngularProblem& p, const SolveReport& rep) {
  BenchRow r;
  r.data = p.meta.name;
  r.solver = rep.solver;
  r.variables = p.total_variables();
  r.constraints = p.total_constraints();
  r.status = to_string(rep.status);
  r.iterations = rep.iterations;
  r.inner_iterations = rep.inner_iterations;
  r.eta = rep.final.eta;
  r.objective = rep.final.primal_obj;
  r.seconds = rep.setup_seconds + rep.solve_seconds;
  return r;
}

inline std::string bench_markdown(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "| Data | n | m | Solver | Iter | Inner | eta | Objective | Status | Time(s) |\n";
  os << "|---|---:|---:|---|---:|---:|---:|---:|---|---:|\n";
  for (const auto& r : rows) {
    char obj[40];
    std::snprintf(obj, sizeof obj, "%.8e", r.objective);
    os << "| " << r.data << " | " << r.variables << " | " << r.constraints << " | " << r.solver
       << " | " << r.iterations << " | " << r.inner_iterations << " | " << detail::sci(r.eta)
       << " | " << obj << " | " << r.status << " | " << detail::fixed(r.seconds, 2) << " |\n";
  }
  return os.str();
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "Data,n,m,Solver,Iter,Inner,eta,Objective,Status,Time(s)\n";
  for (const auto& r : rows) {
    char obj[40];
    std::snprintf(obj, sizeof obj, "%.10e", r.objective);
    os << r.data << ',' << r.variables << ',' << r.constraints << ',' << r.solver << ','
       << r.iterations << ',' << r.inner_iterations << ',' << detail::sci(r.eta) << ',' << obj
       << ',' << r.status << ',' << detail::fixed(r.seconds, 3) << '\n';
  }
  return os.str();
}

}  // namespace bapqp

#endif  // BAPQP_REPORT_HPP
