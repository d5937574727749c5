#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <bapqp/cli.hpp>
#include <bapqp/problem_io.hpp>

#include <json.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bapqp;
using namespace bapqp::test;
namespace fs = std::filesystem;

namespace {

const char* const kHandLp = R"(bapqp-problem 1
# min x1 + 2 x2 subject to x1 + x2 = 1, x >= 0
name hand-lp
family custom
generator none
seed 0
blocks 1
vector b0 1
1
block 0
matrix A 1 2 2
1 1 1
1 2 1
matrix D none
quad zero 2
vector c 2
1 2
vector b 0
cone nonneg 2
theta zero 2
end block
witness none
end
)";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("bapqp-test-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bapqp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("every family round-trips through the text format bit for bit") {
  for (const auto& fam : family_names()) {
    CAPTURE(fam);
    GenOptions g;
    g.family = fam;
    g.seed = 21;
    BlockAngularProblem p = generate(g);
    const std::string text = problem_to_string(p);
    BlockAngularProblem q = problem_from_string(text);
    CHECK(problems_identical(p, q));
    CHECK(problem_to_string(q) == text);
  }
}

TEST_CASE("reals keep all digits and infinities survive") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(kInf) == "inf");
  CHECK(format_real(-kInf) == "-inf");
  BlockAngularProblem p = toy_lp();
  p.blocks[0].cone = Cone::box(vec({0.0, -kInf}), vec({kInf, 1.0 / 3.0}));
  BlockAngularProblem q = problem_from_string(problem_to_string(p));
  CHECK(q.blocks[0].cone.lower_at(1) == -kInf);
  CHECK(q.blocks[0].cone.upper_at(0) == kInf);
  CHECK(q.blocks[0].cone.upper_at(1) == 1.0 / 3.0);
}

TEST_CASE("malformed files are rejected with a location") {
  const std::string text = problem_to_string(toy_lp());
  SUBCASE("truncated") {
    const std::string cut = text.substr(0, text.find("vector c") + 12);
    try {
      problem_from_string(cut);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line") != std::string::npos);
      CHECK(msg.find("unexpected end of file") != std::string::npos);
    }
  }
  SUBCASE("future version") {
    std::string v7 = text;
    v7.replace(v7.find("bapqp-problem 1"), 15, "bapqp-problem 7");
    CHECK_THROWS_WITH_AS(problem_from_string(v7), doctest::Contains("unsupported format version 7"),
                         ParseError);
  }
  SUBCASE("bad magic") { CHECK_THROWS_AS(problem_from_string("hello 1\n"), ParseError); }
  SUBCASE("non-numeric value") {
    std::string bad = text;
    bad.replace(bad.find("1 2\nvector b"), 3, "1 x");
    CHECK_THROWS_AS(problem_from_string(bad), ParseError);
  }
}

TEST_CASE("a hand-written file solves to the known optimum") {
  BlockAngularProblem p = problem_from_string(kHandLp);
  CHECK(p.meta.name == "hand-lp");
  SolverOptions o;
  o.tol = 1e-9;
  for (const auto& s : solver_names()) {
    CAPTURE(s);
    o.solver = s;
    SolverRun run = run_solver(p, o);
    CHECK(run.report.status == SolveStatus::Converged);
    CHECK(run.report.final.primal_obj == doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("gen, solve and reports from the command line") {
  TempDir tmp;
  const std::string prob = tmp.file("small.bap");
  CliResult g = cli({"gen", "--family", "mcf-quad", "--rows", "3", "--cols", "3", "--commodities",
                     "2", "--seed", "4", "-o", prob});
  REQUIRE(g.code == kExitOk);
  CliResult again = cli({"gen", "--family", "mcf-quad", "--rows", "3", "--cols", "3",
                         "--commodities", "2", "--seed", "4"});
  CHECK(again.out == slurp(prob));

  const std::string json_path = tmp.file("r.json"), csv_path = tmp.file("r.csv");
  CliResult s = cli({"solve", prob, "--solver", "spalm", "--tol", "1e-6", "--report", json_path,
                     "--report", csv_path, "-q"});
  CHECK(s.code == kExitOk);
  CHECK(s.out.find("converged") != std::string::npos);
  auto j = nlohmann::json::parse(slurp(json_path));
  CHECK(j["format"] == "bapqp-report");
  CHECK(j["status"] == "converged");
  CHECK(j["final"]["eta"].get<double>() <= 1e-6);
  CHECK(j["trace"]["eta"].size() == j["trace"]["iteration"].size());
  CHECK(slurp(csv_path).rfind("iteration,sigma,seconds,eta", 0) == 0);

  CliResult capped = cli({"solve", prob, "--max-iter", "3", "-q"});
  CHECK(capped.code == kExitMaxIter);
}

TEST_CASE("command line input errors") {
  CHECK(cli({"solve", "/nonexistent/problem.bap"}).code == kExitInput);
  CHECK(cli({"gen", "--family", "nope"}).code == kExitInput);
  CHECK(cli({"solve"}).code == kExitInput);
  CHECK(cli({"frobnicate"}).code == kExitInput);
  TempDir tmp;
  const std::string bad = tmp.file("bad.bap");
  std::ofstream(bad) << "bapqp-problem 1\nname x\n";
  CliResult r = cli({"solve", bad});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("line") != std::string::npos);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("bench tabulates every problem and solver pair") {
  TempDir tmp;
  REQUIRE(cli({"gen", "--family", "rand-t1", "--mi", "2", "--ni", "4", "--N", "2", "-o",
               tmp.file("a.bap")}).code == kExitOk);
  REQUIRE(cli({"gen", "--family", "cta", "--rows", "2", "--cols", "3", "--N", "2", "-o",
               tmp.file("b.bap")}).code == kExitOk);
  const std::string md = tmp.file("t.md"), csv = tmp.file("t.csv");
  CliResult b = cli({"bench", tmp.path.string(), "--solvers", "sgs-admm,spalm,dqa", "--markdown",
                     md, "--csv", csv, "--jobs", "2"});
  CHECK(b.code == kExitOk);
  std::istringstream lines(slurp(md));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line))
    if (line.rfind("| ", 0) == 0 && line.find("| Data") != 0) ++rows;
  CHECK(rows == 6);
  CHECK(slurp(md) == b.out.substr(0, slurp(md).size()));
  CHECK(slurp(csv).rfind("Data,n,m,Solver", 0) == 0);
}

TEST_CASE("check agrees with the oracle on a small problem") {
  TempDir tmp;
  const std::string f = tmp.file("c.bap");
  std::ofstream(f) << kHandLp;
  CliResult c = cli({"check", f});
  CHECK(c.code == kExitOk);
  CHECK(c.out.find("agree") != std::string::npos);
  CHECK(c.out.find("nonincreasing") != std::string::npos);
}
