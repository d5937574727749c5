#ifndef BAPQP_PROBLEM_IO_HPP
#define BAPQP_PROBLEM_IO_HPP

// Versioned text format for block-angular problems.
//
//   bapqp-problem 1
//   name <token>
//   family <token>
//   generator <token>
//   seed <u64>
//   blocks <count>
//   vector b0 <m0>
//     <values>
//   block <i>
//     matrix A <rows> <cols> <nnz>     followed by nnz lines "row col value" (1-based)
//     matrix A ref <block> <A|D>       reuse a matrix written earlier
//     matrix D none | matrix D ...     local rows (absent for block 0)
//     quad zero <n> | quad diagonal <n> <values> | quad sparse ... | quad ref <block>
//     vector c <n> <values>
//     vector b <m> <values>
//     cone free <n> | cone nonneg <n> | cone box <n> <lower values> <upper values>
//     theta zero <n> | theta l1 <n> <w> | theta kleinrock <n> <caps>
//     theta bpr <n> <B> <beta> <caps> <freeflow>
//   end block
//   witness none | witness <count> followed by one "vector x <n>" per block
//   end
//
// Reals use 17 significant digits, which round-trips binary64 exactly;
// infinities are written as inf / -inf. '#' starts a comment.

#include <bapqp/core.hpp>
#include <bapqp/model.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace bapqp {

inline constexpr int kProblemFormatVersion = 1;
inline constexpr const char* kProblemMagic = "bapqp-problem";

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

class ProblemWriter {
 public:
  explicit ProblemWriter(std::ostream& os) : os_(os) {}

  void vector(const std::string& label, const Vector& v) {
    os_ << "vector " << label << ' ' << v.size() << '\n';
    values(v);
  }

  void values(const Vector& v) {
    for (Index j = 0; j < v.size(); ++j) {
      os_ << format_real(v[j]);
      os_ << ((j + 1) % 6 == 0 || j + 1 == v.size() ? '\n' : ' ');
    }
  }

  void matrix(const std::string& label, std::size_t block,
              const std::shared_ptr<const SparseMatrix>& m) {
    os_ << "matrix " << label << ' ';
    if (!m) {
      os_ << "none\n";
      return;
    }
    auto found = seen_.find(m.get());
    if (found != seen_.end()) {
      os_ << "ref " << found->second.first << ' ' << found->second.second << '\n';
      return;
    }
    seen_[m.get()] = {block, label};
    triplets(*m);
  }

  void triplets(const SparseMatrix& m) {
    os_ << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (Index j = 0; j < m.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(m, j); it; ++it)
        os_ << it.row() + 1 << ' ' << j + 1 << ' ' << format_real(it.value()) << '\n';
  }

  void quad(std::size_t block, const QuadTerm& q) {
    switch (q.kind) {
      case QuadTerm::Kind::Zero: os_ << "quad zero " << q.dim << '\n'; return;
      case QuadTerm::Kind::Diagonal:
        os_ << "quad diagonal " << q.dim << '\n';
        values(q.diag);
        return;
      case QuadTerm::Kind::Sparse: {
        auto found = seen_q_.find(q.mat.get());
        if (found != seen_q_.end()) {
          os_ << "quad ref " << found->second << '\n';
          return;
        }
        seen_q_[q.mat.get()] = block;
        os_ << "quad sparse ";
        triplets(*q.mat);
        return;
      }
    }
  }

  void cone(const Cone& c) {
    switch (c.kind) {
      case Cone::Kind::Free: os_ << "cone free " << c.dim << '\n'; return;
      case Cone::Kind::NonNeg: os_ << "cone nonneg " << c.dim << '\n'; return;
      case Cone::Kind::Box:
        os_ << "cone box " << c.dim << '\n';
        values(c.lower);
        values(c.upper);
        return;
    }
  }

  void theta(const SeparableFunction& t) {
    switch (t.kind) {
      case SeparableFunction::Kind::Zero: os_ << "theta zero " << t.dim << '\n'; return;
      case SeparableFunction::Kind::L1:
        os_ << "theta l1 " << t.dim << ' ' << format_real(t.weight) << '\n';
        return;
      case SeparableFunction::Kind::Kleinrock:
        os_ << "theta kleinrock " << t.dim << '\n';
        values(t.cap);
        return;
      case SeparableFunction::Kind::BPR:
        os_ << "theta bpr " << t.dim << ' ' << format_real(t.bpr_b) << ' '
            << format_real(t.bpr_beta) << '\n';
        values(t.cap);
        values(t.freeflow);
        return;
    }
  }

 private:
  std::ostream& os_;
  std::map<const SparseMatrix*, std::pair<std::size_t, std::string>> seen_;
  std::map<const SparseMatrix*, std::size_t> seen_q_;
};

/// Whitespace tokenizer that remembers line numbers and the section being
/// read, so that errors point at the offending line and a truncated file
/// names what was left incomplete.
class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}

  void section(std::string s) { section_ = std::move(s); }

  bool at_end() {
    fill();
    return pos_ >= toks_.size();
  }

  std::string next() {
    fill();
    if (pos_ >= toks_.size())
      throw ParseError("unexpected end of file in section '" + section_ + "'", line_);
    last_line_ = toks_[pos_].second;
    return toks_[pos_++].first;
  }

  long line() const { return last_line_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " (section '" + section_ + "')", last_line_);
  }

  void expect(const std::string& word) {
    std::string t = next();
    if (t != word) fail("expected '" + word + "', found '" + t + "'");
  }

  long long integer(long long lo = 0) {
    std::string t = next();
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(t.c_str(), &end, 10);
    if (errno || end == t.c_str() || *end != '\0') fail("expected an integer, found '" + t + "'");
    if (v < lo) fail("integer " + t + " is out of range");
    return v;
  }

  std::uint64_t unsigned_integer() {
    std::string t = next();
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (errno || end == t.c_str() || *end != '\0' || t[0] == '-')
      fail("expected an unsigned integer, found '" + t + "'");
    return static_cast<std::uint64_t>(v);
  }

  double real() {
    std::string t = next();
    if (t == "inf" || t == "+inf") return kInf;
    if (t == "-inf") return -kInf;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') fail("expected a real number, found '" + t + "'");
    return v;
  }

  Vector values(Index n) {
    Vector v(n);
    for (Index j = 0; j < n; ++j) v[j] = real();
    return v;
  }

 private:
  void fill() {
    std::string raw;
    while (pos_ >= toks_.size() && std::getline(is_, raw)) {
      ++line_;
      toks_.clear();
      pos_ = 0;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.resize(hash);
      std::istringstream ss(raw);
      std::string t;
      while (ss >> t) toks_.emplace_back(t, line_);
    }
  }

  std::istream& is_;
  std::vector<std::pair<std::string, long>> toks_;
  std::size_t pos_ = 0;
  long line_ = 0;
  long last_line_ = 0;
  std::string section_ = "header";
};

inline SparseMatrix read_triplets(TokenReader& in, long long known_rows = -1) {
  const Index rows = known_rows >= 0 ? known_rows : in.integer();
  const Index cols = in.integer();
  const long long nnz = in.integer();
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    const long long r = in.integer(1), c = in.integer(1);
    if (r > rows || c > cols) in.fail("triplet index outside " + std::to_string(rows) + "x" +
                                      std::to_string(cols));
    trip.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), in.real());
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

inline void write_problem(const BlockAngularProblem& p, std::ostream& os) {
  detail::ProblemWriter w(os);
  os << kProblemMagic << ' ' << kProblemFormatVersion << '\n';
  os << "name " << p.meta.name << '\n';
  os << "family " << p.meta.family << '\n';
  os << "generator " << p.meta.generator << '\n';
  os << "seed " << p.meta.seed << '\n';
  os << "blocks " << p.num_blocks() << '\n';
  w.vector("b0", p.b0);
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    os << "block " << i << '\n';
    w.matrix("A", i, blk.a);
    w.matrix("D", i, blk.d);
    w.quad(i, blk.q);
    w.vector("c", blk.c);
    w.vector("b", blk.b);
    w.cone(blk.cone);
    w.theta(blk.theta);
    os << "end block\n";
  }
  if (p.meta.witness) {
    os << "witness " << p.meta.witness->size() << '\n';
    for (const auto& seg : *p.meta.witness) w.vector("x", seg);
  } else {
    os << "witness none\n";
  }
  os << "end\n";
}

inline std::string problem_to_string(const BlockAngularProblem& p) {
  std::ostringstream os;
  write_problem(p, os);
  return os.str();
}

inline void write_problem(const BlockAngularProblem& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_problem(p, os);
  if (!os) throw Error("failed writing '" + path + "'");
}

inline BlockAngularProblem read_problem(std::istream& is) {
  detail::TokenReader in(is);
  BlockAngularProblem p;
  in.section("header");
  {
    std::string magic = in.next();
    if (magic != kProblemMagic) in.fail("not a problem file (expected '" + std::string(kProblemMagic) + "')");
    const long long version = in.integer();
    if (version != kProblemFormatVersion)
      in.fail("unsupported format version " + std::to_string(version) + " (expected " +
              std::to_string(kProblemFormatVersion) + ")");
  }
  in.expect("name");
  p.meta.name = in.next();
  in.expect("family");
  p.meta.family = in.next();
  in.expect("generator");
  p.meta.generator = in.next();
  in.expect("seed");
  p.meta.seed = in.unsigned_integer();
  in.expect("blocks");
  const long long nb = in.integer(1);

  auto read_vector = [&](const std::string& label) {
    in.expect("vector");
    in.expect(label);
    return in.values(in.integer());
  };
  in.section("b0");
  p.b0 = read_vector("b0");

  for (long long i = 0; i < nb; ++i) {
    const std::string where = "block " + std::to_string(i);
    in.section(where);
    in.expect("block");
    if (in.integer() != i) in.fail("blocks must appear in order");
    Block blk;

    auto read_matrix = [&](const std::string& label) -> std::shared_ptr<const SparseMatrix> {
      in.section(where + " / matrix " + label);
      in.expect("matrix");
      in.expect(label);
      std::string mode = in.next();
      if (mode == "none") return nullptr;
      if (mode == "ref") {
        const long long j = in.integer();
        const std::string which = in.next();
        if (j >= i) in.fail("matrix reference must point to an earlier block");
        const Block& src = p.blocks[static_cast<std::size_t>(j)];
        auto m = which == "A" ? src.a : which == "D" ? src.d : nullptr;
        if (!m) in.fail("matrix reference to a missing matrix " + which);
        return m;
      }
      // `mode` already holds the row count.
      std::istringstream head(mode);
      long long rows = -1;
      if (!(head >> rows) || rows < 0 || !head.eof()) in.fail("expected 'none', 'ref' or a row count");
      return std::make_shared<const SparseMatrix>(detail::read_triplets(in, rows));
    };
    blk.a = read_matrix("A");
    if (!blk.a) in.fail("the linking matrix A is required");
    blk.d = read_matrix("D");

    in.section(where + " / quad");
    in.expect("quad");
    {
      const std::string kind = in.next();
      if (kind == "zero") {
        blk.q = QuadTerm::zero(in.integer());
      } else if (kind == "diagonal") {
        blk.q = QuadTerm::diagonal(in.values(in.integer()));
      } else if (kind == "sparse") {
        blk.q = QuadTerm::sparse(detail::read_triplets(in));
      } else if (kind == "ref") {
        const long long j = in.integer();
        if (j >= i) in.fail("quad reference must point to an earlier block");
        blk.q = p.blocks[static_cast<std::size_t>(j)].q;
        if (blk.q.kind != QuadTerm::Kind::Sparse) in.fail("quad reference to a non-sparse term");
      } else {
        in.fail("unknown quad kind '" + kind + "'");
      }
    }

    in.section(where + " / c");
    blk.c = read_vector("c");
    in.section(where + " / b");
    blk.b = read_vector("b");

    in.section(where + " / cone");
    in.expect("cone");
    {
      const std::string kind = in.next();
      const Index n = in.integer();
      if (kind == "free") {
        blk.cone = Cone::free(n);
      } else if (kind == "nonneg") {
        blk.cone = Cone::nonneg(n);
      } else if (kind == "box") {
        Vector lo = in.values(n);
        Vector hi = in.values(n);
        blk.cone = Cone::box(std::move(lo), std::move(hi));
      } else {
        in.fail("unknown cone kind '" + kind + "'");
      }
    }

    in.section(where + " / theta");
    in.expect("theta");
    {
      const std::string kind = in.next();
      const Index n = in.integer();
      if (kind == "zero") {
        blk.theta = SeparableFunction::zero(n);
      } else if (kind == "l1") {
        blk.theta = SeparableFunction::l1(n, in.real());
      } else if (kind == "kleinrock") {
        blk.theta = SeparableFunction::kleinrock(in.values(n));
      } else if (kind == "bpr") {
        const double bb = in.real(), beta = in.real();
        Vector cap = in.values(n);
        Vector ff = in.values(n);
        blk.theta = SeparableFunction::bpr(std::move(cap), std::move(ff), bb, beta);
      } else {
        in.fail("unknown theta kind '" + kind + "'");
      }
    }
    in.expect("end");
    in.expect("block");
    p.blocks.push_back(std::move(blk));
  }

  in.section("witness");
  in.expect("witness");
  {
    const std::string t = in.next();
    if (t != "none") {
      std::istringstream ss(t);
      long long cnt = -1;
      if (!(ss >> cnt) || cnt != nb) in.fail("witness must list one vector per block");
      std::vector<Vector> segs;
      for (long long i = 0; i < cnt; ++i) segs.push_back(read_vector("x"));
      p.meta.witness = BlockVector(std::move(segs));
    }
  }
  in.section("trailer");
  in.expect("end");
  if (!in.at_end()) {
    in.next();
    in.fail("trailing content after 'end'");
  }
  return p;
}

inline BlockAngularProblem read_problem(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_problem(is);
}

inline BlockAngularProblem problem_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_problem(is);
}

/// Bitwise comparison of two problems (values compared with ==, so -0 and
/// +0 match; structures must agree exactly).
inline bool problems_identical(const BlockAngularProblem& a, const BlockAngularProblem& b) {
  auto same_sparse = [](const SparseMatrix& x, const SparseMatrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols() || x.nonZeros() != y.nonZeros()) return false;
    for (Index j = 0; j < x.outerSize(); ++j) {
      SparseMatrix::InnerIterator ix(x, j), iy(y, j);
      for (; ix && iy; ++ix, ++iy)
        if (ix.row() != iy.row() || ix.value() != iy.value()) return false;
      if (ix || iy) return false;
    }
    return true;
  };
  auto same_vec = [](const Vector& x, const Vector& y) { return x.size() == y.size() && x == y; };
  auto same_ptr = [&](const std::shared_ptr<const SparseMatrix>& x,
                      const std::shared_ptr<const SparseMatrix>& y) {
    if (!x || !y) return !x && !y;
    return same_sparse(*x, *y);
  };
  if (a.num_blocks() != b.num_blocks() || !same_vec(a.b0, b.b0)) return false;
  if (a.meta.name != b.meta.name || a.meta.family != b.meta.family ||
      a.meta.generator != b.meta.generator || a.meta.seed != b.meta.seed)
    return false;
  for (std::size_t i = 0; i < a.num_blocks(); ++i) {
    const Block &x = a.blocks[i], &y = b.blocks[i];
    if (!same_ptr(x.a, y.a) || !same_ptr(x.d, y.d)) return false;
    if (x.q.kind != y.q.kind || x.q.dim != y.q.dim) return false;
    if (x.q.kind == QuadTerm::Kind::Diagonal && !same_vec(x.q.diag, y.q.diag)) return false;
    if (x.q.kind == QuadTerm::Kind::Sparse && !same_sparse(*x.q.mat, *y.q.mat)) return false;
    if (!same_vec(x.c, y.c) || !same_vec(x.b, y.b)) return false;
    if (!(x.cone == y.cone) || !(x.theta == y.theta)) return false;
  }
  if (a.meta.witness.has_value() != b.meta.witness.has_value()) return false;
  if (a.meta.witness) {
    if (a.meta.witness->size() != b.meta.witness->size()) return false;
    for (std::size_t i = 0; i < a.meta.witness->size(); ++i)
      if (!same_vec((*a.meta.witness)[i], (*b.meta.witness)[i])) return false;
  }
  return true;
}

}  // namespace bapqp

#endif  // BAPQP_PROBLEM_IO_HPP
