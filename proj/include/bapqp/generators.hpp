#ifndef BAPQP_GENERATORS_HPP
#define BAPQP_GENERATORS_HPP

#include <bapqp/model.hpp>
#include <bapqp/sparse.hpp>

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace bapqp {

/// Identifier written into instance metadata. Uniform draws take the top 53
/// bits of mt19937_64; normals use Box-Muller on two such draws. Both are
/// defined here so instances do not depend on the standard library's
/// distribution implementations.
inline constexpr const char* kGeneratorId = "mt19937_64/u53/box-muller";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  /// Uniform integer in [0, n).
  Index index(Index n) { return static_cast<Index>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 eng_;
  std::optional<double> spare_;
};

// ---------------------------------------------------------------------------
// Graphs and commodities
// ---------------------------------------------------------------------------

struct GraphSpec {
  Index nodes = 0;
  std::vector<Index> tails;
  std::vector<Index> heads;
  Vector cap;       // filled by gen_mcf when empty
  Vector freeflow;  // BPR free-flow times; filled by gen_mcf when empty

  Index arcs() const { return static_cast<Index>(tails.size()); }
};

struct Commodity {
  Index source = 0;
  Index sink = 0;
  double demand = 1.0;
};

inline void check_graph(const GraphSpec& g) {
  if (g.nodes < 2) throw GeneratorError("graph needs at least two nodes");
  if (g.tails.size() != g.heads.size()) throw GeneratorError("arc lists differ in length");
  std::vector<std::vector<Index>> adj(g.nodes);
  for (Index e = 0; e < g.arcs(); ++e) {
    Index t = g.tails[e], h = g.heads[e];
    if (t < 0 || t >= g.nodes || h < 0 || h >= g.nodes)
      throw GeneratorError("arc " + std::to_string(e) + " has an invalid endpoint");
    if (t == h) throw GeneratorError("arc " + std::to_string(e) + " is a self-loop");
    adj[t].push_back(h);
    adj[h].push_back(t);
  }
  std::vector<char> seen(g.nodes, 0);
  std::deque<Index> queue{0};
  seen[0] = 1;
  Index count = 1;
  while (!queue.empty()) {
    Index v = queue.front();
    queue.pop_front();
    for (Index w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        queue.push_back(w);
      }
  }
  if (count != g.nodes) throw GeneratorError("graph is not connected");
}

/// Node-arc incidence: arc (t, h) has +1 in row t and -1 in row h. With
/// `drop_last` the final node's row is removed, which leaves a full row
/// rank matrix for a connected graph.
inline SparseMatrix incidence(const GraphSpec& g, bool drop_last = false) {
  const Index rows = drop_last ? g.nodes - 1 : g.nodes;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * g.arcs());
  for (Index e = 0; e < g.arcs(); ++e) {
    if (g.tails[e] < rows) trip.emplace_back(g.tails[e], e, 1.0);
    if (g.heads[e] < rows) trip.emplace_back(g.heads[e], e, -1.0);
  }
  SparseMatrix m(rows, g.arcs());
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

/// rows x cols grid with arcs in both directions between neighbours.
inline GraphSpec grid_graph(Index rows, Index cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw GeneratorError("grid too small");
  GraphSpec g;
  g.nodes = rows * cols;
  auto id = [cols](Index r, Index c) { return r * cols + c; };
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      if (c + 1 < cols) {
        g.tails.push_back(id(r, c)); g.heads.push_back(id(r, c + 1));
        g.tails.push_back(id(r, c + 1)); g.heads.push_back(id(r, c));
      }
      if (r + 1 < rows) {
        g.tails.push_back(id(r, c)); g.heads.push_back(id(r + 1, c));
        g.tails.push_back(id(r + 1, c)); g.heads.push_back(id(r, c));
      }
    }
  return g;
}

/// Random connected digraph: a random spanning tree with arcs both ways,
/// plus `extra` random arcs.
inline GraphSpec random_graph(Index nodes, Index extra, Rng& rng) {
  if (nodes < 2) throw GeneratorError("graph needs at least two nodes");
  GraphSpec g;
  g.nodes = nodes;
  for (Index v = 1; v < nodes; ++v) {
    Index u = rng.index(v);
    g.tails.push_back(u); g.heads.push_back(v);
    g.tails.push_back(v); g.heads.push_back(u);
  }
  for (Index k = 0; k < extra; ++k) {
    Index t = rng.index(nodes);
    Index h = rng.index(nodes - 1);
    if (h >= t) ++h;
    g.tails.push_back(t);
    g.heads.push_back(h);
  }
  return g;
}

inline std::vector<Commodity> random_commodities(const GraphSpec& g, Index count, Rng& rng,
                                                 double dlo = 1.0, double dhi = 5.0) {
  std::vector<Commodity> out;
  for (Index k = 0; k < count; ++k) {
    Commodity c;
    c.source = rng.index(g.nodes);
    c.sink = rng.index(g.nodes - 1);
    if (c.sink >= c.source) ++c.sink;
    c.demand = rng.uniform(dlo, dhi);
    out.push_back(c);
  }
  return out;
}

/// Breadth-first path from s to t as a list of arc indices.
inline std::vector<Index> bfs_path(const GraphSpec& g, Index s, Index t) {
  std::vector<std::vector<Index>> out_arcs(g.nodes);
  for (Index e = 0; e < g.arcs(); ++e) out_arcs[g.tails[e]].push_back(e);
  std::vector<Index> via(g.nodes, -1);
  std::vector<char> seen(g.nodes, 0);
  std::deque<Index> queue{s};
  seen[s] = 1;
  while (!queue.empty()) {
    Index v = queue.front();
    queue.pop_front();
    if (v == t) break;
    for (Index e : out_arcs[v]) {
      Index w = g.heads[e];
      if (!seen[w]) {
        seen[w] = 1;
        via[w] = e;
        queue.push_back(w);
      }
    }
  }
  if (!seen[t]) throw GeneratorError("sink not reachable from source");
  std::vector<Index> path;
  for (Index v = t; v != s; v = g.tails[via[v]]) path.push_back(via[v]);
  return {path.rbegin(), path.rend()};
}

// ---------------------------------------------------------------------------
// Multicommodity flow
// ---------------------------------------------------------------------------

enum class McfObjective { Linear, Quad, Kleinrock, Bpr };

inline std::string to_string(McfObjective o) {
  switch (o) {
    case McfObjective::Linear: return "mcf-linear";
    case McfObjective::Quad: return "mcf-quad";
    case McfObjective::Kleinrock: return "mcf-kleinrock";
    case McfObjective::Bpr: return "mcf-bpr";
  }
  return "mcf";
}

struct McfOptions {
  McfObjective objective = McfObjective::Linear;
  double quad_weight = 0.1;
  double cost_lo = 1.0;
  double cost_hi = 10.0;
  double cap_lo = 5.0;
  double cap_hi = 20.0;
  double load_factor = 0.7;  // witness load <= load_factor * cap
  double bpr_b = 0.15;
  double bpr_beta = 4.0;
};

/// Block 0 carries the total arc flow x_0 = sum_k x_k (A_0 = I, A_k = -I,
/// b_0 = 0); block k >= 1 carries commodity k's flow with D_k the shared
/// reduced incidence matrix.
inline BlockAngularProblem gen_mcf(GraphSpec g, const std::vector<Commodity>& comms,
                                   const McfOptions& opt, std::uint64_t seed) {
  check_graph(g);
  if (comms.empty()) throw GeneratorError("at least one commodity is required");
  for (const auto& c : comms) {
    if (c.source == c.sink) throw GeneratorError("commodity source equals sink");
    if (c.source < 0 || c.source >= g.nodes || c.sink < 0 || c.sink >= g.nodes)
      throw GeneratorError("commodity endpoint out of range");
    if (!(c.demand > 0.0)) throw GeneratorError("commodity demand must be positive");
  }
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Index n = g.arcs();
  const Index nc = static_cast<Index>(comms.size());

  std::vector<Vector> flows;
  Vector load = Vector::Zero(n);
  for (const auto& c : comms) {
    Vector f = Vector::Zero(n);
    for (Index e : bfs_path(g, c.source, c.sink)) f[e] = c.demand;
    load += f;
    flows.push_back(std::move(f));
  }
  if (g.cap.size() != n) {
    g.cap.resize(n);
    for (Index e = 0; e < n; ++e)
      g.cap[e] = std::max(rng.uniform(opt.cap_lo, opt.cap_hi), load[e] / opt.load_factor);
  } else {
    for (Index e = 0; e < n; ++e)
      if (load[e] > opt.load_factor * g.cap[e])
        throw GeneratorError("capacities too small for the witness routing");
  }
  if (g.freeflow.size() != n) {
    g.freeflow.resize(n);
    for (Index e = 0; e < n; ++e) g.freeflow[e] = rng.uniform(1.0, 3.0);
  }

  auto a0 = std::make_shared<const SparseMatrix>(sparse_identity(n));
  auto ai = std::make_shared<const SparseMatrix>(sparse_identity(n, -1.0));
  auto d = std::make_shared<const SparseMatrix>(incidence(g, true));

  const bool linear_costs = opt.objective == McfObjective::Linear || opt.objective == McfObjective::Quad;
  auto quad = [&] {
    return opt.objective == McfObjective::Quad ? QuadTerm::diagonal(Vector::Constant(n, opt.quad_weight))
                                               : QuadTerm::zero(n);
  };

  BlockAngularProblem p;
  p.b0 = Vector::Zero(n);
  Block b0;
  b0.a = a0;
  b0.q = quad();
  b0.c = Vector::Zero(n);
  switch (opt.objective) {
    case McfObjective::Linear:
    case McfObjective::Quad:
      b0.cone = Cone::box(Vector::Zero(n), g.cap);
      b0.theta = SeparableFunction::zero(n);
      break;
    case McfObjective::Kleinrock:
      b0.cone = Cone::box(Vector::Zero(n), g.cap);
      b0.theta = SeparableFunction::kleinrock(g.cap);
      break;
    case McfObjective::Bpr:
      b0.cone = Cone::nonneg(n);
      b0.theta = SeparableFunction::bpr(g.cap, g.freeflow, opt.bpr_b, opt.bpr_beta);
      break;
  }
  p.blocks.push_back(std::move(b0));

  for (Index k = 0; k < nc; ++k) {
    Block blk;
    blk.a = ai;
    blk.d = d;
    blk.q = quad();
    blk.c = Vector::Zero(n);
    if (linear_costs)
      for (Index e = 0; e < n; ++e) blk.c[e] = rng.uniform(opt.cost_lo, opt.cost_hi);
    Vector rhs = Vector::Zero(g.nodes);
    rhs[comms[k].source] += comms[k].demand;
    rhs[comms[k].sink] -= comms[k].demand;
    blk.b = rhs.head(g.nodes - 1);
    blk.cone = Cone::nonneg(n);
    blk.theta = SeparableFunction::zero(n);
    p.blocks.push_back(std::move(blk));
  }

  std::vector<Vector> witness{load};
  for (auto& f : flows) witness.push_back(std::move(f));
  p.meta.witness = BlockVector(std::move(witness));
  p.meta.family = to_string(opt.objective);
  p.meta.seed = seed;
  p.meta.generator = kGeneratorId;
  p.meta.name = p.meta.family + "-n" + std::to_string(g.nodes) + "-e" + std::to_string(n) + "-k" +
                std::to_string(nc) + "-s" + std::to_string(seed);
  return p;
}

/// Random connected graph plus random commodities, all from one seed.
inline BlockAngularProblem gen_mcf_random(Index nodes, Index extra_arcs, Index commodities,
                                          const McfOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  GraphSpec g = random_graph(nodes, extra_arcs, rng);
  auto comms = random_commodities(g, commodities, rng);
  return gen_mcf(std::move(g), comms, opt, seed);
}

/// rows x cols grid graph plus random commodities.
inline BlockAngularProblem gen_mcf_grid(Index rows, Index cols, Index commodities,
                                        const McfOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  GraphSpec g = grid_graph(rows, cols);
  auto comms = random_commodities(g, commodities, rng);
  return gen_mcf(std::move(g), comms, opt, seed);
}

// ---------------------------------------------------------------------------
// Random block-angular QPs
// ---------------------------------------------------------------------------

enum class RandomKind { T1, T2 };

namespace detail {

// Gaussian sparse matrix of the given density. Row j additionally gets an
// entry in column j mod cols so no row is empty.
inline SparseMatrix random_sparse(Index rows, Index cols, double density, Rng& rng, bool spine) {
  std::vector<Eigen::Triplet<double>> trip;
  for (Index j = 0; j < cols; ++j)
    for (Index r = 0; r < rows; ++r) {
      const bool on_spine = spine && (r % cols) == j && r < cols;
      if (on_spine) {
        double v = rng.normal();
        trip.emplace_back(r, j, (v >= 0.0 ? 1.0 : -1.0) + v);
      } else if (rng.uniform() < density) {
        trip.emplace_back(r, j, rng.normal());
      }
    }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

/// Blocks 0..N each have n_i variables; m_0 = m_i linking rows; blocks
/// i >= 1 carry m_i local rows. b = B x_feas for a positive x_feas, and c is
/// built from a random dual-feasible point so the problem is bounded.
inline BlockAngularProblem gen_random(Index mi, Index ni, Index nblocks, RandomKind kind,
                                      std::uint64_t seed) {
  if (mi < 1 || ni < 1 || nblocks < 0) throw GeneratorError("dimensions must be positive");
  if (mi > ni) throw GeneratorError("need m_i <= n_i for full row rank local blocks");
  Rng rng(seed);
  BlockAngularProblem p;
  const Index nb = nblocks + 1;
  Vector y0 = Vector::Zero(mi);
  for (Index r = 0; r < mi; ++r) y0[r] = rng.normal();
  p.b0 = Vector::Zero(mi);
  std::vector<Vector> witness;
  for (Index i = 0; i < nb; ++i) {
    Block blk;
    blk.a = std::make_shared<const SparseMatrix>(detail::random_sparse(mi, ni, 0.5, rng, i == 0));
    if (i > 0) blk.d = std::make_shared<const SparseMatrix>(detail::random_sparse(mi, ni, 0.3, rng, true));
    if (kind == RandomKind::T1) {
      Vector dg(ni);
      for (Index j = 0; j < ni; ++j) dg[j] = rng.uniform();
      blk.q = QuadTerm::diagonal(std::move(dg));
    } else {
      SparseMatrix s = detail::random_sparse(ni, ni, 0.1, rng, false);
      SparseMatrix st = s.transpose();
      SparseMatrix q = (s * st).pruned();
      SparseMatrix lower = q.triangularView<Eigen::Lower>();
      SparseMatrix full = lower.selfadjointView<Eigen::Lower>();
      full.makeCompressed();
      blk.q = QuadTerm::sparse(std::move(full));
    }
    Vector xf(ni), w(ni), zf(ni);
    for (Index j = 0; j < ni; ++j) xf[j] = rng.uniform(0.1, 1.0);
    for (Index j = 0; j < ni; ++j) w[j] = rng.normal();
    for (Index j = 0; j < ni; ++j) zf[j] = std::abs(rng.normal());
    // c = -Q w + A^T y0 + D^T y + z with z >= 0: (w, y, z) is dual feasible.
    blk.c = -blk.q.apply(w) + spmv(*blk.a, y0, true) + zf;
    if (blk.d) {
      Vector yl(mi);
      for (Index r = 0; r < mi; ++r) yl[r] = rng.normal();
      blk.c += spmv(*blk.d, yl, true);
      blk.b = spmv(*blk.d, xf);
    }
    p.b0 += spmv(*blk.a, xf);
    blk.cone = Cone::nonneg(ni);
    blk.theta = SeparableFunction::zero(ni);
    p.blocks.push_back(std::move(blk));
    witness.push_back(std::move(xf));
  }
  p.meta.witness = BlockVector(std::move(witness));
  p.meta.family = kind == RandomKind::T1 ? "rand-t1" : "rand-t2";
  p.meta.seed = seed;
  p.meta.generator = kGeneratorId;
  p.meta.name = p.meta.family + "-m" + std::to_string(mi) + "-n" + std::to_string(ni) + "-N" +
                std::to_string(nblocks) + "-s" + std::to_string(seed);
  return p;
}

// ---------------------------------------------------------------------------
// Controlled tabular adjustment
// ---------------------------------------------------------------------------

/// Row-sum / column-sum incidence of a rows x cols table: cell (r, c) is
/// column r*cols + c with +1 in row-sum r and -1 in column-sum c (a
/// bipartite node-arc incidence). The last column-sum row is dropped when
/// `drop_last` is set.
inline SparseMatrix table_incidence(Index rows, Index cols, bool drop_last) {
  GraphSpec g;
  g.nodes = rows + cols;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      g.tails.push_back(r);
      g.heads.push_back(rows + c);
    }
  return incidence(g, drop_last);
}

/// N layers of a rows x cols table linked through a total layer x_0 = sum
/// of the layers. Objective is 1/2 ||x - a||^2 with a a perturbed table.
inline BlockAngularProblem gen_cta(Index rows, Index cols, Index layers, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || layers < 1) throw GeneratorError("dimensions must be positive");
  Rng rng(seed);
  const Index n = rows * cols;
  auto ai = std::make_shared<const SparseMatrix>(sparse_identity(n, -1.0));
  auto d = std::make_shared<const SparseMatrix>(table_incidence(rows, cols, true));

  BlockAngularProblem p;
  p.b0 = Vector::Zero(n);
  std::vector<Vector> tables;
  Vector total = Vector::Zero(n);
  for (Index k = 0; k < layers; ++k) {
    Vector t(n);
    for (Index j = 0; j < n; ++j) t[j] = rng.uniform(1.0, 10.0);
    total += t;
    tables.push_back(std::move(t));
  }
  auto perturbed = [&](const Vector& t) {
    Vector a(n);
    for (Index j = 0; j < n; ++j) a[j] = t[j] + rng.normal();
    return a;
  };
  Block b0;
  b0.a = std::make_shared<const SparseMatrix>(sparse_identity(n));
  b0.q = QuadTerm::diagonal(Vector::Ones(n));
  b0.c = -perturbed(total);
  b0.cone = Cone::nonneg(n);
  b0.theta = SeparableFunction::zero(n);
  p.blocks.push_back(std::move(b0));
  for (Index k = 0; k < layers; ++k) {
    Block blk;
    blk.a = ai;
    blk.d = d;
    blk.q = QuadTerm::diagonal(Vector::Ones(n));
    blk.c = -perturbed(tables[k]);
    blk.b = spmv(*d, tables[k]);
    blk.cone = Cone::nonneg(n);
    blk.theta = SeparableFunction::zero(n);
    p.blocks.push_back(std::move(blk));
  }
  std::vector<Vector> witness{total};
  for (auto& t : tables) witness.push_back(std::move(t));
  p.meta.witness = BlockVector(std::move(witness));
  p.meta.family = "cta";
  p.meta.seed = seed;
  p.meta.generator = kGeneratorId;
  p.meta.name = "cta-" + std::to_string(rows) + "x" + std::to_string(cols) + "-N" +
                std::to_string(layers) + "-s" + std::to_string(seed);
  return p;
}

}  // namespace bapqp

#endif  // BAPQP_GENERATORS_HPP
