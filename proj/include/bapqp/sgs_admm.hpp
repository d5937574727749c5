#ifndef BAPQP_SGS_ADMM_HPP
#define BAPQP_SGS_ADMM_HPP

#include <bapqp/block_vector.hpp>
#include <bapqp/model.hpp>
#include <bapqp/parallel.hpp>
#include <bapqp/prox.hpp>
#include <bapqp/residuals.hpp>
#include <bapqp/sparse.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bapqp {

enum class SolveStatus { Converged, MaxIterations };

inline std::string to_string(SolveStatus s) {
  return s == SolveStatus::Converged ? "converged" : "max_iterations";
}

struct SigmaBalance {
  bool enabled = true;
  int interval = 50;     // iterations between balancing decisions
  double factor = 1.25;
  double ratio = 5.0;
  double lo = 1e-4;
  double hi = 1e4;
};

enum class LinearSolverKind { Direct, Pcg };

struct SgsAdmmParams {
  double sigma0 = 1.0;
  double tau = 1.618;
  double tol = 1e-5;
  long max_iter = 100000;
  int check_interval = 10;
  SigmaBalance balance;
  LinearSolverKind linear_solver = LinearSolverKind::Direct;
  int pcg_max_iter = 1000;
  int threads = 1;
  bool force_general_path = false;  // disable the theta = 0 / Q = 0 shortcuts
  double prox_tol = 1e-12;

  void check() const {
    if (!(sigma0 > 0.0)) throw ParameterError("sigma must be positive");
    if (!(tau > 0.0 && tau < 1.6180339888)) throw ParameterError("tau must lie in (0, 1.618...)");
    if (!(tol >= 0.0)) throw ParameterError("tol must be nonnegative");
    if (max_iter < 1) throw ParameterError("max_iter must be positive");
    if (check_interval < 1) throw ParameterError("check_interval must be positive");
    if (threads < 1) throw ParameterError("threads must be positive");
  }
};

struct CheckRecord {
  long iteration = 0;
  double sigma = 0.0;
  double seconds = 0.0;
  Residuals res;
};

struct SolveReport {
  std::string solver;
  SolveStatus status = SolveStatus::MaxIterations;
  long iterations = 0;
  Residuals final;
  std::vector<CheckRecord> history;
  int factorizations = 0;
  int sigma_changes = 0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  long inner_iterations = 0;  // PALM family: total inner work
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Factor cache
// ---------------------------------------------------------------------------

/// Solver for one SPD system, either a Cholesky factor or PCG on an operator.
class SpdSolver {
 public:
  SpdSolver() = default;

  static SpdSolver direct(const SparseMatrix& m) {
    SpdSolver s;
    s.dim_ = m.rows();
    s.chol_ = std::make_shared<const CholeskyFactor>(cholesky(m));
    return s;
  }
  static SpdSolver iterative(std::shared_ptr<const SparseMatrix> m) {
    SpdSolver s;
    s.dim_ = m->rows();
    s.mat_ = std::move(m);
    s.jacobi_ = Vector(s.mat_->diagonal());
    return s;
  }

  Index dim() const { return dim_; }

  /// Solves with PCG relative tolerance `tol` when iterative; `guess` warm
  /// starts the PCG path and is ignored by the direct path.
  Vector solve(const Vector& r, double tol, int maxit, const Vector* guess = nullptr) const {
    if (dim_ == 0) return Vector(0);
    if (chol_) return chol_->solve(r);
    std::optional<Vector> x0;
    if (guess && guess->size() == dim_) x0 = *guess;
    return pcg(as_operator(mat_), r, tol, maxit, jacobi_preconditioner(jacobi_), x0).x;
  }

 private:
  Index dim_ = 0;
  std::shared_ptr<const CholeskyFactor> chol_;
  std::shared_ptr<const SparseMatrix> mat_;
  Vector jacobi_;
};

/// (I + sigma Q_i)^{-1}: identity, reciprocal vector or an SPD solver.
struct QSolver {
  enum class Kind { Identity, Reciprocal, Matrix };
  Kind kind = Kind::Identity;
  Vector recip;
  SpdSolver mat;

  Vector solve(const Vector& r, double tol, int maxit, const Vector* guess) const {
    switch (kind) {
      case Kind::Identity: return r;
      case Kind::Reciprocal: return recip.cwiseProduct(r);
      case Kind::Matrix: return mat.solve(r, tol, maxit, guess);
    }
    return r;
  }
};

struct FactorCache {
  std::vector<std::shared_ptr<const SpdSolver>> ddt;  // per block, null for block 0
  std::optional<double> aat_scalar;                   // sum A_i A_i^T = scalar * I
  SpdSolver aat;
  std::vector<std::shared_ptr<const QSolver>> qsolve;
  double sigma = 0.0;
  int factorizations = 0;
};

namespace detail {

inline QSolver build_qsolver(const QuadTerm& q, double sigma, LinearSolverKind kind, int& count) {
  QSolver s;
  switch (q.kind) {
    case QuadTerm::Kind::Zero: s.kind = QSolver::Kind::Identity; break;
    case QuadTerm::Kind::Diagonal:
      s.kind = QSolver::Kind::Reciprocal;
      s.recip = (1.0 + sigma * q.diag.array()).inverse().matrix();
      break;
    case QuadTerm::Kind::Sparse: {
      s.kind = QSolver::Kind::Matrix;
      SparseMatrix m = sparse_identity(q.dim) + sigma * (*q.mat);
      if (kind == LinearSolverKind::Direct) {
        s.mat = SpdSolver::direct(m);
        ++count;
      } else {
        s.mat = SpdSolver::iterative(std::make_shared<const SparseMatrix>(std::move(m)));
      }
      break;
    }
  }
  return s;
}

inline std::optional<double> scalar_identity(const SparseMatrix& m) {
  if (m.rows() == 0) return std::nullopt;
  if (m.nonZeros() != m.rows()) return std::nullopt;
  double v = 0.0;
  for (Index j = 0; j < m.outerSize(); ++j) {
    SparseMatrix::InnerIterator it(m, j);
    if (!it || it.row() != j) return std::nullopt;
    if (j == 0) v = it.value();
    else if (it.value() != v) return std::nullopt;
  }
  return v > 0.0 ? std::optional<double>(v) : std::nullopt;
}

}  // namespace detail

/// Re-stamps only the (I + sigma Q_i) solvers for a new sigma.
inline void restamp_cache(FactorCache& cache, const BlockAngularProblem& p, double sigma,
                          LinearSolverKind kind) {
  cache.sigma = sigma;
  cache.qsolve.assign(p.num_blocks(), nullptr);
  std::map<const SparseMatrix*, std::shared_ptr<const QSolver>> shared;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const QuadTerm& q = p.blocks[i].q;
    if (q.kind == QuadTerm::Kind::Sparse) {
      auto& slot = shared[q.mat.get()];
      if (!slot) {
        try {
          slot = std::make_shared<const QSolver>(
              detail::build_qsolver(q, sigma, kind, cache.factorizations));
        } catch (const NotPositiveDefinite& e) {
          throw NotPositiveDefinite(e.what(), static_cast<int>(i));
        }
      }
      cache.qsolve[i] = slot;
    } else {
      cache.qsolve[i] = std::make_shared<const QSolver>(
          detail::build_qsolver(q, sigma, kind, cache.factorizations));
    }
  }
}

inline FactorCache build_cache(const BlockAngularProblem& p, double sigma,
                               LinearSolverKind kind = LinearSolverKind::Direct) {
  FactorCache cache;
  cache.ddt.assign(p.num_blocks(), nullptr);
  std::map<const SparseMatrix*, std::shared_ptr<const SpdSolver>> shared;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    if (!blk.d || blk.d->rows() == 0) continue;
    auto& slot = shared[blk.d.get()];
    if (!slot) {
      SparseMatrix ddt = form_normal(*blk.d, NormalMode::MMt);
      try {
        if (kind == LinearSolverKind::Direct) {
          slot = std::make_shared<const SpdSolver>(SpdSolver::direct(ddt));
          ++cache.factorizations;
        } else {
          slot = std::make_shared<const SpdSolver>(
              SpdSolver::iterative(std::make_shared<const SparseMatrix>(std::move(ddt))));
        }
      } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite(std::string(e.what()) + " (D D^T of block " +
                                      std::to_string(i) + ")",
                                  static_cast<int>(i));
      }
    }
    cache.ddt[i] = slot;
  }

  if (p.m0() > 0) {
    SparseMatrix sum(p.m0(), p.m0());
    for (const auto& blk : p.blocks) sum += form_normal(*blk.a, NormalMode::MMt);
    sum.prune(0.0);
    cache.aat_scalar = detail::scalar_identity(sum);
    if (!cache.aat_scalar) {
      try {
        if (kind == LinearSolverKind::Direct) {
          cache.aat = SpdSolver::direct(sum);
          ++cache.factorizations;
        } else {
          cache.aat = SpdSolver::iterative(std::make_shared<const SparseMatrix>(std::move(sum)));
        }
      } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite(std::string(e.what()) + " (sum of A_i A_i^T)", 0);
      }
    }
  }
  restamp_cache(cache, p, sigma, kind);
  return cache;
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct SgsState {
  PrimalDualIterate iterate;
  BlockVector w_tilde;
  BlockVector prox_point;  // last Prox_{sigma theta} output, warm start for Newton
  double sigma = 1.0;
  long iteration = 0;
};

/// Semi-proximal symmetric Gauss-Seidel ADMM on the dual problem. The
/// object owns a copy of the problem (matrices are shared, so copying is
/// cheap) so that callers can adjust linear terms between runs while
/// keeping factors.
class SgsAdmmSolver {
 public:
  SgsAdmmSolver(BlockAngularProblem problem, SgsAdmmParams params)
      : p_(std::move(problem)), prm_(params), pool_(params.threads) {
    prm_.check();
    require_valid(p_);
    auto t0 = std::chrono::steady_clock::now();
    cache_ = build_cache(p_, prm_.sigma0, prm_.linear_solver);
    norms_ = NormCache::build(p_);
    reset();
    setup_seconds_ = seconds_since(t0);
  }

  const BlockAngularProblem& problem() const { return p_; }
  const SgsAdmmParams& params() const { return prm_; }
  const FactorCache& cache() const { return cache_; }
  const NormCache& norms() const { return norms_; }
  SgsState& state() { return st_; }
  const SgsState& state() const { return st_; }

  /// Zero start.
  void reset() {
    st_ = SgsState{};
    st_.iterate = PrimalDualIterate::zeros(p_);
    st_.w_tilde = p_.zero_primal();
    st_.prox_point = p_.zero_primal();
    st_.sigma = cache_.sigma;
  }

  /// Starts the next iterations from `u`. The preimage w of q is taken as
  /// x, so q is reset to Q x.
  void warm_start(const PrimalDualIterate& u) {
    require_conformal(p_, u.x);
    st_.iterate = u;
    st_.w_tilde = u.x;
    for (std::size_t i = 0; i < p_.num_blocks(); ++i)
      st_.iterate.q[i] = p_.blocks[i].q.apply(u.x[i]);
    st_.prox_point = p_.zero_primal();
  }

  /// Replaces block i's linear cost (used by the proximal ALM family).
  void set_cost(std::size_t i, Vector c) {
    require_dim(c.size() == p_.blocks[i].n(), "set_cost: wrong length");
    p_.blocks[i].c = std::move(c);
    norms_.norm_c = cost_norm(p_);
  }

  void set_sigma(double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
    if (sigma == cache_.sigma) return;
    restamp_cache(cache_, p_, sigma, prm_.linear_solver);
    st_.sigma = sigma;
  }

  /// <w_tilde, q>, the implicit-w quadratic term of the dual objective.
  double wqw() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < p_.num_blocks(); ++i) acc += st_.w_tilde[i].dot(st_.iterate.q[i]);
    return acc;
  }

  Residuals residuals() const { return compute_residuals(p_, st_.iterate, norms_, wqw()); }

  /// One sGS-ADMM cycle.
  void iterate_once() {
    const std::size_t nb = p_.num_blocks();
    const double sigma = st_.sigma;
    const double inv = 1.0 / sigma;
    PrimalDualIterate& u = st_.iterate;
    ++st_.iteration;
    const double ltol = linear_tol();
    const int lmax = prm_.pcg_max_iter;
    const bool general = prm_.force_general_path;

    std::vector<Vector> h(nb);
    std::vector<Vector> lift(nb);  // A_i (z_i + h_i)

    // Step 1: per-block local updates.
    pool_.parallel_for(nb, [&](std::size_t i) {
      const Block& blk = p_.blocks[i];
      const bool q_zero = blk.q.is_zero() && !general;
      const bool th_zero = blk.theta.is_zero() && !general;
      Vector g = spmv(*blk.a, u.y0, true) + u.z[i] - blk.c + inv * u.x[i];

      auto local_solve = [&](const Vector& qv, const Vector& sv, const Vector* guess) -> Vector {
        const auto& fac = cache_.ddt[i];
        if (!fac) return Vector::Zero(blk.m());
        Vector rhs = inv * blk.b - spmv(*blk.d, Vector(-qv + sv + g));
        return fac->solve(rhs, ltol, lmax, guess);
      };
      auto local_lift = [&](const Vector& yv) -> Vector {
        return blk.d ? spmv(*blk.d, yv, true) : Vector::Zero(blk.n());
      };
      auto q_solve = [&](const Vector& dy) {
        Vector rhs = sigma * (dy + u.s[i] + g);
        st_.w_tilde[i] = cache_.qsolve[i]->solve(rhs, ltol, lmax, &st_.w_tilde[i]);
        u.q[i] = blk.q.apply(st_.w_tilde[i]);
      };

      // 1a
      Vector ybar = local_solve(u.q[i], u.s[i], &u.y[i]);
      Vector dy = local_lift(ybar);
      bool s_changed = false;
      if (!th_zero) {
        // 1b
        if (!q_zero) q_solve(dy);
        // 1c
        Vector a = -u.q[i] + dy + g;
        if (general && blk.theta.is_zero()) {
          u.s[i] = (sigma * a) / sigma - a;
        } else {
          u.s[i] = moreau_theta_step(blk.theta, sigma, a, prm_.prox_tol, &st_.prox_point[i]);
        }
        s_changed = true;
      }
      // 1d
      if (!q_zero) q_solve(dy);
      // 1e
      if (s_changed || !q_zero) {
        u.y[i] = local_solve(u.q[i], u.s[i], &ybar);
      } else {
        u.y[i] = std::move(ybar);
      }
      h[i] = -u.q[i] + local_lift(u.y[i]) + u.s[i] - blk.c + inv * u.x[i];
      lift[i] = spmv(*blk.a, Vector(u.z[i] + h[i]));
    });

    // Step 2a
    auto global_solve = [&](const Vector* guess) -> Vector {
      Vector rhs = inv * p_.b0;
      for (std::size_t i = 0; i < nb; ++i) rhs -= lift[i];
      if (p_.m0() == 0) return Vector(0);
      if (cache_.aat_scalar) return rhs / *cache_.aat_scalar;
      return cache_.aat.solve(rhs, ltol, lmax, guess);
    };
    Vector y0bar = global_solve(&u.y0);

    // Step 2b
    pool_.parallel_for(nb, [&](std::size_t i) {
      const Block& blk = p_.blocks[i];
      Vector a = spmv(*blk.a, y0bar, true) + h[i];
      u.z[i] = moreau_cone_step(blk.cone, sigma, a);
      lift[i] = spmv(*blk.a, Vector(u.z[i] + h[i]));
    });

    // Step 2c
    u.y0 = global_solve(&y0bar);

    // Step 3
    const double step = prm_.tau * sigma;
    pool_.parallel_for(nb, [&](std::size_t i) {
      const Block& blk = p_.blocks[i];
      Vector r = -u.q[i] + spmv(*blk.a, u.y0, true) + u.s[i] + u.z[i] - blk.c;
      if (blk.d) r += spmv(*blk.d, u.y[i], true);
      u.x[i] += step * r;
    });
  }

  /// Runs until eta <= tol (or `stop` returns true, when given) or the
  /// iteration budget is spent. Residuals are checked every check_interval
  /// iterations; on MaxIterations the best checked iterate is restored.
  SolveReport run(const std::function<bool(const Residuals&)>& stop = {}) {
    SolveReport rep;
    rep.solver = "sgs-admm";
    rep.setup_seconds = setup_seconds_;
    auto t0 = std::chrono::steady_clock::now();
    std::optional<SgsState> best;
    double best_eta = kInf;
    long since_balance = 0;
    const long start_iter = st_.iteration;
    while (st_.iteration - start_iter < prm_.max_iter) {
      iterate_once();
      ++since_balance;
      const bool last = st_.iteration - start_iter >= prm_.max_iter;
      if ((st_.iteration - start_iter) % prm_.check_interval != 0 && !last) continue;
      Residuals r = residuals();
      rep.history.push_back({st_.iteration, st_.sigma, seconds_since(t0), r});
      if (stop ? stop(r) : r.eta <= prm_.tol) {
        rep.status = SolveStatus::Converged;
        break;
      }
      if (r.eta < best_eta) {
        best_eta = r.eta;
        best = st_;
      }
      if (prm_.balance.enabled && since_balance >= prm_.balance.interval && r.eta_P > 0.0 &&
          r.eta_D > 0.0) {
        since_balance = 0;
        double next = st_.sigma;
        if (r.eta_P > prm_.balance.ratio * r.eta_D) next = st_.sigma / prm_.balance.factor;
        else if (r.eta_D > prm_.balance.ratio * r.eta_P) next = st_.sigma * prm_.balance.factor;
        next = std::clamp(next, prm_.balance.lo, prm_.balance.hi);
        if (next != st_.sigma) {
          set_sigma(next);
          ++rep.sigma_changes;
        }
      }
    }
    if (rep.status != SolveStatus::Converged && best) {
      const long it = st_.iteration;
      st_ = *best;
      st_.iteration = it;
      if (cache_.sigma != st_.sigma) restamp_cache(cache_, p_, st_.sigma, prm_.linear_solver);
    }
    rep.iterations = st_.iteration - start_iter;
    rep.final = residuals();
    rep.factorizations = cache_.factorizations;
    rep.solve_seconds = seconds_since(t0);
    return rep;
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  double linear_tol() const {
    const double k = static_cast<double>(std::max<long>(1, st_.iteration));
    return std::max(1e-12, 0.1 / (k * k));
  }

  BlockAngularProblem p_;
  SgsAdmmParams prm_;
  WorkerPool pool_;
  FactorCache cache_;
  NormCache norms_;
  SgsState st_;
  double setup_seconds_ = 0.0;
};

struct SolveOutput {
  PrimalDualIterate iterate;
  SolveReport report;
};

inline SolveOutput sgs_admm_solve(const BlockAngularProblem& p, const SgsAdmmParams& params = {}) {
  SgsAdmmSolver solver(p, params);
  SolveReport rep = solver.run();
  return {solver.state().iterate, std::move(rep)};
}

}  // namespace bapqp

#endif  // BAPQP_SGS_ADMM_HPP
