#ifndef BAPQP_RESIDUALS_HPP
#define BAPQP_RESIDUALS_HPP

#include <bapqp/block_vector.hpp>
#include <bapqp/model.hpp>
#include <bapqp/prox.hpp>
#include <bapqp/sparse.hpp>

#include <algorithm>
#include <vector>

namespace bapqp {

/// Full primal-dual point. `q` stores Q w for an implicit w; the solver
/// keeps the preimage separately when it needs it.
struct PrimalDualIterate {
  BlockVector x;
  Vector y0;
  std::vector<Vector> y;  // y[i] is the local multiplier of block i (empty for i = 0)
  BlockVector s;
  BlockVector z;
  BlockVector q;

  static PrimalDualIterate zeros(const BlockAngularProblem& p) {
    PrimalDualIterate it;
    it.x = p.zero_primal();
    it.s = p.zero_primal();
    it.z = p.zero_primal();
    it.q = p.zero_primal();
    it.y0 = Vector::Zero(p.m0());
    it.y.reserve(p.num_blocks());
    for (const auto& blk : p.blocks) it.y.push_back(Vector::Zero(blk.m()));
    return it;
  }
};

struct Residuals {
  double eta_P = 0.0;
  double eta_D = 0.0;
  double eta_Q = 0.0;
  double eta_K = 0.0;
  double eta_S = 0.0;
  double eta = 0.0;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
};

struct NormCache {
  double norm_b = 0.0;
  double norm_c = 0.0;
  double norm_Q = 0.0;

  static NormCache build(const BlockAngularProblem& p) {
    NormCache nc;
    nc.norm_b = rhs_norm(p);
    nc.norm_c = cost_norm(p);
    for (const auto& blk : p.blocks) {
      double qn = 0.0;
      switch (blk.q.kind) {
        case QuadTerm::Kind::Zero: break;
        case QuadTerm::Kind::Diagonal:
          qn = blk.n() ? blk.q.diag.cwiseAbs().maxCoeff() : 0.0;
          break;
        case QuadTerm::Kind::Sparse: qn = spectral_norm(as_operator(blk.q.mat)); break;
      }
      nc.norm_Q = std::max(nc.norm_Q, qn);
    }
    return nc;
  }
};

/// Dual feasibility residual per block: -q_i + A_i^T y0 + D_i^T y_i + s_i + z_i - c_i.
inline BlockVector dual_residual(const BlockAngularProblem& p, const PrimalDualIterate& u) {
  std::vector<Vector> out;
  out.reserve(p.num_blocks());
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    Vector r = -u.q[i] + spmv(*blk.a, u.y0, true) + u.s[i] + u.z[i] - blk.c;
    if (blk.d) r += spmv(*blk.d, u.y[i], true);
    out.push_back(std::move(r));
  }
  return BlockVector(std::move(out));
}

/// The five unscaled KKT blocks.
struct KktBlocks {
  Vector primal;     // B x - b, stacked (linking, then local rows)
  Vector dual;       // -Qw + B^T y + s + z - c
  Vector quad;       // Qw - Qx
  Vector cone;       // x - Pi_K(x - z)
  Vector separable;  // x - Prox_theta(x - s)

  Vector stacked() const {
    Vector out(primal.size() + dual.size() + quad.size() + cone.size() + separable.size());
    out << primal, dual, quad, cone, separable;
    return out;
  }
};

inline KktBlocks kkt_blocks(const BlockAngularProblem& p, const PrimalDualIterate& u) {
  require_conformal(p, u.x);
  KktBlocks k;
  ConstraintResidual cr = constraint_residual(p, u.x);
  std::vector<Vector> primal{cr.linking};
  for (const auto& v : cr.local) primal.push_back(v);
  k.primal = concat_blocks(BlockVector(std::move(primal)));

  k.dual = concat_blocks(dual_residual(p, u));

  std::vector<Vector> quad, cone, sep;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    quad.push_back(u.q[i] - blk.q.apply(u.x[i]));
    cone.push_back(u.x[i] - project_cone(blk.cone, u.x[i] - u.z[i]));
    sep.push_back(u.x[i] - prox_theta(blk.theta, 1.0, u.x[i] - u.s[i]).point);
  }
  k.quad = concat_blocks(BlockVector(std::move(quad)));
  k.cone = concat_blocks(BlockVector(std::move(cone)));
  k.separable = concat_blocks(BlockVector(std::move(sep)));
  return k;
}

/// Stacked KKT mapping R(u).
inline Vector kkt_map(const BlockAngularProblem& p, const PrimalDualIterate& u) {
  return kkt_blocks(p, u).stacked();
}

/// Dual objective -[theta^*(-s) + 1/2 <w, Qw> - <b, y> + delta_K^*(-z)], with
/// <w, Qw> supplied by the caller (the solver tracks <w_tilde, q>).
inline double dual_objective(const BlockAngularProblem& p, const PrimalDualIterate& u,
                             double wqw) {
  double acc = 0.5 * wqw - p.b0.dot(u.y0);
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    if (blk.d) acc -= blk.b.dot(u.y[i]);
    acc += conjugate_value(blk.theta, -u.s[i]);
    acc += support_value(blk.cone, -u.z[i]);
  }
  return -acc;
}

/// Nearest point of K_i intersected with the closure of dom theta_i, pulled
/// strictly inside an open Kleinrock boundary. Used to report a finite
/// primal objective for iterates that sit a rounding error outside.
inline BlockVector clamp_to_domain(const BlockAngularProblem& p, const BlockVector& x) {
  BlockVector out = x;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const Block& blk = p.blocks[i];
    out[i] = project_cone(blk.cone, x[i]);
    switch (blk.theta.kind) {
      case SeparableFunction::Kind::Kleinrock:
        for (Index j = 0; j < out[i].size(); ++j)
          out[i][j] = std::clamp(out[i][j], 0.0, blk.theta.cap[j] * (1.0 - 1e-12));
        break;
      case SeparableFunction::Kind::BPR: out[i] = out[i].cwiseMax(0.0); break;
      default: break;
    }
  }
  return out;
}

/// Relative residuals. `wqw` feeds the dual objective; pass NaN to skip it.
inline Residuals compute_residuals(const BlockAngularProblem& p, const PrimalDualIterate& u,
                                   const NormCache& nc,
                                   double wqw = std::numeric_limits<double>::quiet_NaN()) {
  KktBlocks k = kkt_blocks(p, u);
  Residuals r;
  const double nx = u.x.norm();
  r.eta_P = k.primal.norm() / (1.0 + nc.norm_b);
  r.eta_D = k.dual.norm() / (1.0 + nc.norm_c);
  r.eta_Q = k.quad.norm() / (1.0 + nc.norm_Q);
  r.eta_K = k.cone.norm() / (1.0 + nx + u.z.norm());
  r.eta_S = k.separable.norm() / (1.0 + nx + u.s.norm());
  r.eta = std::max({r.eta_P, r.eta_D, r.eta_Q, r.eta_K, r.eta_S});
  r.primal_obj = objective(p, clamp_to_domain(p, u.x));
  r.dual_obj = std::isnan(wqw) ? std::numeric_limits<double>::quiet_NaN()
                               : dual_objective(p, u, wqw);
  return r;
}

}  // namespace bapqp

#endif  // BAPQP_RESIDUALS_HPP
