#ifndef BAPQP_PROX_HPP
#define BAPQP_PROX_HPP

#include <bapqp/core.hpp>
#include <bapqp/model.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

namespace bapqp {

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

inline Vector project_cone(const Cone& cone, const Vector& v) {
  require_dim(v.size() == cone.dim, "project_cone: dimension mismatch");
  switch (cone.kind) {
    case Cone::Kind::Free: return v;
    case Cone::Kind::NonNeg: return v.cwiseMax(0.0);
    case Cone::Kind::Box: return v.cwiseMax(cone.lower).cwiseMin(cone.upper);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Scalar prox solvers
// ---------------------------------------------------------------------------

struct ScalarProx {
  double t = 0.0;
  int iterations = 0;
  double residual = 0.0;  // |g'(t)| at an interior solution, 0 at a clamp
};

namespace detail {

// Safeguarded Newton for an increasing derivative g' on the bracket
// [lo, hi] with g'(lo) < 0 < g'(hi) (hi may be an open pole).
template <class Deriv, class Curv>
ScalarProx bracketed_newton(Deriv dg, Curv d2g, double lo, double hi, double start, double tol) {
  ScalarProx out;
  double t = std::clamp(start, lo, hi);
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
  double gt = dg(t);
  for (int k = 0; k < 200; ++k) {
    if (std::abs(gt) <= tol) break;
    if (gt > 0.0) hi = t; else lo = t;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi)))
      break;
    double cand = t - gt / d2g(t);
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    double gc = dg(cand);
    if (std::abs(gc) > std::abs(gt) && (cand - lo) > 0.0 && (hi - cand) > 0.0) {
      // no decrease in |g'|: fall back to bisection on the updated bracket
      if (gc > 0.0) hi = cand; else lo = cand;
      cand = 0.5 * (lo + hi);
      gc = dg(cand);
    }
    t = cand;
    gt = gc;
    out.iterations = k + 1;
  }
  out.t = t;
  out.residual = std::abs(gt);
  return out;
}

}  // namespace detail

/// argmin_t sigma * t/(c - t) + 1/2 (t - v)^2 over [0, c).
inline ScalarProx kleinrock_prox(double cap, double sigma, double v, double tol = 1e-12,
                                 std::optional<double> warm = std::nullopt) {
  if (v <= sigma / cap) return {0.0, 0, 0.0};
  auto dg = [=](double t) {
    double gap = cap - t;
    return sigma * cap / (gap * gap) + t - v;
  };
  auto d2g = [=](double t) {
    double gap = cap - t;
    return 2.0 * sigma * cap / (gap * gap * gap) + 1.0;
  };
  double hi = std::min(v, cap);
  double start = warm ? *warm : std::min(v, 0.9 * cap);
  return detail::bracketed_newton(dg, d2g, 0.0, hi, start, tol);
}

/// argmin_t sigma * r t (1 + B (t/c)^beta) + 1/2 (t - v)^2 over [0, inf).
inline ScalarProx bpr_prox(double cap, double freeflow, double bcoef, double beta, double sigma,
                           double v, double tol = 1e-12, std::optional<double> warm = std::nullopt) {
  const double base = sigma * freeflow;
  if (v <= base) return {0.0, 0, 0.0};
  if (freeflow == 0.0) return {v, 0, 0.0};
  auto dg = [=](double t) {
    return base * (1.0 + bcoef * (beta + 1.0) * std::pow(t / cap, beta)) + t - v;
  };
  auto d2g = [=](double t) {
    double curv = t > 0.0 ? base * bcoef * (beta + 1.0) * beta * std::pow(t / cap, beta - 1.0) / cap
                          : 0.0;
    return curv + 1.0;
  };
  double hi = v - base;
  double start = warm ? *warm : hi;
  return detail::bracketed_newton(dg, d2g, 0.0, hi, start, tol);
}

// ---------------------------------------------------------------------------
// Vector prox of sigma * theta
// ---------------------------------------------------------------------------

struct ProxResult {
  Vector point;
  int newton_iterations = 0;
  double max_residual = 0.0;
};

/// argmin_t sigma theta(t) + 1/2 ||t - v||^2, componentwise. `warm`, when
/// given, seeds the scalar Newton solves (typically the previous prox point).
inline ProxResult prox_theta(const SeparableFunction& theta, double sigma, const Vector& v,
                             double tol = 1e-12, const Vector* warm = nullptr) {
  if (!(sigma > 0.0)) throw ParameterError("prox_theta: sigma must be positive");
  require_dim(v.size() == theta.dim, "prox_theta: dimension mismatch");
  ProxResult out;
  switch (theta.kind) {
    case SeparableFunction::Kind::Zero:
      out.point = v;
      return out;
    case SeparableFunction::Kind::L1: {
      const double k = sigma * theta.weight;
      out.point = v.unaryExpr([k](double t) {
        return t > k ? t - k : (t < -k ? t + k : 0.0);
      });
      return out;
    }
    case SeparableFunction::Kind::Kleinrock:
    case SeparableFunction::Kind::BPR: {
      out.point.resize(v.size());
      const bool use_warm = warm && warm->size() == v.size();
      for (Index j = 0; j < v.size(); ++j) {
        std::optional<double> w;
        if (use_warm) w = (*warm)[j];
        ScalarProx sp = theta.kind == SeparableFunction::Kind::Kleinrock
                            ? kleinrock_prox(theta.cap[j], sigma, v[j], tol, w)
                            : bpr_prox(theta.cap[j], theta.freeflow[j], theta.bpr_b,
                                       theta.bpr_beta, sigma, v[j], tol, w);
        out.point[j] = sp.t;
        out.newton_iterations += sp.iterations;
        out.max_residual = std::max(out.max_residual, sp.residual);
      }
      return out;
    }
  }
  return out;
}

/// s-update kernel: (1/sigma) Prox_{sigma theta}(sigma a) - a, which equals
/// -Prox_{theta^*/sigma}(a).
inline Vector moreau_theta_step(const SeparableFunction& theta, double sigma, const Vector& a,
                                double tol = 1e-12, Vector* prox_point = nullptr) {
  if (theta.is_zero()) {
    if (!(sigma > 0.0)) throw ParameterError("moreau_theta_step: sigma must be positive");
    if (prox_point) *prox_point = sigma * a;
    return Vector::Zero(a.size());
  }
  Vector scaled = sigma * a;
  const Vector* warm = (prox_point && prox_point->size() == a.size()) ? prox_point : nullptr;
  ProxResult pr = prox_theta(theta, sigma, scaled, tol, warm);
  Vector s = pr.point / sigma - a;
  if (prox_point) *prox_point = std::move(pr.point);
  return s;
}

/// z-update kernel: (1/sigma) Pi_K(sigma a) - a.
inline Vector moreau_cone_step(const Cone& cone, double sigma, const Vector& a) {
  if (!(sigma > 0.0)) throw ParameterError("moreau_cone_step: sigma must be positive");
  switch (cone.kind) {
    case Cone::Kind::Free: return Vector::Zero(a.size());
    case Cone::Kind::NonNeg: return a.cwiseMax(0.0) - a;
    case Cone::Kind::Box: return project_cone(cone, sigma * a) / sigma - a;
  }
  return Vector::Zero(a.size());
}

/// Scalar prox of sigma * theta_j at v.
inline double prox_scalar(const SeparableFunction& theta, Index j, double sigma, double v,
                          double tol = 1e-12) {
  switch (theta.kind) {
    case SeparableFunction::Kind::Zero: return v;
    case SeparableFunction::Kind::L1: {
      const double k = sigma * theta.weight;
      return v > k ? v - k : (v < -k ? v + k : 0.0);
    }
    case SeparableFunction::Kind::Kleinrock: return kleinrock_prox(theta.cap[j], sigma, v, tol).t;
    case SeparableFunction::Kind::BPR:
      return bpr_prox(theta.cap[j], theta.freeflow[j], theta.bpr_b, theta.bpr_beta, sigma, v, tol).t;
  }
  return v;
}

/// [left, right] derivative interval of theta_j at t. At the closed end of
/// dom theta (t <= 0 for Kleinrock and BPR) the right derivative is used on
/// both sides; the remaining part of the subdifferential there belongs to
/// the normal cone of the bound and is carried by the cone multiplier.
inline std::pair<double, double> derivative_interval(const SeparableFunction& theta, Index j,
                                                     double t) {
  switch (theta.kind) {
    case SeparableFunction::Kind::Zero: return {0.0, 0.0};
    case SeparableFunction::Kind::L1: {
      const double w = theta.weight;
      if (t > 0.0) return {w, w};
      if (t < 0.0) return {-w, -w};
      return {-w, w};
    }
    case SeparableFunction::Kind::Kleinrock: {
      const double c = theta.cap[j];
      const double u = std::max(t, 0.0);
      const double v = c / ((c - u) * (c - u));
      return {v, v};
    }
    case SeparableFunction::Kind::BPR: {
      const double u = std::max(t, 0.0);
      const double v = theta.freeflow[j] *
                       (1.0 + theta.bpr_b * (theta.bpr_beta + 1.0) *
                                  std::pow(u / theta.cap[j], theta.bpr_beta));
      return {v, v};
    }
  }
  return {0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Conjugates and support functions (dual objective reporting)
// ---------------------------------------------------------------------------

/// theta^*(y) = sup_t <y, t> - theta(t). Entries within `slack` of a
/// feasibility boundary are treated as feasible.
inline double conjugate_value(const SeparableFunction& theta, const Vector& y, double slack = 1e-9) {
  double acc = 0.0;
  for (Index j = 0; j < y.size(); ++j) {
    const double yj = y[j];
    switch (theta.kind) {
      case SeparableFunction::Kind::Zero:
        if (std::abs(yj) > slack) return kInf;
        break;
      case SeparableFunction::Kind::L1:
        if (std::abs(yj) > theta.weight + slack) return kInf;
        break;
      case SeparableFunction::Kind::Kleinrock: {
        const double c = theta.cap[j];
        if (yj > 1.0 / c) {
          double r = std::sqrt(c * yj) - 1.0;
          acc += r * r;
        }
        break;
      }
      case SeparableFunction::Kind::BPR: {
        const double r = theta.freeflow[j];
        if (r == 0.0) {
          if (yj > slack) return kInf;
          break;
        }
        if (yj > r) {
          const double c = theta.cap[j];
          double t = c * std::pow((yj / r - 1.0) / (theta.bpr_b * (theta.bpr_beta + 1.0)),
                                  1.0 / theta.bpr_beta);
          acc += yj * t - theta.value_at(j, t);
        }
        break;
      }
    }
  }
  return acc;
}

/// delta_K^*(v) = sup_{t in K} <v, t>.
inline double support_value(const Cone& cone, const Vector& v, double slack = 1e-9) {
  double acc = 0.0;
  for (Index j = 0; j < v.size(); ++j) {
    const double vj = v[j];
    const double lo = cone.lower_at(j);
    const double hi = cone.upper_at(j);
    if (vj > slack) {
      if (std::isinf(hi)) return kInf;
      acc += vj * hi;
    } else if (vj < -slack) {
      if (std::isinf(lo)) return kInf;
      acc += vj * lo;
    } else if (vj != 0.0) {
      if (vj > 0.0 && std::isfinite(hi)) acc += vj * hi;
      if (vj < 0.0 && std::isfinite(lo)) acc += vj * lo;
    }
  }
  return acc;
}

}  // namespace bapqp

#endif  // BAPQP_PROX_HPP
