#pragma once

// Matrix-free Newton-Krylov machinery: conjugate gradients, the DFP-updated
// linear operator with good-Broyden fallback, and the nonlinear solve for
// one implicit step.

#include <functional>
#include <vector>

#include "mmesh/core.hpp"

namespace mmesh {

struct CgResult {
  int iters = 0;
  bool converged = false;
  bool breakdown = false;  ///< non-positive curvature encountered
};

/// Conjugate gradients on a matrix-free operator. Returns the best iterate
/// with a flag when non-positive curvature is detected.
template <class MatVec>
CgResult cg_solve(MatVec&& Av, const VecX& b, VecX& x, double tol, int maxit) {
  CgResult res;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    res.converged = true;
    return res;
  }
  VecX q(b.size()), r(b.size());
  Av(x, q);
  r = b - q;
  VecX p = r;
  double rr = r.squaredNorm();
  for (res.iters = 0; res.iters < maxit; ++res.iters) {
    if (std::sqrt(rr) <= tol * bnorm) {
      res.converged = true;
      return res;
    }
    Av(p, q);
    const double pq = p.dot(q);
    if (pq <= 0.0) {
      res.breakdown = true;
      return res;
    }
    const double alpha = rr / pq;
    x += alpha * p;
    r -= alpha * q;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  res.converged = std::sqrt(rr) <= tol * bnorm;
  return res;
}

/// Linear operator held as a base matvec plus accumulated rank-one terms
///   A = base + sum_k coef_k a_k b_k^T.
/// DFP updates add symmetric pairs; the good-Broyden fallback adds a
/// nonsymmetric term, after which apply_sym() serves CG with 0.5(A + A^T).
class LowRankOperator {
public:
  using MatVecFn = std::function<void(const VecX&, VecX&)>;

  void set_base(MatVecFn base) {
    base_ = std::move(base);
    terms_.clear();
    nonsym_ = false;
  }

  bool has_base() const { return static_cast<bool>(base_); }
  bool symmetric() const { return !nonsym_; }
  int num_updates() const { return static_cast<int>(terms_.size()); }

  void apply(const VecX& v, VecX& out) const {
    base_(v, out);
    for (const auto& t : terms_) out += (t.coef * t.b.dot(v)) * t.a;
  }

  void apply_base(const VecX& v, VecX& out) const { base_(v, out); }

  /// 0.5 (A + A^T) v; coincides with apply() while all terms are symmetric.
  void apply_sym(const VecX& v, VecX& out) const {
    base_(v, out);
    for (const auto& t : terms_) {
      if (t.sym) {
        out += (t.coef * t.b.dot(v)) * t.a;
      } else {
        out += (0.5 * t.coef * t.b.dot(v)) * t.a;
        out += (0.5 * t.coef * t.a.dot(v)) * t.b;
      }
    }
  }

  enum class UpdateKind { none, dfp, broyden };

  /// Secant update with step s and residual change t: DFP when the curvature
  /// s^T t is usable, otherwise the good-Broyden rank-one update. Either way
  /// the updated operator maps s to t exactly.
  UpdateKind update(const VecX& s, const VecX& t, double eps_curv = 1e-10) {
    const double st = s.dot(t);
    VecX w(s.size());
    apply(s, w);
    const double sw = s.dot(w);
    if ((t - w).norm() <= 1e-14 * (t.norm() + w.norm())) return UpdateKind::none;
    if (st > eps_curv * s.norm() * t.norm() && sw > 0.0) {
      terms_.push_back({t, t, 1.0 / st, true});
      terms_.push_back({w, w, -1.0 / sw, true});
      return UpdateKind::dfp;
    }
    const double ss = s.squaredNorm();
    if (ss <= 0.0) return UpdateKind::none;
    terms_.push_back({t - w, s, 1.0 / ss, false});
    nonsym_ = true;
    return UpdateKind::broyden;
  }

private:
  struct Term {
    VecX a, b;
    double coef;
    bool sym;
  };
  MatVecFn base_;
  std::vector<Term> terms_;
  bool nonsym_ = false;
};

/// Signals a residual evaluation at an inadmissible state.
struct EvalFailure {
  int cell = -1;
};

/// Central-difference directional derivative of a flow right-hand side,
/// packaged as the Newton operator J_NT = I - h J.
///   rhs: bool rhs(x, out) -- false when the state is inadmissible.
template <class Rhs>
LowRankOperator::MatVecFn make_jnt_matvec(Rhs rhs, VecX x_base, double h) {
  return [rhs, x_base = std::move(x_base), h](const VecX& v, VecX& out) {
    const double vnorm = v.norm();
    out = v;
    if (vnorm == 0.0 || h == 0.0) return;
    double eps = 1e-7 * (1.0 + x_base.norm()) / vnorm;
    VecX fp(v.size()), fm(v.size());
    for (int attempt = 0;; ++attempt) {
      if (rhs(x_base + eps * v, fp) && rhs(x_base - eps * v, fm)) break;
      if (attempt >= 1) throw EvalFailure{};
      eps *= 1e-2;  // one shrink, then give up
    }
    out -= (h / (2.0 * eps)) * (fp - fm);
  };
}

/// Dense assembly of J_NT by finite-difference columns; practical for the
/// small meshes used in tests.
template <class Rhs>
LowRankOperator::MatVecFn make_jnt_dense(Rhs rhs, const VecX& x_base, double h) {
  const int n = static_cast<int>(x_base.size());
  auto J = std::make_shared<MatX>(n, n);
  const double eps = 1e-7 * (1.0 + x_base.norm());
  VecX xp = x_base, xm = x_base, fp(n), fm(n);
  for (int j = 0; j < n; ++j) {
    xp[j] += eps;
    xm[j] -= eps;
    if (!rhs(xp, fp) || !rhs(xm, fm)) throw EvalFailure{};
    J->col(j) = -h / (2.0 * eps) * (fp - fm);
    (*J)(j, j) += 1.0;
    xp[j] = x_base[j];
    xm[j] = x_base[j];
  }
  return [J](const VecX& v, VecX& out) { out = *J * v; };
}

struct NewtonOpts {
  double newton_tol = 1e-6;
  double atol = 1.0;
  double rtol = 0.0;
  double cg_tol = 1e-8;
  int max_newton = 50;
  int max_cg = 400;
  double eps_curv = 1e-10;
  bool dense = false;  ///< assemble J_NT densely instead of matrix-free
};

struct NewtonResult {
  bool converged = false;
  int iters = 0;
  int cg_iters = 0;
  double resnorm = 0.0;
};

/// Solves G(x) = x - beta - h f(x) = 0. The first Newton iteration builds
/// J_NT = I - h J at the initial iterate; later iterations reuse it through
/// low-rank secant updates and CG inner solves.
template <class Rhs>
NewtonResult newton_krylov_solve(Rhs rhs, const VecX& beta, double h, VecX& x,
                                 const NewtonOpts& opts) {
  const int n = static_cast<int>(x.size());
  auto G = [&](const VecX& xv, VecX& out) -> bool {
    if (!rhs(xv, out)) return false;
    out = xv - beta - h * out;
    return true;
  };

  NewtonResult res;
  VecX r(n), r_new(n), delta(n), x_trial(n);
  if (!G(x, r)) throw EvalFailure{};
  LowRankOperator op;

  for (res.iters = 0; res.iters < opts.max_newton; ++res.iters) {
    res.resnorm = r.norm();
    const double tol = opts.newton_tol * (opts.atol + opts.rtol * x.norm());
    if (res.resnorm <= tol) {
      res.converged = true;
      return res;
    }
    if (!op.has_base()) {
      op.set_base(opts.dense ? make_jnt_dense(rhs, x, h)
                             : make_jnt_matvec(rhs, x, h));
    }

    delta.setZero();
    const VecX b = -r;
    auto matvec = [&op](const VecX& v, VecX& out) {
      if (op.symmetric())
        op.apply(v, out);
      else
        op.apply_sym(v, out);
    };
    auto cg = cg_solve(matvec, b, delta, opts.cg_tol, opts.max_cg);
    res.cg_iters += cg.iters;
    if (cg.breakdown) {
      // restart on the unmodified base operator
      delta.setZero();
      auto base_only = [&op](const VecX& v, VecX& out) { op.apply_base(v, out); };
      cg = cg_solve(base_only, b, delta, opts.cg_tol, opts.max_cg);
      res.cg_iters += cg.iters;
    }
    if (delta.norm() == 0.0) return res;  // no progress possible

    // step, backtracking only past inadmissible states
    double lambda = 1.0;
    bool ok = false;
    for (int bt = 0; bt < 5 && !ok; ++bt, lambda *= 0.5) {
      x_trial = x + lambda * delta;
      ok = G(x_trial, r_new);
    }
    if (!ok) return res;

    const VecX s = x_trial - x;
    op.update(s, r_new - r, opts.eps_curv);
    x = x_trial;
    r.swap(r_new);

    if (r.norm() > 1e6 * (res.resnorm + 1.0)) return res;  // diverging
  }
  res.resnorm = r.norm();
  res.converged = res.resnorm <= opts.newton_tol * (opts.atol + opts.rtol * x.norm());
  return res;
}

}  // namespace mmesh
