#pragma once

// BDF time stepping over a generic flow right-hand side, with step rejection
// and dt halving. BDF1 opens each span (and any restart after a rejection);
// BDF2 takes over once two equally spaced accepted steps exist.

#include <functional>
#include <vector>

#include "mmesh/core.hpp"
#include "mmesh/solver.hpp"

namespace mmesh {

enum class BdfScheme { bdf1, bdf2 };

inline BdfScheme bdf_scheme_from_string(const std::string& s) {
  if (s == "bdf1") return BdfScheme::bdf1;
  if (s == "bdf2") return BdfScheme::bdf2;
  throw Error("unknown time scheme '" + s + "'");
}

struct BdfOpts {
  double t_span = 1.0;
  int n_t = 1;
  BdfScheme scheme = BdfScheme::bdf2;
  NewtonOpts newton;
  int max_halvings = 5;
};

struct StepRecord {
  double t = 0.0;        ///< time reached after the step
  double dt = 0.0;
  int order = 1;         ///< BDF order used
  int newton_iters = 0;
  int cg_iters = 0;
  double resnorm = 0.0;
};

struct BdfAbort : Error {
  explicit BdfAbort(const std::string& msg) : Error(msg) {}
};

/// Advances x over [0, t_span]. `accept(candidate)` may veto a solved step
/// (energy safeguards live there); a veto halves dt for the remainder of the
/// span and restarts from first order.
template <class Rhs, class AcceptFn>
std::vector<StepRecord> bdf_advance(Rhs rhs, VecX& x, const BdfOpts& opts,
                                    AcceptFn&& accept) {
  MMESH_REQUIRE(opts.t_span > 0.0 && opts.n_t >= 1, "invalid BDF span");
  std::vector<StepRecord> records;
  double dt = opts.t_span / opts.n_t;
  double t = 0.0;
  int halvings = 0;
  VecX x_prev;        // previous accepted state (for BDF2)
  double dt_prev = -1.0;
  const double t_end = opts.t_span;

  while (t < t_end - 1e-12 * t_end) {
    const double dt_step = std::min(dt, t_end - t);
    const bool use_bdf2 = opts.scheme == BdfScheme::bdf2 && x_prev.size() == x.size() &&
                          std::abs(dt_prev - dt_step) <= 1e-12 * dt_step;

    VecX beta;
    double h;
    if (use_bdf2) {
      beta = (4.0 * x - x_prev) / 3.0;
      h = 2.0 / 3.0 * dt_step;
    } else {
      beta = x;
      h = dt_step;
    }

    VecX candidate = x;  // initial Newton iterate
    bool ok = true;
    NewtonResult nres;
    try {
      nres = newton_krylov_solve(rhs, beta, h, candidate, opts.newton);
      ok = nres.converged;
    } catch (const EvalFailure&) {
      ok = false;
    }
    if (ok) ok = accept(candidate);

    if (!ok) {
      if (++halvings > opts.max_halvings)
        throw BdfAbort("BDF step failed after " + std::to_string(opts.max_halvings) +
                       " dt halvings at t = " + std::to_string(t));
      dt *= 0.5;
      x_prev.resize(0);  // restart at first order
      dt_prev = -1.0;
      continue;
    }

    x_prev = x;
    dt_prev = dt_step;
    x = candidate;
    t += dt_step;
    records.push_back({t, dt_step, use_bdf2 ? 2 : 1, nres.iters, nres.cg_iters,
                       nres.resnorm});
  }
  return records;
}

}  // namespace mmesh
