#pragma once

// The xi-view gradient flow: per-span frozen caches, the flow right-hand
// side -(P/tau) dI_h/dxi, BDF advancement with energy/admissibility
// safeguards, and the outer metric-rebuild loop with the physical point
// update.

#include <atomic>
#include <functional>
#include <vector>

#include "mmesh/assembly.hpp"
#include "mmesh/core.hpp"
#include "mmesh/functional.hpp"
#include "mmesh/interp.hpp"
#include "mmesh/mesh.hpp"
#include "mmesh/metric.hpp"
#include "mmesh/ode.hpp"

namespace mmesh {

/// Quantities frozen over one BDF span: physical edge matrices, metric data,
/// balancing weights and theta.
template <int D>
struct FrozenCache {
  FunctionalParams params;         ///< theta frozen for the span
  double tau = 1.0;
  std::vector<Mat<D>> Einv;        ///< physical edge inverses
  std::vector<Mat<D>> S;           ///< Einv M^{-1} Einv^T (so A = Ehat S Ehat^T)
  std::vector<double> rho;
  std::vector<double> vol;         ///< physical |K|
  std::vector<double> P;           ///< nodal balancing weights
};

template <int D>
FrozenCache<D> build_cache(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                           const MetricField<D>& field, const FunctionalParams& params,
                           double tau, BalancingKind balancing, double balancing_p) {
  MMESH_REQUIRE(tau > 0.0, "tau must be positive");
  FrozenCache<D> cache;
  cache.params = params;
  cache.tau = tau;
  const int nc = mesh.num_cells();
  cache.Einv.resize(nc);
  cache.S.resize(nc);
  cache.rho = field.rho;
  cache.vol.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const auto geom = edge_matrices(mesh, c);
    cache.Einv[c] = geom.E.inverse();
    const Mat<D> Minv = field.M[c].inverse();
    cache.S[c] = cache.Einv[c] * Minv * cache.Einv[c].transpose();
    cache.S[c] = 0.5 * (cache.S[c] + cache.S[c].transpose()).eval();
    cache.vol[c] = geom.vol;
  }
  cache.P = balancing_function(mesh, topo, field, balancing, balancing_p);
  // Balancing sets relative node speeds; the global rate lives in tau. Unit
  // maximum keeps the dt/tau stiffness independent of the metric's range.
  const double pmax = *std::max_element(cache.P.begin(), cache.P.end());
  for (auto& p : cache.P) p /= pmax;
  return cache;
}

/// Flow system over flattened computational coordinates. All evaluations are
/// pure with respect to the cached span data.
template <int D>
class XiFlowSystem {
public:
  XiFlowSystem(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
               const FrozenCache<D>& cache)
      : mesh_(mesh), topo_(topo), cache_(cache) {}

  int size() const { return D * mesh_.num_nodes(); }

  static void flatten(const std::vector<Vec<D>>& pts, VecX& x) {
    x.resize(D * pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int k = 0; k < D; ++k) x[D * i + k] = pts[i][k];
  }

  static void unflatten(const VecX& x, std::vector<Vec<D>>& pts) {
    pts.resize(x.size() / D);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int k = 0; k < D; ++k) pts[i][k] = x[D * i + k];
  }

  /// rhs(xi) = -(P/tau) dI_h/dxi, boundary projected. Returns false on the
  /// first inverted computational element.
  bool rhs(const VecX& x, VecX& out) const {
    const int nc = mesh_.num_cells();
    const int nn = mesh_.num_nodes();
    std::vector<Eigen::Matrix<double, D + 1, D>> g_elem(nc);
    std::atomic<bool> ok{true};
    parallel_for(nc, [&](std::size_t c) {
      if (!ok.load(std::memory_order_relaxed)) return;
      Mat<D> Ehat;
      const auto& cv = mesh_.cells[c];
      for (int i = 0; i < D; ++i)
        for (int k = 0; k < D; ++k) Ehat(k, i) = x[D * cv[i + 1] + k] - x[D * cv[0] + k];
      const double det = Ehat.determinant();
      if (det <= 0.0) {
        ok.store(false, std::memory_order_relaxed);
        return;
      }
      Mat<D> A = Ehat * cache_.S[c] * Ehat.transpose();
      A = 0.5 * (A + A.transpose()).eval();
      const auto td = t_and_derivs<D>(A, A.determinant(), cache_.params);
      const Mat<D> Q =
          A * td.dT_dA + A.determinant() * td.dT_dalpha * Mat<D>::Identity();
      g_elem[c] = 2.0 * cache_.rho[c] * rmatrix<D>() * Ehat.inverse() * Q;
    });
    if (!ok.load()) return false;

    out.setZero(D * nn);
    for (int i = 0; i < nn; ++i) {
      Vec<D> g = Vec<D>::Zero();
      for (const auto& se : topo_.stars[i])
        g += cache_.vol[se.cell] * g_elem[se.cell].row(se.local).transpose();
      const auto& tag = mesh_.boundary_tags[i];
      if (tag.kind == NodeKind::corner) continue;
      if (tag.kind == NodeKind::edge) g[tag.face / 2] = 0.0;
      const double scale = -cache_.P[i] / cache_.tau;
      for (int k = 0; k < D; ++k) out[D * i + k] = scale * g[k];
    }
    return true;
  }

  /// Componentwise scale vector s with s_i = sqrt(P_i / tau). In the scaled
  /// variables y = xi / s the flow is a plain gradient system dy/dt =
  /// -grad_y I_h with a symmetric Jacobian, which is what the CG inner
  /// solves and symmetric DFP updates assume. The trajectory is identical.
  VecX balancing_scale() const {
    VecX s(size());
    for (int i = 0; i < mesh_.num_nodes(); ++i)
      for (int k = 0; k < D; ++k) s[D * i + k] = std::sqrt(cache_.P[i] / cache_.tau);
    return s;
  }

  /// Frozen-cache energy; throws on inverted computational elements.
  double energy_at(const VecX& x) const {
    const int nc = mesh_.num_cells();
    std::vector<double> terms(nc);
    for (int c = 0; c < nc; ++c) {
      Mat<D> Ehat;
      const auto& cv = mesh_.cells[c];
      for (int i = 0; i < D; ++i)
        for (int k = 0; k < D; ++k) Ehat(k, i) = x[D * cv[i + 1] + k] - x[D * cv[0] + k];
      MMESH_REQUIRE(Ehat.determinant() > 0.0,
                    "inverted computational cell " + std::to_string(c));
      Mat<D> A = Ehat * cache_.S[c] * Ehat.transpose();
      A = 0.5 * (A + A.transpose()).eval();
      terms[c] =
          cache_.vol[c] * cache_.rho[c] * t_and_derivs<D>(A, A.determinant(), cache_.params).T;
    }
    return pairwise_sum(terms);
  }

  double min_vol_xi(const VecX& x) const {
    double v = std::numeric_limits<double>::infinity();
    for (int c = 0; c < mesh_.num_cells(); ++c) {
      Mat<D> Ehat;
      const auto& cv = mesh_.cells[c];
      for (int i = 0; i < D; ++i)
        for (int k = 0; k < D; ++k) Ehat(k, i) = x[D * cv[i + 1] + k] - x[D * cv[0] + k];
      v = std::min(v, Ehat.determinant() / factorial(D));
    }
    return v;
  }

private:
  const SimplicialMesh<D>& mesh_;
  const MeshTopology<D>& topo_;
  const FrozenCache<D>& cache_;
};

// ---------------------------------------------------------------------------
// Outer loop

struct FlowConfig {
  double tau = 0.004;
  double t_span = 0.1;
  int n_t = 2;
  int outer_iters = 10;
  BdfScheme scheme = BdfScheme::bdf2;
  NewtonOpts newton;
  int max_halvings = 5;
  BalancingKind balancing = BalancingKind::ours;
  double balancing_p = 1.0;
  double energy_increase_tol = 1e-10;  ///< relative slack for step rejection
};

struct StepRow {
  int outer_iter = 0;
  double t = 0.0;  ///< global time across the run
  double energy = 0.0;
  double min_vol_xi = 0.0;
  int order = 1;
  int newton_iters = 0;
  int cg_iters = 0;
};

struct OuterRow {
  int iter = 0;
  double energy_start = 0.0;
  double energy_end = 0.0;
  double min_vol_phys = 0.0;
  double min_height_metric = 0.0;
  double theta = 0.0;
};

struct RunHistory {
  std::vector<StepRow> steps;
  std::vector<OuterRow> outer;
  double initial_energy = 0.0;  ///< I_h on the initial mesh, first metric
  int total_newton = 0;
  int total_cg = 0;
};

/// One full adaptation run. `metric_builder` returns the (smoothed,
/// normalized) field for the current physical mesh with global scalars set;
/// `field_update` refreshes whatever nodal data the builder consumes after
/// each physical update; `on_iter_end` is an I/O hook.
template <int D>
RunHistory run_outer_loop(
    SimplicialMesh<D>& mesh, const FlowConfig& cfg, FunctionalParams params,
    const std::function<MetricField<D>(const SimplicialMesh<D>&)>& metric_builder,
    const std::function<void(const SimplicialMesh<D>&)>& field_update = nullptr,
    const std::function<void(const SimplicialMesh<D>&, int)>& on_iter_end = nullptr) {
  MMESH_REQUIRE(cfg.outer_iters >= 0, "outer iteration count must be nonnegative");
  RunHistory hist;
  const auto topo = build_topology(mesh);
  const std::vector<Vec<D>> xi_ref = mesh.nodes_xi;

  for (int iter = 1; iter <= cfg.outer_iters; ++iter) {
    const MetricField<D> field = metric_builder(mesh);
    params.theta = field.theta;
    const auto cache =
        build_cache(mesh, topo, field, params, cfg.tau, cfg.balancing, cfg.balancing_p);
    XiFlowSystem<D> sys(mesh, topo, cache);

    VecX x;
    XiFlowSystem<D>::flatten(mesh.nodes_xi, x);
    double e_prev = sys.energy_at(x);
    if (iter == 1) hist.initial_energy = e_prev;
    const VecX scale = sys.balancing_scale();

    OuterRow orow;
    orow.iter = iter;
    orow.energy_start = e_prev;
    orow.theta = field.theta;

    BdfOpts bopts;
    bopts.t_span = cfg.t_span;
    bopts.n_t = cfg.n_t;
    bopts.scheme = cfg.scheme;
    bopts.newton = cfg.newton;
    bopts.max_halvings = cfg.max_halvings;

    std::vector<std::pair<double, double>> accepted;  // (energy, min xi volume)
    auto accept = [&](const VecX& y_candidate) {
      const VecX candidate = scale.cwiseProduct(y_candidate);
      double e;
      try {
        e = sys.energy_at(candidate);
      } catch (const Error&) {
        return false;
      }
      if (e > e_prev + cfg.energy_increase_tol * std::abs(e_prev)) return false;
      e_prev = e;
      accepted.emplace_back(e, sys.min_vol_xi(candidate));
      return true;
    };

    // BDF runs in the scaled variables y = xi / s (see balancing_scale)
    auto rhs_y = [&sys, &scale](const VecX& y, VecX& out) {
      if (!sys.rhs(scale.cwiseProduct(y), out)) return false;
      out.array() /= scale.array();
      return true;
    };
    VecX y = x.cwiseQuotient(scale);
    const double t_base = (iter - 1) * cfg.t_span;
    const auto records = bdf_advance(rhs_y, y, bopts, accept);
    x = scale.cwiseProduct(y);
    for (const auto& r : records) {
      hist.total_newton += r.newton_iters;
      hist.total_cg += r.cg_iters;
    }

    XiFlowSystem<D>::unflatten(x, mesh.nodes_xi);

    // physical points follow the map: evaluate the deformed-xi mesh's
    // piecewise-linear x(xi) at the reference grid, then reset xi. The
    // straight-sided image of the reference grid can still fold where the
    // map is strongly compressed, so the update is damped until admissible.
    {
      const std::vector<Vec<D>> x_old = mesh.nodes_x;
      const std::vector<Vec<D>> x_target = remap_physical(mesh, topo, xi_ref);
      mesh.nodes_xi = xi_ref;
      double lambda = 1.0;
      bool ok = false;
      for (int attempt = 0; attempt < 8 && !ok; ++attempt, lambda *= 0.5) {
        for (int i = 0; i < mesh.num_nodes(); ++i)
          mesh.nodes_x[i] = x_old[i] + lambda * (x_target[i] - x_old[i]);
        ok = admissible(mesh);
      }
      if (!ok) {
        mesh.nodes_x = x_old;  // keep the previous admissible mesh
        throw Error("physical update could not be made admissible at outer iteration " +
                    std::to_string(iter));
      }
    }

    orow.energy_end = e_prev;
    orow.min_vol_phys = std::numeric_limits<double>::infinity();
    orow.min_height_metric = std::numeric_limits<double>::infinity();
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const auto geom = edge_matrices(mesh, c);
      orow.min_vol_phys = std::min(orow.min_vol_phys, geom.vol);
      orow.min_height_metric =
          std::min(orow.min_height_metric, min_height_in_metric(geom, field.M[c]));
    }
    hist.outer.push_back(orow);

    MMESH_REQUIRE(accepted.size() == records.size(), "step bookkeeping out of sync");
    double t_local = 0.0;
    for (std::size_t k = 0; k < records.size(); ++k) {
      const auto& r = records[k];
      t_local += r.dt;
      hist.steps.push_back({iter, t_base + t_local, accepted[k].first,
                            accepted[k].second, r.order, r.newton_iters, r.cg_iters});
    }

    if (field_update) field_update(mesh);
    if (on_iter_end) on_iter_end(mesh, iter);
  }
  return hist;
}

}  // namespace mmesh
