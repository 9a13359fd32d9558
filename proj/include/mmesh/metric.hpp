#pragma once

// Metric tensor construction from a nodal scalar field: Hessian recovery,
// the three metric types, neighbor smoothing, global scalars (sigma_h,
// theta, kappa) and nodal balancing weights.

#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "mmesh/core.hpp"
#include "mmesh/mesh.hpp"

namespace mmesh {

enum class MetricKind { hessian, arclength, eigendecomp };

inline MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "hessian") return MetricKind::hessian;
  if (s == "arclength") return MetricKind::arclength;
  if (s == "eigendecomp") return MetricKind::eigendecomp;
  throw Error("unknown metric kind '" + s + "'");
}

template <int D>
struct MetricField {
  std::vector<Mat<D>> M;      ///< per-cell SPD tensor
  std::vector<double> rho;    ///< sqrt(det M_K)
  double sigma_h = 0.0;       ///< sum |K| rho_K over physical elements
  double theta = 1.0;         ///< (sigma_h / |Omega_c|)^{-2/d}
  double kappa = 1.0;         ///< conditioning stretch factor
  double m0 = 0.0, m1 = 0.0;  ///< eigenvalue bounds (diagnostics)
};

template <int D>
MetricField<D> make_metric_field(std::vector<Mat<D>> M) {
  MetricField<D> f;
  f.rho.resize(M.size());
  for (std::size_t c = 0; c < M.size(); ++c) {
    const double det = M[c].determinant();
    MMESH_REQUIRE(det > 0.0, "metric tensor must be SPD");
    f.rho[c] = std::sqrt(det);
  }
  f.M = std::move(M);
  return f;
}

template <int D>
MetricField<D> uniform_metric(const SimplicialMesh<D>& mesh,
                              const Mat<D>& M = Mat<D>::Identity()) {
  return make_metric_field<D>(std::vector<Mat<D>>(mesh.num_cells(), M));
}

/// Piecewise-constant P1 gradient of a nodal field (exact for linears).
template <int D>
std::vector<Vec<D>> recover_gradient(const SimplicialMesh<D>& mesh,
                                     const std::vector<double>& values) {
  MMESH_REQUIRE(static_cast<int>(values.size()) == mesh.num_nodes(),
                "nodal value count mismatch");
  std::vector<Vec<D>> grad(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& cv = mesh.cells[c];
    Mat<D> E;
    Vec<D> du;
    for (int i = 0; i < D; ++i) {
      E.col(i) = mesh.nodes_x[cv[i + 1]] - mesh.nodes_x[cv[0]];
      du[i] = values[cv[i + 1]] - values[cv[0]];
    }
    grad[c] = E.transpose().fullPivLu().solve(du);
  }
  return grad;
}

namespace detail {

/// Nodes within `depth` edges of `node`, including the node itself.
template <int D>
std::vector<int> ring_nodes(const MeshTopology<D>& topo, int node, int depth) {
  std::set<int> seen{node};
  std::vector<int> frontier{node};
  for (int d = 0; d < depth; ++d) {
    std::vector<int> next;
    for (int i : frontier)
      for (int nb : topo.node_neighbors[i])
        if (seen.insert(nb).second) next.push_back(nb);
    frontier = std::move(next);
  }
  return {seen.begin(), seen.end()};
}

}  // namespace detail

/// Nodal Hessians from a local quadratic least-squares fit over each node's
/// 2-ring patch (3-ring fallback); exact for globally quadratic fields.
/// Persistently rank-deficient patches receive the identity.
template <int D>
std::vector<Mat<D>> recover_hessian(const SimplicialMesh<D>& mesh,
                                    const MeshTopology<D>& topo,
                                    const std::vector<double>& values,
                                    int* deficient_count = nullptr) {
  constexpr int nbasis = 1 + D + D * (D + 1) / 2;
  const int nn = mesh.num_nodes();
  std::vector<Mat<D>> H(nn);
  int deficient = 0;

  for (int i = 0; i < nn; ++i) {
    Mat<D> Hi = Mat<D>::Identity();
    bool ok = false;
    for (int depth = 2; depth <= 3 && !ok; ++depth) {
      const auto patch = detail::ring_nodes(topo, i, depth);
      if (static_cast<int>(patch.size()) < nbasis) continue;
      double R = 0.0;
      for (int j : patch) R = std::max(R, (mesh.nodes_x[j] - mesh.nodes_x[i]).norm());
      if (R <= 0.0) continue;
      MatX A(patch.size(), nbasis);
      VecX b(patch.size());
      for (std::size_t r = 0; r < patch.size(); ++r) {
        const Vec<D> d = (mesh.nodes_x[patch[r]] - mesh.nodes_x[i]) / R;
        int col = 0;
        A(r, col++) = 1.0;
        for (int k = 0; k < D; ++k) A(r, col++) = d[k];
        for (int k = 0; k < D; ++k)
          for (int l = k; l < D; ++l) A(r, col++) = d[k] * d[l];
        b(r) = values[patch[r]];
      }
      Eigen::ColPivHouseholderQR<MatX> qr(A);
      qr.setThreshold(1e-10);
      if (qr.rank() < nbasis) continue;
      const VecX coef = qr.solve(b);
      int col = 1 + D;
      for (int k = 0; k < D; ++k)
        for (int l = k; l < D; ++l) {
          const double v = coef(col++) * (k == l ? 2.0 : 1.0) / (R * R);
          Hi(k, l) = Hi(l, k) = v;
        }
      ok = true;
    }
    if (!ok) {
      ++deficient;
      Hi = Mat<D>::Identity();
    }
    H[i] = Hi;
  }
  if (deficient_count) *deficient_count = deficient;
  if (deficient > 0 && !deficient_count)
    std::fprintf(stderr, "mmesh: hessian recovery fell back to identity on %d node(s)\n",
                 deficient);
  return H;
}

/// Hessian metric M_K = det(|H_K|)^{-1/(d+4)} |H_K| with the element Hessian
/// averaged from vertices. Eigenvalues are floored at floor_rel times the
/// largest curvature seen anywhere on the mesh (absolute 1e-12 when the
/// field is flat); the floor keeps M SPD across inflection lines and bounds
/// the density contrast where the field saturates.
template <int D>
MetricField<D> metric_hessian(const SimplicialMesh<D>& mesh,
                              const std::vector<Mat<D>>& nodal_hessian,
                              double floor_rel = 1e-4) {
  std::vector<Mat<D>> M(mesh.num_cells());
  std::vector<Eigen::SelfAdjointEigenSolver<Mat<D>>> eigs(mesh.num_cells());
  double lam_global = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Mat<D> Hk = Mat<D>::Zero();
    for (int v : mesh.cells[c]) Hk += nodal_hessian[v];
    Hk /= (D + 1);
    eigs[c].compute(Hk);
    lam_global = std::max(lam_global, eigs[c].eigenvalues().cwiseAbs().maxCoeff());
  }
  const double floor_ = std::max(floor_rel * lam_global, 1e-12);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Vec<D> lam = eigs[c].eigenvalues().cwiseAbs().cwiseMax(floor_);
    const Mat<D> Habs =
        eigs[c].eigenvectors() * lam.asDiagonal() * eigs[c].eigenvectors().transpose();
    M[c] = std::pow(lam.prod(), -1.0 / (D + 4)) * Habs;
    M[c] = 0.5 * (M[c] + M[c].transpose()).eval();
  }
  return make_metric_field<D>(std::move(M));
}

/// Arc-length metric M_K = sqrt(1 + beta |grad u|^2) I.
template <int D>
MetricField<D> metric_arclength(const std::vector<Vec<D>>& cell_grad, double beta) {
  MMESH_REQUIRE(beta >= 0.0, "arclength metric needs beta >= 0");
  std::vector<Mat<D>> M(cell_grad.size());
  for (std::size_t c = 0; c < cell_grad.size(); ++c)
    M[c] = std::sqrt(1.0 + beta * cell_grad[c].squaredNorm()) * Mat<D>::Identity();
  return make_metric_field<D>(std::move(M));
}

/// Eigen-decomposition metric (d = 2): unit eigenvector along grad u with
/// eigenvalue 1 + alpha psi, unit transverse eigenvalue.
inline MetricField<2> metric_eigendecomp(const SimplicialMesh<2>& mesh,
                                         const std::vector<Vec<2>>& cell_grad,
                                         double beta) {
  MMESH_REQUIRE(beta > 0.0 && beta < 1.0, "eigendecomp metric needs beta in (0,1)");
  const int nc = mesh.num_cells();
  std::vector<double> psi(nc), vol(nc);
  double psi_avg = 0.0, vol_sum = 0.0;
  for (int c = 0; c < nc; ++c) {
    psi[c] = std::sqrt(1.0 + cell_grad[c].squaredNorm()) - 1.0;
    vol[c] = edge_matrices(mesh, c).vol;
    psi_avg += vol[c] * psi[c];
    vol_sum += vol[c];
  }
  psi_avg /= vol_sum;

  std::vector<Mat<2>> M(nc);
  if (psi_avg <= 0.0) {
    for (auto& m : M) m = Mat<2>::Identity();
    return make_metric_field<2>(std::move(M));
  }
  const double alpha = beta / (psi_avg * (1.0 - beta));
  for (int c = 0; c < nc; ++c) {
    Vec<2> v = cell_grad[c];
    const double n = v.norm();
    v = n < 1e-12 ? Vec<2>(1.0, 0.0) : Vec<2>(v / n);
    const Vec<2> vp(-v[1], v[0]);
    const double lam1 = 1.0 + alpha * psi[c];
    M[c] = lam1 * v * v.transpose() + vp * vp.transpose();
    M[c] = 0.5 * (M[c] + M[c].transpose()).eval();
  }
  return make_metric_field<2>(std::move(M));
}

/// Volume-weighted averaging of each cell with its facet neighbors; convex
/// combinations keep the field SPD.
template <int D>
MetricField<D> smooth_metric(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                             const MetricField<D>& field, int sweeps) {
  MMESH_REQUIRE(sweeps >= 0, "sweep count must be nonnegative");
  const int nc = mesh.num_cells();
  std::vector<double> vol(nc);
  for (int c = 0; c < nc; ++c) vol[c] = edge_matrices(mesh, c).vol;

  std::vector<Mat<D>> cur = field.M;
  std::vector<Mat<D>> next(nc);
  for (int s = 0; s < sweeps; ++s) {
    for (int c = 0; c < nc; ++c) {
      Mat<D> acc = vol[c] * cur[c];
      double w = vol[c];
      for (int nb : topo.cell_neighbors[c]) {
        if (nb < 0) continue;
        acc += vol[nb] * cur[nb];
        w += vol[nb];
      }
      next[c] = acc / w;
    }
    cur.swap(next);
  }
  return make_metric_field<D>(std::move(cur));
}

/// sigma_h, theta and the stretching factor kappa; also records the field's
/// eigenvalue range. kappa is the reciprocal of the kernel value at A =
/// theta I for the trace/log-det kernel.
template <int D>
void global_scalars(const SimplicialMesh<D>& mesh, MetricField<D>& field, double gamma) {
  const int nc = mesh.num_cells();
  MMESH_REQUIRE(static_cast<int>(field.M.size()) == nc, "metric field size mismatch");
  std::vector<double> terms(nc);
  field.m0 = std::numeric_limits<double>::infinity();
  field.m1 = 0.0;
  for (int c = 0; c < nc; ++c) {
    terms[c] = edge_matrices(mesh, c).vol * field.rho[c];
    Eigen::SelfAdjointEigenSolver<Mat<D>> es(field.M[c]);
    field.m0 = std::min(field.m0, es.eigenvalues().minCoeff());
    field.m1 = std::max(field.m1, es.eigenvalues().maxCoeff());
  }
  field.sigma_h = pairwise_sum(terms);
  MMESH_REQUIRE(field.sigma_h > 0.0, "sigma_h must be positive");
  field.theta = std::pow(field.sigma_h / mesh.domain_volume(), -2.0 / D);
  const double p = 0.5 * D * gamma;
  const double denom =
      std::pow(static_cast<double>(D), p) * std::pow(field.theta, p) * (1.0 - p * std::log(field.theta));
  field.kappa = denom > 0.0 ? 1.0 / denom : 1.0;
}

/// Uniformly rescale the field; rho and the global scalars follow.
template <int D>
void scale_metric(const SimplicialMesh<D>& mesh, MetricField<D>& field, double c,
                  double gamma) {
  MMESH_REQUIRE(c > 0.0, "metric scale factor must be positive");
  for (auto& m : field.M) m *= c;
  for (auto& r : field.rho) r *= std::pow(c, 0.5 * D);
  global_scalars(mesh, field, gamma);
}

/// Normalize to the combined-scaling operating point theta = 1 (the metric
/// volume matches the computational domain volume). Any uniform rescaling
/// leaves the minimizer unchanged, so this is purely a conditioning choice;
/// it keeps kappa and the balancing weights order one for steep metrics.
/// Returns the applied factor.
template <int D>
double normalize_metric(const SimplicialMesh<D>& mesh, MetricField<D>& field, double gamma) {
  global_scalars(mesh, field, gamma);
  const double c = std::pow(mesh.domain_volume() / field.sigma_h, 2.0 / D);
  scale_metric(mesh, field, c, gamma);
  return c;
}

/// Uniformly rescale so the smallest eigenvalue over the field is one
/// (M~ >= I). Returns the applied factor.
template <int D>
double normalize_metric_floor(const SimplicialMesh<D>& mesh, MetricField<D>& field,
                              double gamma) {
  global_scalars(mesh, field, gamma);
  const double c = 1.0 / field.m0;
  scale_metric(mesh, field, c, gamma);
  return c;
}

/// Multiply the (normalized) field by kappa^{2/d}.
template <int D>
void apply_kappa(const SimplicialMesh<D>& mesh, MetricField<D>& field, double gamma) {
  scale_metric(mesh, field, std::pow(field.kappa, 2.0 / D), gamma);
}

// ---------------------------------------------------------------------------
// Balancing weights

enum class BalancingKind { ours, huang };

inline BalancingKind balancing_kind_from_string(const std::string& s) {
  if (s == "ours") return BalancingKind::ours;
  if (s == "huang") return BalancingKind::huang;
  throw Error("unknown balancing kind '" + s + "'");
}

/// Volume-weighted nodal metric over each node's element star.
template <int D>
std::vector<Mat<D>> nodal_metrics(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                                  const MetricField<D>& field) {
  std::vector<Mat<D>> nm(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    Mat<D> acc = Mat<D>::Zero();
    double w = 0.0;
    for (const auto& se : topo.stars[i]) {
      const double v = edge_matrices(mesh, se.cell).vol;
      acc += v * field.M[se.cell];
      w += v;
    }
    nm[i] = acc / w;
  }
  return nm;
}

/// Nodal relaxation weights: `ours` uses [M]^{-d/2} with
/// [M] = sqrt(theta^{-1/2} det(M)^{1/d}); `huang` uses det(M)^{(p-1)/2}.
template <int D>
std::vector<double> balancing_function(const SimplicialMesh<D>& mesh,
                                       const MeshTopology<D>& topo,
                                       const MetricField<D>& field, BalancingKind kind,
                                       double p = 1.0) {
  const auto nm = nodal_metrics(mesh, topo, field);
  std::vector<double> P(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const double det = nm[i].determinant();
    if (kind == BalancingKind::ours) {
      const double bracket = std::sqrt(std::pow(field.theta, -0.5) * std::pow(det, 1.0 / D));
      P[i] = std::pow(bracket, -0.5 * D);
    } else {
      P[i] = std::pow(det, 0.5 * (p - 1.0));
    }
  }
  return P;
}

}  // namespace mmesh
