#pragma once

// Element-level gradients of the discrete energy in computational
// coordinates, the affine W_K form, physical-coordinate element velocities
// via the U tensor, and global star assembly with boundary projection.

#include <vector>

#include "mmesh/core.hpp"
#include "mmesh/functional.hpp"
#include "mmesh/mesh.hpp"
#include "mmesh/metric.hpp"

namespace mmesh {

/// R maps the d free vertex gradients to all d+1 (row 0 balances the rest).
template <int D>
Eigen::Matrix<double, D + 1, D> rmatrix() {
  Eigen::Matrix<double, D + 1, D> R;
  R.row(0).setConstant(-1.0);
  R.template bottomRows<D>() = Mat<D>::Identity();
  return R;
}

template <int D>
struct ElementGradient {
  Eigen::Matrix<double, D + 1, D> g_xi;  ///< rows: d(rho_K T)/d(xi_j)
  Mat<D> Q = Mat<D>::Zero();             ///< A dT/dA + alpha dT/dalpha I
};

/// Gradient of the energy density rho_K T w.r.t. the element's computational
/// vertices: 2 rho R Ehat^{-1} Q.
template <int D>
ElementGradient<D> element_grad_xi(const ElementGeometry<D>& geom, const Mat<D>& Minv,
                                   double rho, const FunctionalParams& prm) {
  ElementGradient<D> out;
  const Mat<D> Ehat_inv = geom.Ehat.inverse();
  const Mat<D> B = geom.Ehat * geom.E.inverse();  // J^{-1}
  Mat<D> A = B * Minv * B.transpose();
  A = 0.5 * (A + A.transpose()).eval();
  const double alpha = A.determinant();
  const auto td = t_and_derivs<D>(A, alpha, prm);
  out.Q = A * td.dT_dA + alpha * td.dT_dalpha * Mat<D>::Identity();
  out.g_xi = 2.0 * rho * rmatrix<D>() * Ehat_inv * out.Q;
  return out;
}

/// Affine form W_K = 2 rho R Ehat^{-1} Q Ehat^{-T} R^T. Applying it to a
/// coordinate column of the element's xi vertices reproduces the matching
/// column of element_grad_xi.
template <int D>
Eigen::Matrix<double, D + 1, D + 1> element_W(const ElementGeometry<D>& geom,
                                              const Mat<D>& Minv, double rho,
                                              const FunctionalParams& prm) {
  const auto eg = element_grad_xi(geom, Minv, rho, prm);
  const Mat<D> Ehat_inv = geom.Ehat.inverse();
  const auto R = rmatrix<D>();
  return 2.0 * rho * R * Ehat_inv * eg.Q * Ehat_inv.transpose() * R.transpose();
}

/// Derivative of the energy density w.r.t. the element metric,
/// dG/dM = -rho U M^{-1} with U = J (-T/2 I + Q) J^{-1}.
template <int D>
struct ElementVelocity {
  Eigen::Matrix<double, D + 1, D> v;  ///< physical vertex velocity rows
  Mat<D> U = Mat<D>::Zero();
  Mat<D> dG_dM = Mat<D>::Zero();
  double T = 0.0;
};

template <int D>
Mat<D> u_tensor(const ElementGeometry<D>& geom, const Mat<D>& Minv,
                const FunctionalParams& prm, double* T_out = nullptr) {
  const auto pb = make_pullback(geom, Minv);
  const auto td = t_and_derivs<D>(pb.A, pb.alpha, prm);
  const Mat<D> core = -0.5 * td.T * Mat<D>::Identity() + pb.A * td.dT_dA +
                      pb.alpha * td.dT_dalpha * Mat<D>::Identity();
  if (T_out) *T_out = td.T;
  return geom.J * core * geom.J.inverse();
}

template <int D>
Mat<D> dG_dM(const ElementGeometry<D>& geom, const Mat<D>& M, const FunctionalParams& prm) {
  const Mat<D> Minv = M.inverse();
  const double rho = std::sqrt(M.determinant());
  return -rho * u_tensor(geom, Minv, prm) * Minv;
}

/// Physical-coordinate vertex velocities. The element metric is the average
/// of the per-vertex metrics; their spatial variation enters through the
/// u-vector chain term.
template <int D>
ElementVelocity<D> element_velocity_x(const ElementGeometry<D>& geom,
                                      const std::array<Mat<D>, D + 1>& vertex_metrics,
                                      const FunctionalParams& prm) {
  ElementVelocity<D> out;
  Mat<D> Mk = Mat<D>::Zero();
  for (const auto& m : vertex_metrics) Mk += m;
  Mk /= (D + 1);
  const Mat<D> Minv = Mk.inverse();
  const double rho = std::sqrt(Mk.determinant());

  out.U = u_tensor(geom, Minv, prm, &out.T);
  out.dG_dM = -rho * out.U * Minv;

  const Eigen::Matrix<double, D + 1, D> V = rmatrix<D>() * geom.E.inverse();
  Eigen::Matrix<double, 1, D + 1> u;
  for (int j = 0; j <= D; ++j) u(0, j) = (out.dG_dM * vertex_metrics[j]).trace();
  out.v = 2.0 * rho * V * out.U -
          Eigen::Matrix<double, D + 1, 1>::Ones() * (u * V) / (D + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Global assembly

template <int D>
struct GradientField {
  std::vector<Vec<D>> grad;  ///< dI_h/dxi_i, boundary-projected
  std::vector<Vec<D>> rhs;   ///< -(P_i/tau) * grad_i, boundary-projected
};

/// Zero corner rows; keep only the tangential part on box-face nodes.
template <int D>
void project_boundary(const SimplicialMesh<D>& mesh, std::vector<Vec<D>>& g) {
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const auto& tag = mesh.boundary_tags[i];
    if (tag.kind == NodeKind::corner)
      g[i].setZero();
    else if (tag.kind == NodeKind::edge)
      g[i][tag.face / 2] = 0.0;
  }
}

/// Star-sum the element gradients (weighted by physical |K|), apply the
/// balancing weights, and project boundary constraints.
template <int D>
GradientField<D> assemble_global(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                                 const std::vector<ElementGradient<D>>& cell_grads,
                                 const std::vector<double>& vol,
                                 const std::vector<double>& P, double tau) {
  MMESH_REQUIRE(tau > 0.0, "tau must be positive");
  GradientField<D> out;
  out.grad.assign(mesh.num_nodes(), Vec<D>::Zero());
  for (int i = 0; i < mesh.num_nodes(); ++i)
    for (const auto& se : topo.stars[i])
      out.grad[i] += vol[se.cell] * cell_grads[se.cell].g_xi.row(se.local).transpose();
  project_boundary(mesh, out.grad);
  out.rhs.resize(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) out.rhs[i] = -(P[i] / tau) * out.grad[i];
  return out;
}

/// Assembled dI_h/dxi for a mesh + metric field (boundary-projected).
template <int D>
std::vector<Vec<D>> energy_gradient(const SimplicialMesh<D>& mesh,
                                    const MeshTopology<D>& topo,
                                    const MetricField<D>& field,
                                    const FunctionalParams& prm) {
  const int nc = mesh.num_cells();
  std::vector<ElementGradient<D>> cg(nc);
  std::vector<double> vol(nc);
  parallel_for(nc, [&](std::size_t c) {
    const auto geom = edge_matrices(mesh, static_cast<int>(c));
    vol[c] = geom.vol;
    cg[c] = element_grad_xi(geom, field.M[c].inverse().eval(), field.rho[c], prm);
  });
  std::vector<Vec<D>> g(mesh.num_nodes(), Vec<D>::Zero());
  for (int i = 0; i < mesh.num_nodes(); ++i)
    for (const auto& se : topo.stars[i])
      g[i] += vol[se.cell] * cg[se.cell].g_xi.row(se.local).transpose();
  project_boundary(mesh, g);
  return g;
}

}  // namespace mmesh
