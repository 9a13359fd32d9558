#pragma once

// Seeded generators for random SPD matrices and perturbed test meshes.
// Used by the built-in property checks and the test suites.

#include <random>

#include "mmesh/core.hpp"
#include "mmesh/mesh.hpp"

namespace mmesh {

using Rng = std::mt19937_64;

/// Random rotation matrix (uniform angle in 2d, QR of a Gaussian in 3d).
template <int D>
Mat<D> random_rotation(Rng& rng) {
  if constexpr (D == 2) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    const double a = u(rng);
    Mat<2> Q;
    Q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return Q;
  } else {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat<D> A;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) A(i, j) = g(rng);
    Eigen::HouseholderQR<Mat<D>> qr(A);
    Mat<D> Q = qr.householderQ();
    if (Q.determinant() < 0.0) Q.col(0) *= -1.0;
    return Q;
  }
}

/// Random SPD matrix with eigenvalues log-uniform in [lo, hi].
template <int D>
Mat<D> random_spd(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Vec<D> lam;
  for (int i = 0; i < D; ++i) lam[i] = std::exp(u(rng));
  const Mat<D> Q = random_rotation<D>(rng);
  return Q * lam.asDiagonal() * Q.transpose();
}

/// Random symmetric matrix with entries in [-s, s].
template <int D>
Mat<D> random_symmetric(Rng& rng, double s = 1.0) {
  std::uniform_real_distribution<double> u(-s, s);
  Mat<D> A;
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j) A(i, j) = A(j, i) = u(rng);
  return A;
}

template <int D>
Mat<D> random_matrix(Rng& rng, double s = 1.0) {
  std::uniform_real_distribution<double> u(-s, s);
  Mat<D> A;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) A(i, j) = u(rng);
  return A;
}

/// Jitter interior nodes (and boundary nodes tangentially) of both coordinate
/// fields by at most `amp` times the local grid spacing, keeping the mesh
/// admissible by rejection.
template <int D>
void perturb_mesh(SimplicialMesh<D>& mesh, Rng& rng, double amp = 0.25,
                  bool move_x = true, bool move_xi = true) {
  std::uniform_real_distribution<double> u(-amp, amp);
  // crude local spacing: shortest incident edge in xi
  const auto topo = build_topology(mesh);
  for (int attempt = 0; attempt < 40; ++attempt) {
    SimplicialMesh<D> trial = mesh;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      double h = std::numeric_limits<double>::infinity();
      for (int nb : topo.node_neighbors[i])
        h = std::min(h, (mesh.nodes_xi[nb] - mesh.nodes_xi[i]).norm());
      Vec<D> dx, dxi;
      for (int k = 0; k < D; ++k) {
        dx[k] = u(rng) * h;
        dxi[k] = u(rng) * h;
      }
      const auto& tag = mesh.boundary_tags[i];
      if (tag.kind == NodeKind::corner) continue;
      if (tag.kind == NodeKind::edge) dx[tag.face / 2] = dxi[tag.face / 2] = 0.0;
      if (move_x) trial.nodes_x[i] += dx;
      if (move_xi) trial.nodes_xi[i] += dxi;
    }
    if (admissible(trial)) {
      mesh = std::move(trial);
      return;
    }
    amp *= 0.5;
  }
  throw Error("perturb_mesh: could not keep the mesh admissible");
}

}  // namespace mmesh
