#pragma once

// Point location by neighbor walking (exhaustive fallback) and linear field
// transfer between meshes, including the outer-loop physical point update.

#include <vector>

#include "mmesh/core.hpp"
#include "mmesh/mesh.hpp"

namespace mmesh {

template <int D>
struct LocationResult {
  int cell = -1;
  Eigen::Matrix<double, D + 1, 1> bary = Eigen::Matrix<double, D + 1, 1>::Zero();
  bool clamped = false;  ///< point fell outside the mesh hull
};

namespace detail {

template <int D>
Eigen::Matrix<double, D + 1, 1> barycentric(const std::vector<Vec<D>>& nodes,
                                            const std::array<int, D + 1>& cell,
                                            const Vec<D>& p) {
  Mat<D> E;
  for (int i = 0; i < D; ++i) E.col(i) = nodes[cell[i + 1]] - nodes[cell[0]];
  const Vec<D> rhs = p - nodes[cell[0]];
  const Vec<D> b = E.fullPivLu().solve(rhs);
  Eigen::Matrix<double, D + 1, 1> bary;
  bary[0] = 1.0 - b.sum();
  for (int i = 0; i < D; ++i) bary[i + 1] = b[i];
  return bary;
}

}  // namespace detail

/// Locate `p` against the given coordinate field (nodes_x or nodes_xi).
/// Walks across facet neighbors from `seed`; scans all cells if the walk
/// stalls. Barycentric coordinates down to -1e-10 count as inside.
template <int D>
LocationResult<D> locate(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                         const std::vector<Vec<D>>& nodes, const Vec<D>& p,
                         int seed = 0) {
  constexpr double kInsideTol = -1e-10;
  LocationResult<D> best;
  double best_min = -std::numeric_limits<double>::infinity();

  int cell = seed >= 0 && seed < mesh.num_cells() ? seed : 0;
  int prev = -1;
  const int max_steps = 2 * mesh.num_cells() + 8;
  for (int step = 0; step < max_steps; ++step) {
    const auto bary = detail::barycentric<D>(nodes, mesh.cells[cell], p);
    int worst = 0;
    for (int j = 1; j <= D; ++j)
      if (bary[j] < bary[worst]) worst = j;
    if (bary[worst] > best_min) {
      best_min = bary[worst];
      best.cell = cell;
      best.bary = bary;
    }
    if (bary[worst] >= kInsideTol) return best;  // inside
    const int next = topo.cell_neighbors[cell][worst];
    if (next < 0 || next == prev) break;  // hull reached or ping-pong
    prev = cell;
    cell = next;
  }

  // exhaustive fallback: the cell with the largest minimum coordinate
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto bary = detail::barycentric<D>(nodes, mesh.cells[c], p);
    const double m = bary.minCoeff();
    if (m > best_min) {
      best_min = m;
      best.cell = c;
      best.bary = bary;
      if (m >= kInsideTol) return best;
    }
  }
  // outside: clamp to the closest cell's nonnegative combination
  best.clamped = true;
  for (int j = 0; j <= D; ++j) best.bary[j] = std::max(best.bary[j], 0.0);
  best.bary /= best.bary.sum();
  return best;
}

template <int D>
LocationResult<D> locate_x(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                           const Vec<D>& p, int seed = 0) {
  return locate(mesh, topo, mesh.nodes_x, p, seed);
}

template <int D>
LocationResult<D> locate_xi(const SimplicialMesh<D>& mesh, const MeshTopology<D>& topo,
                            const Vec<D>& p, int seed = 0) {
  return locate(mesh, topo, mesh.nodes_xi, p, seed);
}

/// Linear interpolation of a nodal field at arbitrary points of the source
/// mesh's physical coordinates. Exact for globally linear fields; clamped
/// barycentric weights keep transferred values inside the source range.
template <int D>
std::vector<double> transfer(const SimplicialMesh<D>& old_mesh,
                             const MeshTopology<D>& old_topo,
                             const std::vector<double>& values,
                             const std::vector<Vec<D>>& new_points) {
  MMESH_REQUIRE(static_cast<int>(values.size()) == old_mesh.num_nodes(),
                "nodal value count mismatch");
  std::vector<double> out(new_points.size());
  int seed = 0;
  for (std::size_t q = 0; q < new_points.size(); ++q) {
    const auto loc = locate_x(old_mesh, old_topo, new_points[q], seed);
    seed = loc.cell;
    double v = 0.0;
    for (int j = 0; j <= D; ++j) v += loc.bary[j] * values[old_mesh.cells[loc.cell][j]];
    out[q] = v;
  }
  return out;
}

/// Physical point update for the outer loop: evaluate the piecewise-linear
/// map carried by the deformed xi-mesh (nodal values = current x) at the
/// reference computational nodes. Seeds each query with the node's own star.
template <int D>
std::vector<Vec<D>> remap_physical(const SimplicialMesh<D>& mesh,
                                   const MeshTopology<D>& topo,
                                   const std::vector<Vec<D>>& xi_ref) {
  MMESH_REQUIRE(xi_ref.size() == mesh.nodes_xi.size(), "reference grid size mismatch");
  std::vector<Vec<D>> out(xi_ref.size());
  parallel_for(xi_ref.size(), [&](std::size_t i) {
    const int seed = topo.stars[i].empty() ? 0 : topo.stars[i][0].cell;
    const auto loc = locate_xi(mesh, topo, xi_ref[i], seed);
    Vec<D> x = Vec<D>::Zero();
    for (int j = 0; j <= D; ++j) x += loc.bary[j] * mesh.nodes_x[mesh.cells[loc.cell][j]];
    out[i] = x;
  });
  return out;
}

}  // namespace mmesh
