#pragma once

// Simplicial mesh with dual coordinate fields (physical x, computational xi)
// over a shared cell list, plus element geometry and topology queries.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "mmesh/core.hpp"

namespace mmesh {

enum class NodeKind : unsigned char { interior, edge, corner };

/// Boundary classification of a node. For `edge` nodes, `face` identifies the
/// axis-aligned box face the node lies on: face/2 is the axis, face%2 selects
/// the min/max side.
struct BoundaryTag {
  NodeKind kind = NodeKind::interior;
  int face = -1;
};

template <int D>
struct SimplicialMesh {
  static_assert(D == 2 || D == 3, "only 2- and 3-dimensional meshes");
  static constexpr int dim = D;

  std::vector<Vec<D>> nodes_x;    ///< physical coordinates
  std::vector<Vec<D>> nodes_xi;   ///< computational coordinates
  std::vector<std::array<int, D + 1>> cells;
  std::vector<BoundaryTag> boundary_tags;
  std::array<double, 2 * D> box{};  ///< domain bounds (lo0, hi0, lo1, hi1, ...)

  int num_nodes() const { return static_cast<int>(nodes_x.size()); }
  int num_cells() const { return static_cast<int>(cells.size()); }

  double domain_volume() const {
    double v = 1.0;
    for (int k = 0; k < D; ++k) v *= box[2 * k + 1] - box[2 * k];
    return v;
  }

  double diameter() const {
    double s = 0.0;
    for (int k = 0; k < D; ++k) {
      const double e = box[2 * k + 1] - box[2 * k];
      s += e * e;
    }
    return std::sqrt(s);
  }
};

/// Per-element affine geometry. Columns of E (resp. Ehat) are the physical
/// (resp. computational) edge vectors x_i - x_0; J maps computational to
/// physical edges, J = E * Ehat^{-1}.
template <int D>
struct ElementGeometry {
  Mat<D> E;
  Mat<D> Ehat;
  Mat<D> J;
  double r = 0.0;       ///< det(J)
  double vol = 0.0;     ///< physical simplex volume det(E)/d!
  double volhat = 0.0;  ///< computational simplex volume
};

namespace detail {

template <int D>
inline Mat<D> edge_matrix(const std::vector<Vec<D>>& nodes,
                          const std::array<int, D + 1>& cell) {
  Mat<D> E;
  for (int i = 0; i < D; ++i) E.col(i) = nodes[cell[i + 1]] - nodes[cell[0]];
  return E;
}

}  // namespace detail

template <int D>
ElementGeometry<D> edge_matrices(const SimplicialMesh<D>& mesh, int cell) {
  MMESH_REQUIRE(cell >= 0 && cell < mesh.num_cells(), "cell index out of range");
  ElementGeometry<D> g;
  g.E = detail::edge_matrix<D>(mesh.nodes_x, mesh.cells[cell]);
  g.Ehat = detail::edge_matrix<D>(mesh.nodes_xi, mesh.cells[cell]);
  const double detE = g.E.determinant();
  const double detEhat = g.Ehat.determinant();
  const double tol = 1e-14 * std::pow(mesh.diameter(), D);
  if (detE <= tol || detEhat <= tol) {
    std::ostringstream os;
    os << "degenerate cell " << cell << ": det(E)=" << detE
       << ", det(Ehat)=" << detEhat;
    throw Error(os.str());
  }
  g.J = g.E * g.Ehat.inverse();
  g.r = g.J.determinant();
  g.vol = detE / factorial(D);
  g.volhat = detEhat / factorial(D);
  return g;
}

/// True when every cell has positive orientation in both coordinate fields.
template <int D>
bool admissible(const SimplicialMesh<D>& mesh, int* bad_cell = nullptr) {
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double dx = detail::edge_matrix<D>(mesh.nodes_x, mesh.cells[c]).determinant();
    const double dxi = detail::edge_matrix<D>(mesh.nodes_xi, mesh.cells[c]).determinant();
    if (!(dx > 0.0) || !(dxi > 0.0)) {
      if (bad_cell) *bad_cell = c;
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Topology

struct StarEntry {
  int cell;
  int local;  ///< local vertex index of the node within `cell`
};

template <int D>
struct MeshTopology {
  std::vector<std::vector<StarEntry>> stars;        ///< cells incident to a node
  std::vector<std::vector<int>> node_neighbors;     ///< edge-connected nodes
  std::vector<std::array<int, D + 1>> cell_neighbors;  ///< across facet opposite local vertex j; -1 on boundary
};

template <int D>
MeshTopology<D> build_topology(const SimplicialMesh<D>& mesh) {
  MeshTopology<D> topo;
  const int nn = mesh.num_nodes();
  const int nc = mesh.num_cells();
  topo.stars.resize(nn);
  for (int c = 0; c < nc; ++c)
    for (int j = 0; j <= D; ++j) topo.stars[mesh.cells[c][j]].push_back({c, j});

  topo.node_neighbors.resize(nn);
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a <= D; ++a)
      for (int b = a + 1; b <= D; ++b) {
        topo.node_neighbors[mesh.cells[c][a]].push_back(mesh.cells[c][b]);
        topo.node_neighbors[mesh.cells[c][b]].push_back(mesh.cells[c][a]);
      }
  for (auto& nb : topo.node_neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  // Facet-sharing neighbors: facet key = sorted vertices of the facet
  // opposite a local vertex.
  topo.cell_neighbors.assign(nc, [] {
    std::array<int, D + 1> a;
    a.fill(-1);
    return a;
  }());
  std::map<std::array<int, D>, std::pair<int, int>> open_facets;
  for (int c = 0; c < nc; ++c) {
    for (int j = 0; j <= D; ++j) {
      std::array<int, D> f;
      int k = 0;
      for (int v = 0; v <= D; ++v)
        if (v != j) f[k++] = mesh.cells[c][v];
      std::sort(f.begin(), f.end());
      auto it = open_facets.find(f);
      if (it == open_facets.end()) {
        open_facets.emplace(f, std::make_pair(c, j));
      } else {
        topo.cell_neighbors[c][j] = it->second.first;
        topo.cell_neighbors[it->second.first][it->second.second] = c;
        open_facets.erase(it);
      }
    }
  }
  return topo;
}

/// Element stars as plain cell-index lists.
template <int D>
std::vector<std::vector<int>> element_stars(const SimplicialMesh<D>& mesh) {
  std::vector<std::vector<int>> stars(mesh.num_nodes());
  for (int c = 0; c < mesh.num_cells(); ++c)
    for (int j = 0; j <= D; ++j) stars[mesh.cells[c][j]].push_back(c);
  return stars;
}

// ---------------------------------------------------------------------------
// Structured builders

namespace detail {

template <int D>
void tag_from_box(SimplicialMesh<D>& mesh, double snap_tol = 1e-12) {
  const int nn = mesh.num_nodes();
  mesh.boundary_tags.assign(nn, BoundaryTag{});
  for (int i = 0; i < nn; ++i) {
    int hits = 0;
    int face = -1;
    for (int k = 0; k < D; ++k) {
      const double lo = mesh.box[2 * k];
      const double hi = mesh.box[2 * k + 1];
      const double scale = hi - lo;
      if (std::abs(mesh.nodes_xi[i][k] - lo) <= snap_tol * scale) {
        ++hits;
        face = 2 * k;
      } else if (std::abs(mesh.nodes_xi[i][k] - hi) <= snap_tol * scale) {
        ++hits;
        face = 2 * k + 1;
      }
    }
    if (hits >= 2)
      mesh.boundary_tags[i] = {NodeKind::corner, -1};
    else if (hits == 1)
      mesh.boundary_tags[i] = {NodeKind::edge, face};
  }
}

}  // namespace detail

/// Recompute boundary tags geometrically from the stored box (used after
/// reading a mesh back from disk).
template <int D>
void retag_from_box(SimplicialMesh<D>& mesh) {
  detail::tag_from_box(mesh);
}

/// Staggered triangulation of an axis-aligned box: each grid quad splits
/// along a diagonal whose direction alternates per row, so interior lattice
/// nodes all carry six incident triangles.
inline SimplicialMesh<2> build_structured_mesh(int nx, int ny,
                                               const std::array<double, 4>& box) {
  MMESH_REQUIRE(nx >= 1 && ny >= 1, "subdivision counts must be positive");
  MMESH_REQUIRE(box[1] > box[0] && box[3] > box[2], "empty domain box");
  SimplicialMesh<2> mesh;
  mesh.box = box;
  const int mx = nx + 1, my = ny + 1;
  mesh.nodes_x.reserve(mx * my);
  for (int j = 0; j < my; ++j)
    for (int i = 0; i < mx; ++i) {
      Vec<2> p;
      p[0] = box[0] + (box[1] - box[0]) * i / nx;
      p[1] = box[2] + (box[3] - box[2]) * j / ny;
      mesh.nodes_x.push_back(p);
    }
  mesh.nodes_xi = mesh.nodes_x;

  auto id = [mx](int i, int j) { return j * mx + i; };
  mesh.cells.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int p00 = id(i, j), p10 = id(i + 1, j);
      const int p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
      if (j % 2 == 0) {
        mesh.cells.push_back({p00, p10, p11});
        mesh.cells.push_back({p00, p11, p01});
      } else {
        mesh.cells.push_back({p00, p10, p01});
        mesh.cells.push_back({p10, p11, p01});
      }
    }
  detail::tag_from_box(mesh);
  return mesh;
}

/// Kuhn subdivision of a box grid into six tetrahedra per cell. Smoke-level
/// support for d=3; nodes on two or more box faces are pinned.
inline SimplicialMesh<3> build_structured_mesh_3d(int nx, int ny, int nz,
                                                  const std::array<double, 6>& box) {
  MMESH_REQUIRE(nx >= 1 && ny >= 1 && nz >= 1, "subdivision counts must be positive");
  SimplicialMesh<3> mesh;
  mesh.box = box;
  const int mx = nx + 1, my = ny + 1, mz = nz + 1;
  for (int k = 0; k < mz; ++k)
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < mx; ++i) {
        Vec<3> p;
        p[0] = box[0] + (box[1] - box[0]) * i / nx;
        p[1] = box[2] + (box[3] - box[2]) * j / ny;
        p[2] = box[4] + (box[5] - box[4]) * k / nz;
        mesh.nodes_x.push_back(p);
      }
  mesh.nodes_xi = mesh.nodes_x;

  auto id = [mx, my](int i, int j, int k) { return (k * my + j) * mx + i; };
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                           {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (const auto& perm : perms) {
          std::array<int, 4> cell;
          int c[3] = {i, j, k};
          cell[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            cell[s + 1] = id(c[0], c[1], c[2]);
          }
          // Kuhn simplices inherit the permutation parity; swap to keep a
          // positive orientation.
          Mat<3> E;
          for (int s = 0; s < 3; ++s)
            E.col(s) = mesh.nodes_x[cell[s + 1]] - mesh.nodes_x[cell[0]];
          if (E.determinant() < 0.0) std::swap(cell[2], cell[3]);
          mesh.cells.push_back(cell);
        }
  detail::tag_from_box(mesh);
  return mesh;
}

// ---------------------------------------------------------------------------
// Metric geometry

/// Minimum height of the physical simplex measured in the metric M: the
/// smallest vertex-to-opposite-facet distance after the Cholesky change of
/// coordinates y = L^T x with M = L L^T.
template <int D>
double min_height_in_metric(const ElementGeometry<D>& geom,
                            const std::type_identity_t<Mat<D>>& M) {
  Eigen::LLT<Mat<D>> llt(M);
  MMESH_REQUIRE(llt.info() == Eigen::Success, "metric must be SPD");
  const Mat<D> Lt = llt.matrixL().transpose();

  std::array<Vec<D>, D + 1> y;
  y[0].setZero();
  for (int i = 0; i < D; ++i) y[i + 1] = Lt * geom.E.col(i);

  const double dvol = std::abs((Lt * geom.E).determinant());  // d! * volume
  double hmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= D; ++j) {
    // (d-1)! * measure of the facet opposite vertex j.
    double fmeas;
    std::array<Vec<D>, D> f;
    int k = 0;
    for (int v = 0; v <= D; ++v)
      if (v != j) f[k++] = y[v];
    if constexpr (D == 2) {
      fmeas = (f[1] - f[0]).norm();
    } else {
      fmeas = (f[1] - f[0]).cross(f[2] - f[0]).norm();
    }
    hmin = std::min(hmin, dvol / fmeas);
  }
  return hmin;
}

/// Inscribed-sphere diameter of the computational element (2 * inradius).
template <int D>
double inscribed_diameter_xi(const SimplicialMesh<D>& mesh, int cell) {
  const auto& cv = mesh.cells[cell];
  std::array<Vec<D>, D + 1> p;
  for (int j = 0; j <= D; ++j) p[j] = mesh.nodes_xi[cv[j]];
  if constexpr (D == 2) {
    const double a = (p[1] - p[2]).norm();
    const double b = (p[0] - p[2]).norm();
    const double c = (p[0] - p[1]).norm();
    const double area =
        0.5 * std::abs((p[1] - p[0])[0] * (p[2] - p[0])[1] -
                       (p[1] - p[0])[1] * (p[2] - p[0])[0]);
    return 4.0 * area / (a + b + c);
  } else {
    Mat<3> E;
    for (int i = 0; i < 3; ++i) E.col(i) = p[i + 1] - p[0];
    const double vol = std::abs(E.determinant()) / 6.0;
    double s = 0.0;
    for (int j = 0; j <= 3; ++j) {
      std::array<Vec<3>, 3> f;
      int k = 0;
      for (int v = 0; v <= 3; ++v)
        if (v != j) f[k++] = p[v];
      s += 0.5 * (f[1] - f[0]).cross(f[2] - f[0]).norm();
    }
    return 6.0 * vol / s;
  }
}

}  // namespace mmesh
