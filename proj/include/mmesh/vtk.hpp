#pragma once

// Legacy ASCII VTK unstructured-grid writer and a reader for the same subset,
// enough to dump snapshots with quality fields and to resume a run.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "mmesh/core.hpp"
#include "mmesh/mesh.hpp"

namespace mmesh {

template <int D>
struct VtkFields {
  std::vector<std::pair<std::string, std::vector<double>>> point_scalars;
  std::vector<std::pair<std::string, std::vector<double>>> cell_scalars;
  std::vector<std::pair<std::string, std::vector<Mat<D>>>> cell_tensors;
};

namespace detail {

inline void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace detail

/// Writes mesh + fields as a legacy ASCII unstructured grid. The computational
/// coordinates are stored as a POINT_DATA vector field `xi` so a run can be
/// resumed from the file.
template <int D>
void write_vtk(const std::string& path, const SimplicialMesh<D>& mesh,
               const VtkFields<D>& fields = {}) {
  std::ofstream os(path);
  MMESH_REQUIRE(os.good(), "cannot open '" + path + "' for writing");
  const int nn = mesh.num_nodes();
  const int nc = mesh.num_cells();

  os << "# vtk DataFile Version 3.0\n";
  os << "mmesh snapshot box";
  for (double b : mesh.box) {
    os << ' ';
    detail::write_double(os, b);
  }
  os << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nn << " double\n";
  for (int i = 0; i < nn; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (k) os << ' ';
      detail::write_double(os, k < D ? mesh.nodes_x[i][k] : 0.0);
    }
    os << '\n';
  }
  os << "CELLS " << nc << ' ' << nc * (D + 2) << '\n';
  for (const auto& cell : mesh.cells) {
    os << (D + 1);
    for (int v : cell) os << ' ' << v;
    os << '\n';
  }
  os << "CELL_TYPES " << nc << '\n';
  for (int c = 0; c < nc; ++c) os << (D == 2 ? 5 : 10) << '\n';

  os << "POINT_DATA " << nn << '\n';
  os << "VECTORS xi double\n";
  for (int i = 0; i < nn; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (k) os << ' ';
      detail::write_double(os, k < D ? mesh.nodes_xi[i][k] : 0.0);
    }
    os << '\n';
  }
  for (const auto& [name, vals] : fields.point_scalars) {
    MMESH_REQUIRE(static_cast<int>(vals.size()) == nn, "point field size mismatch");
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : vals) {
      detail::write_double(os, v);
      os << '\n';
    }
  }

  if (!fields.cell_scalars.empty() || !fields.cell_tensors.empty()) {
    os << "CELL_DATA " << nc << '\n';
    for (const auto& [name, vals] : fields.cell_scalars) {
      MMESH_REQUIRE(static_cast<int>(vals.size()) == nc, "cell field size mismatch");
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : vals) {
        detail::write_double(os, v);
        os << '\n';
      }
    }
    for (const auto& [name, tens] : fields.cell_tensors) {
      MMESH_REQUIRE(static_cast<int>(tens.size()) == nc, "cell tensor size mismatch");
      os << "TENSORS " << name << " double\n";
      for (const auto& M : tens) {
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            if (c) os << ' ';
            detail::write_double(os, (r < D && c < D) ? M(r, c) : 0.0);
          }
          os << '\n';
        }
      }
    }
  }
  MMESH_REQUIRE(os.good(), "write error on '" + path + "'");
}

/// Reads the subset written by write_vtk. Fields are returned alongside the
/// mesh; boundary tags are recomputed geometrically from the stored box.
template <int D>
SimplicialMesh<D> read_vtk(const std::string& path, VtkFields<D>* fields = nullptr) {
  std::ifstream is(path);
  MMESH_REQUIRE(is.good(), "cannot open '" + path + "' for reading");
  SimplicialMesh<D> mesh;
  std::string tok;

  // header comment line may carry the domain box
  std::string line;
  std::getline(is, line);  // version line
  std::getline(is, line);  // title
  {
    std::istringstream ls(line);
    std::string w;
    ls >> w >> w;  // "mmesh snapshot"
    if (ls >> w && w == "box") {
      for (int k = 0; k < 2 * D; ++k) ls >> mesh.box[k];
    }
  }

  int nn = 0, nc = 0;
  bool in_cell_section = false;
  while (is >> tok) {
    if (tok == "POINTS") {
      is >> nn >> tok;
      mesh.nodes_x.resize(nn);
      for (int i = 0; i < nn; ++i) {
        double c[3];
        is >> c[0] >> c[1] >> c[2];
        for (int k = 0; k < D; ++k) mesh.nodes_x[i][k] = c[k];
      }
    } else if (tok == "CELLS") {
      int total;
      is >> nc >> total;
      mesh.cells.resize(nc);
      for (int c = 0; c < nc; ++c) {
        int cnt;
        is >> cnt;
        MMESH_REQUIRE(cnt == D + 1, "unsupported cell arity in VTK file");
        for (int j = 0; j <= D; ++j) is >> mesh.cells[c][j];
      }
    } else if (tok == "CELL_TYPES") {
      int n;
      is >> n;
      for (int i = 0; i < n; ++i) is >> tok;
    } else if (tok == "VECTORS") {
      std::string name, type;
      is >> name >> type;
      if (name == "xi") {
        mesh.nodes_xi.resize(nn);
        for (int i = 0; i < nn; ++i) {
          double c[3];
          is >> c[0] >> c[1] >> c[2];
          for (int k = 0; k < D; ++k) mesh.nodes_xi[i][k] = c[k];
        }
      } else {
        for (int i = 0; i < 3 * nn; ++i) is >> tok;
      }
    } else if (tok == "SCALARS") {
      std::string name, type, rest;
      int comps = 1;
      is >> name >> type;
      std::getline(is, rest);  // optional component count
      {
        std::istringstream ms(rest);
        int c;
        if (ms >> c && c >= 1) comps = c;
      }
      is >> tok;  // LOOKUP_TABLE
      is >> tok;  // table name
      const bool cell_field = in_cell_section;
      const int n = (cell_field ? nc : nn) * comps;
      std::vector<double> vals(n);
      for (int i = 0; i < n; ++i) is >> vals[i];
      if (fields) {
        if (cell_field)
          fields->cell_scalars.emplace_back(name, std::move(vals));
        else
          fields->point_scalars.emplace_back(name, std::move(vals));
      }
    } else if (tok == "TENSORS") {
      std::string name, type;
      is >> name >> type;
      std::vector<Mat<D>> tens(nc);
      for (int c = 0; c < nc; ++c) {
        double m[9];
        for (double& v : m) is >> v;
        for (int r = 0; r < D; ++r)
          for (int cc = 0; cc < D; ++cc) tens[c](r, cc) = m[3 * r + cc];
      }
      if (fields) fields->cell_tensors.emplace_back(name, std::move(tens));
    } else if (tok == "POINT_DATA") {
      int n;
      is >> n;
      in_cell_section = false;
    } else if (tok == "CELL_DATA") {
      int n;
      is >> n;
      in_cell_section = true;
    }
  }
  MMESH_REQUIRE(nn > 0 && nc > 0, "no mesh found in '" + path + "'");
  if (mesh.nodes_xi.empty()) mesh.nodes_xi = mesh.nodes_x;
  retag_from_box(mesh);
  return mesh;
}

}  // namespace mmesh
