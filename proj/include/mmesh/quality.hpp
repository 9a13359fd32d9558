#pragma once

// Element and global mesh quality (equidistribution, alignment, Euclidean
// shape), nonsingularity lower-bound constants, and interpolation error of
// the piecewise-linear interpolant against an analytic field.

#include <functional>
#include <vector>

#include "mmesh/core.hpp"
#include "mmesh/functional.hpp"
#include "mmesh/mesh.hpp"
#include "mmesh/metric.hpp"

namespace mmesh {

template <int D>
struct QualityReport {
  double q_eq = 0.0, q_ali = 0.0, q_geo = 0.0;  ///< RMS of element values
  std::vector<double> per_eq;       ///< Q_eq,K
  std::vector<double> per_ali_inv;  ///< 1/Q_ali,K (element-wise statistic)
  std::vector<double> per_geo;      ///< Q_geo,K
  double min_vol = 0.0;             ///< physical
  double min_height = 0.0;          ///< in the metric
  double e_l2 = -1.0, e_h1 = -1.0;  ///< set by interp_error callers
};

/// Q_eq,K = |K| rho_K / (sigma_h / NC) with physical volumes,
/// Q_ali,K = tr(J^T M J) / (d det(J^T M J)^{1/d}), Q_geo,K likewise with
/// M = I. The global numbers are root-mean-squares over the elements.
template <int D>
QualityReport<D> quality_metrics(const SimplicialMesh<D>& mesh,
                                 const MetricField<D>& field) {
  const int nc = mesh.num_cells();
  MMESH_REQUIRE(static_cast<int>(field.M.size()) == nc, "metric field size mismatch");
  QualityReport<D> rep;
  rep.per_eq.resize(nc);
  rep.per_ali_inv.resize(nc);
  rep.per_geo.resize(nc);
  rep.min_vol = std::numeric_limits<double>::infinity();
  rep.min_height = std::numeric_limits<double>::infinity();

  std::vector<double> mv(nc);
  for (int c = 0; c < nc; ++c) mv[c] = edge_matrices(mesh, c).vol * field.rho[c];
  const double sigma_h = pairwise_sum(mv);

  double se = 0.0, sa = 0.0, sg = 0.0;
  for (int c = 0; c < nc; ++c) {
    const auto geom = edge_matrices(mesh, c);
    const double q_eq = mv[c] / (sigma_h / nc);

    const Mat<D> JMJ = geom.J.transpose() * field.M[c] * geom.J;
    const double q_ali =
        JMJ.trace() / (D * std::pow(JMJ.determinant(), 1.0 / D));
    const Mat<D> JJ = geom.J.transpose() * geom.J;
    const double q_geo = JJ.trace() / (D * std::pow(JJ.determinant(), 1.0 / D));

    rep.per_eq[c] = q_eq;
    rep.per_ali_inv[c] = 1.0 / q_ali;
    rep.per_geo[c] = q_geo;
    se += q_eq * q_eq;
    sa += q_ali * q_ali;
    sg += q_geo * q_geo;
    rep.min_vol = std::min(rep.min_vol, geom.vol);
    rep.min_height = std::min(rep.min_height, min_height_in_metric(geom, field.M[c]));
  }
  rep.q_eq = std::sqrt(se / nc);
  rep.q_ali = std::sqrt(sa / nc);
  rep.q_geo = std::sqrt(sg / nc);
  return rep;
}

// ---------------------------------------------------------------------------
// Nonsingularity lower bounds

struct CorollaryBounds {
  double C1 = 0.0, C2 = 0.0;
  double a_bound = 0.0;    ///< lower bound on metric element heights
  double vol_bound = 0.0;  ///< lower bound on physical element volumes
};

namespace detail {

/// Diameter and height of the regular unit-volume reference simplex.
template <int D>
constexpr std::pair<double, double> reference_simplex() {
  if constexpr (D == 2) {
    // equilateral, area 1: side 2/3^{1/4}, height 3^{1/4}
    return {1.5196713713031853, 1.3160740129524924};
  } else {
    // regular tetrahedron, volume 1: edge (6 sqrt 2)^{1/3}, height edge*sqrt(2/3)
    const double edge = 2.0396489026555056;
    return {edge, 1.6653663553231164};
  }
}

}  // namespace detail

/// Evaluates the uniform lower bounds on metric heights and element volumes
/// from the coercivity constants, the initial energy, and the computational
/// mesh regularity (r0 from inscribed diameters).
template <int D>
CorollaryBounds corollary_bounds(const SimplicialMesh<D>& mesh,
                                 const MetricField<D>& field,
                                 const FunctionalParams& prm, double I_h0) {
  MMESH_REQUIRE(prm.gamma > 1.0, "lower bounds require gamma > 1");
  const int NC = mesh.num_cells();
  const double gamma = prm.gamma;
  const auto cc = coercivity_constants(D, prm, field.m0, field.m1);
  const auto [h_ref, a_ref] = detail::reference_simplex<D>();

  double r0 = std::numeric_limits<double>::infinity();
  for (int c = 0; c < NC; ++c)
    r0 = std::min(r0, inscribed_diameter_xi(mesh, c) * std::pow(NC, 1.0 / D));

  CorollaryBounds out;
  const double dfact = factorial(D);
  out.C1 = std::pow(cc.alpha * std::pow(a_ref, 4.0 * gamma) /
                        (dfact * std::pow(h_ref, 4.0 * gamma) *
                         (cc.beta * mesh.domain_volume() + I_h0)),
                    1.0 / (4.0 * gamma - D));
  out.C2 = std::pow(out.C1, D) / dfact;
  out.a_bound = out.C1 * std::pow(r0, gamma / (gamma - 1.0)) *
                std::pow(field.m1, -0.5 / (gamma - 1.0)) *
                std::pow(NC, -gamma / (D * gamma - D));
  out.vol_bound = out.C2 * std::pow(r0, D * gamma / (gamma - 1.0)) *
                  std::pow(field.m1, -0.5 * D / (gamma - 1.0) - 0.5 * D) *
                  std::pow(NC, -gamma / (gamma - 1.0));
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation error

namespace detail {

/// Degree-4 simplex quadrature: the 6-point Dunavant rule on triangles and a
/// collapsed-coordinate tensor Gauss rule on tetrahedra (exact to degree 4).
template <int D>
struct SimplexQuadrature {
  std::vector<Eigen::Matrix<double, D + 1, 1>> bary;
  std::vector<double> weight;  ///< sums to one; scale by element volume

  SimplexQuadrature() {
    if constexpr (D == 2) {
      const double a1 = 0.445948490915965, w1 = 0.223381589678011;
      const double a2 = 0.091576213509771, w2 = 0.109951743655322;
      for (const auto& [a, w] :
           {std::pair{a1, w1}, std::pair{a2, w2}}) {
        const double b = 1.0 - 2.0 * a;
        bary.push_back({a, a, b});
        bary.push_back({a, b, a});
        bary.push_back({b, a, a});
        weight.insert(weight.end(), 3, w);
      }
    } else {
      // Duffy transform of a 4^3 Gauss-Legendre grid
      const double gp[4] = {0.069431844202974, 0.330009478207572,
                            0.669990521792428, 0.930568155797026};
      const double gw[4] = {0.173927422568727, 0.326072577431273,
                            0.326072577431273, 0.173927422568727};
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          for (int k = 0; k < 4; ++k) {
            const double u = gp[i], v = gp[j], w = gp[k];
            const double x = u;
            const double y = v * (1.0 - u);
            const double z = w * (1.0 - u) * (1.0 - v);
            const double jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
            Eigen::Matrix<double, 4, 1> b;
            b << 1.0 - x - y - z, x, y, z;
            bary.push_back(b);
            weight.push_back(gw[i] * gw[j] * gw[k] * jac * 6.0);
          }
    }
  }
};

}  // namespace detail

enum class ErrorNorm { l2, h1 };

/// Error of the piecewise-linear interpolant of `u` on the physical mesh.
/// The H1 seminorm needs `grad`; L2 needs only values.
template <int D>
double interp_error(const SimplicialMesh<D>& mesh,
                    const std::function<double(const Vec<D>&)>& u,
                    ErrorNorm norm = ErrorNorm::l2,
                    const std::function<Vec<D>(const Vec<D>&)>& grad = nullptr) {
  static const detail::SimplexQuadrature<D> quad;
  MMESH_REQUIRE(norm == ErrorNorm::l2 || grad, "H1 error needs the analytic gradient");

  std::vector<double> uh(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) uh[i] = u(mesh.nodes_x[i]);

  std::vector<double> contrib(mesh.num_cells());
  parallel_for(mesh.num_cells(), [&](std::size_t c) {
    const auto& cv = mesh.cells[c];
    const auto geom = edge_matrices(mesh, static_cast<int>(c));
    double acc = 0.0;
    if (norm == ErrorNorm::l2) {
      for (std::size_t q = 0; q < quad.bary.size(); ++q) {
        Vec<D> p = Vec<D>::Zero();
        double vh = 0.0;
        for (int j = 0; j <= D; ++j) {
          p += quad.bary[q][j] * mesh.nodes_x[cv[j]];
          vh += quad.bary[q][j] * uh[cv[j]];
        }
        const double diff = vh - u(p);
        acc += quad.weight[q] * diff * diff;
      }
    } else {
      Vec<D> du;
      for (int i = 0; i < D; ++i) du[i] = uh[cv[i + 1]] - uh[cv[0]];
      const Vec<D> gh = geom.E.transpose().fullPivLu().solve(du);
      for (std::size_t q = 0; q < quad.bary.size(); ++q) {
        Vec<D> p = Vec<D>::Zero();
        for (int j = 0; j <= D; ++j) p += quad.bary[q][j] * mesh.nodes_x[cv[j]];
        acc += quad.weight[q] * (gh - grad(p)).squaredNorm();
      }
    }
    contrib[c] = acc * geom.vol;
  });
  return std::sqrt(pairwise_sum(contrib));
}

/// Uniform histogram (50 bins over [min, max]) of a per-cell quantity.
struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<int> count;
};

inline Histogram histogram(const std::vector<double>& values, int bins = 50) {
  Histogram h;
  h.count.assign(bins, 0);
  if (values.empty()) return h;
  h.lo = *std::min_element(values.begin(), values.end());
  h.hi = *std::max_element(values.begin(), values.end());
  const double width = h.hi > h.lo ? (h.hi - h.lo) : 1.0;
  for (double v : values) {
    int b = static_cast<int>((v - h.lo) / width * bins);
    h.count[std::clamp(b, 0, bins - 1)] += 1;
  }
  return h;
}

}  // namespace mmesh
