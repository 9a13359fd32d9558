#pragma once

// The A-structure energy family: T(A, alpha) and its derivatives for the
// trace/log-det, Huang, and Kolasinski-Huang kernels, plus the discrete
// energy I_h = sum_K |K| rho_K T(A_K, alpha_K).

#include <cmath>
#include <string>

#include "mmesh/core.hpp"
#include "mmesh/mesh.hpp"
#include "mmesh/metric.hpp"

namespace mmesh {

enum class FunctionalKind { proposed, huang, kolasinski_huang };

inline std::string to_string(FunctionalKind k) {
  switch (k) {
    case FunctionalKind::proposed: return "proposed";
    case FunctionalKind::huang: return "huang";
    case FunctionalKind::kolasinski_huang: return "kolasinski_huang";
  }
  return "?";
}

inline FunctionalKind functional_kind_from_string(const std::string& s) {
  if (s == "proposed") return FunctionalKind::proposed;
  if (s == "huang") return FunctionalKind::huang;
  if (s == "kolasinski_huang" || s == "kh") return FunctionalKind::kolasinski_huang;
  throw Error("unknown functional kind '" + s + "'");
}

struct FunctionalParams {
  FunctionalKind kind = FunctionalKind::proposed;
  double gamma = 1.25;
  double mu = 1.0 / 3.0;  ///< huang only
  double theta = 1.0;

  void validate(int d) const {
    MMESH_REQUIRE(theta > 0.0, "theta must be positive");
    if (kind == FunctionalKind::proposed)
      MMESH_REQUIRE(gamma > 1.0, "trace/log-det kernel needs gamma > 1");
    else
      MMESH_REQUIRE(gamma > 0.0, "gamma must be positive");
    if (kind == FunctionalKind::huang)
      MMESH_REQUIRE(mu >= 0.0 && mu <= 1.0, "mu must lie in [0,1]");
    (void)d;
  }
};

template <int D>
struct TDerivs {
  double T = 0.0;
  Mat<D> dT_dA = Mat<D>::Zero();
  double dT_dalpha = 0.0;
};

/// Pullback of the dual metric: A = J^{-1} M^{-1} J^{-T}, alpha = det(A).
template <int D>
struct Pullback {
  Mat<D> A;
  double alpha;
  double tr;
};

template <int D>
Pullback<D> make_pullback(const ElementGeometry<D>& geom, const Mat<D>& Minv) {
  Pullback<D> p;
  const Mat<D> B = geom.Ehat * geom.E.inverse();  // J^{-1}
  p.A = B * Minv * B.transpose();
  p.A = 0.5 * (p.A + p.A.transpose()).eval();
  p.alpha = p.A.determinant();
  p.tr = p.A.trace();
  return p;
}

/// Kernel value and derivatives. `A` and `alpha` are treated as independent
/// arguments (alpha = det(A) for actual pullbacks); matrix derivatives use
/// the free-entry convention.
template <int D>
TDerivs<D> t_and_derivs(const Mat<D>& A, double alpha, const FunctionalParams& prm) {
  prm.validate(D);
  const double p = 0.5 * D * prm.gamma;
  const double tr = A.trace();
  TDerivs<D> out;
  switch (prm.kind) {
    case FunctionalKind::proposed: {
      MMESH_REQUIRE(alpha > 0.0, "log-det kernel needs alpha > 0");
      const double dp = std::pow(static_cast<double>(D), p);
      const double coef = dp * 0.5 * prm.gamma * std::pow(prm.theta, p);
      out.T = std::pow(tr, p) - coef * std::log(alpha);
      out.dT_dA = p * std::pow(tr, p - 1.0) * Mat<D>::Identity();
      out.dT_dalpha = -coef / alpha;
      break;
    }
    case FunctionalKind::huang: {
      const double dp = std::pow(static_cast<double>(D), p);
      out.T = prm.mu * std::pow(tr, p) + (1.0 - 2.0 * prm.mu) * dp * std::pow(alpha, 0.5 * prm.gamma);
      out.dT_dA = prm.mu * p * std::pow(tr, p - 1.0) * Mat<D>::Identity();
      out.dT_dalpha =
          (1.0 - 2.0 * prm.mu) * dp * 0.5 * prm.gamma * std::pow(alpha, 0.5 * prm.gamma - 1.0);
      break;
    }
    case FunctionalKind::kolasinski_huang: {
      const Mat<D> Dev = A - prm.theta * Mat<D>::Identity();
      const double fn = Dev.norm();  // Frobenius over all d^2 entries
      out.T = std::pow(fn, 2.0 * prm.gamma);
      out.dT_dA = fn > 0.0
                      ? (2.0 * prm.gamma * std::pow(fn, 2.0 * prm.gamma - 2.0) * Dev).eval()
                      : Mat<D>::Zero().eval();
      out.dT_dalpha = 0.0;
      break;
    }
  }
  return out;
}

/// Discrete energy I_h = sum_K |K| rho_K T(A_K, alpha_K) with |K| the
/// physical element volume.
template <int D>
double energy(const SimplicialMesh<D>& mesh, const MetricField<D>& field,
              const FunctionalParams& prm) {
  MMESH_REQUIRE(static_cast<int>(field.M.size()) == mesh.num_cells(),
                "metric field does not match mesh");
  const int nc = mesh.num_cells();
  std::vector<double> terms(nc);
  for (int c = 0; c < nc; ++c) {
    const auto geom = edge_matrices(mesh, c);
    MMESH_REQUIRE(geom.r > 0.0, "non-admissible cell " + std::to_string(c));
    const Mat<D> Minv = field.M[c].inverse();
    const auto pb = make_pullback(geom, Minv);
    terms[c] = geom.vol * field.rho[c] * t_and_derivs<D>(pb.A, pb.alpha, prm).T;
  }
  return pairwise_sum(terms);
}

// ---------------------------------------------------------------------------
// Coercivity constants: T(A) >= c0 tr(A)^{d gamma/2} - C(c0, theta), and the
// density-level lift G >= alpha tr(A)^{d gamma/2} - beta under
// m0 I <= M <= m1 I.

struct CoercivityConstants {
  double c0 = 0.0;
  double C = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

inline CoercivityConstants coercivity_constants(int d, const FunctionalParams& prm,
                                                double m0 = 1.0, double m1 = 1.0) {
  MMESH_REQUIRE(prm.kind == FunctionalKind::proposed,
                "coercivity constants apply to the trace/log-det kernel");
  MMESH_REQUIRE(prm.gamma > 1.0, "coercivity requires gamma > 1");
  const double p = 0.5 * d * prm.gamma;
  const double tp = std::pow(prm.theta, p);
  CoercivityConstants cc;
  // x - a ln x >= c x + a (1 - ln(a/(1-c))) for a > 0, c in (0,1); picking
  // 1 - c0 = min(1, theta^p / e) keeps the offset C nonnegative.
  cc.c0 = 1.0 - std::min(1.0, tp / M_E);
  cc.C = std::pow(static_cast<double>(d), p) * tp *
         (std::log(tp / (1.0 - cc.c0)) - 1.0);
  if (cc.C < 0.0) cc.C = 0.0;  // guard round-off at the boundary case
  cc.alpha = cc.c0 * std::pow(m0, 0.5 * d);
  cc.beta = std::pow(m1, 0.5 * d) * cc.C;
  return cc;
}

}  // namespace mmesh
