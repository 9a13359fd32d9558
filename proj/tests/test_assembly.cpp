#include <catch2/catch_amalgamated.hpp>

#include "mmesh/assembly.hpp"
#include "mmesh/checks.hpp"
#include "mmesh/mesh.hpp"
#include "mmesh/metric.hpp"
#include "mmesh/random.hpp"

using namespace mmesh;

namespace {

SimplicialMesh<2> random_mesh(Rng& rng, int nx, int ny) {
  auto mesh = build_structured_mesh(nx, ny, {0, 1, 0, 1});
  perturb_mesh(mesh, rng, 0.25);
  return mesh;
}

MetricField<2> random_metric(Rng& rng, const SimplicialMesh<2>& mesh, double lo = 0.5,
                             double hi = 4.0) {
  std::vector<Mat<2>> M(mesh.num_cells());
  for (auto& m : M) m = random_spd<2>(rng, lo, hi);
  auto f = make_metric_field<2>(std::move(M));
  global_scalars(mesh, f, 1.25);
  return f;
}

}  // namespace

TEST_CASE("element gradient vanishes at the aligned state") {
  SimplicialMesh<2> m;
  m.box = {0, 1, 0, 1};
  m.nodes_x = {{0, 0}, {1, 0}, {0, 1}};
  m.nodes_xi = m.nodes_x;
  m.cells = {{0, 1, 2}};
  retag_from_box(m);
  const auto geom = edge_matrices(m, 0);
  const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, 1.0};
  const auto eg = element_grad_xi<2>(geom, Mat<2>::Identity(), 1.0, prm);
  CHECK(eg.Q.norm() <= 1e-14);
  CHECK(eg.g_xi.norm() <= 1e-13);
}

TEST_CASE("element gradient rows sum to zero") {
  Rng rng(21);
  const auto mesh = random_mesh(rng, 3, 3);
  const auto field = random_metric(rng, mesh);
  const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto geom = edge_matrices(mesh, c);
    const auto eg =
        element_grad_xi<2>(geom, field.M[c].inverse().eval(), field.rho[c], prm);
    const Vec<2> rowsum = eg.g_xi.colwise().sum().transpose();
    CHECK(rowsum.norm() <= 1e-13 * (eg.g_xi.norm() + 1.0));
  }
}

TEST_CASE("assembled gradient matches finite differences for all kernels") {
  Rng rng(31);
  const auto mesh = random_mesh(rng, 4, 3);
  const auto field = random_metric(rng, mesh);
  const std::array<FunctionalParams, 3> kinds = {
      FunctionalParams{FunctionalKind::proposed, 1.25, 0.0, field.theta},
      FunctionalParams{FunctionalKind::huang, 1.5, 1.0 / 3.0, field.theta},
      FunctionalParams{FunctionalKind::kolasinski_huang, 1.25, 0.0, field.theta},
  };
  for (const auto& prm : kinds) {
    const auto rep = gradient_consistency_check(mesh, field, prm, 1e-6);
    INFO("kind " << to_string(prm.kind) << " max rel err " << rep.max_rel_err);
    CHECK(rep.pass());
  }
}

TEST_CASE("translation of xi leaves element gradients unchanged") {
  Rng rng(41);
  auto mesh = random_mesh(rng, 3, 2);
  const auto field = random_metric(rng, mesh);
  const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};

  std::vector<Eigen::Matrix<double, 3, 2>> before;
  for (int c = 0; c < mesh.num_cells(); ++c)
    before.push_back(
        element_grad_xi<2>(edge_matrices(mesh, c), field.M[c].inverse().eval(),
                           field.rho[c], prm)
            .g_xi);
  for (auto& p : mesh.nodes_xi) p += Vec<2>(0.37, -0.81);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto after =
        element_grad_xi<2>(edge_matrices(mesh, c), field.M[c].inverse().eval(),
                           field.rho[c], prm)
            .g_xi;
    CHECK((after - before[c]).norm() <= 1e-12 * (before[c].norm() + 1.0));
  }
}

TEST_CASE("uniform mesh with identity metric is a stationary point") {
  const auto mesh = build_structured_mesh(8, 8, {0, 1, 0, 1});
  auto field = uniform_metric(mesh);
  global_scalars(mesh, field, 1.25);
  REQUIRE(field.theta == Catch::Approx(1.0).epsilon(1e-13));
  const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};
  const auto topo = build_topology(mesh);
  const auto g = energy_gradient(mesh, topo, field, prm);
  for (const auto& v : g) CHECK(v.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("affine W form is symmetric and reconstructs the gradient") {
  Rng rng(51);
  const auto mesh = random_mesh(rng, 3, 3);
  const auto field = random_metric(rng, mesh);
  const FunctionalParams prm{FunctionalKind::proposed, 1.35, 0.0, field.theta};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto geom = edge_matrices(mesh, c);
    const Mat<2> Minv = field.M[c].inverse();
    const auto W = element_W<2>(geom, Minv, field.rho[c], prm);
    CHECK((W - W.transpose()).norm() <= 1e-12 * (W.norm() + 1.0));

    const auto eg = element_grad_xi<2>(geom, Minv, field.rho[c], prm);
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector3d coord;
      for (int j = 0; j < 3; ++j) coord[j] = mesh.nodes_xi[mesh.cells[c][j]][k];
      const Eigen::Vector3d col = W * coord;
      CHECK((col - eg.g_xi.col(k)).norm() <= 1e-12 * (eg.g_xi.norm() + 1.0));
    }

    // Q = 0 gives W = 0
    if (eg.Q.norm() <= 1e-14) CHECK(W.norm() <= 1e-13);
  }
}

TEST_CASE("U tensor reduces to -T/2 identity at the aligned state") {
  SimplicialMesh<2> m;
  m.box = {0, 1, 0, 1};
  m.nodes_x = {{0, 0}, {1, 0}, {0, 1}};
  m.nodes_xi = m.nodes_x;
  m.cells = {{0, 1, 2}};
  retag_from_box(m);
  const auto geom = edge_matrices(m, 0);
  const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, 1.0};
  double T = 0.0;
  const Mat<2> U = u_tensor<2>(geom, Mat<2>::Identity(), prm, &T);
  CHECK(T == Catch::Approx(std::pow(2.0, 1.25)).epsilon(1e-13));
  CHECK((U + 0.5 * T * Mat<2>::Identity()).norm() <= 1e-12);
}

TEST_CASE("metric derivative of the density matches finite differences") {
  Rng rng(61);
  const auto mesh = random_mesh(rng, 2, 2);
  const FunctionalParams base{FunctionalKind::proposed, 1.25, 0.0, 0.9};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto geom = edge_matrices(mesh, c);
    const Mat<2> M = random_spd<2>(rng, 0.5, 3.0);
    for (const auto kind : {FunctionalKind::proposed, FunctionalKind::huang,
                            FunctionalKind::kolasinski_huang}) {
      FunctionalParams prm = base;
      prm.kind = kind;
      prm.gamma = kind == FunctionalKind::huang ? 1.5 : 1.25;
      prm.mu = 1.0 / 3.0;
      const auto rep = dG_dM_check(geom, M, prm, 1e-6);
      INFO("kind " << to_string(kind) << " err " << rep.max_rel_err);
      CHECK(rep.pass());
    }
  }
}

TEST_CASE("physical velocities match finite differences of |K| G") {
  Rng rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    std::array<Vec<2>, 3> xi = {Vec<2>(0, 0), Vec<2>(1, 0), Vec<2>(0, 1)};
    std::array<Vec<2>, 3> x;
    Mat<2> S = random_matrix<2>(rng, 0.4) + Mat<2>::Identity();
    if (S.determinant() < 0.2) S = Mat<2>::Identity();
    for (int j = 0; j < 3; ++j) x[j] = S * xi[j] + 0.05 * Vec<2>(j, 1.0 - j);
    std::array<Mat<2>, 3> vm;
    for (auto& m : vm) m = random_spd<2>(rng, 0.5, 3.0);
    const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, 0.8};
    const auto rep = velocity_x_check<2>(x, xi, vm, prm, 1e-5);
    INFO("trial " << trial << " err " << rep.max_rel_err);
    CHECK(rep.pass());
  }
}

TEST_CASE("tensor derivative identities") {
  // identity substitutions
  {
    const Mat<2> A = Mat<2>::Identity(), G = Mat<2>::Identity(), M = Mat<2>::Identity();
    CHECK(((2.0 * M * A.transpose() * G) - 2.0 * Mat<2>::Identity()).norm() == 0.0);
    CHECK(((-M.inverse() * A.transpose() * G * A * M.inverse()) +
           Mat<2>::Identity())
              .norm() == 0.0);
  }
  const auto rep = lemma_identities_check<2>(100, 9001);
  INFO("max rel err " << rep.max_rel_err);
  CHECK(rep.violations == 0);
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("global assembly accumulates element stars") {
  Rng rng(81);
  const auto mesh = random_mesh(rng, 4, 4);
  const auto topo = build_topology(mesh);
  const auto field = random_metric(rng, mesh);
  const FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};

  const int nc = mesh.num_cells();
  std::vector<ElementGradient<2>> cg(nc);
  std::vector<double> vol(nc);
  for (int c = 0; c < nc; ++c) {
    const auto geom = edge_matrices(mesh, c);
    vol[c] = geom.vol;
    cg[c] = element_grad_xi<2>(geom, field.M[c].inverse().eval(), field.rho[c], prm);
  }
  std::vector<double> P(mesh.num_nodes(), 1.0);
  const auto gf = assemble_global(mesh, topo, cg, vol, P, 1.0);

  // hand-summed accumulation at an interior node with a six-cell star
  int node = -1;
  for (int i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.boundary_tags[i].kind == NodeKind::interior && topo.stars[i].size() == 6) {
      node = i;
      break;
    }
  REQUIRE(node >= 0);
  Vec<2> hand = Vec<2>::Zero();
  for (const auto& se : topo.stars[node])
    hand += vol[se.cell] * cg[se.cell].g_xi.row(se.local).transpose();
  CHECK((gf.grad[node] - hand).norm() <= 1e-14 * (hand.norm() + 1.0));

  // zero element gradients assemble to zero
  std::vector<ElementGradient<2>> zeros(nc);
  for (auto& z : zeros) z.g_xi.setZero();
  const auto zf = assemble_global(mesh, topo, zeros, vol, P, 1.0);
  for (const auto& v : zf.grad) CHECK(v.norm() == 0.0);

  // descent: <rhs, grad> <= 0 with positive weights
  std::vector<double> Pw(mesh.num_nodes());
  for (auto& p : Pw) p = 0.5 + 2.0 * std::generate_canonical<double, 32>(rng);
  const auto gw = assemble_global(mesh, topo, cg, vol, Pw, 0.01);
  double dot = 0.0;
  for (int i = 0; i < mesh.num_nodes(); ++i) dot += gw.rhs[i].dot(gw.grad[i]);
  CHECK(dot <= 0.0);
}

TEST_CASE("boundary projection") {
  auto mesh = build_structured_mesh(2, 2, {0, 1, 0, 1});
  std::vector<Vec<2>> g(mesh.num_nodes(), Vec<2>(3.0, 4.0));
  project_boundary(mesh, g);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const auto& tag = mesh.boundary_tags[i];
    if (tag.kind == NodeKind::corner) {
      CHECK(g[i].norm() == 0.0);
    } else if (tag.kind == NodeKind::edge) {
      CHECK(g[i][tag.face / 2] == 0.0);
      CHECK(g[i][1 - tag.face / 2] != 0.0);
    } else {
      CHECK((g[i] - Vec<2>(3.0, 4.0)).norm() == 0.0);
    }
  }
}
