#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mmesh/experiment.hpp"
#include "mmesh/flow.hpp"
#include "mmesh/random.hpp"
#include "mmesh/vtk.hpp"

using namespace mmesh;

namespace {

FrozenCache<2> simple_cache(const SimplicialMesh<2>& mesh, const MeshTopology<2>& topo,
                            const MetricField<2>& field, double tau) {
  FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};
  return build_cache(mesh, topo, field, prm, tau, BalancingKind::ours, 1.0);
}

}  // namespace

TEST_CASE("flow residual matches the assembled gradient") {
  Rng rng(31);
  auto mesh = build_structured_mesh(4, 4, {0, 1, 0, 1});
  perturb_mesh(mesh, rng, 0.2);
  const auto topo = build_topology(mesh);
  std::vector<Mat<2>> M(mesh.num_cells());
  for (auto& m : M) m = random_spd<2>(rng, 0.5, 3.0);
  auto field = make_metric_field<2>(std::move(M));
  global_scalars(mesh, field, 1.25);
  const double tau = 0.02;
  const auto cache = simple_cache(mesh, topo, field, tau);
  XiFlowSystem<2> sys(mesh, topo, cache);

  VecX x, f;
  XiFlowSystem<2>::flatten(mesh.nodes_xi, x);
  REQUIRE(sys.rhs(x, f));

  FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};
  const auto g = energy_gradient(mesh, topo, field, prm);
  for (int i = 0; i < mesh.num_nodes(); ++i)
    for (int k = 0; k < 2; ++k)
      CHECK(f[2 * i + k] ==
            Catch::Approx(-cache.P[i] / tau * g[i][k]).margin(1e-12 * (1.0 + g[i].norm())));

  // energy through the frozen cache agrees with the reference evaluation
  CHECK(sys.energy_at(x) == Catch::Approx(energy(mesh, field, prm)).epsilon(1e-12));

  // inverted xi-cell reported as failure
  VecX bad = x;
  bad[2 * mesh.cells[0][0]] += 10.0;
  VecX out;
  CHECK_FALSE(sys.rhs(bad, out));
}

TEST_CASE("flow residual scales with the metric like the theory says") {
  Rng rng(33);
  auto mesh = build_structured_mesh(3, 3, {0, 1, 0, 1});
  perturb_mesh(mesh, rng, 0.2);
  const auto topo = build_topology(mesh);
  std::vector<Mat<2>> M(mesh.num_cells());
  for (auto& m : M) m = random_spd<2>(rng, 0.5, 3.0);
  auto field = make_metric_field<2>(std::move(M));
  global_scalars(mesh, field, 1.25);

  const double c = 2.0;
  auto Mc = field.M;
  for (auto& m : Mc) m *= c;
  auto field_c = make_metric_field<2>(std::move(Mc));
  global_scalars(mesh, field_c, 1.25);

  // unnormalized balancing would rescale too; compare the raw gradients and
  // balancing factors separately
  FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};
  FunctionalParams prm_c = prm;
  prm_c.theta = field_c.theta;
  const auto g = energy_gradient(mesh, topo, field, prm);
  const auto gc = energy_gradient(mesh, topo, field_c, prm_c);
  const double a = std::pow(c, 0.5 * 2 - 0.5 * 2 * 1.25);
  for (int i = 0; i < mesh.num_nodes(); ++i)
    CHECK((gc[i] - a * g[i]).norm() <= 1e-10 * (1.0 + g[i].norm()));

  const auto P = balancing_function(mesh, topo, field, BalancingKind::ours);
  const auto Pc = balancing_function(mesh, topo, field_c, BalancingKind::ours);
  const double pfactor = std::pow(c, -3.0 / 4.0);  // [cM] = c^{3/4} [M], P = [M]^{-1}
  for (int i = 0; i < mesh.num_nodes(); ++i)
    CHECK(Pc[i] == Catch::Approx(pfactor * P[i]).epsilon(1e-11));
}

TEST_CASE("stationary configuration stays put through the whole loop") {
  auto mesh = build_structured_mesh(6, 6, {0, 1, 0, 1});
  const auto x0 = mesh.nodes_x;

  FlowConfig fc;
  fc.tau = 0.01;
  fc.t_span = 0.1;
  fc.n_t = 2;
  fc.outer_iters = 3;
  FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, 1.0};

  const auto hist = run_outer_loop<2>(
      mesh, fc, prm,
      [](const SimplicialMesh<2>& m) {
        auto f = uniform_metric(m);
        global_scalars(m, f, 1.25);
        return f;
      });
  for (int i = 0; i < mesh.num_nodes(); ++i)
    CHECK((mesh.nodes_x[i] - x0[i]).lpNorm<Eigen::Infinity>() <= 1e-8);
  for (const auto& s : hist.steps) CHECK(s.newton_iters == 0);
}

TEST_CASE("outer loop with zero iterations returns the initial mesh") {
  auto mesh = build_structured_mesh(5, 5, {0, 1, 0, 1});
  const auto x0 = mesh.nodes_x;
  FlowConfig fc;
  fc.outer_iters = 0;
  const auto hist = run_outer_loop<2>(
      mesh, fc, FunctionalParams{},
      [](const SimplicialMesh<2>& m) {
        auto f = uniform_metric(m);
        global_scalars(m, f, 1.25);
        return f;
      });
  CHECK(hist.steps.empty());
  for (int i = 0; i < mesh.num_nodes(); ++i)
    CHECK((mesh.nodes_x[i] - x0[i]).norm() == 0.0);
}

TEST_CASE("adaptation run: energy decreases within spans, mesh stays valid") {
  ExperimentConfig ec;
  ec.nx = 10;
  ec.ny = 10;
  ec.field_name = "sine_band";
  ec.flow.outer_iters = 6;
  ec.flow.t_span = 0.1;
  ec.flow.n_t = 2;

  const auto res = run_experiment(ec, /*write_outputs=*/false);
  REQUIRE_FALSE(res.history.steps.empty());

  // strict per-span monotonicity of the recorded energies
  for (std::size_t k = 1; k < res.history.steps.size(); ++k) {
    const auto& prev = res.history.steps[k - 1];
    const auto& cur = res.history.steps[k];
    if (cur.outer_iter == prev.outer_iter)
      CHECK(cur.energy <= prev.energy + 1e-10 * std::abs(prev.energy));
    CHECK(cur.min_vol_xi > 0.0);
  }
  for (const auto& o : res.history.outer) {
    CHECK(o.min_vol_phys > 0.0);
    CHECK(o.min_height_metric >= res.bounds.a_bound);
    CHECK(o.min_vol_phys >= res.bounds.vol_bound);
  }
  // adaptivity pays off even on the coarse mesh
  CHECK(res.quality.e_l2 < res.e_l2_uniform);
}

TEST_CASE("runs are deterministic and snapshots reload admissibly") {
  namespace fs = std::filesystem;
  ExperimentConfig ec;
  ec.nx = 6;
  ec.ny = 6;
  ec.field_name = "sine_band";
  ec.flow.outer_iters = 3;
  ec.flow.t_span = 0.1;
  ec.flow.n_t = 2;
  ec.vtk_every = 1;

  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  auto strip_time = [](std::string s) {
    // summary.csv: mask the wall-clock column (second to last)
    const auto nl = s.find('\n');
    std::string body = s.substr(nl + 1);
    const auto last_comma = body.rfind(',');
    const auto prev_comma = body.rfind(',', last_comma - 1);
    body.erase(prev_comma, last_comma - prev_comma);
    return s.substr(0, nl + 1) + body;
  };

  const fs::path dir1 = fs::temp_directory_path() / "mmesh_det_a";
  const fs::path dir2 = fs::temp_directory_path() / "mmesh_det_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  ec.out_dir = dir1.string();
  run_experiment(ec);
  ec.out_dir = dir2.string();
  run_experiment(ec);

  CHECK(slurp(dir1 / "history.csv") == slurp(dir2 / "history.csv"));
  CHECK(slurp(dir1 / "quality_hist.csv") == slurp(dir2 / "quality_hist.csv"));
  CHECK_FALSE(slurp(dir1 / "history.csv").empty());
  CHECK(strip_time(slurp(dir1 / "summary.csv")) == strip_time(slurp(dir2 / "summary.csv")));

  // every snapshot passes the admissibility check on reload
  for (const auto& entry : fs::directory_iterator(dir1)) {
    if (entry.path().extension() != ".vtk") continue;
    const auto back = read_vtk<2>(entry.path().string());
    CHECK(admissible(back));
  }
}

TEST_CASE("interpolated field transfer also adapts") {
  ExperimentConfig ec;
  ec.nx = 8;
  ec.ny = 8;
  ec.field_name = "sine_band";
  ec.field_transfer = "interpolate";
  ec.flow.outer_iters = 4;
  ec.flow.t_span = 0.1;
  ec.flow.n_t = 2;
  const auto res = run_experiment(ec, false);
  CHECK(res.quality.e_l2 < res.e_l2_uniform);
}
