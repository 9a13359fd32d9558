#pragma once

// Experiment driver: config schema, run orchestration (metric pipeline +
// outer loop + artifacts), the property-check suite, and the report reader.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmesh/checks.hpp"
#include "mmesh/config.hpp"
#include "mmesh/fields.hpp"
#include "mmesh/flow.hpp"
#include "mmesh/quality.hpp"
#include "mmesh/vtk.hpp"

namespace mmesh {

struct ExperimentConfig {
  // mesh
  int nx = 20, ny = 20;
  std::array<double, 4> box{0.0, 1.0, 0.0, 1.0};
  // field
  std::string field_name = "sine_band";
  double field_re = 100.0;
  double field_t = 0.5;
  std::string field_transfer = "exact";  ///< exact | interpolate
  // metric
  MetricKind metric_kind = MetricKind::hessian;
  double metric_beta = 1.0;
  int smoothing_sweeps = 2;
  bool apply_kappa_flag = true;
  // functional
  FunctionalParams functional;
  // flow
  FlowConfig flow;
  // output
  std::string out_dir = "out";
  int vtk_every = 0;  ///< 0 = final snapshot only
  bool write_csv = true;
  int threads = 0;  ///< 0 = keep current
};

inline ExperimentConfig parse_experiment(const Config& cfg) {
  ExperimentConfig ec;
  ec.nx = cfg.get_int("mesh.nx", ec.nx);
  ec.ny = cfg.get_int("mesh.ny", ec.ny);
  if (ec.nx < 1 || ec.ny < 1) throw ConfigError("mesh.nx/mesh.ny must be >= 1");
  ec.box = {cfg.get_num("mesh.xmin", 0.0), cfg.get_num("mesh.xmax", 1.0),
            cfg.get_num("mesh.ymin", 0.0), cfg.get_num("mesh.ymax", 1.0)};
  if (ec.box[1] <= ec.box[0] || ec.box[3] <= ec.box[2])
    throw ConfigError("mesh domain box is empty");

  ec.field_name = cfg.get_str("field.name", ec.field_name);
  ec.field_re = cfg.get_num("field.re", ec.field_re);
  ec.field_t = cfg.get_num("field.t", ec.field_t);
  ec.field_transfer = cfg.get_str("field.transfer", ec.field_transfer);
  if (ec.field_transfer != "exact" && ec.field_transfer != "interpolate")
    throw ConfigError("field.transfer must be 'exact' or 'interpolate'");
  try {
    builtin_field(ec.field_name, ec.field_re, ec.field_t);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  try {
    ec.metric_kind = metric_kind_from_string(cfg.get_str("metric.kind", "hessian"));
    ec.functional.kind =
        functional_kind_from_string(cfg.get_str("functional.kind", "proposed"));
    ec.flow.scheme = bdf_scheme_from_string(cfg.get_str("flow.scheme", "bdf2"));
    ec.flow.balancing =
        balancing_kind_from_string(cfg.get_str("flow.balancing", "ours"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  ec.metric_beta = cfg.get_num("metric.beta", ec.metric_beta);
  ec.smoothing_sweeps = cfg.get_int("metric.smoothing_sweeps", ec.smoothing_sweeps);
  if (ec.smoothing_sweeps < 0) throw ConfigError("metric.smoothing_sweeps must be >= 0");
  ec.apply_kappa_flag = cfg.get_bool("metric.apply_kappa", ec.apply_kappa_flag);

  ec.functional.gamma = cfg.get_num("functional.gamma", 1.25);
  ec.functional.mu = cfg.get_num("functional.mu", 1.0 / 3.0);
  try {
    ec.functional.validate(2);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  ec.flow.tau = cfg.get_num("flow.tau", 0.004);
  ec.flow.t_span = cfg.get_num("flow.t_span", 0.1);
  ec.flow.n_t = cfg.get_int("flow.n_t", 2);
  ec.flow.outer_iters = cfg.get_int("flow.outer_iters", 10);
  ec.flow.balancing_p = cfg.get_num("flow.balancing_p", 1.0);
  ec.flow.newton.rtol = cfg.get_num("flow.rtol", 0.0);
  ec.flow.newton.atol = cfg.get_num("flow.atol", 1.0);
  ec.flow.newton.newton_tol = cfg.get_num("flow.newton_tol", 1e-6);
  ec.flow.newton.cg_tol = cfg.get_num("flow.cg_tol", 1e-8);
  ec.flow.newton.max_newton = cfg.get_int("flow.max_newton", 50);
  ec.flow.newton.max_cg = cfg.get_int("flow.max_cg", 400);
  if (ec.flow.tau <= 0 || ec.flow.t_span <= 0 || ec.flow.n_t < 1 ||
      ec.flow.outer_iters < 0)
    throw ConfigError("flow parameters must be positive (outer_iters >= 0)");

  ec.out_dir = cfg.get_str("output.dir", ec.out_dir);
  ec.vtk_every = cfg.get_int("output.vtk_every", ec.vtk_every);
  ec.write_csv = cfg.get_bool("output.csv", ec.write_csv);
  ec.threads = cfg.get_int("runtime.threads", 0);
  return ec;
}

// ---------------------------------------------------------------------------

struct RunResult {
  QualityReport<2> quality;
  RunHistory history;
  CorollaryBounds bounds;
  double observed_min_height = 0.0;
  double observed_min_vol = 0.0;
  double e_l2_uniform = 0.0;  ///< error on the initial uniform mesh
  double time_s = 0.0;        ///< wall clock around the outer loop
  int nc = 0;
};

namespace detail {

inline void csv_num(std::string& row, double v, bool last = false) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  row += buf;
  if (!last) row += ',';
}

}  // namespace detail

/// Metric pipeline for a configured run: recover derivatives of the nodal
/// field, build the configured metric, smooth, normalize, apply kappa.
inline MetricField<2> build_metric(const SimplicialMesh<2>& mesh,
                                   const MeshTopology<2>& topo,
                                   const std::vector<double>& u,
                                   const ExperimentConfig& ec) {
  MetricField<2> field;
  switch (ec.metric_kind) {
    case MetricKind::hessian: {
      int deficient = 0;
      const auto H = recover_hessian(mesh, topo, u, &deficient);
      field = metric_hessian(mesh, H);
      break;
    }
    case MetricKind::arclength:
      field = metric_arclength<2>(recover_gradient(mesh, u), ec.metric_beta);
      break;
    case MetricKind::eigendecomp:
      field = metric_eigendecomp(mesh, recover_gradient(mesh, u), ec.metric_beta);
      break;
  }
  field = smooth_metric(mesh, topo, field, ec.smoothing_sweeps);
  normalize_metric(mesh, field, ec.functional.gamma);
  if (ec.apply_kappa_flag) apply_kappa(mesh, field, ec.functional.gamma);
  return field;
}

/// Full experiment: adapt, measure, and (optionally) write artifacts
/// (mesh_####.vtk, history.csv, summary.csv, quality_hist.csv).
inline RunResult run_experiment(const ExperimentConfig& ec, bool write_outputs = true) {
  namespace fs = std::filesystem;
  if (ec.threads > 0) runtime::set_thread_count(ec.threads);
  const auto analytic = builtin_field(ec.field_name, ec.field_re, ec.field_t);

  auto mesh = build_structured_mesh(ec.nx, ec.ny, ec.box);
  auto topo = build_topology(mesh);

  std::vector<double> u(mesh.num_nodes());
  auto resample_exact = [&](const SimplicialMesh<2>& m) {
    u.resize(m.num_nodes());
    for (int i = 0; i < m.num_nodes(); ++i) u[i] = analytic.value(m.nodes_x[i]);
  };
  resample_exact(mesh);

  RunResult result;
  result.nc = mesh.num_cells();
  result.e_l2_uniform = interp_error<2>(mesh, analytic.value, ErrorNorm::l2);

  // lower-bound constants from the initial mesh and its metric
  const auto field0 = build_metric(mesh, topo, u, ec);
  {
    FunctionalParams prm = ec.functional;
    prm.theta = field0.theta;
    result.history.initial_energy = energy(mesh, field0, prm);
    result.bounds =
        corollary_bounds(mesh, field0, prm, result.history.initial_energy);
  }

  if (write_outputs) {
    fs::create_directories(ec.out_dir);
    write_vtk((fs::path(ec.out_dir) / "mesh_0000.vtk").string(), mesh,
              VtkFields<2>{{{"u", u}}, {}, {}});
  }

  // transfer state for the interpolated-field mode
  SimplicialMesh<2> prev_mesh = mesh;
  MeshTopology<2> prev_topo = topo;
  auto field_update = [&](const SimplicialMesh<2>& m) {
    if (ec.field_transfer == "exact") {
      resample_exact(m);
    } else {
      u = transfer(prev_mesh, prev_topo, u, m.nodes_x);
      prev_mesh = m;
      prev_topo = build_topology(m);
    }
  };

  result.observed_min_height = std::numeric_limits<double>::infinity();
  result.observed_min_vol = std::numeric_limits<double>::infinity();

  auto on_iter_end = [&](const SimplicialMesh<2>& m, int iter) {
    if (write_outputs && ec.vtk_every > 0 && iter % ec.vtk_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "mesh_%04d.vtk", iter);
      write_vtk((fs::path(ec.out_dir) / name).string(), m,
                VtkFields<2>{{{"u", u}}, {}, {}});
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  result.history = run_outer_loop<2>(
      mesh, ec.flow, ec.functional,
      [&](const SimplicialMesh<2>& m) { return build_metric(m, topo, u, ec); },
      field_update, on_iter_end);
  result.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (const auto& row : result.history.outer) {
    result.observed_min_height = std::min(result.observed_min_height, row.min_height_metric);
    result.observed_min_vol = std::min(result.observed_min_vol, row.min_vol_phys);
  }
  if (result.history.outer.empty()) {
    result.observed_min_height = result.bounds.a_bound + 1.0;
    result.observed_min_vol = result.bounds.vol_bound + 1.0;
  }

  // quality of the final mesh against a freshly built metric
  const auto field_final = build_metric(mesh, topo, u, ec);
  result.quality = quality_metrics(mesh, field_final);
  result.quality.e_l2 = interp_error<2>(mesh, analytic.value, ErrorNorm::l2);
  if (analytic.gradient)
    result.quality.e_h1 = interp_error<2>(mesh, analytic.value, ErrorNorm::h1,
                                          analytic.gradient);

  if (write_outputs) {
    VtkFields<2> fields;
    fields.point_scalars.emplace_back("u", u);
    fields.cell_scalars.emplace_back("q_eq", result.quality.per_eq);
    fields.cell_scalars.emplace_back("q_ali_inv", result.quality.per_ali_inv);
    fields.cell_scalars.emplace_back("q_geo", result.quality.per_geo);
    fields.cell_tensors.emplace_back("metric", field_final.M);
    write_vtk((fs::path(ec.out_dir) / "mesh_final.vtk").string(), mesh, fields);

    if (ec.write_csv) {
      std::ofstream hist(fs::path(ec.out_dir) / "history.csv");
      hist << "outer_iter,t,I_h,min_vol,min_height_M,newton_iters,cg_iters_total\n";
      for (const auto& s : result.history.steps) {
        // physical monitors update once per outer iteration
        const auto& orow = result.history.outer[s.outer_iter - 1];
        std::string row = std::to_string(s.outer_iter) + ",";
        detail::csv_num(row, s.t);
        detail::csv_num(row, s.energy);
        detail::csv_num(row, s.min_vol_xi);
        detail::csv_num(row, orow.min_height_metric);
        row += std::to_string(s.newton_iters) + "," + std::to_string(s.cg_iters);
        hist << row << "\n";
      }

      std::ofstream summary(fs::path(ec.out_dir) / "summary.csv");
      summary << "functional,NC,Q_eq,Q_ali,Q_geo,e_L2,time_s,steps\n";
      std::string row = to_string(ec.functional.kind) + "," + std::to_string(result.nc) + ",";
      detail::csv_num(row, result.quality.q_eq);
      detail::csv_num(row, result.quality.q_ali);
      detail::csv_num(row, result.quality.q_geo);
      detail::csv_num(row, result.quality.e_l2);
      detail::csv_num(row, result.time_s);
      row += std::to_string(result.history.total_newton);
      summary << row << "\n";

      std::ofstream hcsv(fs::path(ec.out_dir) / "quality_hist.csv");
      hcsv << "field,bin_lo,bin_hi,count\n";
      const std::pair<const char*, const std::vector<double>*> hfields[] = {
          {"q_eq", &result.quality.per_eq},
          {"q_ali_inv", &result.quality.per_ali_inv},
          {"q_geo", &result.quality.per_geo}};
      for (const auto& [name, vals] : hfields) {
        const auto h = histogram(*vals);
        const double width = (h.hi - h.lo) / static_cast<double>(h.count.size());
        for (std::size_t b = 0; b < h.count.size(); ++b) {
          std::string hrow = std::string(name) + ",";
          detail::csv_num(hrow, h.lo + b * width);
          detail::csv_num(hrow, b + 1 == h.count.size() ? h.hi : h.lo + (b + 1) * width);
          hrow += std::to_string(h.count[b]);
          hcsv << hrow << "\n";
        }
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// `check` subcommand: the property oracles.

inline bool check_suite(unsigned seed, std::ostream& os) {
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, double err) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name << " (max rel err " << err << ")\n";
    all_ok = all_ok && ok;
  };

  {
    const auto rep = lemma_identities_check<2>(100, seed);
    report("tensor-derivative identities (100 random triples)", rep.pass(),
           rep.max_rel_err);
  }
  {
    Rng rng(seed + 1);
    double worst = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 5; ++trial) {
      auto mesh = build_structured_mesh(3 + trial % 3, 3 + trial % 2, {0, 1, 0, 1});
      perturb_mesh(mesh, rng, 0.25);
      std::vector<Mat<2>> M(mesh.num_cells());
      for (auto& m : M) m = random_spd<2>(rng, 0.5, 4.0);
      auto field = make_metric_field<2>(std::move(M));
      global_scalars(mesh, field, 1.25);
      for (const auto kind : {FunctionalKind::proposed, FunctionalKind::huang,
                              FunctionalKind::kolasinski_huang}) {
        FunctionalParams prm{kind, kind == FunctionalKind::huang ? 1.5 : 1.25,
                             1.0 / 3.0, field.theta};
        const auto rep = gradient_consistency_check(mesh, field, prm, 1e-6);
        worst = std::max(worst, rep.max_rel_err);
        ok = ok && rep.pass();
      }
    }
    report("assembled gradient vs finite differences (15 mesh/kernel pairs)", ok,
           worst);
  }
  {
    Rng rng(seed + 2);
    auto mesh = build_structured_mesh(4, 4, {0, 1, 0, 1});
    perturb_mesh(mesh, rng, 0.2);
    std::vector<Mat<2>> M(mesh.num_cells());
    for (auto& m : M) m = random_spd<2>(rng, 0.5, 3.0);
    auto field = make_metric_field<2>(std::move(M));
    global_scalars(mesh, field, 1.25);
    FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, field.theta};
    bool ok = true;
    double worst = 0.0;
    for (double c : {0.25, 2.0, 10.0}) {
      const auto rep = scale_invariance_check(mesh, field, c, prm, seed + 3);
      ok = ok && rep.pass();
      worst = std::max({worst, rep.affine_resid, rep.gradient_resid});
    }
    report("metric scale invariance (c = 0.25, 2, 10)", ok, worst);
  }
  {
    FunctionalParams prm{FunctionalKind::proposed, 1.25, 0.0, 1.0};
    const auto rep = coercivity_check<2>(10000, prm, seed + 4);
    report("coercivity bound (10^4 random SPD samples)", rep.pass(),
           rep.max_rel_err > 0 ? rep.max_rel_err : 0.0);
  }
  return all_ok;
}

}  // namespace mmesh
