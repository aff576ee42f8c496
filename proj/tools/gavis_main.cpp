// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#include <gavis/gavis.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gavis;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("-c,--config", args->config_path, "run-config JSON file");
  cmd->add_option("--set", args->overrides,
                  "dotted-path config override, e.g. --set planner.steps=5");
  cmd->add_option("--threads", args->threads,
                  "worker threads (0 = GAVIS_THREADS or 1)");
}

RunConfig resolve_config(const CommonArgs& args) {
  Json j = args.config_path.empty() ? Json{{"version", 1}} : load_json_file(args.config_path);
  for (const std::string& kv : args.overrides) {
    auto eq = kv.find('=');
    require(eq != std::string::npos && eq > 0, "--set expects key=value, got: " + kv);
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    for (char& c : key)
      if (c == '.') c = '/';
    Json parsed = Json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    try {
      j[Json::json_pointer("/" + key)] = std::move(parsed);
    } catch (const nlohmann::json::exception& e) {
      throw ParameterError("cannot apply --set " + kv + ": " + e.what());
    }
  }
  return run_config_from_json(j);
}

int resolve_cmd_threads(const CommonArgs& args) {
  return resolve_threads(args.threads > 0 ? args.threads : threads_from_env());
}

std::string out_path(const RunConfig& rc, const std::string& name) {
  fs::create_directories(rc.out_dir);
  return (fs::path(rc.out_dir) / name).string();
}

int cmd_synth_scene(const CommonArgs& args) {
  RunConfig rc = resolve_config(args);
  SynthResult result = synth_two_room(rc.synth);
  save_scene(result.scene, out_path(rc, "scene.json"));
  save_occluders(result.occluders, out_path(rc, "occluders.json"));
  std::cout << "wrote scene.json (" << result.scene.particles.size()
            << " particles) and occluders.json (" << result.occluders.rectangles.size()
            << " rectangles) to " << rc.out_dir << "\n";
  return 0;
}

int cmd_build_field(const CommonArgs& args) {
  RunConfig rc = resolve_config(args);
  int threads = resolve_cmd_threads(args);
  require(!rc.scene_path.empty(), "build-field requires paths.scene");
  require(!rc.trajectory_path.empty(), "build-field requires paths.trajectory");
  Scene scene = load_scene(rc.scene_path);
  Trajectory trajectory = load_trajectory(rc.trajectory_path);
  VisibilityField field =
      construct_field(scene, trajectory, VmfParams(rc.kappa), rc.field_degree, rc.raster, threads);
  save_field(field, out_path(rc, "field.json"));
  std::cout << "wrote field.json (" << field.num_particles << " particles, "
            << field.num_views << " views, L=" << field.degree << ") to " << rc.out_dir
            << "\n";
  return 0;
}

int cmd_render_uncertainty(const CommonArgs& args, int view_index, bool dump_mixtures,
                           int mixture_count) {
  RunConfig rc = resolve_config(args);
  int threads = resolve_cmd_threads(args);
  require(!rc.scene_path.empty(), "render-uncertainty requires paths.scene");
  require(!rc.field_path.empty(), "render-uncertainty requires paths.field");
  require(!rc.trajectory_path.empty(), "render-uncertainty requires paths.trajectory");
  Scene scene = load_scene(rc.scene_path);
  VisibilityField field = load_field(rc.field_path);
  Trajectory trajectory = load_trajectory(rc.trajectory_path);
  require(view_index >= 0 && view_index < static_cast<int>(trajectory.views.size()),
          "view index out of range for the trajectory file");
  const CameraView& cam = trajectory.views[view_index];

  std::vector<double> depth;
  std::vector<PixelMixture> mixtures;
  EntropyMap map = render_entropy(scene, field, cam, rc.raster, rc.uncertainty, threads,
                                  &depth, dump_mixtures ? &mixtures : nullptr);
  write_pgm16(out_path(rc, "entropy.pgm"), out_path(rc, "entropy.json"), map.width,
              map.height, map.entropy);
  if (dump_mixtures) {
    require(mixture_count >= 1, "mixture count must be at least 1");
    std::vector<PixelMixture> picked;
    std::size_t total = mixtures.size();
    std::size_t count = std::min<std::size_t>(mixture_count, total);
    for (std::size_t k = 0; k < count; ++k) picked.push_back(mixtures[k * total / count]);
    save_mixtures(picked, out_path(rc, "mixtures.json"));
  }
  std::cout << "wrote entropy.pgm/.json (image entropy "
            << image_entropy(map, depth, rc.uncertainty) << ") to " << rc.out_dir << "\n";
  return 0;
}

int cmd_plan(const CommonArgs& args) {
  RunConfig rc = resolve_config(args);
  int threads = resolve_cmd_threads(args);
  require(!rc.scene_path.empty(), "plan requires paths.scene");
  require(!rc.occluder_path.empty(), "plan requires paths.occluders");
  require(!rc.trajectory_path.empty(), "plan requires paths.trajectory");
  Scene scene = load_scene(rc.scene_path);
  OccluderSet occluders = load_occluders(rc.occluder_path);
  Trajectory init = load_trajectory(rc.trajectory_path);
  MappingContext ctx;
  ctx.vmf = VmfParams(rc.kappa);
  ctx.field_degree = rc.field_degree;
  ctx.raster = rc.raster;
  ctx.uncertainty = rc.uncertainty;
  ctx.density = rc.density;
  ctx.density_enabled = rc.density_enabled;
  MappingLog log = run_active_mapping(scene, occluders, init, rc.planner, ctx, threads);
  save_mapping_log(log, out_path(rc, "mapping_log.json"));
  save_mapping_csv(log, out_path(rc, "mapping_log.csv"));
  double final_cov = log.steps.empty() ? 0.0 : log.steps.back().vis_coverage;
  std::cout << "wrote mapping_log.json/.csv (" << log.steps.size()
            << " steps, final coverage " << final_cov << ") to " << rc.out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// oracle-check: every approximation in the pipeline re-derived by brute force
// on small fixtures. The report is deterministic (no timings) so reruns are
// byte-identical.

struct CheckRow {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double limit = 0.0;
};

int cmd_oracle_check(const CommonArgs& args) {
  RunConfig rc = resolve_config(args);
  int threads = resolve_cmd_threads(args);
  std::vector<CheckRow> rows;
  auto add = [&rows](const std::string& name, double observed, double limit, bool pass) {
    rows.push_back({name, pass, observed, limit});
  };

  // vMF analytic expansion vs. spherical quadrature, and truncation error of
  // the degree-20 reconstruction against the kernel itself.
  {
    VmfParams vmf(1.0);
    Vec3 dp = Vec3(0.3, -0.5, 0.81).normalized();
    ShCoeffBlock analytic = vmf_sh_coeffs(dp, vmf, 4);
    auto kernel = [&](const Vec3& d) { return vmf_dir_vis(d, dp, vmf); };
    ShCoeffBlock quad = quadrature_project_sh(kernel, 4, 100000);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.coeffs.size(); ++i)
      worst = std::max(worst, std::abs(analytic.coeffs[i] - quad.coeffs[i]));
    add("vmf_sh_vs_quadrature_L4", worst, 1e-3, worst <= 1e-3);

    ShCoeffBlock full = vmf_sh_coeffs(dp, vmf, 20);
    double recon_err = 0.0;
    for (const Vec3& d : fibonacci_sphere(1000)) {
      std::array<double, sh_basis_size(kMaxShDegree)> basis;
      eval_real_sh_block(20, d, basis.data());
      double recon = 0.0;
      for (int i = 0; i < sh_basis_size(20); ++i) recon += full.coeffs[i] * basis[i];
      recon_err = std::max(recon_err, std::abs(recon - kernel(d)));
    }
    add("vmf_reconstruction_L20", recon_err, 1e-6, recon_err <= 1e-6);
  }

  // Basis orthonormality under the same quadrature that certifies the vMF
  // coefficients.
  {
    auto y21 = [](const Vec3& d) { return eval_real_sh(2, 1, d); };
    ShCoeffBlock quad = quadrature_project_sh(y21, 4, 100000);
    double worst = 0.0;
    for (int l = 0; l <= 4; ++l) {
      for (int m = -l; m <= l; ++m) {
        double expected = (l == 2 && m == 1) ? 1.0 : 0.0;
        worst = std::max(worst, std::abs(quad.coeffs[sh_flat_index(l, m)] - expected));
      }
    }
    add("sh_orthonormality_quadrature", worst, 1e-3, worst <= 1e-3);
  }

  // AM-GM estimator against the exact product form.
  {
    SplitMix64 g(20240817);
    double worst_excess = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      int n = 1 + static_cast<int>(g.next_below(8));
      std::vector<double> vs(n);
      for (double& v : vs) v = g.next_double();
      double exact = exact_multiview_visibility(vs);
      double mean = 0.0;
      for (double v : vs) mean += v / n;
      double est = 1.0 - std::pow(1.0 - mean, n);
      worst_excess = std::max(worst_excess, est - exact);
    }
    add("amgm_below_exact", worst_excess, 1e-12, worst_excess <= 1e-12);
    double fixture = exact_multiview_visibility({0.3, 0.3, 0.3, 0.3});
    add("exact_fixture_0.7599", std::abs(fixture - 0.7599), 1e-9,
        std::abs(fixture - 0.7599) <= 1e-9);
  }

  // Rasterized single-view visibility of a particle behind a wall vs. the
  // exact ray-march through the 3D densities.
  {
    Scene scene;
    scene.color_degree = 0;
    for (int i = -4; i <= 4; ++i) {
      for (int j = -4; j <= 4; ++j) {
        GaussianParticle p;
        p.position = Vec3(1.0, 0.15 * i, 0.15 * j);
        p.scale = Vec3::Constant(0.1);
        p.opacity = 0.9;
        for (int c = 0; c < 3; ++c) p.color_sh[c] = {2.0};
        scene.particles.push_back(p);
      }
    }
    GaussianParticle target;
    target.position = Vec3(1.6, 0.0, 0.0);
    target.scale = Vec3::Constant(0.02);
    target.opacity = 0.5;
    for (int c = 0; c < 3; ++c) target.color_sh[c] = {2.0};
    scene.particles.push_back(target);
    scene.bounds.min = Vec3(-0.5, -1, -1);
    scene.bounds.max = Vec3(2.5, 1, 1);

    CameraView cam = make_lookat(Vec3(0, 0, 0), Vec3(1, 0, 0));
    RasterConfig rcfg;
    std::vector<double> vis = single_view_visibility(scene, cam, rcfg, threads);
    double oracle = raymarch_transmittance(scene, cam.position, target.position, 1e-3,
                                           static_cast<int>(scene.particles.size()) - 1);
    double gap = std::abs(vis.back() - oracle);
    add("raster_visibility_vs_raymarch", gap, 5e-2, gap <= 5e-2);
  }

  // Entropy upper bound: pixel mixtures from a closed-room render, compared
  // against Monte-Carlo differential entropy of the same mixtures.
  {
    TwoRoomParams params;
    params.seed = rc.seed;
    SynthResult synth = synth_two_room(params);
    Trajectory trajectory;
    trajectory.views.push_back(
        make_lookat(Vec3(2.0, 2.0, 1.5), Vec3(3.5, 2.0, 1.5), Vec3(0, 0, 1), 64, 64));
    VisibilityField field =
        construct_field(synth.scene, trajectory, VmfParams(rc.kappa), 2, rc.raster, threads);
    // Diagonal probe: rays graze the walls at shallow incidence, so most of
    // the sampled pixels saturate and survive the residual filter below.
    CameraView probe = make_lookat(Vec3(3.7, 3.7, 2.7), Vec3(0.3, 0.3, 0.3), Vec3(0, 0, 1),
                                   32, 32);
    std::vector<PixelMixture> mixtures;
    render_entropy(synth.scene, field, probe, rc.raster, rc.uncertainty, threads, nullptr,
                   &mixtures);
    int violations = 0, tested = 0;
    for (std::size_t pix = 0; pix < mixtures.size() && tested < 20; pix += 13) {
      const PixelMixture& mix = mixtures[pix];
      if (mix.residual_transmittance > 1e-3) continue;
      GmmSpec spec;
      spec.prior_mean = rc.uncertainty.prior_mean;
      for (const auto& c : mix.components) {
        if (c.weight * c.vis <= 0.0) continue;
        spec.components.push_back({c.weight * c.vis, c.mean, Mat3(c.var.asDiagonal())});
      }
      if (mix.prior_weight > 0.0)
        spec.components.push_back({mix.prior_weight, rc.uncertainty.prior_mean,
                                   rc.uncertainty.prior_cov});
      McEntropy mc = mc_gmm_entropy(spec, rc.uncertainty.prior_cov, 10000,
                                    derive_seed(rc.seed, pix));
      if (mix.entropy < mc.estimate - 3.0 * mc.stderr_) ++violations;
      ++tested;
    }
    add("entropy_huber_vs_mc_violations", violations, 0, violations == 0 && tested >= 10);
  }

  bool all_pass = true;
  for (const CheckRow& row : rows) all_pass = all_pass && row.pass;
  Json report;
  report["version"] = 1;
  Json checks = Json::array();
  for (const CheckRow& row : rows)
    checks.push_back({{"name", row.name},
                      {"pass", row.pass},
                      {"observed", row.observed},
                      {"limit", row.limit}});
  report["checks"] = std::move(checks);
  report["all_pass"] = all_pass;
  save_json_file(out_path(rc, "oracle_report.json"), report);
  for (const CheckRow& row : rows)
    std::cout << (row.pass ? "[PASS] " : "[FAIL] ") << row.name << " observed "
              << row.observed << " limit " << row.limit << "\n";
  return all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anisotropic visibility fields for gaussian-splat scenes"};
  app.require_subcommand(1);

  CommonArgs synth_args, field_args, render_args, plan_args, oracle_args;
  int view_index = 0;
  bool dump_mixtures = false;
  int mixture_count = 200;

  CLI::App* synth = app.add_subcommand("synth-scene", "generate the two-room fixture");
  add_common(synth, &synth_args);
  CLI::App* build = app.add_subcommand("build-field", "construct the visibility field");
  add_common(build, &field_args);
  CLI::App* render =
      app.add_subcommand("render-uncertainty", "render a per-pixel entropy map");
  add_common(render, &render_args);
  render->add_option("--view-index", view_index, "camera index in the trajectory file");
  render->add_flag("--dump-mixtures", dump_mixtures, "export per-pixel mixtures JSON");
  render->add_option("--mixture-count", mixture_count,
                     "pixels to export with --dump-mixtures");
  CLI::App* plan = app.add_subcommand("plan", "run the greedy next-best-view loop");
  add_common(plan, &plan_args);
  CLI::App* oracle = app.add_subcommand("oracle-check", "run brute-force certifications");
  add_common(oracle, &oracle_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth_scene(synth_args);
    if (build->parsed()) return cmd_build_field(field_args);
    if (render->parsed())
      return cmd_render_uncertainty(render_args, view_index, dump_mixtures, mixture_count);
    if (plan->parsed()) return cmd_plan(plan_args);
    if (oracle->parsed()) return cmd_oracle_check(oracle_args);
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const OracleError& e) {
    std::cerr << "oracle failure: " << e.what() << "\n";
    return 4;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
