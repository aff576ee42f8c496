// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#include <gavis/io.hpp>
#include <gavis/planner.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

using namespace gavis;

namespace {

std::string test_path(const std::string& name) {
  static std::filesystem::path dir = [] {
    std::filesystem::path d = std::filesystem::temp_directory_path() / "gavis_io_tests";
    std::filesystem::create_directories(d);
    return d;
  }();
  return (dir / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void append_float(std::string& data, float f) {
  char bytes[sizeof f];
  std::memcpy(bytes, &f, sizeof f);
  data.append(bytes, sizeof f);  // host is little-endian
}

// Minimal splat PLY: required properties only, n_rest extra coefficients.
std::string splat_ply_bytes(const std::vector<std::vector<float>>& vertices, int n_rest = 0,
                            const std::string& format = "binary_little_endian") {
  std::string header = "ply\nformat " + format + " 1.0\n";
  header += "element vertex " + std::to_string(vertices.size()) + "\n";
  for (const char* name : {"x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2",
                           "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"})
    header += std::string("property float ") + name + "\n";
  for (int i = 0; i < n_rest; ++i)
    header += "property float f_rest_" + std::to_string(i) + "\n";
  header += "end_header\n";
  std::string data = header;
  for (const auto& v : vertices) {
    REQUIRE(static_cast<int>(v.size()) == 14 + n_rest);
    for (float f : v) append_float(data, f);
  }
  return data;
}

std::vector<float> ply_vertex(float x, float y, float z) {
  // opacity logit 0, log-scale 0, identity quaternion, zero DC.
  return {x, y, z, 0.f, 0.f, 0.f, 0.f, 1.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
}

}  // namespace

TEST_CASE("json loader reports the parse position", "[io]") {
  std::string path = test_path("broken.json");
  write_text(path, "{ \"version\": 1, oops }");
  try {
    load_json_file(path);
    FAIL("expected a parse failure");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
  CHECK_THROWS_AS(load_json_file(test_path("missing.json")), ParameterError);
}

TEST_CASE("schema version gate", "[io]") {
  std::string path = test_path("wrong_version.json");
  write_text(path, "{ \"version\": 2, \"color_degree\": 0, \"bounds\": {}, \"particles\": [] }");
  try {
    load_scene(path);
    FAIL("expected a version failure");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("scene json round-trip preserves every field", "[io]") {
  std::string path = test_path("scene_roundtrip.json");

  Scene empty;
  empty.bounds = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  save_scene(empty, path);
  Scene empty_back = load_scene(path);
  CHECK(empty_back.particles.empty());
  CHECK((empty_back.bounds.min - empty.bounds.min).norm() == 0.0);

  TwoRoomParams params;
  params.seed = 7;
  Scene scene = synth_two_room(params).scene;
  scene.particles[3].is_virtual = true;
  save_scene(scene, path);
  Scene back = load_scene(path);

  REQUIRE(back.particles.size() == scene.particles.size());
  CHECK(back.color_degree == scene.color_degree);
  CHECK((back.bounds.max - scene.bounds.max).norm() == 0.0);
  for (std::size_t i = 0; i < scene.particles.size(); ++i) {
    const auto& a = scene.particles[i];
    const auto& b = back.particles[i];
    CHECK((a.position - b.position).norm() == 0.0);
    CHECK((a.scale - b.scale).norm() == 0.0);
    CHECK(a.opacity == b.opacity);
    CHECK((a.rotation.coeffs() - b.rotation.coeffs()).norm() == 0.0);
    CHECK(a.is_virtual == b.is_virtual);
    for (int k = 0; k < 3; ++k) CHECK(a.color_sh[k] == b.color_sh[k]);
  }

  // Higher-order color blocks survive: (L+1)^2 coefficients per channel.
  Scene colored;
  colored.color_degree = 3;
  colored.bounds = {Vec3::Zero(), Vec3::Ones()};
  GaussianParticle g;
  g.position = Vec3(0.25, 0.5, 0.75);
  g.opacity = 0.7;
  for (int k = 0; k < 3; ++k) {
    g.color_sh[k].resize(16);
    for (int i = 0; i < 16; ++i) g.color_sh[k][i] = 0.01 * (k + 1) * (i + 1);
  }
  colored.particles.push_back(g);
  save_scene(colored, path);
  Scene colored_back = load_scene(path);
  REQUIRE(colored_back.particles.size() == 1);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(colored_back.particles[0].color_sh[k].size() == 16);
    CHECK(colored_back.particles[0].color_sh[k] == g.color_sh[k]);
  }
}

TEST_CASE("trajectory json round-trip and pose validation", "[io]") {
  std::string path = test_path("trajectory.json");
  Trajectory traj;
  traj.views.push_back(make_lookat(Vec3(1, 2, 3), Vec3(4, 5, 6), Vec3(0, 0, 1), 64, 48,
                                   1.1, 0.9));
  traj.views.push_back(make_lookat(Vec3(-2, 0, 1), Vec3(0, 0, 0)));
  save_trajectory(traj, path);
  Trajectory back = load_trajectory(path);
  REQUIRE(back.views.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((back.views[i].rotation - traj.views[i].rotation).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.views[i].position - traj.views[i].position).norm() == 0.0);
    CHECK(back.views[i].width == traj.views[i].width);
    CHECK(back.views[i].height == traj.views[i].height);
    CHECK(back.views[i].fov_h == traj.views[i].fov_h);
    CHECK(back.views[i].fov_v == traj.views[i].fov_v);
  }

  // A sheared rotation block must be rejected.
  Json j = load_json_file(path);
  j[0]["c2w"][0] = 2.0;
  save_json_file(path, j);
  CHECK_THROWS_AS(load_trajectory(path), ParameterError);
}

TEST_CASE("occluder set json round-trip", "[io]") {
  std::string path = test_path("occluders.json");
  OccluderSet occ = synth_two_room(TwoRoomParams{}).occluders;
  occ.sample_density = 17.5;
  occ.rectangles[2].opaque = false;
  save_occluders(occ, path);
  OccluderSet back = load_occluders(path);
  REQUIRE(back.rectangles.size() == occ.rectangles.size());
  CHECK(back.sample_density == occ.sample_density);
  for (std::size_t i = 0; i < occ.rectangles.size(); ++i) {
    CHECK((back.rectangles[i].corner - occ.rectangles[i].corner).norm() == 0.0);
    CHECK((back.rectangles[i].edge_u - occ.rectangles[i].edge_u).norm() == 0.0);
    CHECK((back.rectangles[i].edge_v - occ.rectangles[i].edge_v).norm() == 0.0);
    CHECK(back.rectangles[i].opaque == occ.rectangles[i].opaque);
  }
}

TEST_CASE("field json round-trip preserves coefficients and queries", "[io]") {
  std::string path = test_path("field.json");
  Scene scene;
  scene.bounds = {Vec3::Zero(), Vec3(2, 2, 2)};
  for (double x : {0.8, 1.2}) {
    GaussianParticle g;
    g.position = Vec3(x, 1.0, 1.0);
    g.scale = Vec3::Constant(0.05);
    g.opacity = 0.6;
    for (int k = 0; k < 3; ++k) g.color_sh[k] = {0.5 / kY00};
    scene.particles.push_back(g);
  }
  scene.particles[1].is_virtual = true;
  scene.particles[1].opacity = 0.0;
  Trajectory traj;
  traj.views.push_back(make_lookat(Vec3(0.2, 1.0, 1.0), Vec3(2, 1, 1)));

  VisibilityField field = construct_field(scene, traj, VmfParams(1.3), 2);
  save_field(field, path);
  VisibilityField back = load_field(path);
  CHECK(back.degree == field.degree);
  CHECK(back.num_views == field.num_views);
  CHECK(back.num_particles == field.num_particles);
  CHECK(back.vmf.kappa == field.vmf.kappa);
  CHECK(back.vmf.zeta == field.vmf.zeta);
  CHECK(back.virtual_mask == field.virtual_mask);
  REQUIRE(back.gamma.size() == field.gamma.size());
  CHECK(back.gamma == field.gamma);
  Vec3 d = Vec3(1, 0.2, -0.1).normalized();
  CHECK(query_visibility(back, 0, d) == query_visibility(field, 0, d));
}

TEST_CASE("pgm16 export normalizes into the full sample range", "[io]") {
  std::string path = test_path("map.pgm");
  std::string sidecar = test_path("map.json");
  std::vector<double> values = {0.5, 1.0, 2.0, 1.25, 0.5, 3.5};
  write_pgm16(path, sidecar, 3, 2, values);

  Pgm16Image img = read_pgm16(path);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  REQUIRE(img.samples.size() == 6);
  CHECK(img.samples[0] == 0);       // min maps to 0
  CHECK(img.samples[5] == 65535);   // max maps to full scale
  CHECK(img.samples[2] == static_cast<uint16_t>(std::lround((2.0 - 0.5) / 3.0 * 65535.0)));

  Json side = load_json_file(sidecar);
  CHECK(side.at("min").get<double>() == 0.5);
  CHECK(side.at("max").get<double>() == 3.5);

  // Constant maps degrade to all-zero samples with an explicit range.
  write_pgm16(path, sidecar, 2, 1, {4.0, 4.0});
  img = read_pgm16(path);
  CHECK(img.samples == std::vector<uint16_t>{0, 0});
  side = load_json_file(sidecar);
  CHECK(side.at("min").get<double>() == side.at("max").get<double>());

  // Header is the fixed P5/65535 layout.
  std::string bytes = read_bytes(path);
  CHECK(bytes.rfind("P5\n2 1\n65535\n", 0) == 0);

  CHECK_THROWS_AS(write_pgm16(path, sidecar, 2, 2, {1.0}), ParameterError);
  std::vector<double> bad = {1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(write_pgm16(path, sidecar, 2, 1, bad), ParameterError);
}

TEST_CASE("pgm16 export is byte-deterministic", "[io]") {
  std::vector<double> values;
  for (int i = 0; i < 64; ++i) values.push_back(std::sin(0.37 * i));
  write_pgm16(test_path("det_a.pgm"), test_path("det_a.json"), 8, 8, values);
  write_pgm16(test_path("det_b.pgm"), test_path("det_b.json"), 8, 8, values);
  CHECK(read_bytes(test_path("det_a.pgm")) == read_bytes(test_path("det_b.pgm")));
  CHECK(read_bytes(test_path("det_a.json")) == read_bytes(test_path("det_b.json")));
}

TEST_CASE("pixel mixture dump round-trip", "[io]") {
  std::string path = test_path("mixtures.json");
  std::vector<PixelMixture> mixtures(2);
  mixtures[0].x = 3;
  mixtures[0].y = 5;
  mixtures[0].prior_weight = 0.25;
  mixtures[0].residual_transmittance = 1e-5;
  mixtures[0].entropy = 2.5;
  mixtures[0].components.push_back({0.5, 0.9, Vec3(0.1, 0.2, 0.3), Vec3(0.01, 0.01, 0.01)});
  mixtures[1].x = 0;
  mixtures[1].y = 0;
  save_mixtures(mixtures, path);
  auto back = load_mixtures(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].x == 3);
  CHECK(back[0].y == 5);
  CHECK(back[0].prior_weight == 0.25);
  CHECK(back[0].residual_transmittance == 1e-5);
  CHECK(back[0].entropy == 2.5);
  REQUIRE(back[0].components.size() == 1);
  CHECK(back[0].components[0].weight == 0.5);
  CHECK(back[0].components[0].vis == 0.9);
  CHECK((back[0].components[0].mean - Vec3(0.1, 0.2, 0.3)).norm() == 0.0);
  CHECK(back[1].components.empty());
}

TEST_CASE("mapping log json and csv formats", "[io]") {
  MappingLog log;
  log.chosen_views.views.push_back(make_lookat(Vec3(1, 1, 1), Vec3(2, 1, 1)));
  MappingStep step;
  step.scores = {1.5, 2.5};
  step.chosen_index = 1;
  step.score = 2.5;
  step.vis_coverage = 0.375;
  step.mean_entropy = 2.5 / (128.0 * 128.0);
  log.steps.push_back(step);

  std::string json_path = test_path("mapping_log.json");
  std::string csv_path = test_path("mapping_log.csv");
  save_mapping_log(log, json_path);
  save_mapping_csv(log, csv_path);

  Json j = load_json_file(json_path);
  CHECK(j.at("version").get<int>() == 1);
  REQUIRE(j.at("steps").size() == 1);
  CHECK(j["steps"][0].at("chosen_idx").get<int>() == 1);
  CHECK(j["steps"][0].at("vis_coverage").get<double>() == 0.375);
  CHECK(j["steps"][0].at("scores").size() == 2);
  REQUIRE(j.at("chosen_views").size() == 1);

  std::string csv = read_bytes(csv_path);
  CHECK(csv.rfind("step,chosen_idx,score,vis_coverage,mean_entropy\n", 0) == 0);
  CHECK(csv.find("\n0,1,2.5,0.375,") != std::string::npos);
}

TEST_CASE("splat ply import applies the standard activations", "[io]") {
  std::string path = test_path("splats.ply");
  std::vector<std::vector<float>> verts = {
      ply_vertex(0.125f, -2.5f, 3.75f),
      ply_vertex(1.0f, 2.0f, 3.0f),
      ply_vertex(-0.5f, 0.25f, 9.0f),
  };
  verts[1][3] = 2.0f;   // opacity logit
  verts[1][4] = -1.0f;  // log scale x
  verts[1][7] = 0.0f;   // quaternion (0, 2, 0, 0): renormalized
  verts[1][8] = 2.0f;
  verts[2][11] = 0.5f;  // red DC
  write_text(path, splat_ply_bytes(verts));

  Scene scene = load_splat_ply(path);
  REQUIRE(scene.particles.size() == 3);
  CHECK(scene.color_degree == 0);

  // float -> double widening keeps positions bit-exact.
  CHECK(scene.particles[0].position.x() == 0.125);
  CHECK(scene.particles[0].position.y() == -2.5);
  CHECK(scene.particles[0].position.z() == 3.75);

  CHECK(scene.particles[0].opacity == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(scene.particles[1].opacity ==
        Catch::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-9));
  CHECK(scene.particles[0].scale.x() == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(scene.particles[1].scale.x() == Catch::Approx(std::exp(-1.0)).epsilon(1e-7));
  CHECK(scene.particles[1].rotation.norm() == Catch::Approx(1.0).epsilon(1e-12));

  // Zero DC decodes to mid-gray; the offset is folded into the coefficient.
  Vec3 gray = eval_color(scene.particles[0], Vec3(0, 0, 1), 0);
  CHECK(gray[0] == Catch::Approx(0.5).epsilon(1e-7));
  Vec3 red = eval_color(scene.particles[2], Vec3(0, 0, 1), 0);
  CHECK(red[0] == Catch::Approx(0.5 + kY00 * 0.5).epsilon(1e-6));

  // Bounds follow the position extrema.
  CHECK(scene.bounds.min.x() == -0.5);
  CHECK(scene.bounds.max.z() == 9.0);

  // Round-trip through the scene schema keeps positions bit-exact.
  std::string json_path = test_path("splats_scene.json");
  save_scene(scene, json_path);
  Scene back = load_scene(json_path);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK((back.particles[i].position - scene.particles[i].position).norm() == 0.0);
}

TEST_CASE("splat ply import maps f_rest channel-major", "[io]") {
  std::string path = test_path("splats_rest.ply");
  std::vector<float> v = ply_vertex(0, 0, 1);
  for (int i = 0; i < 9; ++i) v.push_back(0.1f * static_cast<float>(i + 1));
  write_text(path, splat_ply_bytes({v}, 9));
  Scene scene = load_splat_ply(path);
  REQUIRE(scene.particles.size() == 1);
  CHECK(scene.color_degree == 1);
  for (int c = 0; c < 3; ++c) {
    REQUIRE(scene.particles[0].color_sh[c].size() == 4);
    for (int k = 0; k < 3; ++k)
      CHECK(scene.particles[0].color_sh[c][1 + k] ==
            Catch::Approx(0.1 * (3 * c + k + 1)).epsilon(1e-6));
  }
}

TEST_CASE("splat ply import rejects malformed inputs by name", "[io]") {
  // Missing opacity.
  std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex 0\n";
  for (const char* name : {"x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0",
                           "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"})
    header += std::string("property float ") + name + "\n";
  header += "end_header\n";
  std::string path = test_path("missing_prop.ply");
  write_text(path, header);
  try {
    load_splat_ply(path);
    FAIL("expected a missing-property failure");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("'opacity'") != std::string::npos);
  }

  // ASCII encoding.
  path = test_path("ascii.ply");
  write_text(path, splat_ply_bytes({}, 0, "ascii"));
  try {
    load_splat_ply(path);
    FAIL("expected an encoding failure");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("ASCII") != std::string::npos);
  }

  // Non-finite payload names the vertex and the property.
  path = test_path("nan.ply");
  std::vector<std::vector<float>> verts = {ply_vertex(0, 0, 0), ply_vertex(1, 1, 1)};
  verts[1][0] = std::numeric_limits<float>::quiet_NaN();
  write_text(path, splat_ply_bytes(verts));
  try {
    load_splat_ply(path);
    FAIL("expected a non-finite failure");
  } catch (const ParameterError& e) {
    std::string msg = e.what();
    CHECK(msg.find("vertex 1") != std::string::npos);
    CHECK(msg.find("'x'") != std::string::npos);
  }

  // Incomplete SH bands.
  path = test_path("bad_rest.ply");
  std::vector<float> v = ply_vertex(0, 0, 0);
  for (int i = 0; i < 6; ++i) v.push_back(0.f);
  write_text(path, splat_ply_bytes({v}, 6));
  CHECK_THROWS_AS(load_splat_ply(path), ParameterError);

  // Not a PLY at all.
  path = test_path("not_a.ply");
  write_text(path, "OFF\n0 0 0\n");
  CHECK_THROWS_AS(load_splat_ply(path), ParameterError);
}

TEST_CASE("splat ply import skips unknown leading elements", "[io]") {
  std::string path = test_path("extra_element.ply");
  std::string body = splat_ply_bytes({ply_vertex(1, 2, 3)});
  std::size_t header_end = body.find("end_header\n");
  std::string payload = body.substr(header_end + 11);
  std::string header = body.substr(0, header_end);
  header.insert(header.find("element vertex"),
                "element camera 2\nproperty float cx\n");
  std::string data = header + "end_header\n";
  append_float(data, 7.f);
  append_float(data, 8.f);
  data += payload;
  write_text(path, data);
  Scene scene = load_splat_ply(path);
  REQUIRE(scene.particles.size() == 1);
  CHECK(scene.particles[0].position.z() == 3.0);
}

TEST_CASE("run config parses every section and rejects unknown keys", "[io]") {
  Json j = Json::parse(R"({
    "version": 1,
    "seed": 123,
    "paths": {"scene": "s.json", "occluders": "o.json", "trajectory": "t.json",
              "field": "f.json", "out_dir": "out"},
    "synth": {"room_size": [4, 4, 3], "wall_spacing": 0.25, "doorway_width": 1.5,
              "wall_opacity": 0.9},
    "vmf": {"kappa": 2.0, "L": 3},
    "raster": {"tile_size": 8, "transmittance_cutoff": 1e-3, "dilation": 0.2,
               "alpha_clamp_max": 0.95},
    "density": {"rho": 50.0, "eta": 0.25, "eps_v": 0.9, "enabled": false},
    "uncertainty": {"beta": 0.4, "prior_opacity": 0.2, "color_sigma": 0.35,
                    "variance_provider": "constant", "correlation": "hook",
                    "correlation_lambda": 2.5, "prior_mean": [0.4, 0.5, 0.6],
                    "prior_cov": [1, 0, 0, 0, 1, 0, 0, 0, 1]},
    "planner": {"mode": "se2", "num_candidates": 32, "se2_height": 1.2, "steps": 4,
                "look_inward": false, "clearance": 0.15, "cam_width": 64,
                "cam_height": 48, "fov_h": 1.2, "fov_v": 1.0, "near": 0.1}
  })");
  RunConfig rc = run_config_from_json(j);
  CHECK(rc.seed == 123);
  CHECK(rc.scene_path == "s.json");
  CHECK(rc.out_dir == "out");
  CHECK(rc.synth.wall_spacing == 0.25);
  CHECK(rc.synth.doorway_width == 1.5);
  CHECK(rc.kappa == 2.0);
  CHECK(rc.field_degree == 3);
  CHECK(rc.raster.tile_size == 8);
  CHECK(rc.raster.alpha_clamp_max == 0.95);
  CHECK(rc.density.rho == 50.0);
  CHECK_FALSE(rc.density_enabled);
  CHECK(rc.uncertainty.beta == 0.4);
  CHECK(rc.uncertainty.color_sigma == 0.35);
  CHECK(rc.uncertainty.correlation == CorrelationMode::kHook);
  CHECK(rc.uncertainty.correlation_lambda == 2.5);
  CHECK(rc.planner.mode == PoseMode::kSe2);
  CHECK(rc.planner.num_candidates == 32);
  CHECK(rc.planner.cam_height == 48);
  CHECK(rc.planner.cam_near == 0.1);

  // Sub-seeds derive from the global seed.
  CHECK(rc.synth.seed == 123);
  CHECK(rc.density.seed == derive_seed(123, 1));
  CHECK(rc.planner.seed == derive_seed(123, 2));

  Json top = Json::parse(R"({"version": 1, "bogus": true})");
  try {
    run_config_from_json(top);
    FAIL("expected an unknown-key failure");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("'bogus'") != std::string::npos);
  }
  Json nested = Json::parse(R"({"version": 1, "raster": {"tile": 4}})");
  CHECK_THROWS_AS(run_config_from_json(nested), ParameterError);
  Json bad_enum = Json::parse(R"({"version": 1, "planner": {"mode": "se4"}})");
  CHECK_THROWS_AS(run_config_from_json(bad_enum), ParameterError);
  Json bad_provider =
      Json::parse(R"({"version": 1, "uncertainty": {"variance_provider": "magic"}})");
  CHECK_THROWS_AS(run_config_from_json(bad_provider), ParameterError);
  Json no_version = Json::parse(R"({"seed": 5})");
  CHECK_THROWS_AS(run_config_from_json(no_version), ParameterError);

  // Defaults survive an empty config.
  RunConfig defaults = run_config_from_json(Json::parse(R"({"version": 1})"));
  CHECK(defaults.seed == 7);
  CHECK(defaults.kappa == 1.0);
  CHECK(defaults.field_degree == 2);
  CHECK(defaults.density_enabled);
}
