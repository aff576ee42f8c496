// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/model.hpp>
#include <gavis/planner.hpp>
#include <gavis/raster.hpp>
#include <gavis/uncertainty.hpp>
#include <gavis/vfield.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gavis {

using Json = nlohmann::ordered_json;

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("malformed JSON in " + path + " at byte " +
                         std::to_string(e.byte) + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open file for writing: " + path);
  out << j.dump(2) << '\n';
  require(out.good(), "write failed: " + path);
}

inline void check_schema_version(const Json& j, int expected, const std::string& what) {
  require(j.is_object() && j.contains("version"), what + ": missing schema version");
  require(j["version"].is_number_integer() && j["version"].get<int>() == expected,
          what + ": unsupported schema version " + j["version"].dump() + " (expected " +
              std::to_string(expected) + ")");
}

namespace detail {

inline Json vec_json(const double* v, int n) {
  Json a = Json::array();
  for (int i = 0; i < n; ++i) a.push_back(v[i]);
  return a;
}

inline void vec_from(const Json& j, double* v, int n, const std::string& what) {
  require(j.is_array() && static_cast<int>(j.size()) == n,
          what + " must be an array of " + std::to_string(n) + " numbers");
  for (int i = 0; i < n; ++i) {
    require(j[i].is_number(), what + " must contain only numbers");
    v[i] = j[i].get<double>();
  }
}

inline Json vec3_json(const Vec3& v) { return vec_json(v.data(), 3); }

inline Vec3 vec3_from(const Json& j, const std::string& what) {
  Vec3 v;
  vec_from(j, v.data(), 3, what);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scene

inline Json scene_to_json(const Scene& scene) {
  Json j;
  j["version"] = 1;
  j["color_degree"] = scene.color_degree;
  j["bounds"] = {{"min", detail::vec3_json(scene.bounds.min)},
                 {"max", detail::vec3_json(scene.bounds.max)}};
  Json particles = Json::array();
  for (const GaussianParticle& p : scene.particles) {
    Json jp;
    jp["pos"] = detail::vec3_json(p.position);
    jp["rot"] = {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()};
    jp["scale"] = detail::vec3_json(p.scale);
    jp["opacity"] = p.opacity;
    Json sh = Json::array();
    for (int c = 0; c < 3; ++c) {
      Json ch = Json::array();
      for (double v : p.color_sh[c]) ch.push_back(v);
      sh.push_back(std::move(ch));
    }
    jp["sh"] = std::move(sh);
    jp["virtual"] = p.is_virtual;
    particles.push_back(std::move(jp));
  }
  j["particles"] = std::move(particles);
  return j;
}

inline Scene scene_from_json(const Json& j) {
  check_schema_version(j, 1, "scene");
  Scene scene;
  require(j.contains("color_degree") && j["color_degree"].is_number_integer(),
          "scene: color_degree must be an integer");
  scene.color_degree = j["color_degree"].get<int>();
  require(scene.color_degree >= 0 && scene.color_degree <= kMaxShDegree,
          "scene: color_degree out of range");
  require(j.contains("bounds") && j["bounds"].is_object(), "scene: missing bounds");
  scene.bounds.min = detail::vec3_from(j["bounds"].at("min"), "scene bounds.min");
  scene.bounds.max = detail::vec3_from(j["bounds"].at("max"), "scene bounds.max");
  require(j.contains("particles") && j["particles"].is_array(),
          "scene: particles must be an array");
  scene.particles.reserve(j["particles"].size());
  for (const Json& jp : j["particles"]) {
    GaussianParticle p;
    p.position = detail::vec3_from(jp.at("pos"), "particle pos");
    double q[4];
    detail::vec_from(jp.at("rot"), q, 4, "particle rot");
    p.rotation = Quat(q[0], q[1], q[2], q[3]);
    p.scale = detail::vec3_from(jp.at("scale"), "particle scale");
    require(jp.at("opacity").is_number(), "particle opacity must be a number");
    p.opacity = jp["opacity"].get<double>();
    const Json& sh = jp.at("sh");
    require(sh.is_array() && sh.size() == 3, "particle sh must hold 3 channels");
    for (int c = 0; c < 3; ++c) {
      require(sh[c].is_array(), "particle sh channel must be an array");
      p.color_sh[c].reserve(sh[c].size());
      for (const Json& v : sh[c]) {
        require(v.is_number(), "particle sh coefficients must be numbers");
        p.color_sh[c].push_back(v.get<double>());
      }
    }
    require(jp.at("virtual").is_boolean(), "particle virtual must be a bool");
    p.is_virtual = jp["virtual"].get<bool>();
    scene.particles.push_back(std::move(p));
  }
  return scene;
}

inline void save_scene(const Scene& scene, const std::string& path) {
  save_json_file(path, scene_to_json(scene));
}

inline Scene load_scene(const std::string& path) {
  return scene_from_json(load_json_file(path));
}

// ---------------------------------------------------------------------------
// Trajectory: JSON array of camera entries with a row-major 4x4 c2w matrix.

inline Json view_to_json(const CameraView& view) {
  Json jv;
  Json c2w = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) c2w.push_back(view.rotation(r, c));
    c2w.push_back(view.position[r]);
  }
  for (double v : {0.0, 0.0, 0.0, 1.0}) c2w.push_back(v);
  jv["c2w"] = std::move(c2w);
  jv["width"] = view.width;
  jv["height"] = view.height;
  jv["fov_h"] = view.fov_h;
  jv["fov_v"] = view.fov_v;
  return jv;
}

inline CameraView view_from_json(const Json& jv) {
  CameraView view;
  double m[16];
  detail::vec_from(jv.at("c2w"), m, 16, "camera c2w");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) view.rotation(r, c) = m[4 * r + c];
    view.position[r] = m[4 * r + 3];
  }
  require(std::abs(m[12]) + std::abs(m[13]) + std::abs(m[14]) + std::abs(m[15] - 1.0) < 1e-9,
          "camera c2w last row must be [0 0 0 1]");
  Mat3 gram = view.rotation.transpose() * view.rotation;
  require((gram - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6,
          "camera c2w rotation block must be orthonormal");
  require(jv.at("width").is_number_integer() && jv.at("height").is_number_integer(),
          "camera width/height must be integers");
  view.width = jv["width"].get<int>();
  view.height = jv["height"].get<int>();
  view.fov_h = jv.at("fov_h").get<double>();
  view.fov_v = jv.at("fov_v").get<double>();
  view.validate();
  return view;
}

inline void save_trajectory(const Trajectory& trajectory, const std::string& path) {
  Json j = Json::array();
  for (const CameraView& view : trajectory.views) j.push_back(view_to_json(view));
  save_json_file(path, j);
}

inline Trajectory load_trajectory(const std::string& path) {
  Json j = load_json_file(path);
  require(j.is_array(), "trajectory: top-level JSON must be an array of cameras");
  Trajectory trajectory;
  trajectory.views.reserve(j.size());
  for (const Json& jv : j) trajectory.views.push_back(view_from_json(jv));
  return trajectory;
}

// ---------------------------------------------------------------------------
// Occluders

inline void save_occluders(const OccluderSet& occluders, const std::string& path) {
  Json j;
  j["version"] = 1;
  j["sample_density"] = occluders.sample_density;
  Json rects = Json::array();
  for (const OccluderRect& r : occluders.rectangles) {
    rects.push_back({{"corner", detail::vec3_json(r.corner)},
                     {"edge_u", detail::vec3_json(r.edge_u)},
                     {"edge_v", detail::vec3_json(r.edge_v)},
                     {"opaque", r.opaque}});
  }
  j["rectangles"] = std::move(rects);
  save_json_file(path, j);
}

inline OccluderSet load_occluders(const std::string& path) {
  Json j = load_json_file(path);
  check_schema_version(j, 1, "occluders");
  OccluderSet occluders;
  occluders.sample_density = j.at("sample_density").get<double>();
  require(occluders.sample_density > 0.0, "occluders: sample_density must be positive");
  for (const Json& jr : j.at("rectangles")) {
    OccluderRect r;
    r.corner = detail::vec3_from(jr.at("corner"), "occluder corner");
    r.edge_u = detail::vec3_from(jr.at("edge_u"), "occluder edge_u");
    r.edge_v = detail::vec3_from(jr.at("edge_v"), "occluder edge_v");
    r.opaque = jr.at("opaque").get<bool>();
    occluders.rectangles.push_back(r);
  }
  return occluders;
}

// ---------------------------------------------------------------------------
// Visibility field dump

inline void save_field(const VisibilityField& field, const std::string& path) {
  Json j;
  j["L"] = field.degree;
  j["kappa"] = field.vmf.kappa;
  j["num_views"] = field.num_views;
  Json gamma = Json::array();
  const int nb = field.basis_size();
  for (std::size_t i = 0; i < field.num_particles; ++i)
    gamma.push_back(detail::vec_json(field.coeffs(i), nb));
  j["gamma"] = std::move(gamma);
  Json virt = Json::array();
  for (uint8_t m : field.virtual_mask) virt.push_back(m != 0);
  j["virtual"] = std::move(virt);
  save_json_file(path, j);
}

inline VisibilityField load_field(const std::string& path) {
  Json j = load_json_file(path);
  require(j.is_object() && j.contains("L") && j.contains("kappa") &&
              j.contains("num_views") && j.contains("gamma") && j.contains("virtual"),
          "field: expected keys L, kappa, num_views, gamma, virtual");
  VisibilityField field;
  field.degree = j["L"].get<int>();
  require(field.degree >= 0 && field.degree <= kMaxShDegree, "field: L out of range");
  field.vmf = VmfParams(j["kappa"].get<double>());
  field.num_views = j["num_views"].get<int>();
  require(field.num_views >= 0, "field: num_views must be non-negative");
  const Json& gamma = j["gamma"];
  const Json& virt = j["virtual"];
  require(gamma.is_array() && virt.is_array() && gamma.size() == virt.size(),
          "field: gamma and virtual must be arrays of equal length");
  field.num_particles = gamma.size();
  const int nb = field.basis_size();
  field.gamma.resize(field.num_particles * static_cast<std::size_t>(nb));
  field.virtual_mask.resize(field.num_particles);
  for (std::size_t i = 0; i < field.num_particles; ++i) {
    detail::vec_from(gamma[i], field.gamma.data() + i * nb, nb, "field gamma row");
    field.virtual_mask[i] = virt[i].get<bool>() ? 1 : 0;
  }
  return field;
}

// ---------------------------------------------------------------------------
// 16-bit PGM export (P5, big-endian samples) with a JSON sidecar recording the
// normalization range.

inline void write_pgm16(const std::string& path, const std::string& sidecar_path,
                        int width, int height, const std::vector<double>& values) {
  require(width >= 1 && height >= 1, "pgm: image size must be positive");
  require(values.size() == static_cast<std::size_t>(width) * height,
          "pgm: value count must equal width*height");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    require(std::isfinite(v), "pgm: values must be finite");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open file for writing: " + path);
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = values[static_cast<std::size_t>(y) * width + x];
      double t = span > 0.0 ? (v - lo) / span : 0.0;
      long s = std::lround(t * 65535.0);
      s = std::clamp(s, 0L, 65535L);
      row[2 * x] = static_cast<unsigned char>((s >> 8) & 0xff);
      row[2 * x + 1] = static_cast<unsigned char>(s & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  require(out.good(), "write failed: " + path);
  Json sidecar;
  sidecar["min"] = lo;
  sidecar["max"] = hi;
  save_json_file(sidecar_path, sidecar);
}

struct Pgm16Image {
  int width = 0, height = 0;
  std::vector<uint16_t> samples;
};

inline Pgm16Image read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  auto next_token = [&in, &path]() {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (!std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in.get()));
        return tok;
      }
    }
    throw ParameterError("truncated PGM header: " + path);
  };
  require(next_token() == "P5", "not a binary PGM (P5): " + path);
  Pgm16Image img;
  img.width = std::stoi(next_token());
  img.height = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  require(maxval == 65535, "expected 16-bit PGM: " + path);
  in.get();  // single whitespace after maxval
  img.samples.resize(static_cast<std::size_t>(img.width) * img.height);
  std::vector<unsigned char> raw(img.samples.size() * 2);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  require(in.gcount() == static_cast<std::streamsize>(raw.size()),
          "truncated PGM data: " + path);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    img.samples[i] = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  return img;
}

// ---------------------------------------------------------------------------
// Pixel-mixture debug dump

inline void save_mixtures(const std::vector<PixelMixture>& mixtures, const std::string& path) {
  Json j = Json::array();
  for (const PixelMixture& mix : mixtures) {
    Json jm;
    jm["x"] = mix.x;
    jm["y"] = mix.y;
    jm["prior_weight"] = mix.prior_weight;
    jm["residual_transmittance"] = mix.residual_transmittance;
    jm["entropy"] = mix.entropy;
    Json comps = Json::array();
    for (const PixelMixtureComponent& c : mix.components) {
      comps.push_back({{"weight", c.weight},
                       {"vis", c.vis},
                       {"mean", detail::vec3_json(c.mean)},
                       {"var", detail::vec3_json(c.var)}});
    }
    jm["components"] = std::move(comps);
    j.push_back(std::move(jm));
  }
  save_json_file(path, j);
}

inline std::vector<PixelMixture> load_mixtures(const std::string& path) {
  Json j = load_json_file(path);
  require(j.is_array(), "mixtures: top-level JSON must be an array");
  std::vector<PixelMixture> mixtures;
  mixtures.reserve(j.size());
  for (const Json& jm : j) {
    PixelMixture mix;
    mix.x = jm.at("x").get<int>();
    mix.y = jm.at("y").get<int>();
    mix.prior_weight = jm.at("prior_weight").get<double>();
    mix.residual_transmittance = jm.at("residual_transmittance").get<double>();
    mix.entropy = jm.at("entropy").get<double>();
    for (const Json& jc : jm.at("components")) {
      PixelMixtureComponent c;
      c.weight = jc.at("weight").get<double>();
      c.vis = jc.at("vis").get<double>();
      c.mean = detail::vec3_from(jc.at("mean"), "mixture component mean");
      c.var = detail::vec3_from(jc.at("var"), "mixture component var");
      mix.components.push_back(c);
    }
    mixtures.push_back(std::move(mix));
  }
  return mixtures;
}

// ---------------------------------------------------------------------------
// Mapping log

inline void save_mapping_log(const MappingLog& log, const std::string& path) {
  Json j;
  j["version"] = 1;
  Json views = Json::array();
  for (const CameraView& view : log.chosen_views.views) views.push_back(view_to_json(view));
  j["chosen_views"] = std::move(views);
  Json steps = Json::array();
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const MappingStep& s = log.steps[i];
    Json js;
    js["step"] = i;
    js["chosen_idx"] = s.chosen_index;
    js["score"] = s.score;
    js["vis_coverage"] = s.vis_coverage;
    js["mean_entropy"] = s.mean_entropy;
    Json scores = Json::array();
    for (double v : s.scores) scores.push_back(v);
    js["scores"] = std::move(scores);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  save_json_file(path, j);
}

inline void save_mapping_csv(const MappingLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open file for writing: " + path);
  out << "step,chosen_idx,score,vis_coverage,mean_entropy\n";
  char buf[256];
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const MappingStep& s = log.steps[i];
    std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g,%.17g\n", i, s.chosen_index,
                  s.score, s.vis_coverage, s.mean_entropy);
    out << buf;
  }
  require(out.good(), "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Gaussian-splat PLY import (binary little-endian, standard splat-export
// layout: activations applied, DC band offset folded, f_rest channel-major).

namespace detail {

struct PlyProperty {
  std::string name;
  int size = 0;       // bytes
  bool is_float = false;
  std::size_t offset = 0;  // within one vertex record
};

inline int ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

}  // namespace detail

inline Scene load_splat_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::string line;
  auto read_line = [&]() {
    require(static_cast<bool>(std::getline(in, line)), "truncated PLY header: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  read_line();
  require(line == "ply", "not a PLY file: " + path);

  struct Element {
    std::string name;
    long long count = 0;
    std::vector<detail::PlyProperty> properties;
    std::size_t stride = 0;
  };
  std::vector<Element> elements;
  bool format_seen = false;
  while (true) {
    read_line();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string enc;
      ls >> enc;
      require(enc != "ascii", "ASCII PLY is not supported; expected binary_little_endian");
      require(enc == "binary_little_endian",
              "unsupported PLY encoding '" + enc + "'; expected binary_little_endian");
      format_seen = true;
    } else if (word == "element") {
      Element e;
      ls >> e.name >> e.count;
      require(e.count >= 0, "PLY element with negative count");
      elements.push_back(std::move(e));
    } else if (word == "property") {
      require(!elements.empty(), "PLY property before any element");
      std::string type;
      ls >> type;
      require(type != "list", "PLY list properties are not supported");
      detail::PlyProperty prop;
      prop.size = detail::ply_type_size(type);
      require(prop.size > 0, "unknown PLY property type '" + type + "'");
      prop.is_float = (type == "float" || type == "float32");
      ls >> prop.name;
      prop.offset = elements.back().stride;
      elements.back().stride += prop.size;
      elements.back().properties.push_back(std::move(prop));
    } else {
      throw ParameterError("unrecognized PLY header line: " + line);
    }
  }
  require(format_seen, "PLY header missing format line");

  const Element* vertex = nullptr;
  for (const Element& e : elements)
    if (e.name == "vertex") vertex = &e;
  require(vertex != nullptr, "PLY is missing the vertex element");

  auto find_prop = [&](const std::string& name) -> const detail::PlyProperty* {
    for (const detail::PlyProperty& p : vertex->properties)
      if (p.name == name) return &p;
    return nullptr;
  };
  auto require_float_prop = [&](const std::string& name) {
    const detail::PlyProperty* p = find_prop(name);
    require(p != nullptr, "PLY is missing required property '" + name + "'");
    require(p->is_float, "PLY property '" + name + "' must be float");
    return p;
  };

  static const char* kRequired[] = {"x",       "y",       "z",       "opacity",
                                    "scale_0", "scale_1", "scale_2", "rot_0",
                                    "rot_1",   "rot_2",   "rot_3",   "f_dc_0",
                                    "f_dc_1",  "f_dc_2"};
  std::vector<const detail::PlyProperty*> req;
  for (const char* name : kRequired) req.push_back(require_float_prop(name));

  int n_rest = 0;
  while (find_prop("f_rest_" + std::to_string(n_rest)) != nullptr) ++n_rest;
  require(n_rest % 3 == 0, "PLY f_rest_* count must be a multiple of 3");
  int per_channel = n_rest / 3;
  int color_degree = 0;
  while (sh_basis_size(color_degree) - 1 < per_channel) ++color_degree;
  require(sh_basis_size(color_degree) - 1 == per_channel,
          "PLY f_rest_* count does not form complete SH bands");
  std::vector<const detail::PlyProperty*> rest;
  for (int i = 0; i < n_rest; ++i) rest.push_back(require_float_prop("f_rest_" + std::to_string(i)));

  Scene scene;
  scene.color_degree = color_degree;
  std::vector<char> record;
  for (const Element& e : elements) {
    if (&e != vertex) {
      in.seekg(static_cast<std::streamoff>(e.count * static_cast<long long>(e.stride)),
               std::ios::cur);
      require(in.good(), "truncated PLY data: " + path);
      continue;
    }
    record.resize(e.stride);
    scene.particles.reserve(static_cast<std::size_t>(e.count));
    auto read_float = [&](const detail::PlyProperty* p, long long vi) {
      float f;
      std::memcpy(&f, record.data() + p->offset, sizeof f);
      require(std::isfinite(f), "non-finite value in PLY vertex " + std::to_string(vi) +
                                    ", property '" + p->name + "'");
      return static_cast<double>(f);
    };
    for (long long vi = 0; vi < e.count; ++vi) {
      in.read(record.data(), static_cast<std::streamsize>(e.stride));
      require(in.gcount() == static_cast<std::streamsize>(e.stride),
              "truncated PLY data at vertex " + std::to_string(vi) + ": " + path);
      GaussianParticle p;
      p.position = Vec3(read_float(req[0], vi), read_float(req[1], vi), read_float(req[2], vi));
      p.opacity = 1.0 / (1.0 + std::exp(-read_float(req[3], vi)));
      p.scale = Vec3(std::exp(read_float(req[4], vi)), std::exp(read_float(req[5], vi)),
                     std::exp(read_float(req[6], vi)));
      Quat q(read_float(req[7], vi), read_float(req[8], vi), read_float(req[9], vi),
             read_float(req[10], vi));
      require(q.norm() > 1e-12, "zero quaternion in PLY vertex " + std::to_string(vi));
      p.rotation = q.normalized();
      const int nb = sh_basis_size(color_degree);
      for (int c = 0; c < 3; ++c) {
        p.color_sh[c].assign(nb, 0.0);
        p.color_sh[c][0] = read_float(req[11 + c], vi) + 0.5 / kY00;
        for (int k = 0; k < per_channel; ++k)
          p.color_sh[c][1 + k] = read_float(rest[c * per_channel + k], vi);
      }
      scene.particles.push_back(std::move(p));
    }
  }
  if (!scene.particles.empty()) {
    Vec3 lo = scene.particles[0].position, hi = lo;
    for (const GaussianParticle& p : scene.particles) {
      lo = lo.cwiseMin(p.position);
      hi = hi.cwiseMax(p.position);
    }
    scene.bounds.min = lo;
    scene.bounds.max = hi;
  }
  return scene;
}

// ---------------------------------------------------------------------------
// RunConfig: one JSON document holding every module's knobs plus paths and the
// global seed. Unknown keys are rejected so typos cannot silently fall back to
// defaults.

struct RunConfig {
  uint64_t seed = 7;

  std::string scene_path;
  std::string occluder_path;
  std::string trajectory_path;
  std::string field_path;
  std::string out_dir = ".";

  TwoRoomParams synth;
  double kappa = 1.0;
  int field_degree = 2;
  RasterConfig raster;
  DensityControlConfig density;
  bool density_enabled = true;
  UncertaintyConfig uncertainty;
  PlannerConfig planner;

  // Sub-seeds derive from the global seed so one value pins the whole run.
  void apply_seed() {
    synth.seed = seed;
    density.seed = derive_seed(seed, 1);
    planner.seed = derive_seed(seed, 2);
  }
};

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                                const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) known = true;
    require(known, what + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
inline void opt(const Json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig run_config_from_json(const Json& j) {
  require(j.is_object(), "config: top-level JSON must be an object");
  detail::reject_unknown_keys(j,
                              {"version", "seed", "paths", "synth", "vmf", "raster",
                               "density", "uncertainty", "planner"},
                              "config");
  check_schema_version(j, 1, "config");
  RunConfig rc;
  detail::opt(j, "seed", rc.seed);
  if (j.contains("paths")) {
    const Json& p = j["paths"];
    detail::reject_unknown_keys(p, {"scene", "occluders", "trajectory", "field", "out_dir"},
                                "config.paths");
    detail::opt(p, "scene", rc.scene_path);
    detail::opt(p, "occluders", rc.occluder_path);
    detail::opt(p, "trajectory", rc.trajectory_path);
    detail::opt(p, "field", rc.field_path);
    detail::opt(p, "out_dir", rc.out_dir);
  }
  if (j.contains("synth")) {
    const Json& s = j["synth"];
    detail::reject_unknown_keys(
        s, {"room_size", "wall_spacing", "doorway_width", "wall_opacity"}, "config.synth");
    if (s.contains("room_size"))
      rc.synth.room_size = detail::vec3_from(s["room_size"], "config.synth.room_size");
    detail::opt(s, "wall_spacing", rc.synth.wall_spacing);
    detail::opt(s, "doorway_width", rc.synth.doorway_width);
    detail::opt(s, "wall_opacity", rc.synth.wall_opacity);
  }
  if (j.contains("vmf")) {
    const Json& v = j["vmf"];
    detail::reject_unknown_keys(v, {"kappa", "L"}, "config.vmf");
    detail::opt(v, "kappa", rc.kappa);
    detail::opt(v, "L", rc.field_degree);
    require(rc.field_degree >= 0 && rc.field_degree <= kMaxShDegree,
            "config.vmf.L out of range");
  }
  if (j.contains("raster")) {
    const Json& r = j["raster"];
    detail::reject_unknown_keys(
        r, {"tile_size", "transmittance_cutoff", "dilation", "alpha_clamp_max"},
        "config.raster");
    detail::opt(r, "tile_size", rc.raster.tile_size);
    detail::opt(r, "transmittance_cutoff", rc.raster.transmittance_cutoff);
    detail::opt(r, "dilation", rc.raster.dilation);
    detail::opt(r, "alpha_clamp_max", rc.raster.alpha_clamp_max);
    rc.raster.validate();
  }
  if (j.contains("density")) {
    const Json& d = j["density"];
    detail::reject_unknown_keys(d, {"rho", "eta", "eps_v", "enabled"}, "config.density");
    detail::opt(d, "rho", rc.density.rho);
    detail::opt(d, "eta", rc.density.eta);
    detail::opt(d, "eps_v", rc.density.eps_v);
    detail::opt(d, "enabled", rc.density_enabled);
    rc.density.validate();
  }
  if (j.contains("uncertainty")) {
    const Json& u = j["uncertainty"];
    detail::reject_unknown_keys(u,
                                {"beta", "prior_opacity", "color_sigma", "variance_provider",
                                 "correlation", "correlation_lambda", "prior_mean", "prior_cov"},
                                "config.uncertainty");
    detail::opt(u, "beta", rc.uncertainty.beta);
    detail::opt(u, "prior_opacity", rc.uncertainty.prior_opacity);
    detail::opt(u, "color_sigma", rc.uncertainty.color_sigma);
    if (u.contains("variance_provider")) {
      std::string mode = u["variance_provider"].get<std::string>();
      if (mode == "constant")
        rc.uncertainty.variance_provider = VarianceProvider::kConstant;
      else if (mode == "sh_propagation")
        rc.uncertainty.variance_provider = VarianceProvider::kShPropagation;
      else
        throw ParameterError("config.uncertainty.variance_provider must be 'constant' or 'sh_propagation'");
    }
    if (u.contains("correlation")) {
      std::string mode = u["correlation"].get<std::string>();
      if (mode == "none")
        rc.uncertainty.correlation = CorrelationMode::kNone;
      else if (mode == "hook")
        rc.uncertainty.correlation = CorrelationMode::kHook;
      else
        throw ParameterError("config.uncertainty.correlation must be 'none' or 'hook'");
    }
    detail::opt(u, "correlation_lambda", rc.uncertainty.correlation_lambda);
    if (u.contains("prior_mean"))
      rc.uncertainty.prior_mean = detail::vec3_from(u["prior_mean"], "config.uncertainty.prior_mean");
    if (u.contains("prior_cov")) {
      double m[9];
      detail::vec_from(u["prior_cov"], m, 9, "config.uncertainty.prior_cov");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rc.uncertainty.prior_cov(r, c) = m[3 * r + c];
    }
    rc.uncertainty.validate();
  }
  if (j.contains("planner")) {
    const Json& p = j["planner"];
    detail::reject_unknown_keys(p,
                                {"mode", "num_candidates", "se2_height", "steps", "look_inward",
                                 "clearance", "cam_width", "cam_height", "fov_h", "fov_v", "near"},
                                "config.planner");
    if (p.contains("mode")) {
      std::string mode = p["mode"].get<std::string>();
      if (mode == "se3")
        rc.planner.mode = PoseMode::kSe3;
      else if (mode == "se2")
        rc.planner.mode = PoseMode::kSe2;
      else
        throw ParameterError("config.planner.mode must be 'se3' or 'se2'");
    }
    detail::opt(p, "num_candidates", rc.planner.num_candidates);
    detail::opt(p, "se2_height", rc.planner.se2_height);
    detail::opt(p, "steps", rc.planner.steps);
    detail::opt(p, "look_inward", rc.planner.look_inward);
    detail::opt(p, "clearance", rc.planner.clearance);
    detail::opt(p, "cam_width", rc.planner.cam_width);
    detail::opt(p, "cam_height", rc.planner.cam_height);
    detail::opt(p, "fov_h", rc.planner.fov_h);
    detail::opt(p, "fov_v", rc.planner.fov_v);
    detail::opt(p, "near", rc.planner.cam_near);
    rc.planner.validate();
  }
  rc.apply_seed();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(load_json_file(path));
}

}  // namespace gavis
