// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/rng.hpp>
#include <gavis/sh.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace gavis {

struct Bounds {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double volume() const {
    Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
  bool contains(const Vec3& p, double slack = 0.0) const {
    Vec3 pad = slack * extent();
    return (p.array() >= (min - pad).array()).all() &&
           (p.array() <= (max + pad).array()).all();
  }
};

struct GaussianParticle {
  Vec3 position = Vec3::Zero();
  Quat rotation = Quat::Identity();        // (w, x, y, z)
  Vec3 scale = Vec3::Ones();               // per-axis standard deviations
  double opacity = 0.0;
  std::array<std::vector<double>, 3> color_sh;  // per channel, (Lc+1)^2 coeffs
  bool is_virtual = false;

  Mat3 covariance() const {
    Mat3 m = rotation.toRotationMatrix() * scale.asDiagonal();
    return m * m.transpose();
  }
};

// Clamped SH color for one channel set; direction is a unit vector.
inline Vec3 eval_color(const GaussianParticle& p, const Vec3& dir, int color_degree) {
  int n = sh_basis_size(color_degree);
  std::array<double, sh_basis_size(kMaxShDegree)> basis;
  eval_real_sh_block(color_degree, dir, basis.data());
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    double acc = 0.0;
    const auto& coeffs = p.color_sh[k];
    int count = std::min<int>(n, static_cast<int>(coeffs.size()));
    for (int i = 0; i < count; ++i) acc += coeffs[i] * basis[i];
    c[k] = std::clamp(acc, 0.0, 1.0);
  }
  return c;
}

// Pinhole camera. Camera-to-world pose, right-handed, looks down +z, image
// origin top-left, pixel centers at half-integer coordinates.
struct CameraView {
  Mat3 rotation = Mat3::Identity();  // columns: camera x (image right), y (image down), z (forward) in world
  Vec3 position = Vec3::Zero();
  int width = 128;
  int height = 128;
  double fov_h = kPi / 2.0;
  double fov_v = kPi / 2.0;
  double near = 0.05;

  double focal_x() const { return 0.5 * width / std::tan(0.5 * fov_h); }
  double focal_y() const { return 0.5 * height / std::tan(0.5 * fov_v); }
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }

  Vec3 world_to_camera(const Vec3& p) const { return rotation.transpose() * (p - position); }

  // Unit world-space direction through pixel coordinates (px, py).
  Vec3 pixel_ray(double px, double py) const {
    Vec3 dir_cam((px - cx()) / focal_x(), (py - cy()) / focal_y(), 1.0);
    return (rotation * dir_cam).normalized();
  }

  // Pixel coordinates and camera-frame depth of a world point; false when the
  // point is behind the near plane or outside the image.
  bool project(const Vec3& p, Vec2* pixel = nullptr, double* depth = nullptr) const {
    Vec3 cam = world_to_camera(p);
    if (cam.z() < near) return false;
    Vec2 pix(cx() + focal_x() * cam.x() / cam.z(), cy() + focal_y() * cam.y() / cam.z());
    if (pixel) *pixel = pix;
    if (depth) *depth = cam.z();
    return pix.x() >= 0.0 && pix.x() <= width && pix.y() >= 0.0 && pix.y() <= height;
  }

  void validate() const {
    require(width >= 1 && height >= 1, "camera image size must be at least 1x1");
    require(fov_h > 0.0 && fov_h < kPi && fov_v > 0.0 && fov_v < kPi,
            "camera fov must lie in (0, pi)");
    require(near > 0.0, "camera near plane must be positive");
  }
};

inline CameraView make_lookat(const Vec3& position, const Vec3& target,
                              const Vec3& up = Vec3(0, 0, 1), int width = 128,
                              int height = 128, double fov_h = kPi / 2.0,
                              double fov_v = kPi / 2.0) {
  Vec3 forward = target - position;
  require(forward.norm() > 1e-12, "lookat target coincides with position");
  forward.normalize();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3(1, 0, 0));
  right.normalize();
  Vec3 down = forward.cross(right);
  CameraView view;
  view.rotation.col(0) = right;
  view.rotation.col(1) = down;
  view.rotation.col(2) = forward;
  view.position = position;
  view.width = width;
  view.height = height;
  view.fov_h = fov_h;
  view.fov_v = fov_v;
  return view;
}

struct Scene {
  int color_degree = 0;
  Bounds bounds;
  std::vector<GaussianParticle> particles;
};

struct Trajectory {
  std::vector<CameraView> views;
};

// Ground-truth planar surfaces; consumed only by oracles and metrics.
struct OccluderRect {
  Vec3 corner = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  bool opaque = true;

  double area() const { return edge_u.cross(edge_v).norm(); }
  Vec3 point_at(double u, double v) const { return corner + u * edge_u + v * edge_v; }
  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }
};

struct OccluderSet {
  std::vector<OccluderRect> rectangles;
  double sample_density = 64.0;  // surface samples per unit area
};

// Segment/ray vs rectangle. Solves corner + u eu + v ev = origin + t dir and
// accepts u, v in [0,1]. Returns false for parallel or out-of-patch hits.
inline bool intersect_rect(const OccluderRect& rect, const Vec3& origin, const Vec3& dir,
                           double* t_out = nullptr, double* u_out = nullptr,
                           double* v_out = nullptr) {
  Mat3 m;
  m.col(0) = rect.edge_u;
  m.col(1) = rect.edge_v;
  m.col(2) = -dir;
  double det = m.determinant();
  if (std::abs(det) < 1e-14) return false;
  Vec3 sol = m.inverse() * (origin - rect.corner);
  double u = sol.x(), v = sol.y(), t = sol.z();
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return false;
  if (t_out) *t_out = t;
  if (u_out) *u_out = u;
  if (v_out) *v_out = v;
  return true;
}

struct TwoRoomParams {
  Vec3 room_size = Vec3(4, 4, 3);  // one room; the pair spans 2x along x
  double wall_spacing = 0.2;
  double doorway_width = 1.0;
  uint64_t seed = 0;
  double wall_opacity = 0.95;
};

struct SynthResult {
  Scene scene;
  OccluderSet occluders;
};

// Two adjacent box rooms sharing the x = room_size.x wall, which carries a
// full-height doorway gap centered in y. Walls are tiled with opaque
// particles at the grid pitch; the occluder set mirrors the same walls as
// rectangles (the shared wall as two pieces flanking the doorway).
inline SynthResult synth_two_room(const TwoRoomParams& params) {
  const Vec3& rs = params.room_size;
  require(rs.x() > 0 && rs.y() > 0 && rs.z() > 0, "room_size components must be positive");
  require(params.wall_spacing > 0, "wall_spacing must be positive");
  require(params.doorway_width > 0 && params.doorway_width <= rs.y(),
          "doorway_width must lie in (0, room_size.y]");

  const double sx = rs.x(), sy = rs.y(), sz = rs.z();
  SynthResult result;
  Scene& scene = result.scene;
  scene.color_degree = 0;
  scene.bounds.min = Vec3::Zero();
  scene.bounds.max = Vec3(2 * sx, sy, sz);

  struct Face {
    Vec3 corner, edge_u, edge_v;
    bool shared;
  };
  const std::vector<Face> faces = {
      {Vec3(0, 0, 0), Vec3(2 * sx, 0, 0), Vec3(0, sy, 0), false},    // floor
      {Vec3(0, 0, sz), Vec3(2 * sx, 0, 0), Vec3(0, sy, 0), false},   // ceiling
      {Vec3(0, 0, 0), Vec3(0, sy, 0), Vec3(0, 0, sz), false},        // west
      {Vec3(2 * sx, 0, 0), Vec3(0, sy, 0), Vec3(0, 0, sz), false},   // east
      {Vec3(0, 0, 0), Vec3(2 * sx, 0, 0), Vec3(0, 0, sz), false},    // south
      {Vec3(0, sy, 0), Vec3(2 * sx, 0, 0), Vec3(0, 0, sz), false},   // north
      {Vec3(sx, 0, 0), Vec3(0, sy, 0), Vec3(0, 0, sz), true},        // shared
  };

  const double door_lo = 0.5 * (sy - params.doorway_width);
  const double door_hi = 0.5 * (sy + params.doorway_width);
  SplitMix64 jitter(derive_seed(params.seed, 0x5eedu));

  for (const Face& face : faces) {
    double len_u = face.edge_u.norm(), len_v = face.edge_v.norm();
    int nu = static_cast<int>(std::ceil(len_u / params.wall_spacing));
    int nv = static_cast<int>(std::ceil(len_v / params.wall_spacing));
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        Vec3 p = face.corner + face.edge_u * ((i + 0.5) / nu) + face.edge_v * ((j + 0.5) / nv);
        double shade = 0.62 + 0.15 * (jitter.next_double() - 0.5);
        if (face.shared && p.y() > door_lo && p.y() < door_hi) continue;
        GaussianParticle g;
        g.position = p;
        g.scale = Vec3::Constant(0.5 * params.wall_spacing);
        g.opacity = params.wall_opacity;
        for (int k = 0; k < 3; ++k) g.color_sh[k] = {shade / kY00};
        scene.particles.push_back(std::move(g));
      }
    }
  }

  OccluderSet& occ = result.occluders;
  for (const Face& face : faces) {
    if (!face.shared) {
      occ.rectangles.push_back({face.corner, face.edge_u, face.edge_v, true});
      continue;
    }
    if (door_lo > 0.0)
      occ.rectangles.push_back({face.corner, Vec3(0, door_lo, 0), face.edge_v, true});
    if (door_hi < sy)
      occ.rectangles.push_back(
          {Vec3(sx, door_hi, 0), Vec3(0, sy - door_hi, 0), face.edge_v, true});
  }
  return result;
}

}  // namespace gavis
