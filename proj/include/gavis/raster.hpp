// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/model.hpp>
#include <gavis/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace gavis {

// Deterministic tile-based CPU rasterizer. Parallelism is over tiles; tiles
// own disjoint pixels, and per-particle accumulators are merged in fixed tile
// order, so outputs are bit-identical for any thread count.

struct RasterConfig {
  int tile_size = 16;
  double transmittance_cutoff = 1e-4;
  double dilation = 0.3;
  double alpha_clamp_max = 0.99;

  void validate() const {
    require(tile_size >= 1, "tile_size must be at least 1");
    require(transmittance_cutoff > 0.0 && transmittance_cutoff < 1.0,
            "transmittance_cutoff must lie in (0, 1)");
    require(dilation >= 0.0, "dilation must be non-negative");
    require(alpha_clamp_max > 0.0 && alpha_clamp_max <= 1.0,
            "alpha_clamp_max must lie in (0, 1]");
  }
};

struct ImageSpaceSplat {
  int particle_index = -1;
  Vec2 mean = Vec2::Zero();
  double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;  // precision form
  double depth = 0.0;
  double radius = 0.0;  // 3 sigma screen-space extent
  double opacity = 0.0;
};

// EWA first-order splatting: 2D covariance = J Sigma_cam J^T, dilated on the
// diagonal before inversion to the conic. Culled when the mean is behind the
// near plane or lands outside the image expanded by the splat radius. The
// Jacobian point is clamped to 1.3x the frustum half-tangents; past that the
// affine approximation explodes the footprint of far off-axis splats.
inline std::optional<ImageSpaceSplat> project_particle(const GaussianParticle& g,
                                                       const CameraView& cam,
                                                       double dilation) {
  Vec3 t = cam.world_to_camera(g.position);
  if (t.z() < cam.near) return std::nullopt;
  const double fx = cam.focal_x(), fy = cam.focal_y();
  const double inv_z = 1.0 / t.z();
  Vec2 mean(cam.cx() + fx * t.x() * inv_z, cam.cy() + fy * t.y() * inv_z);

  const double limx = 1.3 * std::tan(0.5 * cam.fov_h);
  const double limy = 1.3 * std::tan(0.5 * cam.fov_v);
  const double jx = std::clamp(t.x() * inv_z, -limx, limx) * t.z();
  const double jy = std::clamp(t.y() * inv_z, -limy, limy) * t.z();
  Mat3 w2c = cam.rotation.transpose();
  Mat3 cov_cam = w2c * g.covariance() * w2c.transpose();
  Eigen::Matrix<double, 2, 3> jac;
  jac << fx * inv_z, 0.0, -fx * jx * inv_z * inv_z,
         0.0, fy * inv_z, -fy * jy * inv_z * inv_z;
  Mat2 cov2 = jac * cov_cam * jac.transpose();
  cov2(0, 0) += dilation * dilation;
  cov2(1, 1) += dilation * dilation;

  double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(1, 0);
  if (det <= 0.0) return std::nullopt;
  double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
  double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  double radius = 3.0 * std::sqrt(lam_max);
  if (mean.x() < -radius || mean.x() > cam.width + radius || mean.y() < -radius ||
      mean.y() > cam.height + radius)
    return std::nullopt;

  ImageSpaceSplat s;
  s.particle_index = -1;
  s.mean = mean;
  double inv_det = 1.0 / det;
  s.conic_a = cov2(1, 1) * inv_det;
  s.conic_b = -cov2(0, 1) * inv_det;
  s.conic_c = cov2(0, 0) * inv_det;
  s.depth = t.z();
  s.radius = radius;
  s.opacity = g.opacity;
  return s;
}

// The one overlap predicate shared by binning, compositing, and the
// brute-force oracle: the pixel center lies in the radius box.
inline bool splat_covers(const ImageSpaceSplat& s, double px, double py) {
  return std::abs(px - s.mean.x()) <= s.radius && std::abs(py - s.mean.y()) <= s.radius;
}

inline double splat_alpha(const ImageSpaceSplat& s, double px, double py,
                          double alpha_clamp_max) {
  double dx = px - s.mean.x();
  double dy = py - s.mean.y();
  double q = s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy + s.conic_c * dy * dy;
  double a = s.opacity * std::exp(-0.5 * q);
  return a > alpha_clamp_max ? alpha_clamp_max : a;
}

struct ProjectedView {
  std::vector<ImageSpaceSplat> splats;  // sorted by (depth, particle_index)
};

inline ProjectedView project_scene(const Scene& scene, const CameraView& cam,
                                   double dilation) {
  ProjectedView pv;
  pv.splats.reserve(scene.particles.size());
  for (std::size_t i = 0; i < scene.particles.size(); ++i) {
    auto s = project_particle(scene.particles[i], cam, dilation);
    if (!s) continue;
    s->particle_index = static_cast<int>(i);
    pv.splats.push_back(*s);
  }
  std::sort(pv.splats.begin(), pv.splats.end(),
            [](const ImageSpaceSplat& a, const ImageSpaceSplat& b) {
              if (a.depth != b.depth) return a.depth < b.depth;
              return a.particle_index < b.particle_index;
            });
  return pv;
}

struct SplatBinning {
  int tiles_x = 0, tiles_y = 0, tile_size = 16;
  std::vector<std::vector<int>> tiles;  // per tile: indices into the splat array
};

// Pixel index range covered by [m - r, m + r] given centers at i + 0.5.
inline void covered_pixel_range(double m, double r, int n, int* lo, int* hi) {
  *lo = std::max(0, static_cast<int>(std::ceil(m - r - 0.5)));
  *hi = std::min(n - 1, static_cast<int>(std::floor(m + r - 0.5)));
}

// Tile lists inherit the global (depth, index) order, so each list is already
// depth-sorted with the index tie-break.
inline SplatBinning splat_binning(const std::vector<ImageSpaceSplat>& splats, int width,
                                  int height, int tile_size) {
  SplatBinning bins;
  bins.tile_size = tile_size;
  bins.tiles_x = (width + tile_size - 1) / tile_size;
  bins.tiles_y = (height + tile_size - 1) / tile_size;
  bins.tiles.assign(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y, {});
  for (std::size_t k = 0; k < splats.size(); ++k) {
    const ImageSpaceSplat& s = splats[k];
    int x0, x1, y0, y1;
    covered_pixel_range(s.mean.x(), s.radius, width, &x0, &x1);
    covered_pixel_range(s.mean.y(), s.radius, height, &y0, &y1);
    if (x0 > x1 || y0 > y1) continue;
    for (int ty = y0 / tile_size; ty <= y1 / tile_size; ++ty)
      for (int tx = x0 / tile_size; tx <= x1 / tile_size; ++tx)
        bins.tiles[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(
            static_cast<int>(k));
  }
  return bins;
}

struct RenderOutput {
  int width = 0, height = 0;
  std::vector<double> color;          // H*W*3 in [0,1], rgb
  std::vector<double> depth;          // expected depth, 0 where no mass
  std::vector<double> transmittance;  // final T per pixel
};

// Front-to-back alpha compositing; color SH is evaluated at each pixel's ray
// direction. Compositing stops once T drops below the cutoff.
inline RenderOutput rasterize(const Scene& scene, const CameraView& cam,
                              const RasterConfig& rc, int threads = 1) {
  rc.validate();
  cam.validate();
  ProjectedView pv = project_scene(scene, cam, rc.dilation);
  SplatBinning bins = splat_binning(pv.splats, cam.width, cam.height, rc.tile_size);

  RenderOutput out;
  out.width = cam.width;
  out.height = cam.height;
  out.color.assign(static_cast<std::size_t>(cam.width) * cam.height * 3, 0.0);
  out.depth.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
  out.transmittance.assign(static_cast<std::size_t>(cam.width) * cam.height, 1.0);

  const int num_tiles = bins.tiles_x * bins.tiles_y;
  const int degree = scene.color_degree;
  parallel_for(num_tiles, threads, [&](int tile) {
    const auto& list = bins.tiles[tile];
    int tx = tile % bins.tiles_x, ty = tile / bins.tiles_x;
    int px0 = tx * rc.tile_size, px1 = std::min(cam.width, px0 + rc.tile_size);
    int py0 = ty * rc.tile_size, py1 = std::min(cam.height, py0 + rc.tile_size);
    std::array<double, sh_basis_size(kMaxShDegree)> basis;
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const double cxp = px + 0.5, cyp = py + 0.5;
        Vec3 ray = cam.pixel_ray(cxp, cyp);
        eval_real_sh_block(degree, ray, basis.data());
        double t_cur = 1.0;
        double rgb[3] = {0.0, 0.0, 0.0};
        double depth_acc = 0.0;
        for (int idx : list) {
          const ImageSpaceSplat& s = pv.splats[idx];
          if (!splat_covers(s, cxp, cyp)) continue;
          double a = splat_alpha(s, cxp, cyp, rc.alpha_clamp_max);
          double w = a * t_cur;
          if (w > 0.0) {
            const auto& p = scene.particles[s.particle_index];
            int count = static_cast<int>(p.color_sh[0].size());
            for (int k = 0; k < 3; ++k) {
              double c = 0.0;
              for (int i = 0; i < count; ++i) c += p.color_sh[k][i] * basis[i];
              rgb[k] += w * std::clamp(c, 0.0, 1.0);
            }
            depth_acc += w * s.depth;
          }
          t_cur *= 1.0 - a;
          if (t_cur < rc.transmittance_cutoff) break;
        }
        std::size_t pix = static_cast<std::size_t>(py) * cam.width + px;
        for (int k = 0; k < 3; ++k) out.color[pix * 3 + k] = rgb[k];
        out.depth[pix] = depth_acc;
        out.transmittance[pix] = t_cur;
      }
    }
  });
  return out;
}

// Per-particle single-view visibility: for every covered pixel accumulate the
// transmittance in front of the splat and a touch count, then average. A
// particle that never enters the frustum keeps v = 0, which doubles as the
// field-of-view indicator.
inline std::vector<double> single_view_visibility(const Scene& scene, const CameraView& cam,
                                                  const RasterConfig& rc, int threads = 1) {
  rc.validate();
  cam.validate();
  ProjectedView pv = project_scene(scene, cam, rc.dilation);
  SplatBinning bins = splat_binning(pv.splats, cam.width, cam.height, rc.tile_size);

  const int num_tiles = bins.tiles_x * bins.tiles_y;
  // Thread-local per-tile partials, merged in tile order below.
  std::vector<std::vector<double>> tile_vis(num_tiles);
  std::vector<std::vector<long long>> tile_count(num_tiles);

  parallel_for(num_tiles, threads, [&](int tile) {
    const auto& list = bins.tiles[tile];
    if (list.empty()) return;
    auto& vis = tile_vis[tile];
    auto& count = tile_count[tile];
    vis.assign(list.size(), 0.0);
    count.assign(list.size(), 0);
    int tx = tile % bins.tiles_x, ty = tile / bins.tiles_x;
    int px0 = tx * rc.tile_size, px1 = std::min(cam.width, px0 + rc.tile_size);
    int py0 = ty * rc.tile_size, py1 = std::min(cam.height, py0 + rc.tile_size);
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const double cxp = px + 0.5, cyp = py + 0.5;
        double t_cur = 1.0;
        for (std::size_t k = 0; k < list.size(); ++k) {
          const ImageSpaceSplat& s = pv.splats[list[k]];
          if (!splat_covers(s, cxp, cyp)) continue;
          vis[k] += t_cur;
          count[k] += 1;
          double a = splat_alpha(s, cxp, cyp, rc.alpha_clamp_max);
          t_cur *= 1.0 - a;
          if (t_cur < rc.transmittance_cutoff) break;
        }
      }
    }
  });

  std::vector<double> vis_sum(scene.particles.size(), 0.0);
  std::vector<long long> touch(scene.particles.size(), 0);
  for (int tile = 0; tile < num_tiles; ++tile) {
    const auto& list = bins.tiles[tile];
    for (std::size_t k = 0; k < tile_vis[tile].size(); ++k) {
      int particle = pv.splats[list[k]].particle_index;
      vis_sum[particle] += tile_vis[tile][k];
      touch[particle] += tile_count[tile][k];
    }
  }
  std::vector<double> v(scene.particles.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (touch[i] > 0) v[i] = vis_sum[i] / static_cast<double>(touch[i]);
  return v;
}

}  // namespace gavis
