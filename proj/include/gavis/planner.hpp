// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/model.hpp>
#include <gavis/oracle.hpp>
#include <gavis/parallel.hpp>
#include <gavis/raster.hpp>
#include <gavis/rng.hpp>
#include <gavis/uncertainty.hpp>
#include <gavis/vfield.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace gavis {

enum class PoseMode { kSe3, kSe2 };

struct PlannerConfig {
  PoseMode mode = PoseMode::kSe3;
  int num_candidates = 128;
  double se2_height = 1.5;
  int steps = 10;
  uint64_t seed = 0;
  bool look_inward = true;  // SE3 orientations aim at the bounds center; else uniform
  double clearance = 0.1;
  // Intrinsics stamped onto every candidate pose.
  int cam_width = 128, cam_height = 128;
  double fov_h = kPi / 2.0, fov_v = kPi / 2.0;
  double cam_near = 0.05;

  void validate() const {
    require(num_candidates >= 1, "num_candidates must be at least 1");
    require(steps >= 0, "steps must be non-negative");
  }
};

// Closest distance from a point to a rectangle patch (edges are orthogonal by
// the occluder invariant, so clamping the plane projection is exact).
inline double rect_distance(const OccluderRect& rect, const Vec3& p) {
  Vec3 w = p - rect.corner;
  double uu = rect.edge_u.squaredNorm(), vv = rect.edge_v.squaredNorm();
  double u = uu > 0.0 ? std::clamp(w.dot(rect.edge_u) / uu, 0.0, 1.0) : 0.0;
  double v = vv > 0.0 ? std::clamp(w.dot(rect.edge_v) / vv, 0.0, 1.0) : 0.0;
  return (rect.point_at(u, v) - p).norm();
}

// Rejection-samples collision-free poses: positions uniform in bounds (SE3)
// or on the z = se2_height plane (SE2), discarded when within `clearance` of
// any opaque rectangle. Deterministic given step_seed.
inline std::vector<CameraView> sample_candidates(const Bounds& bounds,
                                                 const OccluderSet& occluders,
                                                 const PlannerConfig& pc,
                                                 uint64_t step_seed) {
  pc.validate();
  require(bounds.volume() > 0.0, "sample_candidates: bounds volume must be positive");
  SplitMix64 g(derive_seed(step_seed, 0xca4d1d));
  std::vector<CameraView> candidates;
  candidates.reserve(pc.num_candidates);
  const long long budget = 100LL * pc.num_candidates;
  long long attempts = 0;
  while (static_cast<int>(candidates.size()) < pc.num_candidates) {
    if (attempts++ >= budget)
      throw ParameterError("candidate sampling budget exhausted; scene too cluttered");
    Vec3 p(g.uniform(bounds.min.x(), bounds.max.x()),
           g.uniform(bounds.min.y(), bounds.max.y()),
           g.uniform(bounds.min.z(), bounds.max.z()));
    double yaw = g.uniform(0.0, 2.0 * kPi);  // consumed in both modes to keep
    Quat q = g.rotation();                   // the stream layout fixed per draw
    if (pc.mode == PoseMode::kSe2) p.z() = pc.se2_height;
    bool collides = false;
    for (const auto& rect : occluders.rectangles) {
      if (!rect.opaque) continue;
      if (rect_distance(rect, p) < pc.clearance) {
        collides = true;
        break;
      }
    }
    if (collides) continue;

    CameraView view;
    if (pc.mode == PoseMode::kSe2) {
      Vec3 forward(std::cos(yaw), std::sin(yaw), 0.0);
      view = make_lookat(p, p + forward);
    } else if (pc.look_inward) {
      Vec3 target = bounds.center();
      if ((target - p).norm() < 1e-9) target += Vec3(1e-3, 0, 0);
      view = make_lookat(p, target);
    } else {
      view.rotation = q.normalized().toRotationMatrix();
      view.position = p;
    }
    view.position = p;
    view.width = pc.cam_width;
    view.height = pc.cam_height;
    view.fov_h = pc.fov_h;
    view.fov_v = pc.fov_v;
    view.near = pc.cam_near;
    candidates.push_back(view);
  }
  return candidates;
}

struct NbvResult {
  int best_index = -1;
  std::vector<double> scores;
};

// Scores every candidate by the image entropy of its predicted uncertainty
// render; candidates are scored in parallel and reduced in index order, ties
// broken by the lowest index.
inline NbvResult select_nbv(const Scene& scene_aug, const VisibilityField& field,
                            const std::vector<CameraView>& candidates,
                            const RasterConfig& rc, const UncertaintyConfig& uc,
                            int threads = 1) {
  require(!candidates.empty(), "select_nbv: candidate list must be nonempty");
  NbvResult result;
  result.scores.assign(candidates.size(), 0.0);
  const bool needs_depth = uc.correlation == CorrelationMode::kHook;
  parallel_for(static_cast<int>(candidates.size()), threads, [&](int i) {
    std::vector<double> depth;
    EntropyMap map = render_entropy(scene_aug, field, candidates[i], rc, uc, 1,
                                    needs_depth ? &depth : nullptr);
    if (!needs_depth) depth.assign(map.entropy.size(), 0.0);
    result.scores[i] = image_entropy(map, depth, uc);
  });
  result.best_index = 0;
  for (std::size_t i = 1; i < result.scores.size(); ++i)
    if (result.scores[i] > result.scores[result.best_index])
      result.best_index = static_cast<int>(i);
  return result;
}

// True whether a surface point is observed by a view: inside the frustum and
// the segment to the camera is unobstructed by every other opaque rectangle.
inline bool point_visible_from_view(const Vec3& point, const CameraView& view,
                                    const OccluderSet& occluders, int exclude_rect = -1) {
  if (!view.project(point)) return false;
  Vec3 seg = point - view.position;
  for (std::size_t j = 0; j < occluders.rectangles.size(); ++j) {
    const auto& rect = occluders.rectangles[j];
    if (!rect.opaque || static_cast<int>(j) == exclude_rect) continue;
    double t;
    if (intersect_rect(rect, view.position, seg, &t) && t > 1e-9 && t < 1.0 - 1e-9)
      return false;
  }
  return true;
}

// Area-weighted fraction of occluder surface observed by at least one view.
inline double vis_coverage(const OccluderSet& occluders, const Trajectory& trajectory) {
  double total_area = 0.0, visible_area = 0.0;
  for (std::size_t r = 0; r < occluders.rectangles.size(); ++r) {
    const OccluderRect& rect = occluders.rectangles[r];
    double area = rect.area();
    require(area > 0.0, "vis_coverage: occluder rectangle with zero area");
    total_area += area;
    if (trajectory.views.empty()) continue;
    double per_side = std::sqrt(occluders.sample_density);
    int nu = std::max(1, static_cast<int>(std::lround(rect.edge_u.norm() * per_side)));
    int nv = std::max(1, static_cast<int>(std::lround(rect.edge_v.norm() * per_side)));
    long long seen = 0;
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        Vec3 p = rect.point_at((i + 0.5) / nu, (j + 0.5) / nv);
        for (const CameraView& view : trajectory.views) {
          if (point_visible_from_view(p, view, occluders, static_cast<int>(r))) {
            ++seen;
            break;
          }
        }
      }
    }
    visible_area += area * static_cast<double>(seen) / (static_cast<double>(nu) * nv);
  }
  return total_area > 0.0 ? visible_area / total_area : 0.0;
}

// Binary ground-truth visibility render: 1 where the nearest opaque surface
// along the pixel ray was never observed by the training views, 0 elsewhere
// (including background).
inline std::vector<double> render_gt_visibility(const OccluderSet& occluders,
                                                const Trajectory& seen,
                                                const CameraView& query) {
  query.validate();
  std::vector<double> map(static_cast<std::size_t>(query.width) * query.height, 0.0);
  for (int py = 0; py < query.height; ++py) {
    for (int px = 0; px < query.width; ++px) {
      Vec3 dir = query.pixel_ray(px + 0.5, py + 0.5);
      double best_t = std::numeric_limits<double>::infinity();
      int best_rect = -1;
      for (std::size_t j = 0; j < occluders.rectangles.size(); ++j) {
        if (!occluders.rectangles[j].opaque) continue;
        double t;
        if (intersect_rect(occluders.rectangles[j], query.position, dir, &t) &&
            t > 1e-9 && t < best_t) {
          best_t = t;
          best_rect = static_cast<int>(j);
        }
      }
      if (best_rect < 0) continue;
      Vec3 point = query.position + best_t * dir;
      bool observed = false;
      for (const CameraView& view : seen.views) {
        if (point_visible_from_view(point, view, occluders, best_rect)) {
          observed = true;
          break;
        }
      }
      if (!observed) map[static_cast<std::size_t>(py) * query.width + px] = 1.0;
    }
  }
  return map;
}

// Sparsification gap between the prediction-ordered and oracle-ordered
// remaining-error curves, averaged over removal fractions 0.01 .. 0.99.
inline double ause_v(const std::vector<double>& prediction, const std::vector<double>& gt) {
  require(!prediction.empty() && prediction.size() == gt.size(),
          "ause_v: prediction and ground truth must share a nonempty shape");
  for (double g : gt)
    require(g == 0.0 || g == 1.0, "ause_v: ground-truth map must be binary");
  const std::size_t n = gt.size();
  auto order_by = [n](const std::vector<double>& key) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (key[a] != key[b]) return key[a] > key[b];
      return a < b;
    });
    return idx;
  };
  std::vector<int> by_pred = order_by(prediction);
  std::vector<int> by_gt = order_by(gt);
  std::vector<double> pred_prefix(n + 1, 0.0), gt_prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    pred_prefix[i + 1] = pred_prefix[i] + gt[by_pred[i]];
    gt_prefix[i + 1] = gt_prefix[i] + gt[by_gt[i]];
  }
  double gap = 0.0;
  int fractions = 0;
  for (int f = 1; f <= 99; ++f) {
    std::size_t removed = static_cast<std::size_t>(std::floor(0.01 * f * n));
    if (removed >= n) removed = n - 1;
    double remaining = static_cast<double>(n - removed);
    double err_pred = (pred_prefix[n] - pred_prefix[removed]) / remaining;
    double err_gt = (gt_prefix[n] - gt_prefix[removed]) / remaining;
    gap += std::abs(err_pred - err_gt);
    ++fractions;
  }
  return gap / fractions;
}

struct MappingContext {
  VmfParams vmf;
  int field_degree = 2;
  RasterConfig raster;
  UncertaintyConfig uncertainty;
  DensityControlConfig density;
  bool density_enabled = true;
};

struct MappingStep {
  std::vector<double> scores;
  int chosen_index = -1;
  double score = 0.0;
  double vis_coverage = 0.0;
  double mean_entropy = 0.0;  // chosen view's mean per-pixel entropy
};

struct MappingLog {
  Trajectory chosen_views;
  std::vector<MappingStep> steps;
};

// Greedy next-best-view loop: per step, resample virtual density for the
// current trajectory, rebuild the field, sample a candidate pool, pick the
// entropy argmax, and append it. Fully deterministic given the seeds.
inline MappingLog run_active_mapping(const Scene& scene, const OccluderSet& occluders,
                                     const Trajectory& init, const PlannerConfig& pc,
                                     const MappingContext& ctx, int threads = 1) {
  pc.validate();
  require(!init.views.empty(), "run_active_mapping: initial trajectory must be nonempty");
  Trajectory trajectory = init;
  MappingLog log;
  for (int step = 0; step < pc.steps; ++step) {
    DensityControlConfig dc = ctx.density;
    dc.seed = derive_seed(ctx.density.seed, static_cast<uint64_t>(step));
    Scene aug = ctx.density_enabled
                    ? density_control(scene, trajectory, dc, ctx.raster, threads)
                    : scene;
    VisibilityField field =
        construct_field(aug, trajectory, ctx.vmf, ctx.field_degree, ctx.raster, threads);
    std::vector<CameraView> candidates = sample_candidates(
        scene.bounds, occluders, pc, derive_seed(pc.seed, static_cast<uint64_t>(step)));
    NbvResult nbv = select_nbv(aug, field, candidates, ctx.raster, ctx.uncertainty, threads);

    const CameraView& chosen = candidates[nbv.best_index];
    trajectory.views.push_back(chosen);
    log.chosen_views.views.push_back(chosen);
    MappingStep rec;
    rec.scores = nbv.scores;
    rec.chosen_index = nbv.best_index;
    rec.score = nbv.scores[nbv.best_index];
    rec.vis_coverage = vis_coverage(occluders, trajectory);
    rec.mean_entropy =
        rec.score / (static_cast<double>(chosen.width) * chosen.height);
    log.steps.push_back(std::move(rec));
  }
  return log;
}

}  // namespace gavis
