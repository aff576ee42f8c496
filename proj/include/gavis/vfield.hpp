// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/model.hpp>
#include <gavis/parallel.hpp>
#include <gavis/raster.hpp>
#include <gavis/rng.hpp>
#include <gavis/sh.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace gavis {

// Per-particle SH coefficient block of the anisotropic visibility field, plus
// the metadata needed for constant-time directional queries.
struct VisibilityField {
  int degree = 2;
  VmfParams vmf;
  int num_views = 0;
  std::size_t num_particles = 0;
  std::vector<double> gamma;          // num_particles * (degree+1)^2, row-major
  std::vector<uint8_t> virtual_mask;  // virtual rows stay all-zero

  int basis_size() const { return sh_basis_size(degree); }
  const double* coeffs(std::size_t particle) const {
    return gamma.data() + particle * static_cast<std::size_t>(basis_size());
  }
};

// gamma += b * 4 pi zeta i_l(kappa) * Y_lm(d), d the unit vector from the
// camera center to the particle center. Virtual particles are skipped before
// accumulation, so their coefficient rows remain zero.
inline void accumulate_view(VisibilityField& field, const Scene& scene,
                            const CameraView& view, const std::vector<double>& visibility,
                            int threads = 1) {
  check_invariant(field.num_particles == scene.particles.size(),
                  "accumulate_view: field/scene particle count mismatch");
  const auto scales = vmf_degree_scales(field.vmf, field.degree);
  const int nb = field.basis_size();
  parallel_for(static_cast<int>(scene.particles.size()), threads, [&](int i) {
    if (field.virtual_mask[i] || visibility[i] <= 0.0) return;
    Vec3 d = scene.particles[i].position - view.position;
    double norm = d.norm();
    if (norm < 1e-12) return;
    d /= norm;
    std::array<double, sh_basis_size(kMaxShDegree)> basis;
    eval_real_sh_block(field.degree, d, basis.data());
    double* row = field.gamma.data() + static_cast<std::size_t>(i) * nb;
    for (int l = 0; l <= field.degree; ++l) {
      double scale = visibility[i] * scales[l];
      for (int m = -l; m <= l; ++m) {
        int idx = sh_flat_index(l, m);
        row[idx] += scale * basis[idx];
      }
    }
  });
  field.num_views += 1;
}

// Renders each view's per-particle visibility (views in parallel, raster
// single-threaded inside) and folds the contributions in trajectory order, so
// the result is bit-identical for any thread count.
inline VisibilityField construct_field(const Scene& scene, const Trajectory& trajectory,
                                       const VmfParams& vmf, int degree,
                                       const RasterConfig& rc = {}, int threads = 1) {
  require(!trajectory.views.empty(), "construct_field: trajectory must be nonempty");
  require(degree >= 0 && degree <= kMaxShDegree, "construct_field: degree out of range");
  VisibilityField field;
  field.degree = degree;
  field.vmf = vmf;
  field.num_particles = scene.particles.size();
  field.gamma.assign(field.num_particles * static_cast<std::size_t>(field.basis_size()),
                     0.0);
  field.virtual_mask.resize(field.num_particles);
  for (std::size_t i = 0; i < field.num_particles; ++i)
    field.virtual_mask[i] = scene.particles[i].is_virtual ? 1 : 0;

  const int num_views = static_cast<int>(trajectory.views.size());
  std::vector<std::vector<double>> per_view(num_views);
  parallel_for(num_views, threads, [&](int v) {
    per_view[v] = single_view_visibility(scene, trajectory.views[v], rc, 1);
  });
  for (int v = 0; v < num_views; ++v)
    accumulate_view(field, scene, trajectory.views[v], per_view[v], threads);
  field.num_views = num_views;  // accumulate_view already counted; keep exact
  return field;
}

// AM-GM lower bound: Vtilde = sum gamma Y(d) clamped to [0, |P|], then
// v = 1 - (1 - Vtilde/|P|)^|P|. Virtual particles answer 0 immediately.
inline double query_visibility(const VisibilityField& field, std::size_t particle_index,
                               const Vec3& d) {
  require(particle_index < field.num_particles, "query: particle index out of range");
  if (field.virtual_mask[particle_index]) return 0.0;
  if (field.num_views <= 0) return 0.0;
  std::array<double, sh_basis_size(kMaxShDegree)> basis;
  eval_real_sh_block(field.degree, d, basis.data());
  const double* row = field.coeffs(particle_index);
  double vt = 0.0;
  const int nb = field.basis_size();
  for (int i = 0; i < nb; ++i) vt += row[i] * basis[i];
  const double p = static_cast<double>(field.num_views);
  if (vt < 0.0) vt = 0.0;
  if (vt > p) vt = p;
  double v = 1.0 - std::pow(1.0 - vt / p, p);
  return std::clamp(v, 0.0, 1.0);
}

struct ViewQuery {
  std::vector<int> particle_indices;  // particles inside the camera frustum
  std::vector<double> visibilities;
};

// Batch query with d per particle set to the camera-to-center direction;
// particles culled by the projection rules are omitted, matching the render.
inline ViewQuery query_view(const VisibilityField& field, const Scene& scene,
                            const CameraView& camera, double dilation = 0.3) {
  require(field.num_particles == scene.particles.size(),
          "query_view: field/scene particle count mismatch");
  ViewQuery result;
  for (std::size_t i = 0; i < scene.particles.size(); ++i) {
    auto splat = project_particle(scene.particles[i], camera, dilation);
    if (!splat) continue;
    Vec3 d = (scene.particles[i].position - camera.position).normalized();
    result.particle_indices.push_back(static_cast<int>(i));
    result.visibilities.push_back(query_visibility(field, i, d));
  }
  return result;
}

struct DensityControlConfig {
  double rho = 100.0;   // virtual particles per unit volume
  double eta = 0.5;     // excess-volume fraction
  double eps_v = 0.95;  // prune threshold on isotropic multi-view visibility
  uint64_t seed = 0;

  void validate() const {
    require(rho > 0.0, "density rho must be positive");
    require(eta > -1.0, "density eta must exceed -1");
    require(eps_v > 0.0 && eps_v <= 1.0, "density eps_v must lie in (0, 1]");
  }
};

inline double virtual_particle_scale(const DensityControlConfig& cfg) {
  return std::cbrt(3.0 * (1.0 + cfg.eta) / (4.0 * kPi * cfg.rho));
}

// Samples floor(rho * volume) transparent virtual particles uniformly in the
// scene bounds, keeps the ones whose isotropic multi-view visibility
// 1 - prod(1 - b_p) stays at or below eps_v (everything else is free space),
// and appends them to the scene flagged virtual.
inline Scene density_control(const Scene& scene, const Trajectory& trajectory,
                             const DensityControlConfig& cfg, const RasterConfig& rc = {},
                             int threads = 1) {
  cfg.validate();
  const double volume = scene.bounds.volume();
  require(volume > 0.0, "density_control: scene bounds volume must be positive");

  const std::size_t n_virtual = static_cast<std::size_t>(std::floor(cfg.rho * volume));
  const std::size_t n_real = scene.particles.size();
  const double s = virtual_particle_scale(cfg);
  const int color_count = sh_basis_size(scene.color_degree);

  Scene probe = scene;
  probe.particles.reserve(n_real + n_virtual);
  for (std::size_t k = 0; k < n_virtual; ++k) {
    SplitMix64 g(derive_seed(cfg.seed, k));
    GaussianParticle vp;
    const double ux = g.next_double();
    const double uy = g.next_double();
    const double uz = g.next_double();
    vp.position =
        scene.bounds.min + scene.bounds.extent().cwiseProduct(Vec3(ux, uy, uz));
    vp.scale = Vec3::Constant(s);
    vp.opacity = 0.0;
    vp.is_virtual = true;
    for (int c = 0; c < 3; ++c) vp.color_sh[c].assign(color_count, 0.0);
    probe.particles.push_back(std::move(vp));
  }

  std::vector<double> unseen(n_virtual, 1.0);  // prod (1 - b_p)
  for (const CameraView& view : trajectory.views) {
    auto b = single_view_visibility(probe, view, rc, threads);
    for (std::size_t k = 0; k < n_virtual; ++k) unseen[k] *= 1.0 - b[n_real + k];
  }

  Scene out = scene;
  for (std::size_t k = 0; k < n_virtual; ++k) {
    double vtilde = 1.0 - unseen[k];
    if (vtilde > cfg.eps_v) continue;  // free space
    out.particles.push_back(probe.particles[n_real + k]);
  }
  return out;
}

}  // namespace gavis
