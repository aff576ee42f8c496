// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/model.hpp>
#include <gavis/parallel.hpp>
#include <gavis/raster.hpp>
#include <gavis/vfield.hpp>

#include <array>
#include <cmath>
#include <vector>

namespace gavis {

// (3/2) log(2 pi e), the per-channel-triple Gaussian entropy constant.
inline constexpr double kGaussEntropyConst = 4.256815599614018;

enum class VarianceProvider { kConstant, kShPropagation };
enum class CorrelationMode { kNone, kHook };

struct UncertaintyConfig {
  double beta = 0.5;
  double prior_opacity = 0.15;           // o_0
  Mat3 prior_cov = Mat3::Identity();     // Q_0
  double color_sigma = 0.1;              // Q_c = sigma^2 I under kConstant
  VarianceProvider variance_provider = VarianceProvider::kConstant;
  CorrelationMode correlation = CorrelationMode::kNone;
  double correlation_lambda = 1.0;
  // The entropy bound never consults means; the prior mean exists so mixture
  // dumps and Monte-Carlo oracles have a fully specified distribution.
  Vec3 prior_mean = Vec3(0.5, 0.5, 0.5);
  // Per-particle per-channel SH coefficient variances for kShPropagation,
  // supplied externally (e.g. from a trained model's estimator).
  const std::vector<std::array<std::vector<double>, 3>>* coeff_variances = nullptr;

  void validate() const {
    require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
    require(prior_opacity >= 0.0 && prior_opacity <= 1.0,
            "prior_opacity must lie in [0, 1]");
    require(color_sigma > 0.0, "color_sigma must be positive");
    Eigen::LLT<Mat3> llt(prior_cov);
    require(llt.info() == Eigen::Success, "prior_cov must be symmetric positive-definite");
    if (variance_provider == VarianceProvider::kConstant) {
      double det_qc = std::pow(color_sigma, 6.0);
      require(prior_cov.determinant() >= det_qc,
              "prior_cov determinant must dominate the color covariance");
    }
  }
};

// alpha* = (v + beta (1 - v)) alpha + o_0 (1 - beta)(1 - v), clamped.
inline double compensated_alpha(double alpha, double v, const UncertaintyConfig& uc,
                                double alpha_clamp_max) {
  double a = (v + uc.beta * (1.0 - v)) * alpha + uc.prior_opacity * (1.0 - uc.beta) * (1.0 - v);
  return std::clamp(a, 0.0, alpha_clamp_max);
}

// Diagonal color covariance from per-coefficient variances:
// Q_{c,k}(d) = sum_lm Y_lm(d)^2 var_{lm,k}.
inline Vec3 sh_variance_propagation(const std::array<std::vector<double>, 3>& variances,
                                    const Vec3& d) {
  std::size_t n = variances[0].size();
  require(variances[1].size() == n && variances[2].size() == n,
          "sh_variance_propagation: channel variance lengths differ");
  int degree = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))) - 1;
  require(degree >= 0 && degree <= kMaxShDegree &&
              static_cast<std::size_t>(sh_basis_size(degree)) == n,
          "sh_variance_propagation: variance length is not a squared degree count");
  std::array<double, sh_basis_size(kMaxShDegree)> basis;
  eval_real_sh_block(degree, d, basis.data());
  Vec3 q = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    double y2 = basis[i] * basis[i];
    for (int k = 0; k < 3; ++k) {
      require(variances[k][i] >= 0.0, "sh_variance_propagation: negative variance entry");
      q[k] += y2 * variances[k][i];
    }
  }
  return q;
}

struct EntropyMap {
  int width = 0, height = 0;
  std::vector<double> entropy;
  std::vector<double> invisible_mass;  // accumulated w0 per pixel
};

struct PixelMixtureComponent {
  double weight = 0.0;  // w* = alpha* T
  double vis = 0.0;     // particle visibility v
  Vec3 mean = Vec3::Zero();
  Vec3 var = Vec3::Zero();  // diagonal of Q_c
};

struct PixelMixture {
  int x = 0, y = 0;
  double prior_weight = 0.0;            // w0
  double residual_transmittance = 0.0;  // T after the loop
  double entropy = 0.0;
  std::vector<PixelMixtureComponent> components;
};

namespace detail {

inline double logdet_spd(const Mat3& m) {
  Eigen::LLT<Mat3> llt(m);
  require(llt.info() == Eigen::Success, "covariance must be symmetric positive-definite");
  Mat3 l = llt.matrixL();
  return 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)) + std::log(l(2, 2)));
}

}  // namespace detail

// Visibility-modulated uncertainty compositing over pre-projected splats.
// splat_vis[k] is the directional visibility of pv.splats[k]. Per pixel:
//   H  += w* v (-log(w* v) + 0.5 log|Q_c| + (3/2) log(2 pi e))
//   w0 += w* (1 - v),   T *= 1 - alpha*
// and after the loop the invisible mass contributes the prior term once.
// Optional outputs: expected depth under the compensated weights, and the full
// per-pixel mixtures for oracles.
inline EntropyMap render_entropy_core(const Scene& scene, const ProjectedView& pv,
                                      const std::vector<double>& splat_vis,
                                      const CameraView& cam, const RasterConfig& rc,
                                      const UncertaintyConfig& uc, int threads = 1,
                                      std::vector<double>* depth_out = nullptr,
                                      std::vector<PixelMixture>* mixtures_out = nullptr) {
  rc.validate();
  cam.validate();
  uc.validate();
  check_invariant(splat_vis.size() == pv.splats.size(),
                  "render_entropy_core: visibility/splat count mismatch");

  // Per-splat color variance (diagonal) and its log-determinant, evaluated at
  // the camera-to-center direction once per splat.
  const std::size_t n_splats = pv.splats.size();
  std::vector<double> half_logdet_qc(n_splats);
  std::vector<Vec3> var_qc;
  const bool dumping = mixtures_out != nullptr;
  if (dumping) var_qc.assign(n_splats, Vec3::Zero());
  if (uc.variance_provider == VarianceProvider::kConstant) {
    double hld = 3.0 * std::log(uc.color_sigma);  // 0.5 log(sigma^6)
    for (std::size_t k = 0; k < n_splats; ++k) half_logdet_qc[k] = hld;
    if (dumping)
      for (std::size_t k = 0; k < n_splats; ++k)
        var_qc[k] = Vec3::Constant(uc.color_sigma * uc.color_sigma);
  } else {
    require(uc.coeff_variances != nullptr,
            "variance_provider sh_propagation requires coeff_variances");
    require(uc.coeff_variances->size() == scene.particles.size(),
            "coeff_variances size must match the particle count");
    parallel_for(static_cast<int>(n_splats), threads, [&](int k) {
      const ImageSpaceSplat& s = pv.splats[k];
      Vec3 d = (scene.particles[s.particle_index].position - cam.position).normalized();
      Vec3 q = sh_variance_propagation((*uc.coeff_variances)[s.particle_index], d);
      for (int c = 0; c < 3; ++c)
        require(q[c] > 0.0, "propagated color variance must be positive");
      half_logdet_qc[k] = 0.5 * (std::log(q[0]) + std::log(q[1]) + std::log(q[2]));
      if (dumping) var_qc[k] = q;
    });
  }
  const double half_logdet_q0 = 0.5 * detail::logdet_spd(uc.prior_cov);

  SplatBinning bins = splat_binning(pv.splats, cam.width, cam.height, rc.tile_size);
  EntropyMap map;
  map.width = cam.width;
  map.height = cam.height;
  map.entropy.assign(static_cast<std::size_t>(cam.width) * cam.height, 0.0);
  map.invisible_mass.assign(map.entropy.size(), 0.0);
  if (depth_out) depth_out->assign(map.entropy.size(), 0.0);
  if (mixtures_out) mixtures_out->assign(map.entropy.size(), PixelMixture{});

  const int degree = scene.color_degree;
  const int num_tiles = bins.tiles_x * bins.tiles_y;
  parallel_for(num_tiles, threads, [&](int tile) {
    const auto& list = bins.tiles[tile];
    int tx = tile % bins.tiles_x, ty = tile / bins.tiles_x;
    int px0 = tx * rc.tile_size, px1 = std::min(cam.width, px0 + rc.tile_size);
    int py0 = ty * rc.tile_size, py1 = std::min(cam.height, py0 + rc.tile_size);
    std::array<double, sh_basis_size(kMaxShDegree)> basis;
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const double cxp = px + 0.5, cyp = py + 0.5;
        std::size_t pix = static_cast<std::size_t>(py) * cam.width + px;
        PixelMixture* mix = mixtures_out ? &(*mixtures_out)[pix] : nullptr;
        if (mix) {
          mix->x = px;
          mix->y = py;
          eval_real_sh_block(degree, cam.pixel_ray(cxp, cyp), basis.data());
        }
        double t_cur = 1.0;
        double entropy = 0.0, w0 = 0.0, depth_acc = 0.0;
        for (int idx : list) {
          const ImageSpaceSplat& s = pv.splats[idx];
          if (!splat_covers(s, cxp, cyp)) continue;
          double a = splat_alpha(s, cxp, cyp, rc.alpha_clamp_max);
          double v = splat_vis[idx];
          double astar = compensated_alpha(a, v, uc, rc.alpha_clamp_max);
          double w = astar * t_cur;
          double seen = w * v;
          if (seen > 0.0)
            entropy += seen * (-std::log(seen) + half_logdet_qc[idx] + kGaussEntropyConst);
          w0 += w * (1.0 - v);
          if (depth_out) depth_acc += w * s.depth;
          if (mix && w > 0.0) {
            const auto& p = scene.particles[s.particle_index];
            Vec3 color = Vec3::Zero();
            int count = static_cast<int>(p.color_sh[0].size());
            for (int c = 0; c < 3; ++c) {
              double acc = 0.0;
              for (int i = 0; i < count; ++i) acc += p.color_sh[c][i] * basis[i];
              color[c] = std::clamp(acc, 0.0, 1.0);
            }
            mix->components.push_back({w, v, color, var_qc.empty()
                                                       ? Vec3::Constant(uc.color_sigma *
                                                                        uc.color_sigma)
                                                       : var_qc[idx]});
          }
          t_cur *= 1.0 - astar;
          if (t_cur < rc.transmittance_cutoff) break;
        }
        if (w0 > 0.0)
          entropy += w0 * (-std::log(w0) + half_logdet_q0 + kGaussEntropyConst);
        map.entropy[pix] = entropy;
        map.invisible_mass[pix] = w0;
        if (depth_out) (*depth_out)[pix] = depth_acc;
        if (mix) {
          mix->prior_weight = w0;
          mix->residual_transmittance = t_cur;
          mix->entropy = entropy;
        }
      }
    }
  });
  return map;
}

// Standard entry point: visibility comes from the field, evaluated once per
// (particle, view) at the camera-to-center direction.
inline EntropyMap render_entropy(const Scene& scene, const VisibilityField& field,
                                 const CameraView& cam, const RasterConfig& rc,
                                 const UncertaintyConfig& uc, int threads = 1,
                                 std::vector<double>* depth_out = nullptr,
                                 std::vector<PixelMixture>* mixtures_out = nullptr) {
  require(field.num_particles == scene.particles.size(),
          "render_entropy: field was built for a different scene");
  ProjectedView pv = project_scene(scene, cam, rc.dilation);
  std::vector<double> splat_vis(pv.splats.size(), 0.0);
  parallel_for(static_cast<int>(pv.splats.size()), threads, [&](int k) {
    const ImageSpaceSplat& s = pv.splats[k];
    Vec3 d = scene.particles[s.particle_index].position - cam.position;
    double norm = d.norm();
    if (norm < 1e-12) return;
    splat_vis[k] = query_visibility(field, s.particle_index, d / norm);
  });
  return render_entropy_core(scene, pv, splat_vis, cam, rc, uc, threads, depth_out,
                             mixtures_out);
}

// Image-level score. correlation none: plain sum. hook: sum of
// H - f_corr(H; d) with the documented stand-in f_corr(H; d) = H exp(-d / lambda).
inline double image_entropy(const EntropyMap& map, const std::vector<double>& depth,
                            const UncertaintyConfig& uc) {
  require(depth.size() == map.entropy.size(),
          "image_entropy: depth map shape differs from the entropy map");
  double sum = 0.0;
  if (uc.correlation == CorrelationMode::kNone) {
    for (double h : map.entropy) sum += h;
    return sum;
  }
  for (std::size_t i = 0; i < map.entropy.size(); ++i) {
    double h = map.entropy[i];
    sum += h - h * std::exp(-depth[i] / uc.correlation_lambda);
  }
  return sum;
}

}  // namespace gavis
