// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>
#include <gavis/model.hpp>
#include <gavis/rng.hpp>
#include <gavis/sh.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace gavis {

// Independent brute-force references. None of these reuse the code path they
// certify; the shared SH basis is itself certified by quadrature
// orthonormality.

inline std::vector<Vec3> fibonacci_sphere(int n) {
  require(n >= 1, "fibonacci_sphere: need at least one direction");
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden_angle * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

// Coefficients by Fibonacci-sphere quadrature: <f, Y_lm> * (4 pi / n).
inline ShCoeffBlock quadrature_project_sh(const std::function<double(const Vec3&)>& f,
                                          int degree, int n_dirs) {
  require(degree >= 0 && degree <= kMaxShDegree, "quadrature degree out of range");
  require(n_dirs >= 10 * sh_basis_size(degree),
          "quadrature needs at least 10 directions per basis function");
  ShCoeffBlock block;
  block.degree = degree;
  block.coeffs.assign(sh_basis_size(degree), 0.0);
  std::array<double, sh_basis_size(kMaxShDegree)> basis;
  for (const Vec3& d : fibonacci_sphere(n_dirs)) {
    double value = f(d);
    eval_real_sh_block(degree, d, basis.data());
    for (std::size_t i = 0; i < block.coeffs.size(); ++i)
      block.coeffs[i] += value * basis[i];
  }
  const double weight = 4.0 * kPi / n_dirs;
  for (double& c : block.coeffs) c *= weight;
  return block;
}

// Exact multi-view combination 1 - prod(1 - v_p); the reference the AM-GM
// estimator is bounded by.
inline double exact_multiview_visibility(const std::vector<double>& per_view) {
  double unseen = 1.0;
  for (double v : per_view) unseen *= 1.0 - v;
  return 1.0 - unseen;
}

// Transmittance along origin -> target by marching the segment: every
// particle (except the excluded one) contributes the peak alpha
// opacity * exp(-0.5 * min Mahalanobis) over the sampled points, and
// T = prod(1 - alpha). Deliberately evaluates the true 3D Gaussians rather
// than the rasterizer's 2D projection; converges as step -> 0.
inline double raymarch_transmittance(const Scene& scene, const Vec3& origin,
                                     const Vec3& target, double step,
                                     int exclude_particle = -1,
                                     double alpha_clamp_max = 0.99) {
  require(step > 0.0, "raymarch step must be positive");
  const Vec3 span = target - origin;
  const double length = span.norm();
  if (length < 1e-12) return 1.0;
  const Vec3 dir = span / length;
  const int n_steps = std::max(1, static_cast<int>(std::ceil(length / step)));

  double transmittance = 1.0;
  for (std::size_t i = 0; i < scene.particles.size(); ++i) {
    if (static_cast<int>(i) == exclude_particle) continue;
    const GaussianParticle& g = scene.particles[i];
    if (g.opacity <= 0.0) continue;
    Mat3 precision = g.covariance().inverse();
    Vec3 e = origin - g.position;
    // Mahalanobis along the segment is the quadratic qa t^2 + qb t + qc.
    double qa = dir.dot(precision * dir);
    double qb = 2.0 * dir.dot(precision * e);
    double qc = e.dot(precision * e);
    double q_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_steps; ++k) {
      double t = (k + 0.5) * length / n_steps;
      double q = (qa * t + qb) * t + qc;
      if (q < q_min) q_min = q;
    }
    double alpha = g.opacity * std::exp(-0.5 * q_min);
    if (alpha > alpha_clamp_max) alpha = alpha_clamp_max;
    transmittance *= 1.0 - alpha;
  }
  return transmittance;
}

struct GmmComponent {
  double weight = 0.0;
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
};

// Mixture with the residual weight assigned to the prior component.
struct GmmSpec {
  std::vector<GmmComponent> components;
  Vec3 prior_mean = Vec3(0.5, 0.5, 0.5);
};

struct McEntropy {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

// Upper bound certified by the Monte-Carlo estimate below:
// sum_i w_i (-log w_i + 0.5 log|cov_i| + (3/2) log(2 pi e)), prior included.
inline double gmm_entropy_bound(const GmmSpec& spec, const Mat3& prior_cov) {
  constexpr double k32 = 4.256815599614018;  // (3/2) log(2 pi e)
  auto logdet = [](const Mat3& m) {
    Eigen::LLT<Mat3> llt(m);
    require(llt.info() == Eigen::Success, "gmm covariance not SPD");
    Mat3 l = llt.matrixL();
    return 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)) + std::log(l(2, 2)));
  };
  double total = 0.0, bound = 0.0;
  for (const auto& c : spec.components) {
    require(c.weight >= 0.0, "gmm weight must be non-negative");
    total += c.weight;
    if (c.weight > 0.0)
      bound += c.weight * (-std::log(c.weight) + 0.5 * logdet(c.cov) + k32);
  }
  require(total <= 1.0 + 1e-9, "gmm weights must sum to at most 1");
  double w0 = std::max(0.0, 1.0 - total);
  if (w0 > 0.0) bound += w0 * (-std::log(w0) + 0.5 * logdet(prior_cov) + k32);
  return bound;
}

// -1/N sum log p(x_i) over samples drawn from the mixture itself.
inline McEntropy mc_gmm_entropy(const GmmSpec& spec, const Mat3& prior_cov, int n_samples,
                                uint64_t seed) {
  require(n_samples >= 10000, "mc_gmm_entropy needs at least 1e4 samples");

  struct Prepared {
    double weight, log_weight, log_norm;
    Vec3 mean;
    Mat3 chol, precision;
  };
  std::vector<Prepared> comps;
  double total = 0.0;
  auto prepare = [&](double w, const Vec3& mean, const Mat3& cov) {
    Eigen::LLT<Mat3> llt(cov);
    require(llt.info() == Eigen::Success, "mc_gmm_entropy: covariance not SPD");
    Mat3 l = llt.matrixL();
    double logdet = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)) + std::log(l(2, 2)));
    Prepared p;
    p.weight = w;
    p.log_weight = std::log(w);
    p.log_norm = -0.5 * logdet - 1.5 * std::log(2.0 * kPi);
    p.mean = mean;
    p.chol = l;
    p.precision = cov.inverse();
    comps.push_back(std::move(p));
  };
  for (const auto& c : spec.components) {
    require(c.weight >= 0.0 && std::isfinite(c.weight), "gmm weight must be finite and >= 0");
    total += c.weight;
    if (c.weight > 0.0) prepare(c.weight, c.mean, c.cov);
  }
  require(total <= 1.0 + 1e-9, "gmm weights must sum to at most 1");
  double w0 = std::max(0.0, 1.0 - total);
  if (w0 > 0.0) prepare(w0, spec.prior_mean, prior_cov);
  require(!comps.empty(), "mc_gmm_entropy: empty mixture");
  double norm = 0.0;
  for (const auto& c : comps) norm += c.weight;

  SplitMix64 g(derive_seed(seed, 0x6e7209));
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> terms(comps.size());
  for (int i = 0; i < n_samples; ++i) {
    double u = g.next_double() * norm;
    std::size_t pick = 0;
    for (; pick + 1 < comps.size(); ++pick) {
      if (u < comps[pick].weight) break;
      u -= comps[pick].weight;
    }
    Vec3 x = comps[pick].mean + comps[pick].chol * g.normal3();
    double max_term = -std::numeric_limits<double>::infinity();
    std::size_t nc = comps.size();
    for (std::size_t c = 0; c < nc; ++c) {
      Vec3 r = x - comps[c].mean;
      double quad = r.dot(comps[c].precision * r);
      double t = comps[c].log_weight + comps[c].log_norm - 0.5 * quad;
      terms[c] = t;
      if (t > max_term) max_term = t;
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < nc; ++c) acc += std::exp(terms[c] - max_term);
    double log_p = max_term + std::log(acc) - std::log(norm);
    sum += log_p;
    sum_sq += log_p * log_p;
  }
  McEntropy result;
  double mean_logp = sum / n_samples;
  result.estimate = -mean_logp;
  double variance = std::max(0.0, sum_sq / n_samples - mean_logp * mean_logp);
  result.stderr_ = std::sqrt(variance / n_samples);
  return result;
}

}  // namespace gavis
