// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>

#include <array>
#include <cmath>
#include <vector>

namespace gavis {

// Real spherical harmonics, modified spherical Bessel functions, and the
// von Mises-Fisher directional visibility kernel with its analytic SH
// expansion.

inline constexpr int kMaxShDegree = 20;

constexpr int sh_basis_size(int degree) { return (degree + 1) * (degree + 1); }
constexpr int sh_flat_index(int l, int m) { return l * l + l + m; }

struct ShCoeffBlock {
  int degree = 0;
  std::vector<double> coeffs;  // (degree+1)^2 values, flat order l*l+l+m
};

inline constexpr double kY00 = 0.28209479177387814;  // Y_{0,0} = 1/(2 sqrt(pi))

// Real orthonormal basis:
//   Y_{l,0}  = Pbar_l^0(z)
//   Y_{l,m}  = sqrt(2) Pbar_l^m(z) cos(m phi)   m > 0
//   Y_{l,-m} = sqrt(2) Pbar_l^m(z) sin(m phi)   m > 0
// where Pbar is the fully normalized associated Legendre function without the
// Condon-Shortley sign (the sqrt(2)(-1)^m real form applied to the complex
// harmonics lands exactly here). Evaluated with the standard normalized
// three-term recurrences, stable through degree 20.
inline void eval_real_sh_block(int degree, const Vec3& d, double* out) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double s = std::sqrt(x * x + y * y);
  const double cphi = s > 1e-14 ? x / s : 1.0;
  const double sphi = s > 1e-14 ? y / s : 0.0;
  constexpr double kSqrt2 = 1.4142135623730951;

  // pmm climbs the diagonal; for each m, walk l upward.
  double pmm = kY00;
  double cm = 1.0, sm = 0.0;  // cos(m phi), sin(m phi)
  for (int m = 0; m <= degree; ++m) {
    if (m > 0) {
      pmm *= s * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
      double cnext = cm * cphi - sm * sphi;
      sm = sm * cphi + cm * sphi;
      cm = cnext;
    }
    double plm = pmm;
    double plm_prev = 0.0;
    for (int l = m; l <= degree; ++l) {
      if (l > m) {
        double next;
        if (l == m + 1) {
          next = z * std::sqrt(2.0 * m + 3.0) * pmm;
        } else {
          double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
          double b = std::sqrt((double(l - 1) * (l - 1) - double(m) * m) /
                               (4.0 * double(l - 1) * (l - 1) - 1.0));
          next = a * (z * plm - b * plm_prev);
        }
        plm_prev = plm;
        plm = next;
      }
      if (m == 0) {
        out[sh_flat_index(l, 0)] = plm;
      } else {
        out[sh_flat_index(l, m)] = kSqrt2 * plm * cm;
        out[sh_flat_index(l, -m)] = kSqrt2 * plm * sm;
      }
    }
  }
}

inline double eval_real_sh(int l, int m, const Vec3& d) {
  require(l >= 0 && l <= kMaxShDegree, "eval_real_sh: degree out of range");
  require(std::abs(m) <= l, "eval_real_sh: |m| exceeds degree");
  require(std::abs(d.norm() - 1.0) <= 1e-6, "eval_real_sh: direction not unit length");
  std::array<double, sh_basis_size(kMaxShDegree)> block;
  eval_real_sh_block(l, d, block.data());
  return block[sh_flat_index(l, m)];
}

// Modified spherical Bessel function of the first kind i_l. Closed forms for
// l <= 1; upward recurrence when the argument dominates the order; otherwise
// the all-positive ascending series (no cancellation).
inline double bessel_i(int l, double x) {
  require(l >= 0 && l <= kMaxShDegree, "bessel_i: order out of range");
  require(x >= 0.0 && x <= 50.0, "bessel_i: argument out of range [0, 50]");
  if (x == 0.0) return l == 0 ? 1.0 : 0.0;
  if (l == 0) return std::sinh(x) / x;
  if (l == 1) return (x * std::cosh(x) - std::sinh(x)) / (x * x);
  if (x >= 2.0 * l + 2.0) {
    double prev = std::sinh(x) / x;
    double cur = (x * std::cosh(x) - std::sinh(x)) / (x * x);
    for (int k = 1; k < l; ++k) {
      double next = prev - (2.0 * k + 1.0) / x * cur;
      prev = cur;
      cur = next;
    }
    return cur;
  }
  double term = std::pow(x, l);
  for (int k = 3; k <= 2 * l + 1; k += 2) term /= k;
  double sum = term;
  const double x2h = 0.5 * x * x;
  for (int k = 1; k < 400; ++k) {
    term *= x2h / (k * (2.0 * l + 2.0 * k + 1.0));
    sum += term;
    if (term <= sum * 1e-17) break;
  }
  return sum;
}

struct VmfParams {
  double kappa = 1.0;
  double zeta = std::exp(-1.0);

  VmfParams() = default;
  explicit VmfParams(double k) : kappa(k), zeta(std::exp(-k)) {
    require(k >= 0.0 && k <= 50.0, "vmf kappa must lie in [0, 50]");
  }
};

// zeta * exp(kappa d.dp), evaluated as exp(kappa (d.dp - 1)) so the peak is 1
// exactly. Monotone in the cosine; range (0, 1].
inline double vmf_dir_vis(const Vec3& d, const Vec3& d_p, const VmfParams& params) {
  double t = d.dot(d_p);
  t = t < -1.0 ? -1.0 : (t > 1.0 ? 1.0 : t);
  return std::exp(params.kappa * (t - 1.0));
}

// Per-degree scale 4 pi zeta i_l(kappa); precomputed once per field build.
inline std::array<double, kMaxShDegree + 1> vmf_degree_scales(const VmfParams& params,
                                                              int degree) {
  require(degree >= 0 && degree <= kMaxShDegree, "vmf degree out of range");
  std::array<double, kMaxShDegree + 1> scales{};
  for (int l = 0; l <= degree; ++l)
    scales[l] = 4.0 * kPi * params.zeta * bessel_i(l, params.kappa);
  return scales;
}

// Analytic SH expansion of the vMF kernel: coeff(l,m) = 4 pi zeta i_l(kappa)
// Y_{l,m}(d_p). Truncation error decreases in the degree.
inline ShCoeffBlock vmf_sh_coeffs(const Vec3& d_p, const VmfParams& params, int degree) {
  require(degree >= 0 && degree <= kMaxShDegree, "vmf_sh_coeffs: degree out of range");
  require(std::abs(d_p.norm() - 1.0) <= 1e-6, "vmf_sh_coeffs: direction not unit length");
  ShCoeffBlock block;
  block.degree = degree;
  block.coeffs.resize(sh_basis_size(degree));
  eval_real_sh_block(degree, d_p, block.coeffs.data());
  auto scales = vmf_degree_scales(params, degree);
  for (int l = 0; l <= degree; ++l)
    for (int m = -l; m <= l; ++m) block.coeffs[sh_flat_index(l, m)] *= scales[l];
  return block;
}

}  // namespace gavis
