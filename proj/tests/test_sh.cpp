// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#include <gavis/oracle.hpp>
#include <gavis/sh.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace gavis;

namespace {

const std::vector<Vec3> kProbeDirs = {
    Vec3(0, 0, 1),
    Vec3(0, 0, -1),
    Vec3(1, 0, 0),
    Vec3(0, 1, 0),
    Vec3(0.3, -0.5, 0.81).normalized(),
    Vec3(-0.7, 0.2, -0.1).normalized(),
};

double max_reconstruction_error(const ShCoeffBlock& block, const Vec3& d_p,
                                const VmfParams& params, const std::vector<Vec3>& dirs) {
  std::array<double, sh_basis_size(kMaxShDegree)> basis;
  double worst = 0.0;
  for (const Vec3& d : dirs) {
    eval_real_sh_block(block.degree, d, basis.data());
    double recon = 0.0;
    for (std::size_t i = 0; i < block.coeffs.size(); ++i) recon += block.coeffs[i] * basis[i];
    worst = std::max(worst, std::abs(recon - vmf_dir_vis(d, d_p, params)));
  }
  return worst;
}

}  // namespace

TEST_CASE("sh basis constant and axis values", "[sh]") {
  for (const Vec3& d : kProbeDirs)
    CHECK(eval_real_sh(0, 0, d) == Catch::Approx(0.28209479177387814).epsilon(0).margin(1e-15));
  CHECK(eval_real_sh(1, 0, Vec3(0, 0, 1)) ==
        Catch::Approx(0.4886025119029199).epsilon(0).margin(1e-14));
  CHECK(eval_real_sh(1, 0, Vec3(0, 0, -1)) ==
        Catch::Approx(-0.4886025119029199).epsilon(0).margin(1e-14));
}

TEST_CASE("sh basis sum rule per degree", "[sh]") {
  for (const Vec3& d : kProbeDirs) {
    std::array<double, sh_basis_size(kMaxShDegree)> basis;
    eval_real_sh_block(5, d, basis.data());
    for (int l = 0; l <= 5; ++l) {
      double sum = 0.0;
      for (int m = -l; m <= l; ++m) {
        double y = basis[sh_flat_index(l, m)];
        sum += y * y;
      }
      CHECK(sum == Catch::Approx((2.0 * l + 1.0) / (4.0 * kPi)).epsilon(0).margin(1e-10));
    }
  }
}

TEST_CASE("sh basis orthonormality by spherical quadrature", "[sh]") {
  constexpr int kDegree = 4;
  constexpr int kBasis = sh_basis_size(kDegree);
  const int n = 1000000;
  std::vector<double> gram(kBasis * kBasis, 0.0);
  std::array<double, sh_basis_size(kMaxShDegree)> basis;
  for (const Vec3& d : fibonacci_sphere(n)) {
    eval_real_sh_block(kDegree, d, basis.data());
    for (int i = 0; i < kBasis; ++i)
      for (int j = i; j < kBasis; ++j) gram[i * kBasis + j] += basis[i] * basis[j];
  }
  const double weight = 4.0 * kPi / n;
  double worst = 0.0;
  for (int i = 0; i < kBasis; ++i) {
    for (int j = i; j < kBasis; ++j) {
      double expected = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(gram[i * kBasis + j] * weight - expected));
    }
  }
  CHECK(worst < 3e-3);
}

TEST_CASE("sh basis argument validation", "[sh]") {
  CHECK_THROWS_AS(eval_real_sh(2, 3, Vec3(0, 0, 1)), ParameterError);
  CHECK_THROWS_AS(eval_real_sh(-1, 0, Vec3(0, 0, 1)), ParameterError);
  CHECK_THROWS_AS(eval_real_sh(kMaxShDegree + 1, 0, Vec3(0, 0, 1)), ParameterError);
  CHECK_THROWS_AS(eval_real_sh(1, 0, Vec3(0, 0, 2)), ParameterError);
}

TEST_CASE("modified spherical bessel reference values", "[sh]") {
  CHECK(bessel_i(0, 0.0) == 1.0);
  for (int l = 1; l <= kMaxShDegree; ++l) CHECK(bessel_i(l, 0.0) == 0.0);
  CHECK(bessel_i(0, 1.0) == Catch::Approx(1.1752011936438014).epsilon(1e-14));
  CHECK(bessel_i(1, 1.0) == Catch::Approx(0.36787944117144233).epsilon(1e-14));
  // sinh(50)/50 cross-checked against the closed form at the range edge.
  CHECK(bessel_i(0, 50.0) == Catch::Approx(std::sinh(50.0) / 50.0).epsilon(1e-12));
  CHECK_THROWS_AS(bessel_i(-1, 1.0), ParameterError);
  CHECK_THROWS_AS(bessel_i(kMaxShDegree + 1, 1.0), ParameterError);
  CHECK_THROWS_AS(bessel_i(0, -0.5), ParameterError);
  CHECK_THROWS_AS(bessel_i(0, 50.5), ParameterError);
}

TEST_CASE("modified spherical bessel continuity across evaluation regimes", "[sh]") {
  // Upward recurrence takes over at x = 2l + 2; both sides must agree there.
  for (int l = 2; l <= 8; ++l) {
    double x = 2.0 * l + 2.0;
    double lo = bessel_i(l, x - 1e-9);
    double hi = bessel_i(l, x + 1e-9);
    CHECK(lo == Catch::Approx(hi).epsilon(1e-7));
  }
}

TEST_CASE("vmf kernel peak, antipode, and isotropic limit", "[sh]") {
  // Exact peak where the self-dot is exactly one (axis directions); a
  // normalized generic direction self-dots to 1 +- 1 ulp.
  CHECK(vmf_dir_vis(Vec3(0, 0, 1), Vec3(0, 0, 1), VmfParams(1.0)) == 1.0);
  CHECK(vmf_dir_vis(Vec3(0, -1, 0), Vec3(0, -1, 0), VmfParams(37.0)) == 1.0);
  const Vec3 d_p = Vec3(0.2, 0.9, -0.3).normalized();
  CHECK(vmf_dir_vis(d_p, d_p, VmfParams(1.0)) == Catch::Approx(1.0).margin(1e-12));
  CHECK(vmf_dir_vis(d_p, d_p, VmfParams(37.0)) == Catch::Approx(1.0).margin(1e-12));
  CHECK(vmf_dir_vis(-d_p, d_p, VmfParams(1.0)) ==
        Catch::Approx(0.1353352832366127).epsilon(1e-14));
  for (const Vec3& d : kProbeDirs) CHECK(vmf_dir_vis(d, d_p, VmfParams(0.0)) == 1.0);
}

TEST_CASE("vmf kernel is monotone in the cosine", "[sh]") {
  const Vec3 d_p(0, 0, 1);
  VmfParams params(2.5);
  double prev = -1.0;
  for (int k = 0; k <= 100; ++k) {
    double theta = kPi * (1.0 - k / 100.0);
    Vec3 d(std::sin(theta), 0.0, std::cos(theta));
    double v = vmf_dir_vis(d.normalized(), d_p, params);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("vmf parameter bundle", "[sh]") {
  VmfParams p(3.0);
  CHECK(p.zeta == std::exp(-3.0));
  CHECK(VmfParams(0.0).zeta == 1.0);
  CHECK_THROWS_AS(VmfParams(-0.1), ParameterError);
  CHECK_THROWS_AS(VmfParams(50.1), ParameterError);
}

TEST_CASE("vmf expansion collapses to the constant at kappa zero", "[sh]") {
  const Vec3 d_p = Vec3(0.5, -0.1, 0.86).normalized();
  ShCoeffBlock block = vmf_sh_coeffs(d_p, VmfParams(0.0), 4);
  REQUIRE(block.coeffs.size() == std::size_t(sh_basis_size(4)));
  CHECK(block.coeffs[0] == Catch::Approx(3.5449077018110318).epsilon(1e-14));
  for (std::size_t i = 1; i < block.coeffs.size(); ++i)
    CHECK(block.coeffs[i] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("vmf expansion degree-zero coefficient ignores the mean direction", "[sh]") {
  VmfParams params(1.7);
  double reference = vmf_sh_coeffs(Vec3(0, 0, 1), params, 2).coeffs[0];
  for (const Vec3& d_p : kProbeDirs)
    CHECK(vmf_sh_coeffs(d_p, params, 2).coeffs[0] ==
          Catch::Approx(reference).epsilon(0).margin(1e-12));
}

TEST_CASE("vmf expansion reconstruction accuracy", "[sh]") {
  const Vec3 d_p = Vec3(0.3, -0.5, 0.81).normalized();
  VmfParams params(1.0);
  auto dirs = fibonacci_sphere(1000);

  ShCoeffBlock low = vmf_sh_coeffs(d_p, params, 2);
  CHECK(max_reconstruction_error(low, d_p, params, dirs) < 0.06);

  ShCoeffBlock high = vmf_sh_coeffs(d_p, params, 20);
  CHECK(max_reconstruction_error(high, d_p, params, dirs) < 1e-6);
}

TEST_CASE("vmf expansion error shrinks with degree", "[sh]") {
  const Vec3 d_p = Vec3(-0.4, 0.3, 0.866).normalized();
  VmfParams params(1.0);
  auto dirs = fibonacci_sphere(100);
  double prev = std::numeric_limits<double>::infinity();
  for (int degree = 0; degree <= 10; ++degree) {
    double err = max_reconstruction_error(vmf_sh_coeffs(d_p, params, degree), d_p, params, dirs);
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
}

TEST_CASE("vmf expansion matches spherical quadrature", "[sh]") {
  const Vec3 d_p = Vec3(0.3, -0.5, 0.81).normalized();
  VmfParams params(1.0);
  ShCoeffBlock analytic = vmf_sh_coeffs(d_p, params, 4);
  ShCoeffBlock quad = quadrature_project_sh(
      [&](const Vec3& d) { return vmf_dir_vis(d, d_p, params); }, 4, 100000);
  for (std::size_t i = 0; i < analytic.coeffs.size(); ++i)
    CHECK(analytic.coeffs[i] == Catch::Approx(quad.coeffs[i]).epsilon(0).margin(1e-3));
}
