#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "finr/certify.hpp"
#include "finr/sampling.hpp"
#include "test_util.hpp"

using namespace finr;

TEST_CASE("dual_function basics") {
  const int n = 64;
  const auto ff = FourierFeatures::restricted();
  const auto omega = build_box_freqs(3, FreqNorm::inf, 2, FreqKind::sampling);
  Rng rng(211);
  const auto w0 = rng.sphere(4);

  // z = 0 -> Phi = 0
  SpectralSamples zero(omega);
  CHECK(dual_function(zero, ff, w0, n) == 0.0);

  // z = F~[w0.gamma]_+ gives Phi(w0) = eta_modI(w0)^2 (self inner product)
  RasterImage relu = unit_field(ff, w0, n);
  for (auto& v : relu.px) v = v > 0.0 ? v : 0.0;
  const auto z = forward_spectral(relu, omega);
  const double eta1 = eta(EtaKind::mod_i(omega, n), ff, w0);
  CHECK(dual_function(z, ff, w0, n) == Catch::Approx(eta1 * eta1).epsilon(1e-10));

  // adjoint identity: Phi equals the spectral inner product
  const auto w1 = rng.sphere(4);
  RasterImage relu1 = unit_field(ff, w1, n);
  for (auto& v : relu1.px) v = v > 0.0 ? v : 0.0;
  const double spectral = real_inner(forward_spectral(relu1, omega), z);
  CHECK(dual_function(z, ff, w1, n) == Catch::Approx(spectral).margin(1e-10));
}

TEST_CASE("thm1 certificate: atom equality, global bound, strict margins") {
  const int n = 128;
  const auto ff = FourierFeatures::general_box(2);
  const auto omega = build_box_freqs(6, FreqNorm::inf, 2, FreqKind::sampling);
  Rng rng(223);
  const auto w0 = rng.sphere(ff.feature_dim());
  const double a0 = 1.5;

  const auto z0 = certificate_thm1(a0, w0, ff, omega, n);
  const auto kind = EtaKind::mod_i(omega, n);

  // Phi(w0) = sign(a0) eta(w0)
  const double phi0 = dual_function(z0, ff, w0, n);
  CHECK(phi0 == Catch::Approx(eta(kind, ff, w0)).epsilon(1e-10));

  const auto rep = check_certificate(z0, ff, {w0}, {1}, kind, 2000, 31u, n);
  CHECK(rep.atom_residuals[0] < 1e-10);
  CHECK(rep.max_ratio_off_atoms <= 1.0 + 1e-10);
  CHECK(rep.n_far > 0);
  CHECK(rep.min_margin_far > 0.0);

  // Phi(-w0) < eta(-w0) strictly when the flipped unit is active
  std::vector<double> w0_neg(w0);
  for (auto& v : w0_neg) v = -v;
  if (eta(kind, ff, w0_neg) > 1e-10) {
    CHECK(dual_function(z0, ff, w0_neg, n) < eta(kind, ff, w0_neg));
  }

  // hypothesis violation: omega too small
  const auto small = build_box_freqs(5, FreqNorm::inf, 2, FreqKind::sampling);
  CHECK_THROWS_AS(certificate_thm1(a0, w0, ff, small, n), HypothesisError);
}

TEST_CASE("thm2 certificate: equality at +-atoms, nonnegativity, bound") {
  const int n = 256;
  Rng rng(227);

  for (int s = 1; s <= 2; ++s) {
    std::vector<std::pair<double, std::vector<double>>> atoms;
    std::vector<std::vector<double>> atom_ws;
    std::vector<int> signs;
    for (int i = 0; i < s; ++i) {
      auto w = rng.sphere(4);
      while (in_singular_set_V(w, 1e-3)) w = rng.sphere(4);
      atoms.push_back({rng.uniform(1.0, 5.0), w});
      atom_ws.push_back(w);
      signs.push_back(1);
      atom_ws.push_back([&] {
        auto neg = w;
        for (auto& v : neg) v = -v;
        return neg;
      }());
      signs.push_back(1);
    }
    const auto omega = build_box_freqs(2 * s, FreqNorm::one, 2, FreqKind::sampling);
    const auto cert = certificate_thm2(atoms, omega, n, 0.5);
    const auto ff = FourierFeatures::restricted();
    const auto kind = EtaKind::mod_ii(n);

    // rho >= 0 on the grid (product of squares)
    const auto rho_grid = adjoint_spectral(cert.rho_hat, n);
    for (double v : rho_grid.px) CHECK(v >= -1e-12);

    // alpha bound honored by construction
    double rho_max = 0.0;
    for (double v : rho_grid.px) rho_max = std::max(rho_max, v);
    CHECK(cert.alpha < 1.0 / (4.0 * std::numbers::pi * std::numbers::pi * rho_max) + 1e-18);

    const auto rep = check_certificate(cert.phi_hat, ff, atom_ws, signs, kind, 2000, 77u, n);
    for (double res : rep.atom_residuals) CHECK(res < 1e-7);
    CHECK(rep.max_ratio_off_atoms <= 1.0 + 1e-7);
    CHECK(rep.min_phi > -1e-9);
  }

  // refusal on V-set atoms
  std::vector<std::pair<double, std::vector<double>>> bad = {{1.0, {1.0, 0.0, 0.0, 0.0}}};
  const auto omega1 = build_box_freqs(2, FreqNorm::one, 2, FreqKind::sampling);
  CHECK_THROWS_AS(certificate_thm2(bad, omega1, n), HypothesisError);
  std::vector<std::pair<double, std::vector<double>>> neg = {{-1.0, {0.6, 0.1, 0.7, 0.2}}};
  CHECK_THROWS_AS(certificate_thm2(neg, omega1, n), ConfigError);
}

namespace {

/// Spatial-domain oracle for Q_c. Direct gridding of
/// phi grad [tau]_+ - [tau]_+ grad phi converges slowly because the
/// integrand jumps across the zero curve, so integrate by parts first:
///   F(g_j)[k] = 2 pi i k_j F(phi [tau]_+)[k] - 2 F([tau]_+ d_j phi)[k];
/// every gridded quantity is then continuous. The 2 pi is dropped to
/// match the assembled operator's normalization.
std::vector<std::complex<double>> qc_apply_spatial(const SpectralSamples& tau_hat, const SpectralSamples& phi_hat,
                                                   const FrequencySet& omega_r, int n) {
  const auto grad_coeff = [&](const SpectralSamples& src, int axis) {
    SpectralSamples out(src.freqs());
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto k = src.freqs().at(i);
      out[i] = std::complex<double>(0.0, 1.0) * static_cast<double>(k[axis == 0 ? 0 : 1]) * src[i];
    }
    return out;
  };

  const RasterImage tau = adjoint_spectral(tau_hat, n);
  const RasterImage phi = adjoint_spectral(phi_hat, n);
  RasterImage relu_phi(n);
  for (std::size_t p = 0; p < relu_phi.px.size(); ++p)
    relu_phi.px[p] = tau.px[p] > 0.0 ? tau.px[p] * phi.px[p] : 0.0;
  const auto a_spec = forward_spectral(relu_phi, omega_r);

  std::vector<std::complex<double>> rows;
  for (int axis = 0; axis < 2; ++axis) {
    const RasterImage dphi = adjoint_spectral(grad_coeff(phi_hat, axis), n);  // (1/2pi) grad phi
    RasterImage relu_dphi(n);
    for (std::size_t p = 0; p < relu_dphi.px.size(); ++p)
      relu_dphi.px[p] = tau.px[p] > 0.0 ? tau.px[p] * dphi.px[p] : 0.0;
    const auto b_spec = forward_spectral(relu_dphi, omega_r);
    for (std::size_t i = 0; i < omega_r.size(); ++i) {
      const auto k = omega_r.at(i);
      const std::complex<double> ikj(0.0, static_cast<double>(k[axis == 0 ? 0 : 1]));
      rows.push_back(ikj * a_spec[i] - 2.0 * b_spec[i]);
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("qc nullspace: quadrature oracle then singular spectrum") {
  Rng rng(229);
  const auto omega0 = build_box_freqs(1, FreqNorm::inf, 2, FreqKind::features);
  const auto ff = FourierFeatures::general(omega0);
  const auto omega = build_box_freqs(3, FreqNorm::inf, 2, FreqKind::sampling);
  const int n_c = 4096;  // grid for the Fourier samples c

  // random tau with [tau]_+ != 0
  const auto w_tau = rng.sphere(ff.feature_dim());
  const auto tau_hat = ff.weights_to_trig(w_tau);
  RasterImage relu = unit_field(ff, w_tau, n_c);
  for (auto& v : relu.px) v = v > 0.0 ? v : 0.0;
  const auto c = forward_spectral(relu, omega);

  const auto res = qc_nullspace(c, omega0);

  // mandatory first: matrix application agrees with the spatial oracle
  {
    const int n_oracle = 2048;
    const auto w_phi = rng.sphere(ff.feature_dim());
    const auto phi_hat = ff.weights_to_trig(w_phi);
    Eigen::VectorXd x(ff.feature_dim());
    for (int i = 0; i < ff.feature_dim(); ++i) x(i) = w_phi[static_cast<std::size_t>(i)];
    const Eigen::VectorXd via_matrix = res.matrix * x;
    const auto spatial = qc_apply_spatial(tau_hat, phi_hat, res.omega_restricted, n_oracle);
    // rows: (k, axis1 re, axis1 im, axis2 re, axis2 im) vs oracle (axis-major)
    const std::size_t nk = res.omega_restricted.size();
    const double scale = res.matrix.norm() * std::sqrt(x.squaredNorm());
    double max_err = 0.0;
    for (std::size_t ki = 0; ki < nk; ++ki) {
      for (int axis = 0; axis < 2; ++axis) {
        const std::complex<double> oracle_val = spatial[static_cast<std::size_t>(axis) * nk + ki];
        const double re = via_matrix(static_cast<Eigen::Index>(ki * 4 + 2 * axis));
        const double im = via_matrix(static_cast<Eigen::Index>(ki * 4 + 2 * axis + 1));
        // the oracle field carries the derivative's i (2 pi dropped on
        // both sides), so compare against i * (matrix application)
        const std::complex<double> via(-im, re);
        max_err = std::max(max_err, std::abs(via - oracle_val));
      }
    }
    CHECK(max_err < 1e-6 * std::max(1.0, scale));
  }

  // singular structure: sigma_min tiny, gap to the next value, and the
  // nullvector recovers tau up to sign
  const auto& sv = res.singular_values;
  REQUIRE(sv.size() == static_cast<std::size_t>(ff.feature_dim()));
  const double smax = sv.front();
  const double smin = sv.back();
  const double ssecond = sv[sv.size() - 2];
  CHECK(smin < 1e-8 * smax);
  CHECK(ssecond > 1e-4 * smax);

  const double cos_sim = std::abs(real_inner(res.nullvector, tau_hat)) /
                         (norm2(res.nullvector) * norm2(tau_hat));
  CHECK(cos_sim > 1.0 - 1e-8);

  // matrix applied to tau itself: residual below 1e-8 ||matrix||
  {
    Eigen::VectorXd x(ff.feature_dim());
    for (int i = 0; i < ff.feature_dim(); ++i) x(i) = w_tau[static_cast<std::size_t>(i)];
    CHECK((res.matrix * x).norm() < 1e-8 * res.matrix.norm());
  }

  // right singular vectors orthonormal
  const Eigen::MatrixXd vtv = res.right_vectors.transpose() * res.right_vectors;
  CHECK((vtv - Eigen::MatrixXd::Identity(vtv.rows(), vtv.cols())).norm() < 1e-10);

  // hypothesis violation: omega too small for the restriction
  const auto tiny = build_box_freqs(1, FreqNorm::inf, 2, FreqKind::sampling);
  SpectralSamples c_small(tiny);
  CHECK_THROWS_AS(qc_nullspace(c_small, omega0), HypothesisError);
}
