#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "finr/kernel.hpp"
#include "test_util.hpp"

using namespace finr;

namespace {

INRParams kink_free_params(Rng& rng, int width, const FourierFeatures& ff, int n, double margin) {
  for (int attempt = 0; attempt < 300; ++attempt) {
    INRParams theta(width, ff.feature_dim());
    for (auto& v : theta.a) v = rng.uniform(-2.0, 2.0);
    for (auto& v : theta.w) v = rng.gaussian();
    bool ok = true;
    for (int i = 0; i < width && ok; ++i) {
      const RasterImage t = unit_field(ff, theta.unit_w(i), n);
      for (double v : t.px) {
        if (std::abs(v) < margin) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return theta;
  }
  throw std::runtime_error("no kink-free sample");
}

/// Reference AL objective and gradient assembled from the unoptimized
/// module primitives: AL = R + <q,r> + sigma/2 ||r||^2.
std::pair<double, ParamGrad> reference_al(const INRParams& theta, const FourierFeatures& ff,
                                          const FrequencySet& omega, const SpectralSamples& y,
                                          const SpectralSamples& q, double sigma, const EtaKind& kind, int n) {
  auto r = forward_spectral(inr_rasterize(theta, ff, n), omega);
  r -= y;
  SpectralSamples ghat = r;
  ghat *= sigma;
  ghat += q;
  const RasterImage big_g = adjoint_spectral(ghat, n);
  const auto gamma = embed_grid(ff, n);
  const std::size_t n2 = big_g.px.size();
  const double inv_n2 = 1.0 / static_cast<double>(n2);

  ParamGrad grad(theta);
  double reg = 0.0;
  for (int i = 0; i < theta.width(); ++i) {
    const RasterImage t = unit_field(ff, theta.unit_w(i), n);
    const double ai = theta.a[static_cast<std::size_t>(i)];
    RasterImage relu(n);
    for (std::size_t p = 0; p < n2; ++p) relu.px[p] = t.px[p] > 0.0 ? t.px[p] : 0.0;
    grad.a[static_cast<std::size_t>(i)] = real_inner(ghat, forward_spectral(relu, omega)) + ai;
    auto gw = std::span<double>(grad.w.data() + static_cast<std::size_t>(i * theta.feature_dim),
                                static_cast<std::size_t>(theta.feature_dim));
    for (int c = 0; c < theta.feature_dim; ++c) {
      double s = 0.0;
      for (std::size_t p = 0; p < n2; ++p)
        if (t.px[p] > 0.0) s += big_g.px[p] * gamma[static_cast<std::size_t>(c)].px[p];
      gw[static_cast<std::size_t>(c)] = ai * s * inv_n2;
    }
    const auto reg_gw = eta_sq_half_grad(kind, ff, theta.unit_w(i));
    for (int c = 0; c < theta.feature_dim; ++c) gw[static_cast<std::size_t>(c)] += reg_gw[static_cast<std::size_t>(c)];
    const double e = eta(kind, ff, theta.unit_w(i));
    reg += 0.5 * (ai * ai + e * e);
  }
  const double value = reg + real_inner(q, r) + 0.5 * sigma * norm2_sq(r);
  return {value, std::move(grad)};
}

}  // namespace

TEST_CASE("kernel matches the reference implementation") {
  Rng rng(101);
  const int n = 32;

  struct Case {
    FourierFeatures ff;
    int K;
    EtaKind::Tag tag;
  };
  const Case cases[] = {
      {FourierFeatures::restricted(), 3, EtaKind::Tag::standard},
      {FourierFeatures::restricted(), 3, EtaKind::Tag::mod_ii},
      {FourierFeatures::restricted(), 3, EtaKind::Tag::mod_i},
      {FourierFeatures::general_box(1), 3, EtaKind::Tag::standard},
      {FourierFeatures::general_box(2), 6, EtaKind::Tag::mod_i},
      {FourierFeatures::general_box(2), 6, EtaKind::Tag::mod_ii},
  };

  for (const auto& tc : cases) {
    const auto omega = build_box_freqs(tc.K, FreqNorm::inf, 2, FreqKind::sampling);
    EtaKind kind = EtaKind::standard();
    if (tc.tag == EtaKind::Tag::mod_i) kind = EtaKind::mod_i(omega, n);
    if (tc.tag == EtaKind::Tag::mod_ii) kind = EtaKind::mod_ii(n);

    TrainingKernel kernel(tc.ff, omega, n, tc.tag);

    const auto theta = kink_free_params(rng, 3, tc.ff, n, 1e-4);
    const auto y = test::random_spectral(rng, omega, 0.3);
    const auto q = test::random_spectral(rng, omega, 0.2);
    const double sigma = 2.5;

    ParamGrad grad;
    const auto parts = kernel.eval(theta, y, &q, sigma, 1.0, grad);
    const auto [ref_val, ref_grad] = reference_al(theta, tc.ff, omega, y, q, sigma, kind, n);

    CHECK(parts.objective == Catch::Approx(ref_val).epsilon(1e-10));
    for (std::size_t i = 0; i < grad.a.size(); ++i)
      CHECK(grad.a[i] == Catch::Approx(ref_grad.a[i]).margin(1e-9).epsilon(1e-9));
    for (std::size_t i = 0; i < grad.w.size(); ++i)
      CHECK(grad.w[i] == Catch::Approx(ref_grad.w[i]).margin(1e-9).epsilon(1e-9));

    // raster agreement with the synthesis route
    const auto ref_raster = inr_rasterize(theta, tc.ff, n);
    CHECK(raster_mse(kernel.raster(), ref_raster) < 1e-22);

    // model spectrum agreement with the FFT route
    const auto ref_spec = forward_spectral(ref_raster, omega);
    for (std::size_t i = 0; i < ref_spec.size(); ++i)
      CHECK(std::abs(kernel.model_spectrum()[i] - ref_spec[i]) < 1e-11);
  }
}

TEST_CASE("kernel penalized objective matches loss_and_grad") {
  Rng rng(107);
  const int n = 32;
  const auto ff = FourierFeatures::general_box(2);
  const auto omega = build_box_freqs(5, FreqNorm::inf, 2, FreqKind::sampling);
  const double lambda = 2e-3;

  for (const auto tag : {EtaKind::Tag::standard, EtaKind::Tag::mod_i, EtaKind::Tag::mod_ii}) {
    EtaKind kind = EtaKind::standard();
    if (tag == EtaKind::Tag::mod_i) kind = EtaKind::mod_i(omega, n);
    if (tag == EtaKind::Tag::mod_ii) kind = EtaKind::mod_ii(n);

    TrainingKernel kernel(ff, omega, n, tag);
    const auto theta = kink_free_params(rng, 2, ff, n, 1e-4);
    const auto y = test::random_spectral(rng, omega, 0.5);

    ParamGrad grad;
    const auto parts = kernel.eval(theta, y, nullptr, 1.0, lambda, grad);
    const auto [ref_val, ref_grad] = loss_and_grad(theta, ff, omega, y, lambda, kind, n);

    CHECK(parts.objective == Catch::Approx(ref_val.total).epsilon(1e-10));
    CHECK(parts.data_sq == Catch::Approx(ref_val.data_sq).epsilon(1e-10));
    CHECK(parts.reg == Catch::Approx(ref_val.reg).epsilon(1e-10));
    for (std::size_t i = 0; i < grad.a.size(); ++i)
      CHECK(grad.a[i] == Catch::Approx(ref_grad.a[i]).margin(1e-9).epsilon(1e-9));
    for (std::size_t i = 0; i < grad.w.size(); ++i)
      CHECK(grad.w[i] == Catch::Approx(ref_grad.w[i]).margin(1e-9).epsilon(1e-9));
  }
}

TEST_CASE("arc and fft strategies agree") {
  Rng rng(113);
  const int n = 32;
  struct Case {
    FourierFeatures ff;
    int K;
    EtaKind::Tag tag;
  };
  const Case cases[] = {
      {FourierFeatures::restricted(), 4, EtaKind::Tag::standard},
      {FourierFeatures::general_box(2), 5, EtaKind::Tag::mod_i},
      {FourierFeatures::general_box(2), 5, EtaKind::Tag::mod_ii},
  };
  for (const auto& tc : cases) {
    const auto omega = build_box_freqs(tc.K, FreqNorm::inf, 2, FreqKind::sampling);
    TrainingKernel arc(tc.ff, omega, n, tc.tag, TrainingKernel::Strategy::arc_algebra);
    TrainingKernel fft(tc.ff, omega, n, tc.tag, TrainingKernel::Strategy::fft_grid);
    INRParams theta(3, tc.ff.feature_dim());
    for (auto& v : theta.a) v = rng.uniform(-1.5, 1.5);
    for (auto& v : theta.w) v = rng.gaussian();
    const auto y = test::random_spectral(rng, omega, 0.4);
    const auto q = test::random_spectral(rng, omega, 0.1);
    ParamGrad g1, g2;
    const auto p1 = arc.eval(theta, y, &q, 1.7, 0.9, g1);
    const auto p2 = fft.eval(theta, y, &q, 1.7, 0.9, g2);
    CHECK(p1.objective == Catch::Approx(p2.objective).epsilon(1e-12));
    for (std::size_t i = 0; i < g1.a.size(); ++i) CHECK(g1.a[i] == Catch::Approx(g2.a[i]).margin(1e-10).epsilon(1e-10));
    for (std::size_t i = 0; i < g1.w.size(); ++i) CHECK(g1.w[i] == Catch::Approx(g2.w[i]).margin(1e-10).epsilon(1e-10));
  }
}

TEST_CASE("raster on demand") {
  Rng rng(127);
  const int n = 32;
  const auto ff = FourierFeatures::restricted();
  const auto omega = build_box_freqs(2, FreqNorm::inf, 2, FreqKind::sampling);
  TrainingKernel kernel(ff, omega, n, EtaKind::Tag::standard);
  INRParams theta(2, 4);
  for (auto& v : theta.a) v = rng.uniform(-1.0, 1.0);
  for (auto& v : theta.w) v = rng.gaussian();
  const auto y = test::random_spectral(rng, omega, 0.2);
  ParamGrad g;
  kernel.eval(theta, y, nullptr, 1.0, 0.0, g, /*want_raster=*/false);
  CHECK_THROWS_AS(kernel.raster(), ConfigError);
  kernel.eval(theta, y, nullptr, 1.0, 0.0, g, /*want_raster=*/true);
  CHECK(raster_mse(kernel.raster(), inr_rasterize(theta, ff, n)) < 1e-22);
}

TEST_CASE("kernel determinism") {
  Rng rng(109);
  const int n = 64;
  const auto ff = FourierFeatures::restricted();
  const auto omega = build_box_freqs(4, FreqNorm::inf, 2, FreqKind::sampling);
  TrainingKernel k1(ff, omega, n, EtaKind::Tag::standard);
  TrainingKernel k2(ff, omega, n, EtaKind::Tag::standard);

  INRParams theta(20, 4);
  for (auto& v : theta.a) v = rng.uniform(-1.0, 1.0);
  for (auto& v : theta.w) v = rng.gaussian();
  const auto y = test::random_spectral(rng, omega, 0.4);

  ParamGrad g1, g2;
  const auto p1 = k1.eval(theta, y, nullptr, 1.0, 1e-4, g1);
  const auto p2 = k2.eval(theta, y, nullptr, 1.0, 1e-4, g2);
  CHECK(p1.objective == p2.objective);
  CHECK(g1.a == g2.a);
  CHECK(g1.w == g2.w);
}
