#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "finr/loss.hpp"
#include "finr/model.hpp"
#include "test_util.hpp"

using namespace finr;

namespace {

INRParams random_params(Rng& rng, int width, const FourierFeatures& ff) {
  INRParams theta(width, ff.feature_dim());
  for (auto& v : theta.a) v = rng.uniform(-2.0, 2.0);
  for (auto& v : theta.w) v = rng.gaussian();
  return theta;
}

/// Resamples until no grid activation sits within `margin` of zero, so
/// finite differences never cross a ReLU kink.
INRParams kink_free_params(Rng& rng, int width, const FourierFeatures& ff, int n, double margin) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    INRParams theta = random_params(rng, width, ff);
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
  throw std::runtime_error("kink_free_params: no clean sample found");
}

}  // namespace

TEST_CASE("inr_forward single unit") {
  const auto ff = FourierFeatures::restricted();
  INRParams theta(1, 4);
  theta.a[0] = 1.0;
  theta.w[0] = 1.0;
  const double origin[2] = {0.0, 0.0};
  const double quarter[2] = {0.25, 0.0};
  CHECK(inr_forward(theta, ff, origin) == Catch::Approx(std::numbers::sqrt2));
  CHECK(inr_forward(theta, ff, quarter) == Catch::Approx(0.0).margin(1e-15));
  theta.a[0] = -2.0;
  CHECK(inr_forward(theta, ff, origin) == Catch::Approx(-2.0 * std::numbers::sqrt2));
}

TEST_CASE("rasterize: synthesis route vs direct route") {
  Rng rng(53);
  const int n = 24;

  INRParams empty(0, 4);
  const auto zero = inr_rasterize(empty, FourierFeatures::restricted(), n);
  for (double v : zero.px) CHECK(v == 0.0);

  for (const auto& ff : {FourierFeatures::restricted(), FourierFeatures::general_box(2)}) {
    const auto theta = random_params(rng, 3, ff);
    const auto r1 = inr_rasterize(theta, ff, n);
    const auto r2 = inr_rasterize_direct(theta, ff, n);
    double max_diff = 0.0;
    for (std::size_t p = 0; p < r1.px.size(); ++p) max_diff = std::max(max_diff, std::abs(r1.px[p] - r2.px[p]));
    CHECK(max_diff < 1e-10);

    // pointwise spot checks
    for (int rep = 0; rep < 50; ++rep) {
      const int i = static_cast<int>(rng.next_u64() % static_cast<unsigned>(n));
      const int j = static_cast<int>(rng.next_u64() % static_cast<unsigned>(n));
      const double x[2] = {static_cast<double>(i) / n, static_cast<double>(j) / n};
      CHECK(std::abs(r1.at(i, j) - inr_forward(theta, ff, x)) < 1e-10);
    }

    // additivity over units
    auto theta2 = random_params(rng, 2, ff);
    INRParams joined(theta.width() + theta2.width(), ff.feature_dim());
    std::copy(theta.a.begin(), theta.a.end(), joined.a.begin());
    std::copy(theta2.a.begin(), theta2.a.end(), joined.a.begin() + theta.width());
    std::copy(theta.w.begin(), theta.w.end(), joined.w.begin());
    std::copy(theta2.w.begin(), theta2.w.end(), joined.w.begin() + theta.w.size());
    const auto rj = inr_rasterize(joined, ff, n);
    const auto ra = inr_rasterize(theta2, ff, n);
    for (std::size_t p = 0; p < rj.px.size(); ++p)
      CHECK(rj.px[p] == Catch::Approx(r1.px[p] + ra.px[p]).margin(1e-12));
  }
}

TEST_CASE("positive 1-homogeneity of units") {
  Rng rng(59);
  const auto ff = FourierFeatures::general_box(1);
  auto theta = random_params(rng, 2, ff);
  const double c = 2.75;
  INRParams scaled_w = theta;
  for (auto& v : scaled_w.w) v *= c;
  INRParams scaled_a = theta;
  for (auto& v : scaled_a.a) v *= c;
  for (int rep = 0; rep < 30; ++rep) {
    const double x[2] = {rng.uniform01(), rng.uniform01()};
    CHECK(inr_forward(scaled_w, ff, x) == Catch::Approx(inr_forward(scaled_a, ff, x)).margin(1e-12));
  }
}

TEST_CASE("loss_and_grad: exact fit and finite differences") {
  Rng rng(61);
  const int n = 32;
  const auto ff = FourierFeatures::general_box(1);
  const auto omega = build_box_freqs(3, FreqNorm::inf, 2, FreqKind::sampling);

  // theta that satisfies the constraint exactly -> zero loss and gradient
  const auto teacher = random_params(rng, 2, ff);
  const auto y = forward_spectral(inr_rasterize(teacher, ff, n), omega);
  const auto [v0, g0] = loss_and_grad(teacher, ff, omega, y, 0.0, EtaKind::standard(), n);
  CHECK(v0.total < 1e-22);
  for (double v : g0.a) CHECK(std::abs(v) < 1e-12);
  for (double v : g0.w) CHECK(std::abs(v) < 1e-12);

  CHECK_THROWS_AS(loss_and_grad(teacher, ff, omega, y, -1.0, EtaKind::standard(), n), ConfigError);

  // central finite differences at kink-free parameters, all three kinds
  const EtaKind kinds[] = {EtaKind::standard(), EtaKind::mod_i(omega, n), EtaKind::mod_ii(n)};
  for (const auto& kind : kinds) {
    auto theta = kink_free_params(rng, 2, ff, n, 1e-4);
    const double lambda = 3e-3;
    const auto [val, grad] = loss_and_grad(theta, ff, omega, y, lambda, kind, n);
    const double step = 1e-5;
    int checked = 0;
    for (int rep = 0; rep < 10; ++rep) {
      const bool pick_a = (rng.next_u64() & 1u) != 0;
      double* slot;
      double analytic;
      if (pick_a) {
        const int i = static_cast<int>(rng.next_u64() % static_cast<unsigned>(theta.width()));
        slot = &theta.a[static_cast<std::size_t>(i)];
        analytic = grad.a[static_cast<std::size_t>(i)];
      } else {
        const std::size_t i = static_cast<std::size_t>(rng.next_u64() % theta.w.size());
        slot = &theta.w[i];
        analytic = grad.w[i];
      }
      const double saved = *slot;
      *slot = saved + step;
      const double fp = loss_and_grad(theta, ff, omega, y, lambda, kind, n).first.total;
      *slot = saved - step;
      const double fm = loss_and_grad(theta, ff, omega, y, lambda, kind, n).first.total;
      *slot = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double scale = std::max({1e-8, std::abs(fd), std::abs(analytic)});
      CHECK(std::abs(fd - analytic) / scale < 1e-5);
      ++checked;
    }
    CHECK(checked == 10);
  }
}

TEST_CASE("loss_and_grad: W=1 spectral-side identity for a-derivative") {
  Rng rng(67);
  const int n = 32;
  const auto ff = FourierFeatures::restricted();
  const auto omega = build_box_freqs(2, FreqNorm::inf, 2, FreqKind::sampling);
  const auto teacher = random_params(rng, 1, ff);
  auto y = forward_spectral(inr_rasterize(teacher, ff, n), omega);
  y *= 0.35;  // make the residual nonzero

  auto theta = random_params(rng, 1, ff);
  const auto [val, grad] = loss_and_grad(theta, ff, omega, y, 0.0, EtaKind::standard(), n);

  // dLoss/da = <F~[w.gamma]_+, r>_spec computed on the spectral side
  RasterImage relu = unit_field(ff, theta.unit_w(0), n);
  for (auto& v : relu.px) v = v > 0.0 ? v : 0.0;
  auto r = forward_spectral(inr_rasterize(theta, ff, n), omega);
  r -= y;
  const double spectral_side = real_inner(forward_spectral(relu, omega), r);
  CHECK(std::abs(grad.a[0] - spectral_side) < 1e-10 * std::max(1.0, std::abs(spectral_side)));
}

TEST_CASE("params csv round trip") {
  Rng rng(71);
  for (const auto& ff : {FourierFeatures::restricted(), FourierFeatures::general_box(2)}) {
    const auto theta = random_params(rng, 4, ff);
    std::stringstream ss;
    params_to_csv(theta, ff, ss);
    const auto [rt, ff_rt] = params_from_csv(ss);
    REQUIRE(rt.width() == theta.width());
    REQUIRE(ff_rt.feature_dim() == ff.feature_dim());
    CHECK(ff_rt.variant() == ff.variant());
    for (std::size_t i = 0; i < theta.a.size(); ++i) CHECK(rt.a[i] == theta.a[i]);
    for (std::size_t i = 0; i < theta.w.size(); ++i) CHECK(rt.w[i] == theta.w[i]);
  }
}
