#pragma once

#include <span>
#include <vector>

#include "finr/regularize.hpp"

namespace finr {

/// Gradient container shaped like INRParams.
struct ParamGrad {
  std::vector<double> a;
  std::vector<double> w;

  ParamGrad() = default;
  explicit ParamGrad(const INRParams& like)
      : a(like.a.size(), 0.0), w(like.w.size(), 0.0) {}

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    for (double v : w)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct LossValue {
  double total = 0.0;
  double data_sq = 0.0;  // ||F~ f_theta - y||^2 (squared residual norm)
  double reg = 0.0;      // R(theta)
};

/// Loss and full analytic gradient of
///   L = 1/2 ||F~_Omega f_theta - y||^2 + lambda R(theta).
/// Data-term chain: residual r, raster back-projection g = F~* r, then
/// d/da_i = <g, relu_i>_raster and d/dw_i = a_i (1/N^2) sum_x
/// g(x) mask_i(x) gamma(x) with the strict-positivity mask.
inline std::pair<LossValue, ParamGrad> loss_and_grad(const INRParams& theta, const FourierFeatures& ff,
                                                     const FrequencySet& omega, const SpectralSamples& y,
                                                     double lambda, const EtaKind& eta_kind, int n) {
  if (lambda < 0.0) throw ConfigError("loss_and_grad: lambda must be >= 0");
  if (theta.feature_dim != ff.feature_dim()) throw ConfigError("loss_and_grad: feature dim mismatch");

  const std::size_t n2 = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  const double inv_n2 = 1.0 / static_cast<double>(n2);

  // Per-unit fields, shared raster, residual.
  std::vector<RasterImage> fields;
  fields.reserve(static_cast<std::size_t>(theta.width()));
  RasterImage f(n);
  for (int i = 0; i < theta.width(); ++i) {
    fields.push_back(unit_field(ff, theta.unit_w(i), n));
    const double ai = theta.a[static_cast<std::size_t>(i)];
    const auto& t = fields.back().px;
    for (std::size_t p = 0; p < n2; ++p)
      if (t[p] > 0.0) f.px[p] += ai * t[p];
  }
  SpectralSamples r = forward_spectral(f, omega);
  r -= y;
  const RasterImage g = adjoint_spectral(r, n);
  const auto gamma = embed_grid(ff, n);

  LossValue val;
  val.data_sq = norm2_sq(r);

  ParamGrad grad(theta);
  for (int i = 0; i < theta.width(); ++i) {
    const auto& t = fields[static_cast<std::size_t>(i)].px;
    const double ai = theta.a[static_cast<std::size_t>(i)];
    double da = 0.0;
    for (std::size_t p = 0; p < n2; ++p)
      if (t[p] > 0.0) da += g.px[p] * t[p];
    grad.a[static_cast<std::size_t>(i)] = da * inv_n2;

    auto gw = std::span<double>(grad.w.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(theta.feature_dim)
                                , static_cast<std::size_t>(theta.feature_dim));
    for (int c = 0; c < theta.feature_dim; ++c) {
      double s = 0.0;
      const auto& gc = gamma[static_cast<std::size_t>(c)].px;
      for (std::size_t p = 0; p < n2; ++p)
        if (t[p] > 0.0) s += g.px[p] * gc[p];
      gw[static_cast<std::size_t>(c)] = ai * s * inv_n2;
    }

    const double e = eta(eta_kind, ff, theta.unit_w(i));
    val.reg += 0.5 * (ai * ai + e * e);
    if (lambda > 0.0) {
      grad.a[static_cast<std::size_t>(i)] += lambda * ai;
      const auto reg_gw = eta_sq_half_grad(eta_kind, ff, theta.unit_w(i));
      for (int c = 0; c < theta.feature_dim; ++c) gw[static_cast<std::size_t>(c)] += lambda * reg_gw[static_cast<std::size_t>(c)];
    }
  }
  val.total = 0.5 * val.data_sq + lambda * val.reg;
  return {val, std::move(grad)};
}

}  // namespace finr
