#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "finr/errors.hpp"
#include "finr/model.hpp"

namespace finr {

/// Admissible weighting function eta over inner-layer weights.
///
/// standard: eta(w) = ||w||_2
/// mod_i:    eta(w) = || F~_Omega [w.gamma]_+ ||_2   (discretized, grid N)
/// mod_ii:   eta(w) = (1/N^2) || E [w.gamma]_+ ||_1  (grid mean of the
///           rectified unit)
struct EtaKind {
  enum class Tag { standard, mod_i, mod_ii };

  Tag tag = Tag::standard;
  FrequencySet omega;  // mod_i only
  int grid_n = 0;      // mod_i / mod_ii

  static EtaKind standard() { return EtaKind{}; }

  static EtaKind mod_i(FrequencySet omega, int n) {
    EtaKind k;
    k.tag = Tag::mod_i;
    k.grid_n = n;
    if (n < 4 * omega.max_inf_norm() + 2) throw ConfigError("EtaKind::mod_i: grid too coarse (need N >= 4K+2)");
    k.omega = std::move(omega);
    return k;
  }

  static EtaKind mod_ii(int n) {
    EtaKind k;
    k.tag = Tag::mod_ii;
    k.grid_n = n;
    if (n < 6) throw ConfigError("EtaKind::mod_ii: grid too coarse");
    return k;
  }

  const char* name() const {
    switch (tag) {
      case Tag::standard: return "standard";
      case Tag::mod_i: return "modI";
      case Tag::mod_ii: return "modII";
    }
    return "?";
  }
};

namespace detail {

/// Threshold below which a rectified unit is treated as identically
/// zero on the grid (guards float noise; a true zero needs tau <= 0
/// everywhere).
inline constexpr double kEtaZeroTol = 1e-14;

}  // namespace detail

inline double eta(const EtaKind& kind, const FourierFeatures& ff, std::span<const double> w) {
  switch (kind.tag) {
    case EtaKind::Tag::standard: {
      double s = 0.0;
      for (double v : w) s += v * v;
      return std::sqrt(s);
    }
    case EtaKind::Tag::mod_i: {
      if (kind.grid_n < 4 * ff.max_freq() + 2) throw ConfigError("eta(modI): grid too coarse for features");
      RasterImage t = unit_field(ff, w, kind.grid_n);
      for (auto& v : t.px) v = v > 0.0 ? v : 0.0;
      return norm2(forward_spectral(t, kind.omega));
    }
    case EtaKind::Tag::mod_ii: {
      if (kind.grid_n < 4 * ff.max_freq() + 2) throw ConfigError("eta(modII): grid too coarse for features");
      const RasterImage t = unit_field(ff, w, kind.grid_n);
      double s = 0.0;
      for (double v : t.px)
        if (v > 0.0) s += v;
      return s / static_cast<double>(t.px.size());
    }
  }
  return 0.0;
}

/// Gradient of (1/2) eta(w)^2; smooth for all three kinds wherever the
/// unit is active, and exactly w for standard weight decay.
inline std::vector<double> eta_sq_half_grad(const EtaKind& kind, const FourierFeatures& ff, std::span<const double> w) {
  std::vector<double> g(w.size(), 0.0);
  switch (kind.tag) {
    case EtaKind::Tag::standard: {
      for (std::size_t c = 0; c < w.size(); ++c) g[c] = w[c];
      return g;
    }
    case EtaKind::Tag::mod_i: {
      const int n = kind.grid_n;
      RasterImage t = unit_field(ff, w, n);
      RasterImage relu(n);
      for (std::size_t p = 0; p < t.px.size(); ++p) relu.px[p] = t.px[p] > 0.0 ? t.px[p] : 0.0;
      const RasterImage back = adjoint_spectral(forward_spectral(relu, kind.omega), n);
      const auto gamma = embed_grid(ff, n);
      const double inv_n2 = 1.0 / static_cast<double>(t.px.size());
      for (std::size_t c = 0; c < g.size(); ++c) {
        double s = 0.0;
        const auto& gc = gamma[c].px;
        for (std::size_t p = 0; p < t.px.size(); ++p)
          if (t.px[p] > 0.0) s += back.px[p] * gc[p];
        g[c] = s * inv_n2;
      }
      return g;
    }
    case EtaKind::Tag::mod_ii: {
      const double e = eta(kind, ff, w);
      const int n = kind.grid_n;
      const RasterImage t = unit_field(ff, w, n);
      const auto gamma = embed_grid(ff, n);
      const double inv_n2 = 1.0 / static_cast<double>(t.px.size());
      for (std::size_t c = 0; c < g.size(); ++c) {
        double s = 0.0;
        const auto& gc = gamma[c].px;
        for (std::size_t p = 0; p < t.px.size(); ++p)
          if (t.px[p] > 0.0) s += gc[p];
        g[c] = e * s * inv_n2;
      }
      return g;
    }
  }
  return g;
}

/// Gradient of eta itself. modI divides by eta(w) and is undefined at
/// eta = 0; modII and standard are 0-homogeneous as required by Euler's
/// identity for 1-homogeneous functions.
inline std::vector<double> eta_grad(const EtaKind& kind, const FourierFeatures& ff, std::span<const double> w) {
  switch (kind.tag) {
    case EtaKind::Tag::standard: {
      std::vector<double> g(w.size(), 0.0);
      double nrm = 0.0;
      for (double v : w) nrm += v * v;
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) return g;
      for (std::size_t c = 0; c < w.size(); ++c) g[c] = w[c] / nrm;
      return g;
    }
    case EtaKind::Tag::mod_i: {
      const double e = eta(kind, ff, w);
      if (e <= detail::kEtaZeroTol) throw ConfigError("eta_grad(modI): undefined at eta(w) = 0");
      auto g = eta_sq_half_grad(kind, ff, w);
      for (auto& v : g) v /= e;
      return g;
    }
    case EtaKind::Tag::mod_ii: {
      const int n = kind.grid_n;
      const RasterImage t = unit_field(ff, w, n);
      const auto gamma = embed_grid(ff, n);
      std::vector<double> g(w.size(), 0.0);
      const double inv_n2 = 1.0 / static_cast<double>(t.px.size());
      for (std::size_t c = 0; c < g.size(); ++c) {
        double s = 0.0;
        const auto& gc = gamma[c].px;
        for (std::size_t p = 0; p < t.px.size(); ++p)
          if (t.px[p] > 0.0) s += gc[p];
        g[c] = s * inv_n2;
      }
      return g;
    }
  }
  return {};
}

/// R(theta) = (1/2) sum_i (|a_i|^2 + eta(w_i)^2).
inline double weight_decay_objective(const INRParams& theta, const EtaKind& kind, const FourierFeatures& ff) {
  double s = 0.0;
  for (int i = 0; i < theta.width(); ++i) {
    const double e = eta(kind, ff, theta.unit_w(i));
    s += theta.a[static_cast<std::size_t>(i)] * theta.a[static_cast<std::size_t>(i)] + e * e;
  }
  return 0.5 * s;
}

/// Per-unit rebalancing a_i' = a_i/c_i, w_i' = c_i w_i with
/// c_i = sqrt(|a_i|/eta(w_i)); realizes the same function and drops R
/// to sum_i |a_i| eta(w_i). Units with eta = 0 (or a = 0) are zeroed.
inline INRParams balance(const INRParams& theta, const EtaKind& kind, const FourierFeatures& ff) {
  INRParams out = theta;
  for (int i = 0; i < theta.width(); ++i) {
    const double e = eta(kind, ff, theta.unit_w(i));
    const double ai = theta.a[static_cast<std::size_t>(i)];
    auto wo = out.unit_w(i);
    if (e <= detail::kEtaZeroTol || ai == 0.0) {
      out.a[static_cast<std::size_t>(i)] = 0.0;
      for (auto& v : wo) v = 0.0;
      continue;
    }
    const double c = std::sqrt(std::abs(ai) / e);
    out.a[static_cast<std::size_t>(i)] = ai / c;
    for (auto& v : wo) v *= c;
  }
  return out;
}

/// Unit sizes |a_i| eta(w_i) in unit order.
inline std::vector<double> unit_sizes(const INRParams& theta, const EtaKind& kind, const FourierFeatures& ff) {
  std::vector<double> s(static_cast<std::size_t>(theta.width()), 0.0);
  for (int i = 0; i < theta.width(); ++i)
    s[static_cast<std::size_t>(i)] = std::abs(theta.a[static_cast<std::size_t>(i)]) * eta(kind, ff, theta.unit_w(i));
  return s;
}

}  // namespace finr
