#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "finr/errors.hpp"
#include "finr/frequency_set.hpp"
#include "finr/spectral.hpp"

namespace finr {

enum class FeatureVariant { general, restricted };

/// Fourier features embedding gamma: T^2 -> R^D.
///
/// general:    [1, sqrt2 cos(2pi k_1.x), ..., sqrt2 cos(2pi k_p.x),
///                 sqrt2 sin(2pi k_1.x), ..., sqrt2 sin(2pi k_p.x)],
///             D = 2p+1, frequencies in the canonical omega0 order.
/// restricted: sqrt2 [cos 2pi x1, sin 2pi x1, cos 2pi x2, sin 2pi x2],
///             D = 4, constant feature omitted.
class FourierFeatures {
 public:
  static FourierFeatures general(FrequencySet omega0) {
    if (omega0.kind() != FreqKind::features) throw ConfigError("FourierFeatures: omega0 must be kind=features");
    if (omega0.dim() != 2) throw ConfigError("FourierFeatures: 2-D only");
    FourierFeatures ff;
    ff.variant_ = FeatureVariant::general;
    ff.omega0_ = std::move(omega0);
    ff.d_ = 2 * static_cast<int>(ff.omega0_.size()) + 1;
    ff.k0_ = ff.omega0_.max_inf_norm();
    return ff;
  }

  /// General embedding over one representative of each +-pair in the
  /// l-inf box of radius k0.
  static FourierFeatures general_box(int k0) {
    return general(build_box_freqs(k0, FreqNorm::inf, 2, FreqKind::features));
  }

  static FourierFeatures restricted() {
    FourierFeatures ff;
    ff.variant_ = FeatureVariant::restricted;
    ff.omega0_ = FrequencySet(2, FreqKind::features, {0, 1, 1, 0});
    ff.d_ = 4;
    ff.k0_ = 1;
    return ff;
  }

  FeatureVariant variant() const { return variant_; }
  const FrequencySet& omega0() const { return omega0_; }
  int feature_dim() const { return d_; }
  int max_freq() const { return k0_; }
  std::size_t n_freqs() const { return omega0_.size(); }

  void embed(std::span<const double> x, std::span<double> out) const {
    if (x.size() != 2 || out.size() != static_cast<std::size_t>(d_)) throw ConfigError("embed: dimension mismatch");
    const double two_pi = 2.0 * std::numbers::pi;
    const double rt2 = std::numbers::sqrt2;
    if (variant_ == FeatureVariant::restricted) {
      out[0] = rt2 * std::cos(two_pi * x[0]);
      out[1] = rt2 * std::sin(two_pi * x[0]);
      out[2] = rt2 * std::cos(two_pi * x[1]);
      out[3] = rt2 * std::sin(two_pi * x[1]);
      return;
    }
    const std::size_t p = omega0_.size();
    out[0] = 1.0;
    for (std::size_t j = 0; j < p; ++j) {
      const auto k = omega0_.at(j);
      const double phase = two_pi * (k[0] * x[0] + k[1] * x[1]);
      out[1 + j] = rt2 * std::cos(phase);
      out[1 + p + j] = rt2 * std::sin(phase);
    }
  }

  std::vector<double> embed(std::span<const double> x) const {
    std::vector<double> out(static_cast<std::size_t>(d_));
    embed(x, out);
    return out;
  }

  /// Coefficient array of tau(x) = w . gamma(x). Support is
  /// omega0 u -omega0 u {0}; the zero coefficient is present (and zero)
  /// for the restricted variant as well, so the result is a valid
  /// sampling-kind array.
  SpectralSamples weights_to_trig(std::span<const double> w) const {
    if (w.size() != static_cast<std::size_t>(d_)) throw ConfigError("weights_to_trig: |w| != D");
    SpectralSamples out(star_support());
    const double inv_rt2 = 1.0 / std::numbers::sqrt2;
    const auto put_pair = [&](int k1, int k2, double wc, double ws) {
      const int plus_k[2] = {k1, k2};
      const int neg_k[2] = {-k1, -k2};
      const std::complex<double> plus(inv_rt2 * wc, -inv_rt2 * ws);
      out.set(plus_k, plus);
      out.set(neg_k, std::conj(plus));
    };
    if (variant_ == FeatureVariant::restricted) {
      put_pair(1, 0, w[0], w[1]);
      put_pair(0, 1, w[2], w[3]);
      return out;
    }
    const std::size_t p = omega0_.size();
    for (std::size_t j = 0; j < p; ++j) {
      const auto k = omega0_.at(j);
      put_pair(k[0], k[1], w[1 + j], w[1 + p + j]);
    }
    const int zero[2] = {0, 0};
    out.set(zero, std::complex<double>(w[0], 0.0));
    return out;
  }

  /// omega0 u -omega0 u {0} as a sampling set (canonical support of
  /// weights_to_trig outputs).
  FrequencySet star_support() const {
    std::vector<int> flat;
    flat.push_back(0);
    flat.push_back(0);
    for (std::size_t j = 0; j < omega0_.size(); ++j) {
      const auto k = omega0_.at(j);
      flat.push_back(k[0]);
      flat.push_back(k[1]);
      flat.push_back(-k[0]);
      flat.push_back(-k[1]);
    }
    return FrequencySet(2, FreqKind::sampling, std::move(flat));
  }

 private:
  FourierFeatures() : omega0_(2, FreqKind::features, {0, 1}) {}

  FeatureVariant variant_ = FeatureVariant::restricted;
  FrequencySet omega0_;
  int d_ = 4;
  int k0_ = 1;
};

/// Membership in the singular set V excluded by the width-s recovery
/// theorem: (w1,w2) = 0, or (w3,w4) = 0, or equal pair norms
/// w1^2+w2^2 = w3^2+w4^2, each tested with absolute tolerance 1e-12.
inline bool in_singular_set_V(std::span<const double> w, double tol = 1e-12) {
  if (w.size() != 4) throw ConfigError("in_singular_set_V: expects a 4-vector");
  const double n12 = w[0] * w[0] + w[1] * w[1];
  const double n34 = w[2] * w[2] + w[3] * w[3];
  if (std::abs(w[0]) <= tol && std::abs(w[1]) <= tol) return true;
  if (std::abs(w[2]) <= tol && std::abs(w[3]) <= tol) return true;
  return std::abs(n12 - n34) <= tol;
}

}  // namespace finr
