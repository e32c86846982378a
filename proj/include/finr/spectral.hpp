#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "finr/errors.hpp"
#include "finr/frequency_set.hpp"

namespace finr {

/// Conjugate-symmetric complex coefficient array indexed by a sampling
/// FrequencySet. Symmetry is an invariant of the data, not of the
/// storage: the full spectrum is stored and symmetry is asserted where
/// operations rely on it.
class SpectralSamples {
 public:
  SpectralSamples() = default;

  explicit SpectralSamples(FrequencySet freqs)
      : freqs_(std::move(freqs)), v_(freqs_.size(), std::complex<double>(0.0, 0.0)) {
    if (freqs_.kind() != FreqKind::sampling) throw ConfigError("SpectralSamples: frequency set must be kind=sampling");
  }

  const FrequencySet& freqs() const { return freqs_; }
  std::size_t size() const { return v_.size(); }

  std::complex<double>& operator[](std::size_t i) { return v_[i]; }
  const std::complex<double>& operator[](std::size_t i) const { return v_[i]; }

  std::span<std::complex<double>> values() { return v_; }
  std::span<const std::complex<double>> values() const { return v_; }

  std::complex<double> at_freq(std::span<const int> k) const {
    const auto i = freqs_.index_of(k);
    if (i < 0) throw ConfigError("SpectralSamples: frequency not in support");
    return v_[static_cast<std::size_t>(i)];
  }

  std::complex<double> value_or_zero(std::span<const int> k) const {
    const auto i = freqs_.index_of(k);
    return i < 0 ? std::complex<double>(0.0, 0.0) : v_[static_cast<std::size_t>(i)];
  }

  void set(std::span<const int> k, std::complex<double> val) {
    const auto i = freqs_.index_of(k);
    if (i < 0) throw ConfigError("SpectralSamples: frequency not in support");
    v_[static_cast<std::size_t>(i)] = val;
  }

  bool is_conjugate_symmetric(double tol = 1e-12) const {
    std::vector<int> neg(static_cast<std::size_t>(freqs_.dim()));
    for (std::size_t i = 0; i < size(); ++i) {
      auto k = freqs_.at(i);
      for (int c = 0; c < freqs_.dim(); ++c) neg[static_cast<std::size_t>(c)] = -k[static_cast<std::size_t>(c)];
      const auto j = freqs_.index_of(neg);
      if (j < 0) return false;
      if (std::abs(v_[i] - std::conj(v_[static_cast<std::size_t>(j)])) > tol) return false;
    }
    return true;
  }

  void require_conjugate_symmetric(double tol = 1e-12) const {
    if (!is_conjugate_symmetric(tol)) throw ConfigError("SpectralSamples: conjugate symmetry violated");
  }

  SpectralSamples& operator+=(const SpectralSamples& o) {
    check_same_support(o);
    for (std::size_t i = 0; i < size(); ++i) v_[i] += o.v_[i];
    return *this;
  }

  SpectralSamples& operator-=(const SpectralSamples& o) {
    check_same_support(o);
    for (std::size_t i = 0; i < size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }

  SpectralSamples& operator*=(double s) {
    for (auto& x : v_) x *= s;
    return *this;
  }

  friend SpectralSamples operator+(SpectralSamples a, const SpectralSamples& b) { return a += b; }
  friend SpectralSamples operator-(SpectralSamples a, const SpectralSamples& b) { return a -= b; }
  friend SpectralSamples operator*(double s, SpectralSamples a) { return a *= s; }

 private:
  void check_same_support(const SpectralSamples& o) const {
    if (!(freqs_ == o.freqs_)) throw ConfigError("SpectralSamples: support mismatch");
  }

  FrequencySet freqs_;
  std::vector<std::complex<double>> v_;
};

/// Real inner product <u,v> = sum_k Re(u[k] conj(v[k])); symmetric and
/// positive definite on conjugate-symmetric arrays.
inline double real_inner(const SpectralSamples& u, const SpectralSamples& v) {
  if (!(u.freqs() == v.freqs())) throw ConfigError("real_inner: support mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    s += u[i].real() * v[i].real() + u[i].imag() * v[i].imag();
  return s;
}

inline double norm2_sq(const SpectralSamples& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::norm(u[i]);
  return s;
}

inline double norm2(const SpectralSamples& u) { return std::sqrt(norm2_sq(u)); }

/// Coefficient array of the product of two trigonometric polynomials:
/// discrete convolution over the Minkowski sum of the supports.
inline SpectralSamples trig_product(const SpectralSamples& a, const SpectralSamples& b) {
  SpectralSamples out(minkowski_sum(a.freqs(), b.freqs()));
  const int d = a.freqs().dim();
  std::vector<int> sum(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ka = a.freqs().at(i);
    if (a[i] == std::complex<double>(0.0, 0.0)) continue;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto kb = b.freqs().at(j);
      for (int c = 0; c < d; ++c) sum[static_cast<std::size_t>(c)] = ka[static_cast<std::size_t>(c)] + kb[static_cast<std::size_t>(c)];
      const auto idx = out.freqs().index_of(sum);
      out[static_cast<std::size_t>(idx)] += a[i] * b[j];
    }
  }
  return out;
}

/// Fourier multiplier of 1 - alpha-free Helmholtz operator: output[k] =
/// 4 pi^2 (1 - ||k||_2^2) t[k]. Annihilates exactly the coefficients on
/// the unit circle ||k||_2 = 1.
inline SpectralSamples apply_helmholtz(const SpectralSamples& t) {
  SpectralSamples out(t.freqs());
  const double four_pi_sq = 4.0 * std::numbers::pi * std::numbers::pi;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto k = t.freqs().at(i);
    double nrm_sq = 0.0;
    for (std::size_t c = 0; c < k.size(); ++c) nrm_sq += static_cast<double>(k[c]) * static_cast<double>(k[c]);
    out[i] = four_pi_sq * (1.0 - nrm_sq) * t[i];
  }
  return out;
}

/// Evaluates sum_k t[k] e^{i 2 pi k.x}. Conjugate symmetry makes the
/// value real; an imaginary residue above tolerance means the symmetry
/// invariant is broken upstream.
inline double eval_trig(const SpectralSamples& t, std::span<const double> x) {
  if (static_cast<int>(x.size()) != t.freqs().dim()) throw ConfigError("eval_trig: point dim mismatch");
  std::complex<double> acc(0.0, 0.0);
  double mag = 0.0;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto k = t.freqs().at(i);
    double phase = 0.0;
    for (std::size_t c = 0; c < k.size(); ++c) phase += static_cast<double>(k[c]) * x[c];
    acc += t[i] * std::polar(1.0, two_pi * phase);
    mag += std::abs(t[i]);
  }
  if (std::abs(acc.imag()) > 1e-12 * std::max(1.0, mag))
    throw ConfigError("eval_trig: imaginary residue above tolerance (broken conjugate symmetry)");
  return acc.real();
}

/// CSV dump with columns k1,..,kd,re,im in canonical order.
inline void spectral_to_csv(const SpectralSamples& s, std::ostream& os) {
  const int d = s.freqs().dim();
  for (int c = 1; c <= d; ++c) os << "k" << c << ",";
  os << "re,im\n";
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto k = s.freqs().at(i);
    for (int c = 0; c < d; ++c) os << k[static_cast<std::size_t>(c)] << ",";
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s[i].real(), s[i].imag());
    os << buf;
  }
}

}  // namespace finr
