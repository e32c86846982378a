#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include "finr/errors.hpp"
#include "finr/fft.hpp"
#include "finr/spectral.hpp"

namespace finr {

/// N x N real grid with pixel (i,j) = f(i/N, j/N); i indexes x1,
/// j indexes x2, row-major storage.
struct RasterImage {
  int n = 0;
  aligned_vector<double> px;

  RasterImage() = default;
  explicit RasterImage(int n_) : n(n_), px(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0.0) {}

  double& at(int i, int j) { return px[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }
  double at(int i, int j) const { return px[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }

  bool all_finite() const {
    for (double v : px)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

namespace detail {

/// Maps an integer frequency pair to the r2c half-spectrum slot,
/// returning the index and whether a conjugate read is needed.
struct HalfSpecIndex {
  std::size_t idx;
  bool conj;
};

inline HalfSpecIndex half_spec_index(int n, int k1, int k2) {
  const int half = n / 2 + 1;
  bool conj = false;
  if (!(k2 >= 0 && k2 < half)) {
    k1 = -k1;
    k2 = -k2;
    conj = true;
  }
  const int r = ((k1 % n) + n) % n;
  const int c = ((k2 % n) + n) % n;
  return {static_cast<std::size_t>(r) * static_cast<std::size_t>(half) + static_cast<std::size_t>(c), conj};
}

}  // namespace detail

/// Discretized Fourier sampling operator: values[k] =
/// (1/N^2) sum_{i,j} pixels[i,j] e^{-2 pi i (k1 i + k2 j)/N},
/// computed by a 2D FFT and restriction to omega.
inline SpectralSamples forward_spectral(const RasterImage& img, const FrequencySet& omega) {
  if (omega.kind() != FreqKind::sampling) throw ConfigError("forward_spectral: omega must be kind=sampling");
  if (omega.dim() != 2) throw ConfigError("forward_spectral: omega must be 2-D");
  const int n = img.n;
  if (2 * omega.max_inf_norm() >= n) throw ConfigError("forward_spectral: frequency at or beyond Nyquist (||k||_inf >= N/2)");

  const Fft2& fft = Fft2::get(n);
  aligned_vector<double> in(img.px.begin(), img.px.end());
  aligned_vector<std::complex<double>> half(fft.complex_size());
  fft.forward(in.data(), half.data());

  SpectralSamples out(omega);
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const auto k = omega.at(i);
    const auto h = detail::half_spec_index(n, k[0], k[1]);
    const std::complex<double> v = half[h.idx];
    out[i] = scale * (h.conj ? std::conj(v) : v);
  }
  return out;
}

/// Zero-filled adjoint (synthesis): pixels[i,j] =
/// sum_k y[k] e^{+2 pi i (k1 i + k2 j)/N}. Real output to rounding when
/// y is conjugate-symmetric.
inline RasterImage adjoint_spectral(const SpectralSamples& y, int n) {
  if (y.freqs().dim() != 2) throw ConfigError("adjoint_spectral: 2-D only");
  if (2 * y.freqs().max_inf_norm() >= n) throw ConfigError("adjoint_spectral: frequency at or beyond Nyquist");
  y.require_conjugate_symmetric(1e-9 * std::max(1.0, norm2(y)));

  const Fft2& fft = Fft2::get(n);
  aligned_vector<std::complex<double>> half(fft.complex_size(), std::complex<double>(0.0, 0.0));
  const int halfw = n / 2 + 1;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto k = y.freqs().at(i);
    const int k1 = k[0], k2 = k[1];
    if (k2 < 0) continue;  // supplied by the conjugate row
    const int r = ((k1 % n) + n) % n;
    half[static_cast<std::size_t>(r) * static_cast<std::size_t>(halfw) + static_cast<std::size_t>(k2)] = y[i];
  }
  RasterImage img(n);
  aligned_vector<double> out(img.px.size());
  fft.inverse(half.data(), out.data());
  std::copy(out.begin(), out.end(), img.px.begin());
  return img;
}

inline double raster_mse(const RasterImage& a, const RasterImage& b) {
  if (a.n != b.n) throw ConfigError("raster_mse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const double d = a.px[i] - b.px[i];
    s += d * d;
  }
  return s / static_cast<double>(a.px.size());
}

/// <u,v>_raster = (1/N^2) sum u.v, the inner product under which
/// forward_spectral and adjoint_spectral are adjoint.
inline double raster_inner(const RasterImage& a, const RasterImage& b) {
  if (a.n != b.n) throw ConfigError("raster_inner: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.px.size(); ++i) s += a.px[i] * b.px[i];
  return s / static_cast<double>(a.px.size());
}

// ---- file formats ----

/// FTIMG: header line "FTIMG <N> <min> <max>\n" then N^2 little-endian
/// float64 values, row-major.
inline void write_ftimg(const RasterImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("write_ftimg: cannot open " + path);
  double lo = img.px.empty() ? 0.0 : img.px[0], hi = lo;
  for (double v : img.px) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  char head[128];
  std::snprintf(head, sizeof head, "FTIMG %d %.17g %.17g\n", img.n, lo, hi);
  os << head;
  os.write(reinterpret_cast<const char*>(img.px.data()), static_cast<std::streamsize>(img.px.size() * sizeof(double)));
}

inline RasterImage read_ftimg(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("read_ftimg: cannot open " + path);
  std::string magic;
  int n = 0;
  double lo = 0.0, hi = 0.0;
  is >> magic >> n >> lo >> hi;
  if (magic != "FTIMG" || n <= 0) throw ConfigError("read_ftimg: bad header in " + path);
  is.get();  // newline
  RasterImage img(n);
  is.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size() * sizeof(double)));
  if (!is) throw ConfigError("read_ftimg: truncated data in " + path);
  return img;
}

/// 8-bit P5 PGM with min/max affine scaling, for viewing.
inline void write_pgm(const RasterImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("write_pgm: cannot open " + path);
  double lo = img.px.empty() ? 0.0 : img.px[0], hi = lo;
  for (double v : img.px) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  os << "P5\n" << img.n << " " << img.n << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.n));
  for (int i = 0; i < img.n; ++i) {
    for (int j = 0; j < img.n; ++j) {
      const double t = (img.at(i, j) - lo) / span;
      row[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
    }
    os.write(reinterpret_cast<const char*>(row.data()), img.n);
  }
}

}  // namespace finr
