#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "finr/features.hpp"
#include "finr/model.hpp"
#include "finr/rng.hpp"
#include "finr/spectral.hpp"

namespace finr {

/// Experiment regime: thm1 = general features / width-1 theory,
/// thm2 = restricted features / width-s theory.
enum class Setting { thm1, thm2 };

/// Random teacher network: inner weights uniform on the unit sphere,
/// outer weights uniform in [1,5]. In the thm2 setting, weight vectors
/// landing in the singular set V are redrawn (a probability-zero event
/// hit only through user-supplied states).
inline INRParams random_teacher(Rng& rng, int width, const FourierFeatures& ff, Setting setting) {
  INRParams theta(width, ff.feature_dim());
  std::vector<double> w(static_cast<std::size_t>(ff.feature_dim()));
  for (int i = 0; i < width; ++i) {
    for (;;) {
      rng.sphere(std::span<double>(w));
      if (setting == Setting::thm2 && ff.feature_dim() == 4 && in_singular_set_V(w)) continue;
      break;
    }
    auto wi = theta.unit_w(i);
    std::copy(w.begin(), w.end(), wi.begin());
    theta.a[static_cast<std::size_t>(i)] = rng.uniform(1.0, 5.0);
  }
  return theta;
}

inline INRParams random_teacher(std::uint64_t seed, int width, const FourierFeatures& ff, Setting setting) {
  Rng rng(seed);
  return random_teacher(rng, width, ff, setting);
}

/// Dot phantom: n_disks rectified shifted bumps [tau0(x - x0) - alpha]_+
/// with tau0 = 1/2 + (1/4) cos(2 pi x1) + (1/4) cos(2 pi x2), expressed
/// exactly in the feature basis. Thresholds alpha in (0.9, 0.99) give
/// small disks; centers stay 2 disk radii away from the torus seam.
inline INRParams dot_phantom(std::uint64_t seed, int n_disks, const FourierFeatures& ff) {
  if (ff.variant() != FeatureVariant::general) throw ConfigError("dot_phantom: general features required");
  if (ff.max_freq() < 8) throw ConfigError("dot_phantom: feature box too small (need K0 >= 8)");
  const int e1[2] = {1, 0};
  const int e2[2] = {0, 1};
  const auto j10 = ff.omega0().index_of(e1);
  const auto j01 = ff.omega0().index_of(e2);
  if (j10 < 0 || j01 < 0) throw ConfigError("dot_phantom: feature set lacks the base frequencies (1,0), (0,1)");

  Rng rng(seed);
  const std::size_t p = ff.omega0().size();
  INRParams theta(n_disks, ff.feature_dim());
  const double quarter = 0.25 / std::numbers::sqrt2;
  for (int i = 0; i < n_disks; ++i) {
    const double alpha = rng.uniform(0.90, 0.99);
    const double radius = std::sqrt(2.0 * (1.0 - alpha)) / std::numbers::pi;
    const double margin = 2.0 * radius;
    const double c1 = rng.uniform(margin, 1.0 - margin);
    const double c2 = rng.uniform(margin, 1.0 - margin);
    auto w = theta.unit_w(i);
    w[0] = 0.5 - alpha;
    w[1 + static_cast<std::size_t>(j10)] = quarter * std::cos(2.0 * std::numbers::pi * c1);
    w[1 + p + static_cast<std::size_t>(j10)] = quarter * std::sin(2.0 * std::numbers::pi * c1);
    w[1 + static_cast<std::size_t>(j01)] = quarter * std::cos(2.0 * std::numbers::pi * c2);
    w[1 + p + static_cast<std::size_t>(j01)] = quarter * std::sin(2.0 * std::numbers::pi * c2);
    theta.a[static_cast<std::size_t>(i)] = 1.0;
  }
  return theta;
}

/// J1 by Miller's backward recurrence, normalized with
/// J0 + 2 (J2 + J4 + ...) = 1; accurate to ~1e-13 for the argument
/// range used here (|x| up to a few hundred).
inline double bessel_j1(double x) {
  const double sign = x < 0.0 ? -1.0 : 1.0;
  x = std::abs(x);
  if (x < 1e-8) return sign * 0.5 * x;
  const int start = 2 * ((static_cast<int>(x) + static_cast<int>(12.0 * std::cbrt(x + 1.0)) + 42) / 2);
  double jp = 0.0;   // J_{k+1}
  double jc = 1e-30; // J_k
  double j1 = 0.0;
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    const double jm = (2.0 * k / x) * jc - jp;
    jp = jc;
    jc = jm;
    if (k - 1 == 1) j1 = jc;
    if ((k - 1) % 2 == 0) norm += (k - 1 == 0 ? 1.0 : 2.0) * jc;
    if (std::abs(jc) > 1e20) {
      jc *= 1e-20;
      jp *= 1e-20;
      j1 *= 1e-20;
      norm *= 1e-20;
    }
  }
  return sign * j1 / norm;
}

/// Ellipse on [0,1)^2; rx, ry are the semi-axes, angle in radians
/// rotates the ellipse counterclockwise, amplitude is the indicator
/// height.
struct Ellipse {
  double cx = 0.5, cy = 0.5;
  double rx = 0.1, ry = 0.1;
  double angle = 0.0;
  double amplitude = 1.0;

  void validate() const {
    if (!(rx > 0.0) || !(ry > 0.0)) throw ConfigError("Ellipse: semi-axes must be positive");
    const double c = std::cos(angle), s = std::sin(angle);
    const double ex = std::sqrt(rx * rx * c * c + ry * ry * s * s);
    const double ey = std::sqrt(rx * rx * s * s + ry * ry * c * c);
    if (cx - ex < 0.0 || cx + ex >= 1.0 || cy - ey < 0.0 || cy + ey >= 1.0)
      throw ConfigError("Ellipse: must be contained in [0,1)^2 (no wraparound)");
  }
};

/// Exact Fourier coefficients of a superposition of ellipse indicators:
/// f^[k] = sum_e amp rx ry J1(2 pi kappa)/kappa e^{-2 pi i k.c} with
/// kappa the frequency magnitude in the ellipse frame.
inline SpectralSamples ellipse_spectrum(const std::vector<Ellipse>& ellipses, const FrequencySet& omega) {
  for (const auto& e : ellipses) e.validate();
  SpectralSamples out(omega);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t qi = 0; qi < omega.size(); ++qi) {
    const auto k = omega.at(qi);
    std::complex<double> acc(0.0, 0.0);
    for (const auto& e : ellipses) {
      const double c = std::cos(e.angle), s = std::sin(e.angle);
      const double k1p = c * k[0] + s * k[1];
      const double k2p = -s * k[0] + c * k[1];
      const double kappa = std::hypot(e.rx * k1p, e.ry * k2p);
      double shape;
      if (kappa < 1e-12)
        shape = std::numbers::pi;  // J1(2 pi kappa)/kappa -> pi
      else
        shape = bessel_j1(two_pi * kappa) / kappa;
      const double phase = -two_pi * (k[0] * e.cx + k[1] * e.cy);
      acc += e.amplitude * e.rx * e.ry * shape * std::polar(1.0, phase);
    }
    out[qi] = acc;
  }
  return out;
}

/// The standard ten-ellipse head phantom (classic parameter table,
/// rescaled from [-1,1]^2 to [0,1)^2).
inline std::vector<Ellipse> shepp_logan() {
  struct Row {
    double amp, a, b, x0, y0, deg;
  };
  static const Row rows[] = {
      {2.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  std::vector<Ellipse> out;
  for (const auto& r : rows) {
    Ellipse e;
    e.cx = (r.x0 + 1.0) / 2.0;
    e.cy = (r.y0 + 1.0) / 2.0;
    e.rx = r.a / 2.0;
    e.ry = r.b / 2.0;
    e.angle = r.deg * std::numbers::pi / 180.0;
    e.amplitude = r.amp;
    out.push_back(e);
  }
  return out;
}

/// Rasterizes the ellipse indicator sum pointwise (ground truth image).
inline RasterImage ellipse_raster(const std::vector<Ellipse>& ellipses, int n) {
  RasterImage img(n);
  for (const auto& e : ellipses) {
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    for (int i = 0; i < n; ++i) {
      const double dx = static_cast<double>(i) / n - e.cx;
      for (int j = 0; j < n; ++j) {
        const double dy = static_cast<double>(j) / n - e.cy;
        const double u = (c * dx + s * dy) / e.rx;
        const double v = (-s * dx + c * dy) / e.ry;
        if (u * u + v * v <= 1.0) img.at(i, j) += e.amplitude;
      }
    }
  }
  return img;
}

// ---- ellipse CSV (columns cx, cy, rx, ry, angle_deg, amplitude) ----

inline void ellipses_to_csv(const std::vector<Ellipse>& ellipses, std::ostream& os) {
  os << "cx,cy,rx,ry,angle_deg,amplitude\n";
  char buf[160];
  for (const auto& e : ellipses) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.cx, e.cy, e.rx, e.ry,
                  e.angle * 180.0 / std::numbers::pi, e.amplitude);
    os << buf;
  }
}

inline std::vector<Ellipse> ellipses_from_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("cx,cy,rx,ry", 0) != 0)
    throw ConfigError("ellipses_from_csv: bad header");
  std::vector<Ellipse> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 6) throw ConfigError("ellipses_from_csv: bad row");
    Ellipse e;
    e.cx = vals[0];
    e.cy = vals[1];
    e.rx = vals[2];
    e.ry = vals[3];
    e.angle = vals[4] * std::numbers::pi / 180.0;
    e.amplitude = vals[5];
    e.validate();
    out.push_back(e);
  }
  return out;
}

inline std::vector<Ellipse> load_ellipses(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("load_ellipses: cannot open " + path);
  return ellipses_from_csv(is);
}

}  // namespace finr
