#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "finr/errors.hpp"
#include "finr/features.hpp"
#include "finr/sampling.hpp"

namespace finr {

/// Shallow INR parameters theta = ((a_i, w_i))_{i=1..W}; inner weights
/// stored row-major, one row of length D per unit.
struct INRParams {
  int feature_dim = 0;
  std::vector<double> a;
  std::vector<double> w;

  INRParams() = default;
  INRParams(int width, int d)
      : feature_dim(d), a(static_cast<std::size_t>(width), 0.0),
        w(static_cast<std::size_t>(width) * static_cast<std::size_t>(d), 0.0) {}

  int width() const { return static_cast<int>(a.size()); }

  std::span<double> unit_w(int i) {
    return {w.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
  std::span<const double> unit_w(int i) const {
    return {w.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    for (double v : w)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// f_theta(x) = sum_i a_i [w_i . gamma(x)]_+.
inline double inr_forward(const INRParams& theta, const FourierFeatures& ff, std::span<const double> x) {
  if (theta.feature_dim != ff.feature_dim()) throw ConfigError("inr_forward: feature dim mismatch");
  std::vector<double> g(static_cast<std::size_t>(ff.feature_dim()));
  ff.embed(x, g);
  double s = 0.0;
  for (int i = 0; i < theta.width(); ++i) {
    const auto wi = theta.unit_w(i);
    double t = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) t += wi[c] * g[c];
    if (t > 0.0) s += theta.a[static_cast<std::size_t>(i)] * t;
  }
  return s;
}

/// Grid of the unit's trigonometric polynomial tau_w = w . gamma via
/// zero-padded inverse FFT of its coefficients.
inline RasterImage unit_field(const FourierFeatures& ff, std::span<const double> w, int n) {
  return adjoint_spectral(ff.weights_to_trig(w), n);
}

/// Rasterization by per-unit FFT synthesis followed by rectification.
inline RasterImage inr_rasterize(const INRParams& theta, const FourierFeatures& ff, int n) {
  RasterImage out(n);
  for (int i = 0; i < theta.width(); ++i) {
    const RasterImage t = unit_field(ff, theta.unit_w(i), n);
    const double ai = theta.a[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < out.px.size(); ++p)
      if (t.px[p] > 0.0) out.px[p] += ai * t.px[p];
  }
  return out;
}

/// Rasterization by direct pointwise evaluation; agrees with
/// inr_rasterize to rounding and exists as the independent route.
inline RasterImage inr_rasterize_direct(const INRParams& theta, const FourierFeatures& ff, int n) {
  RasterImage out(n);
  double x[2];
  for (int i = 0; i < n; ++i) {
    x[0] = static_cast<double>(i) / n;
    for (int j = 0; j < n; ++j) {
      x[1] = static_cast<double>(j) / n;
      out.at(i, j) = inr_forward(theta, ff, x);
    }
  }
  return out;
}

/// D feature grids gamma_c(i/N, j/N), one N x N raster per component.
inline std::vector<RasterImage> embed_grid(const FourierFeatures& ff, int n) {
  std::vector<RasterImage> grids;
  grids.reserve(static_cast<std::size_t>(ff.feature_dim()));
  for (int c = 0; c < ff.feature_dim(); ++c) grids.emplace_back(n);
  std::vector<double> g(static_cast<std::size_t>(ff.feature_dim()));
  double x[2];
  for (int i = 0; i < n; ++i) {
    x[0] = static_cast<double>(i) / n;
    for (int j = 0; j < n; ++j) {
      x[1] = static_cast<double>(j) / n;
      ff.embed(x, g);
      for (int c = 0; c < ff.feature_dim(); ++c) grids[static_cast<std::size_t>(c)].at(i, j) = g[static_cast<std::size_t>(c)];
    }
  }
  return grids;
}

// ---- parameter file format ----

inline void params_to_csv(const INRParams& theta, const FourierFeatures& ff, std::ostream& os) {
  os << "# finr params variant=" << (ff.variant() == FeatureVariant::general ? "general" : "restricted")
     << " D=" << ff.feature_dim() << " omega0=";
  for (std::size_t j = 0; j < ff.omega0().size(); ++j) {
    const auto k = ff.omega0().at(j);
    if (j) os << ";";
    os << k[0] << ":" << k[1];
  }
  os << "\n";
  os << "a";
  for (int c = 1; c <= ff.feature_dim(); ++c) os << ",w_" << c;
  os << "\n";
  char buf[32];
  for (int i = 0; i < theta.width(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", theta.a[static_cast<std::size_t>(i)]);
    os << buf;
    for (double v : theta.unit_w(i)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    os << "\n";
  }
}

inline void save_params(const INRParams& theta, const FourierFeatures& ff, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("save_params: cannot open " + path);
  params_to_csv(theta, ff, os);
}

inline std::pair<INRParams, FourierFeatures> params_from_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# finr params", 0) != 0)
    throw ConfigError("params_from_csv: missing header");
  const auto find_field = [&](const std::string& key) {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos) throw ConfigError("params_from_csv: missing field " + key);
    const auto start = pos + key.size() + 1;
    auto end = header.find(' ', start);
    if (end == std::string::npos) end = header.size();
    return header.substr(start, end - start);
  };
  const std::string variant = find_field("variant");
  FourierFeatures ff = FourierFeatures::restricted();
  if (variant == "general") {
    std::vector<int> flat;
    std::stringstream ss(find_field("omega0"));
    std::string tok;
    while (std::getline(ss, tok, ';')) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ConfigError("params_from_csv: bad omega0 entry");
      flat.push_back(std::stoi(tok.substr(0, colon)));
      flat.push_back(std::stoi(tok.substr(colon + 1)));
    }
    ff = FourierFeatures::general(FrequencySet(2, FreqKind::features, std::move(flat)));
  } else if (variant != "restricted") {
    throw ConfigError("params_from_csv: unknown variant " + variant);
  }
  if (std::stoi(find_field("D")) != ff.feature_dim()) throw ConfigError("params_from_csv: D does not match omega0");

  std::string line;
  std::getline(is, line);  // column header
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != ff.feature_dim() + 1) throw ConfigError("params_from_csv: bad row width");
    rows.push_back(std::move(row));
  }
  INRParams theta(static_cast<int>(rows.size()), ff.feature_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    theta.a[i] = rows[i][0];
    for (int c = 0; c < ff.feature_dim(); ++c)
      theta.w[i * static_cast<std::size_t>(ff.feature_dim()) + static_cast<std::size_t>(c)] = rows[i][static_cast<std::size_t>(c) + 1];
  }
  return {std::move(theta), std::move(ff)};
}

inline std::pair<INRParams, FourierFeatures> load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("load_params: cannot open " + path);
  return params_from_csv(is);
}

}  // namespace finr
