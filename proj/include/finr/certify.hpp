#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "finr/fft.hpp"
#include "finr/phantoms.hpp"
#include "finr/regularize.hpp"
#include "finr/rng.hpp"

namespace finr {

namespace detail {

/// Synthesizes tau_w on the grid by partial column transforms; same
/// arithmetic as unit_field but without an FFT, which matters when
/// thousands of probe units are evaluated.
inline void synth_unit_grid(const FourierFeatures& ff, std::span<const double> w, int n, std::vector<double>& out) {
  const SpectralSamples that = ff.weights_to_trig(w);
  const int k0 = ff.max_freq();
  const std::size_t nu = static_cast<std::size_t>(n);
  const double two_pi = 2.0 * std::numbers::pi;
  out.assign(nu * nu, 0.0);

  // lines[k1][c] = sum_{k2} that[k1,k2] e^{+2 pi i k2 c/N} for k1 >= 0
  std::vector<std::complex<double>> lines(static_cast<std::size_t>(k0 + 1) * nu, {0.0, 0.0});
  std::vector<int> key(2);
  for (int k1 = 0; k1 <= k0; ++k1) {
    for (int k2 = -k0; k2 <= k0; ++k2) {
      key[0] = k1;
      key[1] = k2;
      const auto idx = that.freqs().index_of(key);
      if (idx < 0) continue;
      const std::complex<double> coeff = that[static_cast<std::size_t>(idx)];
      if (coeff == std::complex<double>(0.0, 0.0)) continue;
      for (std::size_t c = 0; c < nu; ++c)
        lines[static_cast<std::size_t>(k1) * nu + c] += coeff * std::polar(1.0, two_pi * k2 * static_cast<double>(c) / n);
    }
  }
  for (int r = 0; r < n; ++r) {
    double* row = out.data() + static_cast<std::size_t>(r) * nu;
    const std::complex<double>* l0 = lines.data();
    for (std::size_t c = 0; c < nu; ++c) row[c] = l0[c].real();
    for (int k1 = 1; k1 <= k0; ++k1) {
      const std::complex<double> ph = std::polar(1.0, two_pi * k1 * static_cast<double>(r) / n);
      const std::complex<double>* line = lines.data() + static_cast<std::size_t>(k1) * nu;
      const double pr = ph.real(), pi = ph.imag();
      for (std::size_t c = 0; c < nu; ++c) row[c] += 2.0 * (pr * line[c].real() - pi * line[c].imag());
    }
  }
}

}  // namespace detail

/// Evaluates the dual function Phi(w) = <F~_Omega [w.gamma]_+, z> at a
/// single unit-norm weight vector.
inline double dual_function(const SpectralSamples& z, const FourierFeatures& ff, std::span<const double> w, int n) {
  std::vector<double> grid;
  detail::synth_unit_grid(ff, w, n, grid);
  const RasterImage zt = adjoint_spectral(z, n);
  double s = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    if (grid[p] > 0.0) s += grid[p] * zt.px[p];
  return s / static_cast<double>(grid.size());
}

/// Width-1 certificate z0 = sign(a0) eta(w0)^{-1} F~_Omega [w0.gamma]_+
/// with the modified WD-I weighting.
inline SpectralSamples certificate_thm1(double a0, std::span<const double> w0, const FourierFeatures& ff,
                                        const FrequencySet& omega, int n) {
  if (a0 == 0.0) throw ConfigError("certificate_thm1: a0 must be nonzero");
  const int need = 3 * ff.max_freq();
  const auto required = build_box_freqs(need, FreqNorm::inf, 2, FreqKind::sampling);
  for (std::size_t i = 0; i < required.size(); ++i)
    if (!omega.contains(required.at(i)))
      throw HypothesisError("certificate_thm1: omega must contain the full box ||k||_inf <= 3 K0");

  std::vector<double> grid;
  detail::synth_unit_grid(ff, w0, n, grid);
  RasterImage relu(n);
  for (std::size_t p = 0; p < grid.size(); ++p) relu.px[p] = grid[p] > 0.0 ? grid[p] : 0.0;
  SpectralSamples spec = forward_spectral(relu, omega);
  const double eta0 = norm2(spec);
  if (eta0 <= 1e-14) throw ConfigError("certificate_thm1: rectified unit vanishes (eta = 0)");
  spec *= (a0 > 0.0 ? 1.0 : -1.0) / eta0;
  return spec;
}

struct Thm2Certificate {
  SpectralSamples phi_hat;  // over omega
  double alpha = 0.0;
  SpectralSamples rho_hat;  // over its own l1-ball support
};

/// Width-s certificate for the restricted embedding:
///   rho = prod tau_i^2, phi = 1 - alpha (Laplace + 4 pi^2) rho,
///   0 < alpha < (4 pi^2 ||rho||_inf)^{-1} via the safety factor.
inline Thm2Certificate certificate_thm2(const std::vector<std::pair<double, std::vector<double>>>& atoms,
                                        const FrequencySet& omega, int n, double safety = 0.5) {
  if (atoms.empty()) throw ConfigError("certificate_thm2: no atoms");
  if (!(safety > 0.0 && safety < 1.0)) throw ConfigError("certificate_thm2: safety must be in (0,1)");
  const auto ff = FourierFeatures::restricted();
  const int s = static_cast<int>(atoms.size());

  for (const auto& [a, w] : atoms) {
    if (!(a > 0.0)) throw ConfigError("certificate_thm2: outer weights must be positive");
    if (w.size() != 4) throw ConfigError("certificate_thm2: weight vectors must be 4-D");
    if (in_singular_set_V(w))
      throw HypothesisError(
          "certificate_thm2: weight vector lies in the singular set V "
          "(w1=w2=0, or w3=w4=0, or w1^2+w2^2 = w3^2+w4^2)");
  }
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j) {
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (int c = 0; c < 4; ++c) {
        dot += atoms[i].second[static_cast<std::size_t>(c)] * atoms[j].second[static_cast<std::size_t>(c)];
        ni += atoms[i].second[static_cast<std::size_t>(c)] * atoms[i].second[static_cast<std::size_t>(c)];
        nj += atoms[j].second[static_cast<std::size_t>(c)] * atoms[j].second[static_cast<std::size_t>(c)];
      }
      if (std::abs(std::abs(dot) - std::sqrt(ni * nj)) < 1e-12)
        throw HypothesisError("certificate_thm2: atoms must satisfy w_i != +-w_j");
    }
  const auto required = build_box_freqs(2 * s, FreqNorm::one, 2, FreqKind::sampling);
  for (std::size_t i = 0; i < required.size(); ++i)
    if (!omega.contains(required.at(i)))
      throw HypothesisError("certificate_thm2: omega must contain the l1 ball of radius 2s");

  // rho_hat by repeated coefficient convolution
  SpectralSamples rho(build_box_freqs(0, FreqNorm::inf, 2, FreqKind::sampling));
  rho[0] = 1.0;
  for (const auto& [a, w] : atoms) {
    const auto tau = ff.weights_to_trig(w);
    rho = trig_product(rho, trig_product(tau, tau));
  }

  // sup norm of rho estimated on the grid
  const RasterImage rho_grid = adjoint_spectral(rho, n);
  double rho_max = 0.0;
  for (double v : rho_grid.px) rho_max = std::max(rho_max, v);
  if (rho_max <= 0.0) throw ConfigError("certificate_thm2: rho vanished");
  const double four_pi_sq = 4.0 * std::numbers::pi * std::numbers::pi;
  const double alpha = safety / (four_pi_sq * rho_max);

  const SpectralSamples helm = apply_helmholtz(rho);
  Thm2Certificate out{SpectralSamples(omega), alpha, rho};
  std::vector<int> key(2);
  for (std::size_t i = 0; i < helm.size(); ++i) {
    const auto k = helm.freqs().at(i);
    const auto idx = omega.index_of(k);
    if (idx < 0) {
      if (std::abs(helm[i]) > 1e-13)
        throw HypothesisError("certificate_thm2: certificate support escapes omega");
      continue;
    }
    out.phi_hat[static_cast<std::size_t>(idx)] = -alpha * helm[i];
  }
  const int zero[2] = {0, 0};
  out.phi_hat.set(zero, out.phi_hat.at_freq(zero) + 1.0);
  return out;
}

/// Verification summary of a dual certificate against its atoms and a
/// stream of random unit probes.
struct CertificateReport {
  std::size_t n_atoms = 0;
  std::size_t n_probes = 0;
  std::size_t n_skipped = 0;  // probes with eta below threshold (outside S_eta)
  double max_ratio_off_atoms = 0.0;
  double min_phi = 0.0;  // smallest Phi seen at probes (thm2 nonnegativity)
  double min_margin = 0.0;
  double min_margin_far = 0.0;   // probes > far_angle rad from every atom
  double far_angle = 0.1;
  std::size_t n_far = 0;
  std::vector<double> atom_residuals;  // |Phi(w_i) - sign_i eta(w_i)|
  std::vector<double> probe_phi, probe_eta;
  std::vector<std::vector<double>> probe_w;
};

/// Evaluates Phi and eta at the atoms and at `probes` random unit
/// vectors. Probes with eta < 1e-10 lie outside S_eta and are skipped.
inline CertificateReport check_certificate(const SpectralSamples& z, const FourierFeatures& ff,
                                           const std::vector<std::vector<double>>& atoms,
                                           const std::vector<int>& signs, const EtaKind& eta_kind,
                                           std::size_t probes, std::uint64_t seed, int n) {
  if (atoms.size() != signs.size()) throw ConfigError("check_certificate: atoms/signs size mismatch");
  CertificateReport rep;
  rep.n_atoms = atoms.size();
  rep.atom_residuals.resize(atoms.size(), 0.0);

  const RasterImage zt = adjoint_spectral(z, n);
  const double inv_n2 = 1.0 / static_cast<double>(zt.px.size());
  std::vector<double> grid;
  const Fft2& fft = Fft2::get(n);
  aligned_vector<double> relu(zt.px.size());
  aligned_vector<std::complex<double>> half(fft.complex_size());

  const auto phi_eta = [&](std::span<const double> w) -> std::pair<double, double> {
    detail::synth_unit_grid(ff, w, n, grid);
    double phi = 0.0;
    for (std::size_t p = 0; p < grid.size(); ++p)
      if (grid[p] > 0.0) phi += grid[p] * zt.px[p];
    phi *= inv_n2;
    double eta_val = 0.0;
    switch (eta_kind.tag) {
      case EtaKind::Tag::standard: {
        double s = 0.0;
        for (double v : w) s += v * v;
        eta_val = std::sqrt(s);
        break;
      }
      case EtaKind::Tag::mod_ii: {
        double s = 0.0;
        for (double v : grid)
          if (v > 0.0) s += v;
        eta_val = s * inv_n2;
        break;
      }
      case EtaKind::Tag::mod_i: {
        for (std::size_t p = 0; p < grid.size(); ++p) relu[p] = grid[p] > 0.0 ? grid[p] : 0.0;
        fft.forward(relu.data(), half.data());
        double s = 0.0;
        for (std::size_t qi = 0; qi < eta_kind.omega.size(); ++qi) {
          const auto k = eta_kind.omega.at(qi);
          const auto h = detail::half_spec_index(n, k[0], k[1]);
          s += std::norm(half[h.idx]);
        }
        eta_val = std::sqrt(s) * inv_n2;
        break;
      }
    }
    return {phi, eta_val};
  };

  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto [phi, eta_val] = phi_eta(atoms[i]);
    rep.atom_residuals[i] = std::abs(phi - signs[i] * eta_val);
  }

  Rng rng = Rng::stream(seed, {0x9e3779b9u});
  std::vector<double> w(static_cast<std::size_t>(ff.feature_dim()));
  rep.min_margin = std::numeric_limits<double>::infinity();
  rep.min_margin_far = std::numeric_limits<double>::infinity();
  rep.min_phi = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < probes; ++p) {
    rng.sphere(std::span<double>(w));
    const auto [phi, eta_val] = phi_eta(w);
    if (eta_val < 1e-10) {
      ++rep.n_skipped;
      continue;
    }
    ++rep.n_probes;
    const double ratio = std::abs(phi) / eta_val;
    rep.max_ratio_off_atoms = std::max(rep.max_ratio_off_atoms, ratio);
    rep.min_phi = std::min(rep.min_phi, phi);
    const double margin = 1.0 - ratio;
    rep.min_margin = std::min(rep.min_margin, margin);
    double max_abs_dot = 0.0;
    for (const auto& atom : atoms) {
      double dot = 0.0;
      for (std::size_t c = 0; c < w.size(); ++c) dot += w[c] * atom[c];
      max_abs_dot = std::max(max_abs_dot, std::abs(dot));
    }
    const double angle = std::acos(std::clamp(max_abs_dot, -1.0, 1.0));
    if (angle > rep.far_angle) {
      ++rep.n_far;
      rep.min_margin_far = std::min(rep.min_margin_far, margin);
    }
    rep.probe_phi.push_back(phi);
    rep.probe_eta.push_back(eta_val);
    rep.probe_w.push_back(std::vector<double>(w.begin(), w.end()));
  }
  return rep;
}

inline void report_to_text(const CertificateReport& rep, std::ostream& os) {
  os << "atoms = " << rep.n_atoms << "\n";
  os << "probes = " << rep.n_probes << "\n";
  os << "probes_skipped_outside_S_eta = " << rep.n_skipped << "\n";
  char buf[64];
  const auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << key << " = " << buf << "\n";
  };
  double max_res = 0.0;
  for (double r : rep.atom_residuals) max_res = std::max(max_res, r);
  put("atom_residual_max", max_res);
  put("max_ratio_off_atoms", rep.max_ratio_off_atoms);
  put("min_phi", rep.min_phi);
  put("min_margin", rep.min_margin);
  put("min_margin_far", rep.min_margin_far);
  put("far_angle_rad", rep.far_angle);
  os << "far_probes = " << rep.n_far << "\n";
}

inline void report_probes_csv(const CertificateReport& rep, std::ostream& os) {
  if (rep.probe_w.empty()) return;
  const std::size_t d = rep.probe_w.front().size();
  for (std::size_t c = 1; c <= d; ++c) os << "w" << c << ",";
  os << "phi,eta\n";
  char buf[64];
  for (std::size_t i = 0; i < rep.probe_w.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", rep.probe_w[i][c]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", rep.probe_phi[i], rep.probe_eta[i]);
    os << buf;
  }
}

// ---- Q_c nullspace machinery ----

struct QcResult {
  Eigen::MatrixXd matrix;               // real representation, rows = (k, axis, re/im)
  std::vector<double> singular_values;  // descending
  SpectralSamples nullvector;           // over omega0* in coefficient form
  FrequencySet omega_restricted;        // Omega | Omega0*
  Eigen::MatrixXd right_vectors;        // thin V
};

/// Frequencies k such that l - k lies in omega for every l in star.
inline FrequencySet restrict_omega(const FrequencySet& omega, const FrequencySet& star) {
  const int bound = omega.max_inf_norm() + star.max_inf_norm();
  std::vector<int> flat;
  std::vector<int> diff(2);
  for (int k1 = -bound; k1 <= bound; ++k1) {
    for (int k2 = -bound; k2 <= bound; ++k2) {
      bool ok = true;
      for (std::size_t li = 0; li < star.size() && ok; ++li) {
        const auto l = star.at(li);
        diff[0] = l[0] - k1;
        diff[1] = l[1] - k2;
        if (!omega.contains(diff)) ok = false;
      }
      if (ok) {
        flat.push_back(k1);
        flat.push_back(k2);
      }
    }
  }
  return FrequencySet(2, FreqKind::sampling, std::move(flat));
}

/// Assembles the operator (Q_c phi)[k] = sum_l (k - 2l) c[k-l] phi^[l]
/// over k in Omega|Omega0*, parametrized by the real feature
/// coordinates of phi, and returns its singular spectrum. For
/// c = F~_Omega [tau]_+ with tau in TP(Omega0*) the nullspace is
/// one-dimensional and spanned by tau.
inline QcResult qc_nullspace(const SpectralSamples& c, const FrequencySet& omega0) {
  const auto ff = FourierFeatures::general(omega0);
  const auto star = ff.star_support();
  const auto omega_r = restrict_omega(c.freqs(), star);
  const auto two_star = minkowski_sum(star, star);
  for (std::size_t i = 0; i < two_star.size(); ++i)
    if (!omega_r.contains(two_star.at(i)))
      throw HypothesisError("qc_nullspace: Omega|Omega0* must contain 2 Omega0*");

  const int d = ff.feature_dim();
  const std::size_t rows = omega_r.size() * 4;  // (k, axis) x (re, im)
  Eigen::MatrixXd mat(static_cast<Eigen::Index>(rows), d);
  std::vector<double> basis(static_cast<std::size_t>(d), 0.0);
  std::vector<int> diff(2);
  for (int col = 0; col < d; ++col) {
    std::fill(basis.begin(), basis.end(), 0.0);
    basis[static_cast<std::size_t>(col)] = 1.0;
    const auto phi = ff.weights_to_trig(basis);
    for (std::size_t ki = 0; ki < omega_r.size(); ++ki) {
      const auto k = omega_r.at(ki);
      std::complex<double> acc1(0.0, 0.0), acc2(0.0, 0.0);
      for (std::size_t li = 0; li < star.size(); ++li) {
        const auto l = star.at(li);
        const std::complex<double> pl = phi[li];
        if (pl == std::complex<double>(0.0, 0.0)) continue;
        diff[0] = k[0] - l[0];
        diff[1] = k[1] - l[1];
        const std::complex<double> cv = c.value_or_zero(diff);
        acc1 += static_cast<double>(k[0] - 2 * l[0]) * cv * pl;
        acc2 += static_cast<double>(k[1] - 2 * l[1]) * cv * pl;
      }
      mat(static_cast<Eigen::Index>(ki * 4 + 0), col) = acc1.real();
      mat(static_cast<Eigen::Index>(ki * 4 + 1), col) = acc1.imag();
      mat(static_cast<Eigen::Index>(ki * 4 + 2), col) = acc2.real();
      mat(static_cast<Eigen::Index>(ki * 4 + 3), col) = acc2.imag();
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinV);
  QcResult out{std::move(mat), {}, SpectralSamples(star), omega_r, svd.matrixV()};
  out.singular_values.assign(svd.singularValues().data(), svd.singularValues().data() + d);
  std::vector<double> null_w(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) null_w[static_cast<std::size_t>(i)] = svd.matrixV()(i, d - 1);
  out.nullvector = ff.weights_to_trig(null_w);
  return out;
}

}  // namespace finr
