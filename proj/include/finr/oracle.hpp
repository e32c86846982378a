#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "finr/certify.hpp"
#include "finr/regularize.hpp"
#include "finr/rng.hpp"

namespace finr {

/// Finite atom dictionary discretizing the measure-space problem:
/// unit-norm weight vectors w_j with their eta weights and precomputed
/// columns F~_Omega [w_j . gamma]_+.
struct AtomicDictionary {
  FourierFeatures ff = FourierFeatures::restricted();
  FrequencySet omega;
  int grid_n = 0;
  EtaKind::Tag eta_tag = EtaKind::Tag::mod_ii;
  std::vector<std::vector<double>> atoms;  // unit vectors, length D
  std::vector<double> etas;                // eta(w_j) > 0
  std::vector<SpectralSamples> columns;    // F~[w_j.gamma]_+
  std::size_t n_dropped = 0;               // atoms with eta below threshold

  std::size_t size() const { return atoms.size(); }
};

/// Low-discrepancy points on S^3 via the double-angle parametrization
/// (psi, a, b) -> (cos psi cos a, cos psi sin a, sin psi cos b,
/// sin psi sin b) with an R3 Kronecker sequence; sin^2 psi uniform
/// matches the surface measure.
inline std::vector<double> fibonacci_sphere4(std::size_t index) {
  // plastic-number sequence
  const double g = 1.2207440846057595;
  const double a1 = 1.0 / g, a2 = 1.0 / (g * g), a3 = 1.0 / (g * g * g);
  const double u = std::fmod(0.5 + a1 * static_cast<double>(index + 1), 1.0);
  const double v = std::fmod(0.5 + a2 * static_cast<double>(index + 1), 1.0);
  const double t = std::fmod(0.5 + a3 * static_cast<double>(index + 1), 1.0);
  const double psi = std::asin(std::sqrt(t));
  const double two_pi = 2.0 * std::numbers::pi;
  return {std::cos(psi) * std::cos(two_pi * u), std::cos(psi) * std::sin(two_pi * u),
          std::sin(psi) * std::cos(two_pi * v), std::sin(psi) * std::sin(two_pi * v)};
}

/// Builds a dictionary of M atoms: the supplied atoms first, then
/// random unit vectors (or the deterministic sphere option for D=4).
/// Atoms whose eta falls below 1e-10 lie outside S_eta and are dropped.
inline AtomicDictionary build_dictionary(Setting setting, std::size_t m, std::uint64_t seed,
                                         const std::vector<std::vector<double>>& include_atoms,
                                         const FourierFeatures& ff, const FrequencySet& omega, int n,
                                         bool fibonacci = false) {
  if (m < include_atoms.size()) throw ConfigError("build_dictionary: M below the number of included atoms");
  AtomicDictionary dict;
  dict.ff = ff;
  dict.omega = omega;
  dict.grid_n = n;
  dict.eta_tag = setting == Setting::thm1 ? EtaKind::Tag::mod_i : EtaKind::Tag::mod_ii;
  EtaKind kind = dict.eta_tag == EtaKind::Tag::mod_i ? EtaKind::mod_i(omega, n) : EtaKind::mod_ii(n);

  Rng rng = Rng::stream(seed, {0xd1c7u});
  std::vector<double> w(static_cast<std::size_t>(ff.feature_dim()));
  std::size_t fib_index = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (j < include_atoms.size()) {
      if (include_atoms[j].size() != w.size()) throw ConfigError("build_dictionary: atom dimension mismatch");
      std::copy(include_atoms[j].begin(), include_atoms[j].end(), w.begin());
      double nrm = 0.0;
      for (double v : w) nrm += v * v;
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) throw ConfigError("build_dictionary: zero atom");
      for (auto& v : w) v /= nrm;
    } else if (fibonacci && ff.feature_dim() == 4) {
      const auto fw = fibonacci_sphere4(fib_index++);
      std::copy(fw.begin(), fw.end(), w.begin());
    } else {
      rng.sphere(std::span<double>(w));
    }
    const double e = eta(kind, ff, w);
    if (e <= 1e-10) {
      ++dict.n_dropped;
      continue;
    }
    RasterImage relu = unit_field(ff, w, n);
    for (auto& v : relu.px) v = v > 0.0 ? v : 0.0;
    dict.atoms.push_back(std::vector<double>(w.begin(), w.end()));
    dict.etas.push_back(e);
    dict.columns.push_back(forward_spectral(relu, omega));
  }
  return dict;
}

struct BpIterateLog {
  std::int64_t iter = 0;
  double primal_obj = 0.0;
  double dual_obj = 0.0;  // after feasibility rescaling
  double feas = 0.0;      // ||A c - y||
};

struct BpResult {
  std::vector<double> coeffs;
  SpectralSamples dual;  // final dual iterate z
  bool converged = false;
  std::int64_t iters = 0;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double gap = 0.0;
  double feas_residual = 0.0;
  double op_norm = 0.0;
  std::vector<BpIterateLog> log;
};

namespace detail {

inline SpectralSamples dict_apply(const AtomicDictionary& dict, const std::vector<double>& c) {
  SpectralSamples out(dict.omega);
  for (std::size_t j = 0; j < dict.size(); ++j) {
    if (c[j] == 0.0) continue;
    for (std::size_t qi = 0; qi < out.size(); ++qi) out[qi] += c[j] * dict.columns[j][qi];
  }
  return out;
}

inline void dict_adjoint(const AtomicDictionary& dict, const SpectralSamples& z, std::vector<double>& out) {
  out.resize(dict.size());
  for (std::size_t j = 0; j < dict.size(); ++j) out[j] = real_inner(dict.columns[j], z);
}

/// Largest dual violation max_j (|<col_j, z>| - eta_j) and the scale
/// that maps z onto the dual feasible set.
inline double dual_feasibility_scale(const AtomicDictionary& dict, const SpectralSamples& z) {
  double worst = 1.0;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const double ratio = std::abs(real_inner(dict.columns[j], z)) / dict.etas[j];
    worst = std::max(worst, ratio);
  }
  return 1.0 / worst;
}

}  // namespace detail

/// Weighted basis pursuit over the dictionary:
///     min_c sum_j eta_j |c_j|  s.t.  A c = y,
/// solved by the Chambolle-Pock primal-dual scheme with steps
/// tau * sigma ||A||^2 < 1 (||A|| from power iteration). Convergence is
/// declared when the feasibility residual and the duality gap (dual
/// value after feasibility rescaling) are below the tolerances.
inline BpResult solve_weighted_bp(const AtomicDictionary& dict, const SpectralSamples& y, double feas_tol = 1e-8,
                                  double opt_tol = 1e-8, std::int64_t max_iters = 200000,
                                  std::int64_t log_every = 1000) {
  if (!(y.freqs() == dict.omega)) throw ConfigError("solve_weighted_bp: y support mismatch");
  const std::size_t m = dict.size();
  BpResult out;
  out.coeffs.assign(m, 0.0);
  out.dual = SpectralSamples(dict.omega);
  if (m == 0) return out;

  // ||A|| by power iteration on A* A (deterministic start).
  std::vector<double> pw(m, 1.0 / std::sqrt(static_cast<double>(m)));
  double op_norm_sq = 0.0;
  for (int it = 0; it < 100; ++it) {
    const SpectralSamples az = detail::dict_apply(dict, pw);
    std::vector<double> back;
    detail::dict_adjoint(dict, az, back);
    double nrm = 0.0;
    for (double v : back) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) break;
    op_norm_sq = nrm;
    for (std::size_t j = 0; j < m; ++j) pw[j] = back[j] / nrm;
  }
  const double op_norm = std::sqrt(std::max(op_norm_sq, 1e-30));
  out.op_norm = op_norm;
  const double tau = 0.95 / op_norm;
  const double sigma = 0.95 / op_norm;

  std::vector<double> c(m, 0.0), c_prev(m, 0.0), xi(m, 0.0);
  SpectralSamples z(dict.omega);
  std::vector<double> back;
  const double y_norm = std::max(norm2(y), 1e-30);

  for (std::int64_t it = 1; it <= max_iters; ++it) {
    // primal: soft threshold of c - tau A^* z with weights tau eta_j
    detail::dict_adjoint(dict, z, back);
    c_prev = c;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = c[j] - tau * back[j];
      const double thr = tau * dict.etas[j];
      c[j] = v > thr ? v - thr : (v < -thr ? v + thr : 0.0);
    }
    // dual ascent on the over-relaxed iterate
    for (std::size_t j = 0; j < m; ++j) xi[j] = 2.0 * c[j] - c_prev[j];
    SpectralSamples r = detail::dict_apply(dict, xi);
    r -= y;
    r *= sigma;
    z += r;

    const bool logging = (it % log_every == 0) || it == max_iters;
    if (logging || it % 50 == 0) {
      SpectralSamples resid = detail::dict_apply(dict, c);
      resid -= y;
      const double feas = norm2(resid);
      double primal = 0.0;
      for (std::size_t j = 0; j < m; ++j) primal += dict.etas[j] * std::abs(c[j]);
      // the scheme's dual variable is the negative of the <y,z>
      // maximizer, so report -z
      SpectralSamples zr = z;
      zr *= -1.0;
      const double scale = detail::dual_feasibility_scale(dict, zr);
      const double dual_val = scale * real_inner(y, zr);
      const double gap = primal - dual_val;
      if (logging) out.log.push_back({it, primal, dual_val, feas});
      if (feas <= feas_tol * std::max(1.0, y_norm) && gap <= opt_tol * std::max(1.0, primal)) {
        out.converged = true;
        out.iters = it;
        out.coeffs = c;
        out.dual = zr;
        out.primal_obj = primal;
        out.dual_obj = dual_val;
        out.gap = gap;
        out.feas_residual = feas;
        return out;
      }
    }
  }
  SpectralSamples resid = detail::dict_apply(dict, c);
  resid -= y;
  out.converged = false;
  out.iters = max_iters;
  out.coeffs = c;
  out.dual = z;
  out.dual *= -1.0;
  out.feas_residual = norm2(resid);
  double primal = 0.0;
  for (std::size_t j = 0; j < m; ++j) primal += dict.etas[j] * std::abs(c[j]);
  out.primal_obj = primal;
  const double scale = detail::dual_feasibility_scale(dict, out.dual);
  out.dual_obj = scale * real_inner(y, out.dual);
  out.gap = out.primal_obj - out.dual_obj;
  return out;
}

struct DualReport {
  double primal_obj = 0.0;
  double dual_obj_raw = 0.0;       // <y, z> before rescaling
  double dual_obj_feasible = 0.0;  // after rescaling to the feasible set
  double max_violation = 0.0;      // max_j (|<col_j, z>| - eta_j)
  double gap = 0.0;                // primal - feasible dual, >= 0 up to rounding
  double feas_residual = 0.0;
};

/// Duality-gap report for a primal/dual pair.
inline DualReport dual_report(const AtomicDictionary& dict, const SpectralSamples& y, const std::vector<double>& c,
                              const SpectralSamples& z) {
  if (c.size() != dict.size()) throw ConfigError("dual_report: coefficient size mismatch");
  DualReport rep;
  for (std::size_t j = 0; j < dict.size(); ++j) rep.primal_obj += dict.etas[j] * std::abs(c[j]);
  rep.dual_obj_raw = real_inner(y, z);
  for (std::size_t j = 0; j < dict.size(); ++j)
    rep.max_violation = std::max(rep.max_violation, std::abs(real_inner(dict.columns[j], z)) - dict.etas[j]);
  const double scale = detail::dual_feasibility_scale(dict, z);
  rep.dual_obj_feasible = scale * rep.dual_obj_raw;
  rep.gap = rep.primal_obj - rep.dual_obj_feasible;
  SpectralSamples resid = detail::dict_apply(dict, c);
  resid -= y;
  rep.feas_residual = norm2(resid);
  return rep;
}

/// Solution CSV: atom index, weight vector, eta, coefficient.
inline void solution_to_csv(const AtomicDictionary& dict, const std::vector<double>& c, std::ostream& os) {
  const int d = dict.ff.feature_dim();
  os << "atom";
  for (int k = 1; k <= d; ++k) os << ",w" << k;
  os << ",eta,c\n";
  char buf[64];
  for (std::size_t j = 0; j < dict.size(); ++j) {
    os << j;
    for (double v : dict.atoms[j]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", dict.etas[j], c[j]);
    os << buf;
  }
}

}  // namespace finr
