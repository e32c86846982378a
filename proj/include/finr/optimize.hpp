#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "finr/kernel.hpp"
#include "finr/phantoms.hpp"
#include "finr/rng.hpp"

namespace finr {

/// Adam accumulator state shaped like an INRParams vector.
struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m_a, v_a;
  std::vector<double> m_w, v_w;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(const INRParams& like, double b1 = 0.9, double b2 = 0.999, double e = 1e-8)
      : m_a(like.a.size(), 0.0), v_a(like.a.size(), 0.0), m_w(like.w.size(), 0.0), v_w(like.w.size(), 0.0),
        beta1(b1), beta2(b2), eps(e) {}
};

/// One canonical Adam update with bias correction, in place.
inline void adam_step(AdamState& st, INRParams& theta, const ParamGrad& grad, double lr) {
  if (grad.a.size() != theta.a.size() || grad.w.size() != theta.w.size())
    throw ConfigError("adam_step: gradient shape mismatch");
  if (!grad.all_finite()) throw DivergenceError("adam_step: non-finite gradient");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const auto update = [&](std::vector<double>& m, std::vector<double>& v, const std::vector<double>& g,
                          std::vector<double>& x) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + st.eps);
    }
  };
  update(st.m_a, st.v_a, grad.a, theta.a);
  update(st.m_w, st.v_w, grad.w, theta.w);
}

struct TraceRow {
  std::int64_t iter = 0;
  double loss = 0.0;
  double residual = 0.0;  // ||F~ f_theta - y||_2
  double reg = 0.0;       // R(theta)
};

struct SchedulePhase {
  std::int64_t iters = 0;
  double lr = 1e-3;
};

inline void trace_to_csv(const std::vector<TraceRow>& trace, std::ostream& os) {
  os << "iter,loss,residual,reg\n";
  char buf[128];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(row.iter), row.loss,
                  row.residual, row.reg);
    os << buf;
  }
}

struct TrainResult {
  INRParams theta;  // best-loss iterate
  double best_loss = 0.0;
  std::vector<TraceRow> trace;
  std::int64_t iters_run = 0;
};

namespace detail {

inline constexpr double kDivergenceCap = 1e12;

}  // namespace detail

/// Minimizes 1/2 ||F~ f_theta - y||^2 + lambda R(theta) with Adam over
/// the schedule phases. Returns the best-loss iterate (Adam does not
/// descend monotonically).
inline TrainResult train_penalized(const INRParams& theta0, const FourierFeatures& ff, const FrequencySet& omega,
                                   const SpectralSamples& y, double lambda, EtaKind::Tag eta_tag,
                                   const std::vector<SchedulePhase>& schedule, int n, std::int64_t log_every = 100) {
  if (lambda < 0.0) throw ConfigError("train_penalized: lambda must be >= 0");
  TrainingKernel kernel(ff, omega, n, eta_tag);
  INRParams theta = theta0;
  AdamState adam(theta);
  TrainResult out;
  out.theta = theta;
  out.best_loss = std::numeric_limits<double>::infinity();
  ParamGrad grad;
  std::int64_t iter = 0;
  for (const auto& phase : schedule) {
    for (std::int64_t k = 0; k < phase.iters; ++k, ++iter) {
      const auto parts = kernel.eval(theta, y, nullptr, 1.0, lambda, grad, /*want_raster=*/false);
      if (!std::isfinite(parts.objective) || parts.objective > detail::kDivergenceCap)
        throw DivergenceError("train_penalized: objective diverged at iter " + std::to_string(iter));
      if (parts.objective < out.best_loss) {
        out.best_loss = parts.objective;
        out.theta = theta;
      }
      if (iter % log_every == 0) out.trace.push_back({iter, parts.objective, std::sqrt(parts.data_sq), parts.reg});
      adam_step(adam, theta, grad, phase.lr);
    }
  }
  out.iters_run = iter;
  return out;
}

struct ALOptions {
  double sigma0 = 10.0;
  double growth = 1.1;
  int outer_iters = 100;
  std::int64_t inner_iters = 5000;
  double inner_lr = 1e-3;
  bool reset_adam_per_outer = true;
  std::int64_t log_every = 500;
  // Image-MSE tracking against a reference raster. The residual norm is
  // a Parseval lower bound on the raster MSE, so the raster is rendered
  // only when the bound permits a new minimum.
  const RasterImage* mse_ref = nullptr;
  double success_mse = 1e-9;
  bool stop_at_success = false;
  std::int64_t mse_every = 10;
};

struct ALResult {
  INRParams theta;  // iterate with the smallest constraint residual
  double best_residual = std::numeric_limits<double>::infinity();
  double min_mse = std::numeric_limits<double>::infinity();
  bool success = false;
  std::vector<TraceRow> trace;
  std::vector<double> sigma_trace;
  std::int64_t iters_run = 0;
};

/// Augmented Lagrangian method for min R(theta) s.t. F~ f_theta = y:
///   theta_{n+1} ~ argmin_theta AL(theta, q_n, sigma_n)  (Adam, warm start)
///   q_{n+1}     = q_n + sigma_n (F~ f_{theta_{n+1}} - y)
///   sigma_{n+1} = growth * sigma_n
/// Adam moments are reset at each outer iteration; theta is carried
/// between subproblems.
inline ALResult train_constrained_al(const INRParams& theta0, const FourierFeatures& ff, const FrequencySet& omega,
                                     const SpectralSamples& y, EtaKind::Tag eta_tag, int n, const ALOptions& opt) {
  if (opt.sigma0 <= 0.0) throw ConfigError("train_constrained_al: sigma0 must be > 0");
  if (opt.growth <= 1.0) throw ConfigError("train_constrained_al: growth must be > 1");
  TrainingKernel kernel(ff, omega, n, eta_tag);

  INRParams theta = theta0;
  SpectralSamples q(kernel.omega());
  double sigma = opt.sigma0;
  ALResult out;
  out.theta = theta;
  ParamGrad grad;
  std::int64_t iter = 0;
  bool stop = false;

  const auto track_mse = [&](const INRParams& th, double data_sq, bool on_stride) {
    if (!opt.mse_ref) return;
    if (!on_stride) return;
    // Parseval lower bound: raster MSE >= ||r||^2.
    if (!(data_sq < std::max(out.min_mse, 4.0 * opt.success_mse))) return;
    const double mse = raster_mse(kernel.render(th), *opt.mse_ref);
    if (mse < out.min_mse) out.min_mse = mse;
    if (mse < opt.success_mse) {
      out.success = true;
      if (opt.stop_at_success) stop = true;
    }
  };

  AdamState persistent_adam(theta);
  for (int n_outer = 0; n_outer < opt.outer_iters && !stop; ++n_outer) {
    AdamState fresh_adam(theta);
    AdamState& adam = opt.reset_adam_per_outer ? fresh_adam : persistent_adam;
    for (std::int64_t k = 0; k < opt.inner_iters && !stop; ++k, ++iter) {
      const auto parts = kernel.eval(theta, y, &q, sigma, 1.0, grad, /*want_raster=*/false);
      if (!std::isfinite(parts.objective) || std::abs(parts.objective) > detail::kDivergenceCap)
        throw DivergenceError("train_constrained_al: objective diverged at outer iteration " +
                              std::to_string(n_outer));
      const double residual = std::sqrt(parts.data_sq);
      if (residual < out.best_residual) {
        out.best_residual = residual;
        out.theta = theta;
      }
      track_mse(theta, parts.data_sq, k + 1 == opt.inner_iters || iter % opt.mse_every == 0);
      if (iter % opt.log_every == 0) out.trace.push_back({iter, parts.objective, residual, parts.reg});
      if (!stop) adam_step(adam, theta, grad, opt.inner_lr);
    }
    if (stop) break;
    // Multiplier and penalty updates on the post-subproblem iterate.
    const auto parts = kernel.value(theta, y, &q, sigma, 1.0, /*want_raster=*/false);
    SpectralSamples r = kernel.model_spectrum();
    r -= y;
    const double residual = std::sqrt(norm2_sq(r));
    if (residual < out.best_residual) {
      out.best_residual = residual;
      out.theta = theta;
    }
    track_mse(theta, parts.data_sq, true);
    r *= sigma;
    q += r;
    out.sigma_trace.push_back(sigma);
    sigma *= opt.growth;
  }
  out.iters_run = iter;
  return out;
}

// ---- exact recovery trial protocol ----

struct TrialConfig {
  int n = 256;
  int k0 = 2;  // thm1 feature box
  int student_width = 100;
  double sigma0 = 10.0;
  double growth_thm1 = 1.5;
  double growth_thm2 = 1.1;
  int outer_thm1 = 60;
  int outer_thm2 = 100;
  std::int64_t inner_iters = 5000;
  double inner_lr = 1e-3;
  double success_mse = 1e-9;
  bool stop_at_success = true;
  std::int64_t mse_every = 10;
  std::int64_t log_every = 1000;
};

struct TrialResult {
  bool success = false;
  double min_mse = std::numeric_limits<double>::infinity();
  double best_residual = 0.0;
  std::int64_t iters_run = 0;
};

/// Student initialization: entries uniform in +-1/sqrt(fan_in), drawn
/// from the trial's stream.
inline INRParams init_student(Rng& rng, int width, int feature_dim) {
  INRParams theta(width, feature_dim);
  const double a_bound = 1.0 / std::sqrt(static_cast<double>(width));
  const double w_bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (auto& v : theta.a) v = rng.uniform(-a_bound, a_bound);
  for (auto& v : theta.w) v = rng.uniform(-w_bound, w_bound);
  return theta;
}

/// One teacher-student trial: draw a random width-W teacher, sample
/// y = F~_Omega f_teacher on the l-inf box of radius K, fit a student
/// of the given width with the AL method, and declare success when the
/// raster MSE against the teacher drops below the threshold at any
/// point during training.
inline TrialResult exact_recovery_trial(std::uint64_t seed, Setting setting, int teacher_w, int max_freq_k,
                                        int student_w, EtaKind::Tag eta_kind, const TrialConfig& cfg = {}) {
  if (student_w < teacher_w) throw ConfigError("exact_recovery_trial: student width below teacher width");
  const FourierFeatures ff =
      setting == Setting::thm1 ? FourierFeatures::general_box(cfg.k0) : FourierFeatures::restricted();
  const auto omega = build_box_freqs(max_freq_k, FreqNorm::inf, 2, FreqKind::sampling);

  Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(setting), static_cast<std::uint64_t>(teacher_w),
                               static_cast<std::uint64_t>(max_freq_k)});
  const INRParams teacher = random_teacher(rng, teacher_w, ff, setting);
  const RasterImage teacher_raster = inr_rasterize(teacher, ff, cfg.n);
  const SpectralSamples y = forward_spectral(teacher_raster, omega);

  const INRParams theta0 = init_student(rng, student_w, ff.feature_dim());

  ALOptions opt;
  opt.sigma0 = cfg.sigma0;
  opt.growth = setting == Setting::thm1 ? cfg.growth_thm1 : cfg.growth_thm2;
  opt.outer_iters = setting == Setting::thm1 ? cfg.outer_thm1 : cfg.outer_thm2;
  opt.inner_iters = cfg.inner_iters;
  opt.inner_lr = cfg.inner_lr;
  opt.log_every = cfg.log_every;
  opt.mse_ref = &teacher_raster;
  opt.success_mse = cfg.success_mse;
  opt.stop_at_success = cfg.stop_at_success;
  opt.mse_every = cfg.mse_every;

  TrialResult out;
  if (teacher_w == 0) {
    // zero teacher: the zero student is feasible and optimal
    out.success = true;
    out.min_mse = 0.0;
    return out;
  }
  const ALResult res = train_constrained_al(theta0, ff, omega, y, eta_kind, cfg.n, opt);
  out.success = res.success;
  out.min_mse = res.min_mse;
  out.best_residual = res.best_residual;
  out.iters_run = res.iters_run;
  return out;
}

}  // namespace finr
