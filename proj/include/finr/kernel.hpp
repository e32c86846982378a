#pragma once

#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>
#include <vector>

#include "finr/fft.hpp"
#include "finr/loss.hpp"
#include "finr/parallel.hpp"

namespace finr {

/// Fast loss/gradient engine for shallow INR training.
///
/// Evaluates the unified objective
///     c_data * 1/2 ||r||^2 + <q, r> + c_reg * R(theta),   r = F~ f_theta - y
/// which covers the penalized problem (c_data=1, q=0, c_reg=lambda) and
/// the augmented-Lagrangian subproblem (c_data=sigma, q=multipliers,
/// c_reg=1).
///
/// Two strategies, both exact:
///  - arc_algebra: each unit's positive set is resolved row by row into
///    circular runs (closed form via acos for the restricted embedding,
///    sign scan of a synthesized row otherwise). Prefix tables turn the
///    runs into the row transform, a small DFT over rows yields the
///    mask spectrum M on the box ||k||_inf <= K + K0, and unit spectra,
///    residual and every gradient reduce to algebra on M. No FFT runs
///    inside an iteration.
///  - fft_grid: per-unit FFTs of the rectified field and of the masked
///    back-projection. Wins when D * |Omega| is large (wide feature
///    boxes such as the dot-phantom setting).
///
/// The raster of f_theta is only accumulated when requested, since
/// trainers need it just for periodic image-MSE checks.
class TrainingKernel {
 public:
  enum class Strategy { automatic, arc_algebra, fft_grid };

  TrainingKernel(const FourierFeatures& ff, const FrequencySet& omega, int n, EtaKind::Tag eta_tag,
                 Strategy strategy = Strategy::automatic)
      : ff_(ff), omega_(omega), n_(n), eta_tag_(eta_tag) {
    if (omega_.kind() != FreqKind::sampling) throw ConfigError("TrainingKernel: omega must be sampling kind");
    if (omega_.dim() != 2) throw ConfigError("TrainingKernel: 2-D only");
    k0_ = ff_.max_freq();
    kmax_ = omega_.max_inf_norm() + k0_;
    if (2 * kmax_ >= n_) throw ConfigError("TrainingKernel: grid too coarse for omega + features");
    if (eta_tag != EtaKind::Tag::standard && n_ < 4 * std::max(omega_.max_inf_norm(), k0_) + 2)
      throw ConfigError("TrainingKernel: grid too coarse for modified weight decay");
    if (strategy == Strategy::automatic) {
      const double algebra_cost = 16.0 * ff_.feature_dim() * static_cast<double>(omega_.size());
      const double fft_cost = 12.0 * static_cast<double>(n_) * n_ * std::log2(static_cast<double>(n_));
      strategy_ = algebra_cost > fft_cost ? Strategy::fft_grid : Strategy::arc_algebra;
    } else {
      strategy_ = strategy;
    }
    build_tables();
  }

  const FourierFeatures& features() const { return ff_; }
  const FrequencySet& omega() const { return omega_; }
  int grid_n() const { return n_; }
  EtaKind::Tag eta_tag() const { return eta_tag_; }
  Strategy strategy() const { return strategy_; }

  struct Parts {
    double data_sq = 0.0;    // ||r||^2
    double lagr = 0.0;       // <q, r>
    double reg = 0.0;        // R(theta)
    double objective = 0.0;  // c_data/2 ||r||^2 + <q,r> + c_reg R
  };

  /// Full evaluation; fills `grad`. The raster of f_theta is
  /// accumulated only when want_raster is set.
  Parts eval(const INRParams& theta, const SpectralSamples& y, const SpectralSamples* q, double c_data,
             double c_reg, ParamGrad& grad, bool want_raster = true) {
    prepare(theta, want_raster);
    Parts parts = assemble_residual(y, q, c_data);
    gradients(theta, c_data, c_reg, parts, grad);
    return parts;
  }

  /// Objective value only.
  Parts value(const INRParams& theta, const SpectralSamples& y, const SpectralSamples* q, double c_data,
              double c_reg, bool want_raster = true) {
    prepare(theta, want_raster);
    Parts parts = assemble_residual(y, q, c_data);
    for (int i = 0; i < theta.width(); ++i) {
      const double ai = theta.a[static_cast<std::size_t>(i)];
      const double ei = unit_eta(theta, i);
      parts.reg += 0.5 * (ai * ai + ei * ei);
    }
    parts.objective = 0.5 * c_data * parts.data_sq + parts.lagr + c_reg * parts.reg;
    return parts;
  }

  /// Raster of f_theta from the last call with want_raster=true.
  const RasterImage& raster() const {
    if (!raster_fresh_) throw ConfigError("TrainingKernel::raster: last eval did not request the raster");
    return f_;
  }

  /// Renders f_theta without touching spectra or gradients; cheaper
  /// than a full eval when only the image is needed.
  const RasterImage& render(const INRParams& theta) {
    if (theta.feature_dim != ff_.feature_dim()) throw ConfigError("TrainingKernel: feature dim mismatch");
    const int width = theta.width();
    const int chunks = std::min(n_chunks_, std::max(1, width));
    for (int ch = 0; ch < chunks; ++ch)
      std::fill(f_partial_[static_cast<std::size_t>(ch)].px.begin(), f_partial_[static_cast<std::size_t>(ch)].px.end(), 0.0);
    ThreadPool::global().run_chunks(chunks, [&](int ch) {
      Scratch& ws = scratch_[static_cast<std::size_t>(ch)];
      for (int i = ch; i < width; i += chunks)
        synthesized_arcs(theta, i, ws, &f_partial_[static_cast<std::size_t>(ch)], /*keep_relu=*/false,
                         /*want_arcs=*/false);
    });
    std::fill(f_.px.begin(), f_.px.end(), 0.0);
    for (int ch = 0; ch < chunks; ++ch) {
      const auto& part = f_partial_[static_cast<std::size_t>(ch)].px;
      for (std::size_t p = 0; p < f_.px.size(); ++p) f_.px[p] += part[p];
    }
    raster_fresh_ = true;
    return f_;
  }

  /// F~ f_theta from the last eval/value call.
  const SpectralSamples& model_spectrum() const { return f_hat_; }

  double mse_vs(const RasterImage& ref) const { return raster_mse(raster(), ref); }

 private:
  using cd = std::complex<double>;

  struct Scratch {
    // arc route
    std::vector<cd> that;                // dense (2K0+1)^2 coefficient box
    std::vector<double> line_re, line_im;  // (K0+1) x N partial synthesis
    std::vector<double> trow;            // one row of the unit field
    std::vector<double> s_re, s_im;      // (K2max+1) x N row arc sums, k2-major
    std::vector<double> urow, vcol;      // restricted split
    // fft route
    aligned_vector<double> grid;         // rectified field / masked field
    aligned_vector<double> grid2;        // P field (modI)
    aligned_vector<cd> half;             // half spectrum buffer
  };

  void build_tables() {
    const double two_pi = 2.0 * std::numbers::pi;
    const std::size_t nu = static_cast<std::size_t>(n_);

    cos1_.resize(nu);
    sin1_.resize(nu);
    for (int c = 0; c < n_; ++c) {
      cos1_[static_cast<std::size_t>(c)] = std::cos(two_pi * c / n_);
      sin1_[static_cast<std::size_t>(c)] = std::sin(two_pi * c / n_);
    }

    // prefix[k2][c] = sum_{c'<c} e^{-2 pi i k2 c'/N}, c in [0..N]
    const std::size_t k2n = static_cast<std::size_t>(kmax_ + 1);
    prefix_re_.assign(k2n * (nu + 1), 0.0);
    prefix_im_.assign(k2n * (nu + 1), 0.0);
    for (std::size_t k2 = 0; k2 < k2n; ++k2) {
      cd acc(0.0, 0.0);
      for (std::size_t c = 0; c <= nu; ++c) {
        prefix_re_[k2 * (nu + 1) + c] = acc.real();
        prefix_im_[k2 * (nu + 1) + c] = acc.imag();
        if (c < nu) acc += std::polar(1.0, -two_pi * static_cast<double>(k2) * static_cast<double>(c) / n_);
      }
    }

    // wrow[k1][r] = e^{-2 pi i k1 r / N} for k1 in [-Kmax..Kmax]
    const std::size_t k1n = static_cast<std::size_t>(2 * kmax_ + 1);
    wrow_re_.assign(k1n * nu, 0.0);
    wrow_im_.assign(k1n * nu, 0.0);
    for (int k1 = -kmax_; k1 <= kmax_; ++k1)
      for (int r = 0; r < n_; ++r) {
        const double ph = -two_pi * k1 * r / n_;
        wrow_re_[static_cast<std::size_t>(k1 + kmax_) * nu + static_cast<std::size_t>(r)] = std::cos(ph);
        wrow_im_[static_cast<std::size_t>(k1 + kmax_) * nu + static_cast<std::size_t>(r)] = std::sin(ph);
      }

    // col_phase[k2+K0][c] = e^{+2 pi i k2 c/N} for synthesis
    col_re_.assign(static_cast<std::size_t>(2 * k0_ + 1) * nu, 0.0);
    col_im_.assign(static_cast<std::size_t>(2 * k0_ + 1) * nu, 0.0);
    for (int k2 = -k0_; k2 <= k0_; ++k2)
      for (int c = 0; c < n_; ++c) {
        const double ph = two_pi * k2 * c / n_;
        col_re_[static_cast<std::size_t>(k2 + k0_) * nu + static_cast<std::size_t>(c)] = std::cos(ph);
        col_im_[static_cast<std::size_t>(k2 + k0_) * nu + static_cast<std::size_t>(c)] = std::sin(ph);
      }

    omega_k_.resize(omega_.size());
    for (std::size_t i = 0; i < omega_.size(); ++i) {
      const auto k = omega_.at(i);
      omega_k_[i] = {k[0], k[1]};
    }
    feat_k_.clear();
    if (ff_.variant() == FeatureVariant::restricted) {
      feat_k_.push_back({1, 0});
      feat_k_.push_back({0, 1});
    } else {
      for (std::size_t j = 0; j < ff_.omega0().size(); ++j) {
        const auto k = ff_.omega0().at(j);
        feat_k_.push_back({k[0], k[1]});
      }
    }

    n_chunks_ = 16;
    scratch_.resize(static_cast<std::size_t>(n_chunks_));
    f_partial_.assign(static_cast<std::size_t>(n_chunks_), RasterImage(n_));
    f_ = RasterImage(n_);
    f_hat_ = SpectralSamples(omega_);
    if (strategy_ == Strategy::fft_grid) relu_store_.clear();
  }

  // Dense coefficient box of tau_i = w_i . gamma, offset [k+K0].
  void fill_that(std::span<const double> w, std::vector<cd>& that) const {
    const int side = 2 * k0_ + 1;
    that.assign(static_cast<std::size_t>(side) * static_cast<std::size_t>(side), cd(0.0, 0.0));
    const double inv_rt2 = 1.0 / std::numbers::sqrt2;
    const auto put = [&](int k1, int k2, cd v) {
      that[static_cast<std::size_t>(k1 + k0_) * static_cast<std::size_t>(side) + static_cast<std::size_t>(k2 + k0_)] = v;
    };
    if (ff_.variant() == FeatureVariant::restricted) {
      put(1, 0, cd(inv_rt2 * w[0], -inv_rt2 * w[1]));
      put(-1, 0, cd(inv_rt2 * w[0], inv_rt2 * w[1]));
      put(0, 1, cd(inv_rt2 * w[2], -inv_rt2 * w[3]));
      put(0, -1, cd(inv_rt2 * w[2], inv_rt2 * w[3]));
      return;
    }
    const std::size_t p = feat_k_.size();
    put(0, 0, cd(w[0], 0.0));
    for (std::size_t j = 0; j < p; ++j) {
      const auto [k1, k2] = feat_k_[j];
      const cd v(inv_rt2 * w[1 + j], -inv_rt2 * w[1 + p + j]);
      put(k1, k2, v);
      put(-k1, -k2, std::conj(v));
    }
  }

  /// Adds the arc sums of one positive run [start, end) (end <= N) of
  /// row r into the k2-major accumulator.
  void add_run(Scratch& ws, int r, int start, int end) const {
    const std::size_t nu = static_cast<std::size_t>(n_);
    const std::size_t k2n = static_cast<std::size_t>(kmax_ + 1);
    for (std::size_t k2 = 0; k2 < k2n; ++k2) {
      const double* pre_re = prefix_re_.data() + k2 * (nu + 1);
      const double* pre_im = prefix_im_.data() + k2 * (nu + 1);
      ws.s_re[k2 * nu + static_cast<std::size_t>(r)] += pre_re[end] - pre_re[start];
      ws.s_im[k2 * nu + static_cast<std::size_t>(r)] += pre_im[end] - pre_im[start];
    }
  }

  /// Restricted embedding: the row's positive set is a single circular
  /// arc with closed-form endpoints (strict positivity, boundary cells
  /// excluded).
  void restricted_arcs(const INRParams& theta, int unit, Scratch& ws, RasterImage* fpart) {
    const std::size_t nu = static_cast<std::size_t>(n_);
    const auto w = theta.unit_w(unit);
    const double rt2 = std::numbers::sqrt2;
    ws.urow.resize(nu);
    ws.vcol.resize(nu);
    for (std::size_t r = 0; r < nu; ++r) ws.urow[r] = rt2 * (w[0] * cos1_[r] + w[1] * sin1_[r]);
    for (std::size_t c = 0; c < nu; ++c) ws.vcol[c] = rt2 * (w[2] * cos1_[c] + w[3] * sin1_[c]);

    const double bmag = rt2 * std::hypot(w[2], w[3]);
    const double phi = (bmag > 0.0) ? std::atan2(w[3], w[2]) : 0.0;
    const double two_pi = 2.0 * std::numbers::pi;

    for (int r = 0; r < n_; ++r) {
      const double thr = -ws.urow[static_cast<std::size_t>(r)];
      int start = 0, count = 0;
      if (bmag == 0.0) {
        count = (0.0 > thr) ? n_ : 0;
      } else {
        const double x = thr / bmag;
        if (x >= 1.0) {
          count = 0;
        } else if (x < -1.0) {
          count = n_;
        } else {
          const double psi = std::acos(x);
          const double lo = (phi - psi) * n_ / two_pi;
          const double hi = (phi + psi) * n_ / two_pi;
          const long clo = static_cast<long>(std::floor(lo)) + 1;
          const long chi = static_cast<long>(std::ceil(hi)) - 1;
          count = static_cast<int>(chi - clo + 1);
          if (count < 0) count = 0;
          if (count > n_) count = n_;
          start = static_cast<int>(((clo % n_) + n_) % n_);
        }
      }
      if (count == 0) continue;
      if (count == n_) {
        ws.s_re[static_cast<std::size_t>(r)] += static_cast<double>(n_);  // k2 = 0 slot
        if (fpart) {
          double* frow = fpart->px.data() + static_cast<std::size_t>(r) * nu;
          const double ai = theta.a[static_cast<std::size_t>(unit)];
          const double u = ws.urow[static_cast<std::size_t>(r)];
          for (std::size_t c = 0; c < nu; ++c) frow[c] += ai * (u + ws.vcol[c]);
        }
        continue;
      }
      const int end = start + count;
      if (end <= n_) {
        add_run(ws, r, start, end);
      } else {
        add_run(ws, r, start, n_);
        add_run(ws, r, 0, end - n_);
      }
      if (fpart) {
        double* frow = fpart->px.data() + static_cast<std::size_t>(r) * nu;
        const double ai = theta.a[static_cast<std::size_t>(unit)];
        const double u = ws.urow[static_cast<std::size_t>(r)];
        for (int cc = start; cc < end; ++cc) {
          const int c = cc < n_ ? cc : cc - n_;
          frow[static_cast<std::size_t>(c)] += ai * (u + ws.vcol[static_cast<std::size_t>(c)]);
        }
      }
    }
  }

  /// General embedding: synthesize each row from the coefficient box
  /// and scan its sign pattern.
  void synthesized_arcs(const INRParams& theta, int unit, Scratch& ws, RasterImage* fpart, bool keep_relu,
                        bool want_arcs = true) {
    const std::size_t nu = static_cast<std::size_t>(n_);
    fill_that(theta.unit_w(unit), ws.that);
    const int side = 2 * k0_ + 1;

    // line[k1][c] = sum_{k2} that[k1,k2] e^{+2 pi i k2 c/N}, k1 in [0..K0]
    ws.line_re.assign(static_cast<std::size_t>(k0_ + 1) * nu, 0.0);
    ws.line_im.assign(static_cast<std::size_t>(k0_ + 1) * nu, 0.0);
    for (int k1 = 0; k1 <= k0_; ++k1) {
      double* lre = ws.line_re.data() + static_cast<std::size_t>(k1) * nu;
      double* lim = ws.line_im.data() + static_cast<std::size_t>(k1) * nu;
      for (int k2 = -k0_; k2 <= k0_; ++k2) {
        const cd coeff = ws.that[static_cast<std::size_t>(k1 + k0_) * static_cast<std::size_t>(side) + static_cast<std::size_t>(k2 + k0_)];
        if (coeff == cd(0.0, 0.0)) continue;
        const double cr = coeff.real(), ci = coeff.imag();
        const double* pre = col_re_.data() + static_cast<std::size_t>(k2 + k0_) * nu;
        const double* pim = col_im_.data() + static_cast<std::size_t>(k2 + k0_) * nu;
        for (std::size_t c = 0; c < nu; ++c) {
          lre[c] += cr * pre[c] - ci * pim[c];
          lim[c] += cr * pim[c] + ci * pre[c];
        }
      }
    }

    ws.trow.resize(nu);
    const double ai = theta.a[static_cast<std::size_t>(unit)];
    double* relu_grid = keep_relu ? relu_store_.data() + static_cast<std::size_t>(unit) * nu * nu : nullptr;

    for (int r = 0; r < n_; ++r) {
      double* trow = ws.trow.data();
      const double* l0 = ws.line_re.data();
      for (std::size_t c = 0; c < nu; ++c) trow[c] = l0[c];
      for (int k1 = 1; k1 <= k0_; ++k1) {
        const std::size_t wi = static_cast<std::size_t>(k1 + kmax_) * nu + static_cast<std::size_t>(r);
        const double pr = wrow_re_[wi], pi = -wrow_im_[wi];  // e^{+i...} = conj of wrow
        const double* lre = ws.line_re.data() + static_cast<std::size_t>(k1) * nu;
        const double* lim = ws.line_im.data() + static_cast<std::size_t>(k1) * nu;
        for (std::size_t c = 0; c < nu; ++c) trow[c] += 2.0 * (pr * lre[c] - pi * lim[c]);
      }

      if (fpart) {
        double* frow = fpart->px.data() + static_cast<std::size_t>(r) * nu;
        for (std::size_t c = 0; c < nu; ++c)
          if (trow[c] > 0.0) frow[c] += ai * trow[c];
      }
      if (relu_grid) {
        double* rrow = relu_grid + static_cast<std::size_t>(r) * nu;
        for (std::size_t c = 0; c < nu; ++c) rrow[c] = trow[c] > 0.0 ? trow[c] : 0.0;
      }
      if (!want_arcs) continue;

      int c = 0;
      while (c < n_) {
        while (c < n_ && !(trow[c] > 0.0)) ++c;
        if (c == n_) break;
        const int start = c;
        while (c < n_ && trow[c] > 0.0) ++c;
        if (start == 0 && c == n_) {
          ws.s_re[static_cast<std::size_t>(r)] += static_cast<double>(n_);
          break;
        }
        add_run(ws, r, start, c);
      }
    }
  }

  /// Mask spectrum on the (2Kmax+1)^2 box from the row arc sums.
  void mask_spectrum(Scratch& ws, std::vector<cd>& mhat_out) const {
    const std::size_t nu = static_cast<std::size_t>(n_);
    const std::size_t k2n = static_cast<std::size_t>(kmax_ + 1);
    const int mside = 2 * kmax_ + 1;
    mhat_out.assign(static_cast<std::size_t>(mside) * static_cast<std::size_t>(mside), cd(0.0, 0.0));
    const double inv_n2 = 1.0 / (static_cast<double>(n_) * static_cast<double>(n_));
    for (int k1 = -kmax_; k1 <= kmax_; ++k1) {
      const double* wr = wrow_re_.data() + static_cast<std::size_t>(k1 + kmax_) * nu;
      const double* wi = wrow_im_.data() + static_cast<std::size_t>(k1 + kmax_) * nu;
      for (std::size_t k2 = 0; k2 < k2n; ++k2) {
        const double* sr = ws.s_re.data() + k2 * nu;
        const double* si = ws.s_im.data() + k2 * nu;
        double ar = 0.0, aim = 0.0;
        for (std::size_t r = 0; r < nu; ++r) {
          ar += wr[r] * sr[r] - wi[r] * si[r];
          aim += wr[r] * si[r] + wi[r] * sr[r];
        }
        mhat_out[static_cast<std::size_t>(k1 + kmax_) * static_cast<std::size_t>(mside) + static_cast<std::size_t>(static_cast<int>(k2) + kmax_)] =
            cd(ar * inv_n2, aim * inv_n2);
      }
    }
    for (int k1 = -kmax_; k1 <= kmax_; ++k1)
      for (int k2 = -kmax_; k2 < 0; ++k2)
        mhat_out[static_cast<std::size_t>(k1 + kmax_) * static_cast<std::size_t>(mside) + static_cast<std::size_t>(k2 + kmax_)] =
            std::conj(mhat_out[static_cast<std::size_t>(kmax_ - k1) * static_cast<std::size_t>(mside) + static_cast<std::size_t>(kmax_ - k2)]);
  }

  cd mh(const std::vector<cd>& mhat, int k1, int k2) const {
    const int mside = 2 * kmax_ + 1;
    return mhat[static_cast<std::size_t>(k1 + kmax_) * static_cast<std::size_t>(mside) + static_cast<std::size_t>(k2 + kmax_)];
  }

  void unit_pass_arc(const INRParams& theta, int unit, Scratch& ws, RasterImage* fpart) {
    const std::size_t nu = static_cast<std::size_t>(n_);
    const std::size_t k2n = static_cast<std::size_t>(kmax_ + 1);
    ws.s_re.assign(k2n * nu, 0.0);
    ws.s_im.assign(k2n * nu, 0.0);
    if (ff_.variant() == FeatureVariant::restricted)
      restricted_arcs(theta, unit, ws, fpart);
    else
      synthesized_arcs(theta, unit, ws, fpart, /*keep_relu=*/false);
    mask_spectrum(ws, mhat_all_[static_cast<std::size_t>(unit)]);

    if (ff_.variant() == FeatureVariant::restricted) fill_that(theta.unit_w(unit), ws.that);
    const int side = 2 * k0_ + 1;
    const auto& mhat = mhat_all_[static_cast<std::size_t>(unit)];
    cd* chat = chat_.data() + static_cast<std::size_t>(unit) * omega_.size();
    for (std::size_t qi = 0; qi < omega_k_.size(); ++qi) {
      const auto [q1, q2] = omega_k_[qi];
      cd accq(0.0, 0.0);
      for (int l1 = -k0_; l1 <= k0_; ++l1)
        for (int l2 = -k0_; l2 <= k0_; ++l2) {
          const cd coeff = ws.that[static_cast<std::size_t>(l1 + k0_) * static_cast<std::size_t>(side) + static_cast<std::size_t>(l2 + k0_)];
          if (coeff == cd(0.0, 0.0)) continue;
          accq += coeff * mh(mhat, q1 - l1, q2 - l2);
        }
      chat[qi] = accq;
    }
  }

  void unit_pass_fft(const INRParams& theta, int unit, Scratch& ws, RasterImage* fpart) {
    const std::size_t nu = static_cast<std::size_t>(n_);
    synthesized_arcs(theta, unit, ws, fpart, /*keep_relu=*/true, /*want_arcs=*/false);

    const Fft2& fft = Fft2::get(n_);
    ws.half.resize(fft.complex_size());
    fft.forward(relu_store_.data() + static_cast<std::size_t>(unit) * nu * nu, ws.half.data());
    const double scale = 1.0 / (static_cast<double>(n_) * static_cast<double>(n_));
    cd* chat = chat_.data() + static_cast<std::size_t>(unit) * omega_.size();
    for (std::size_t qi = 0; qi < omega_k_.size(); ++qi) {
      const auto [q1, q2] = omega_k_[qi];
      const auto h = detail::half_spec_index(n_, q1, q2);
      const cd v = ws.half[h.idx];
      chat[qi] = scale * (h.conj ? std::conj(v) : v);
    }
  }

  void prepare(const INRParams& theta, bool want_raster) {
    if (theta.feature_dim != ff_.feature_dim()) throw ConfigError("TrainingKernel: feature dim mismatch");
    const int width = theta.width();
    const std::size_t nu = static_cast<std::size_t>(n_);
    chat_.assign(static_cast<std::size_t>(width) * omega_.size(), cd(0.0, 0.0));
    a_cache_.assign(theta.a.begin(), theta.a.end());
    mhat_all_.resize(static_cast<std::size_t>(width));
    if (strategy_ == Strategy::fft_grid) relu_store_.resize(static_cast<std::size_t>(width) * nu * nu);

    const int chunks = std::min(n_chunks_, std::max(1, width));
    if (want_raster)
      for (int ch = 0; ch < chunks; ++ch)
        std::fill(f_partial_[static_cast<std::size_t>(ch)].px.begin(), f_partial_[static_cast<std::size_t>(ch)].px.end(), 0.0);

    ThreadPool::global().run_chunks(chunks, [&](int ch) {
      Scratch& ws = scratch_[static_cast<std::size_t>(ch)];
      RasterImage* fpart = want_raster ? &f_partial_[static_cast<std::size_t>(ch)] : nullptr;
      for (int i = ch; i < width; i += chunks) {
        if (strategy_ == Strategy::fft_grid)
          unit_pass_fft(theta, i, ws, fpart);
        else
          unit_pass_arc(theta, i, ws, fpart);
      }
    });

    raster_fresh_ = want_raster;
    if (want_raster) {
      std::fill(f_.px.begin(), f_.px.end(), 0.0);
      for (int ch = 0; ch < chunks; ++ch) {
        const auto& part = f_partial_[static_cast<std::size_t>(ch)].px;
        for (std::size_t p = 0; p < f_.px.size(); ++p) f_.px[p] += part[p];
      }
    }
  }

  Parts assemble_residual(const SpectralSamples& y, const SpectralSamples* q, double c_data) {
    if (!(y.freqs() == omega_)) throw ConfigError("TrainingKernel: y support != omega");
    if (q && !(q->freqs() == omega_)) throw ConfigError("TrainingKernel: q support != omega");
    Parts parts;
    const std::size_t width = a_cache_.size();
    for (std::size_t qi = 0; qi < omega_.size(); ++qi) {
      cd acc(0.0, 0.0);
      for (std::size_t i = 0; i < width; ++i) acc += a_cache_[i] * chat_[i * omega_.size() + qi];
      f_hat_[qi] = acc;
    }
    r_ = f_hat_;
    r_ -= y;
    parts.data_sq = norm2_sq(r_);
    parts.lagr = q ? real_inner(*q, r_) : 0.0;
    ghat_ = r_;
    ghat_ *= c_data;
    if (q) ghat_ += *q;
    return parts;
  }

  double unit_eta(const INRParams& theta, int i) const {
    switch (eta_tag_) {
      case EtaKind::Tag::standard: {
        double s = 0.0;
        for (double v : theta.unit_w(i)) s += v * v;
        return std::sqrt(s);
      }
      case EtaKind::Tag::mod_i: {
        double s = 0.0;
        const cd* chat = chat_.data() + static_cast<std::size_t>(i) * omega_.size();
        for (std::size_t qi = 0; qi < omega_.size(); ++qi) s += std::norm(chat[qi]);
        return std::sqrt(s);
      }
      case EtaKind::Tag::mod_ii: {
        const int zero[2] = {0, 0};
        const auto zi = omega_.index_of(zero);
        return chat_[static_cast<std::size_t>(i) * omega_.size() + static_cast<std::size_t>(zi)].real();
      }
    }
    return 0.0;
  }

  void gradients(const INRParams& theta, double c_data, double c_reg, Parts& parts, ParamGrad& grad) {
    const int width = theta.width();
    grad.a.assign(theta.a.size(), 0.0);
    grad.w.assign(theta.w.size(), 0.0);
    std::vector<double> etas(static_cast<std::size_t>(width), 0.0);
    for (int i = 0; i < width; ++i) etas[static_cast<std::size_t>(i)] = unit_eta(theta, i);

    const int chunks = std::min(n_chunks_, std::max(1, width));
    const int zero[2] = {0, 0};
    const std::size_t zidx = static_cast<std::size_t>(omega_.index_of(zero));

    // Shared back-projection grid for the fft route.
    RasterImage g_grid;
    if (strategy_ == Strategy::fft_grid) g_grid = adjoint_spectral(ghat_, n_);

    ThreadPool::global().run_chunks(chunks, [&](int ch) {
      std::vector<cd> dvec(omega_.size());
      Scratch& ws = scratch_[static_cast<std::size_t>(ch)];
      for (int i = ch; i < width; i += chunks) {
        const double ai = theta.a[static_cast<std::size_t>(i)];
        const cd* chat = chat_.data() + static_cast<std::size_t>(i) * omega_.size();

        double ga = 0.0;
        for (std::size_t qi = 0; qi < omega_.size(); ++qi)
          ga += ghat_[qi].real() * chat[qi].real() + ghat_[qi].imag() * chat[qi].imag();
        grad.a[static_cast<std::size_t>(i)] = ga + c_reg * ai;

        auto gw = std::span<double>(grad.w.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(ff_.feature_dim()),
                                    static_cast<std::size_t>(ff_.feature_dim()));

        if (strategy_ == Strategy::fft_grid) {
          unit_grad_fft(theta, i, ws, g_grid, c_reg, etas[static_cast<std::size_t>(i)], gw);
        } else {
          for (std::size_t qi = 0; qi < omega_.size(); ++qi) {
            cd v = ai * ghat_[qi];
            if (eta_tag_ == EtaKind::Tag::mod_i) v += c_reg * chat[qi];
            dvec[qi] = v;
          }
          if (eta_tag_ == EtaKind::Tag::mod_ii) dvec[zidx] += c_reg * etas[static_cast<std::size_t>(i)];
          unit_grad_algebra(dvec, mhat_all_[static_cast<std::size_t>(i)], gw);
        }
        if (eta_tag_ == EtaKind::Tag::standard) {
          const auto wi = theta.unit_w(i);
          for (std::size_t c = 0; c < gw.size(); ++c) gw[c] += c_reg * wi[c];
        }
      }
    });

    parts.reg = 0.0;
    for (int i = 0; i < width; ++i) {
      const double ai = theta.a[static_cast<std::size_t>(i)];
      const double ei = etas[static_cast<std::size_t>(i)];
      parts.reg += 0.5 * (ai * ai + ei * ei);
    }
    parts.objective = 0.5 * c_data * parts.data_sq + parts.lagr + c_reg * parts.reg;
  }

  /// dL/dw_c = sum_{k in Omega} Re( d[k] conj(F~[m gamma_c][k]) ), with
  /// F~[m gamma_c] expressed through shifts of the mask spectrum.
  void unit_grad_algebra(const std::vector<cd>& dvec, const std::vector<cd>& mhat, std::span<double> gw) const {
    const double rt2_half = std::numbers::sqrt2 / 2.0;
    const std::size_t p = feat_k_.size();
    const bool restricted = ff_.variant() == FeatureVariant::restricted;
    for (std::size_t qi = 0; qi < omega_k_.size(); ++qi) {
      const auto [q1, q2] = omega_k_[qi];
      const cd d = dvec[qi];
      if (!restricted) {
        const cd m0 = mh(mhat, q1, q2);
        gw[0] += d.real() * m0.real() + d.imag() * m0.imag();
      }
      for (std::size_t j = 0; j < p; ++j) {
        const auto [kj1, kj2] = feat_k_[j];
        const cd pm = d * std::conj(mh(mhat, q1 - kj1, q2 - kj2));
        const cd pp = d * std::conj(mh(mhat, q1 + kj1, q2 + kj2));
        const double cos_part = rt2_half * (pm.real() + pp.real());
        const double sin_part = rt2_half * (pp.imag() - pm.imag());
        if (restricted) {
          gw[2 * j] += cos_part;
          gw[2 * j + 1] += sin_part;
        } else {
          gw[1 + j] += cos_part;
          gw[1 + p + j] += sin_part;
        }
      }
    }
  }

  /// FFT route: h = mask * (a_i G + c_reg P_i (modI) + c_reg eta_i
  /// (modII)); gradients are Fourier coefficients of h at the feature
  /// frequencies.
  void unit_grad_fft(const INRParams& theta, int unit, Scratch& ws, const RasterImage& g_grid, double c_reg,
                     double eta_i, std::span<double> gw) {
    const std::size_t nu = static_cast<std::size_t>(n_);
    const Fft2& fft = Fft2::get(n_);
    const double ai = theta.a[static_cast<std::size_t>(unit)];
    const double* relu = relu_store_.data() + static_cast<std::size_t>(unit) * nu * nu;

    ws.grid.assign(nu * nu, 0.0);
    if (eta_tag_ == EtaKind::Tag::mod_i && c_reg != 0.0) {
      // P_i = zero-filled synthesis of the unit spectrum
      SpectralSamples ci(omega_);
      const cd* chat = chat_.data() + static_cast<std::size_t>(unit) * omega_.size();
      for (std::size_t qi = 0; qi < omega_.size(); ++qi) ci[qi] = chat[qi];
      const RasterImage p_grid = adjoint_spectral(ci, n_);
      for (std::size_t p = 0; p < nu * nu; ++p)
        if (relu[p] > 0.0) ws.grid[p] = ai * g_grid.px[p] + c_reg * p_grid.px[p];
    } else {
      const double add = (eta_tag_ == EtaKind::Tag::mod_ii) ? c_reg * eta_i : 0.0;
      for (std::size_t p = 0; p < nu * nu; ++p)
        if (relu[p] > 0.0) ws.grid[p] = ai * g_grid.px[p] + add;
    }
    ws.half.resize(fft.complex_size());
    fft.forward(ws.grid.data(), ws.half.data());
    const double scale = 1.0 / (static_cast<double>(n_) * static_cast<double>(n_));
    const double rt2 = std::numbers::sqrt2;
    const std::size_t p = feat_k_.size();
    const bool restricted = ff_.variant() == FeatureVariant::restricted;
    if (!restricted) {
      const auto h0 = detail::half_spec_index(n_, 0, 0);
      gw[0] += scale * ws.half[h0.idx].real();
    }
    for (std::size_t j = 0; j < p; ++j) {
      const auto [kj1, kj2] = feat_k_[j];
      const auto h = detail::half_spec_index(n_, kj1, kj2);
      cd v = ws.half[h.idx];
      if (h.conj) v = std::conj(v);
      v *= scale;
      const double cos_part = rt2 * v.real();
      const double sin_part = -rt2 * v.imag();
      if (restricted) {
        gw[2 * j] += cos_part;
        gw[2 * j + 1] += sin_part;
      } else {
        gw[1 + j] += cos_part;
        gw[1 + p + j] += sin_part;
      }
    }
  }

  FourierFeatures ff_;
  FrequencySet omega_;
  int n_;
  EtaKind::Tag eta_tag_;
  Strategy strategy_ = Strategy::arc_algebra;
  int k0_ = 0;
  int kmax_ = 0;
  int n_chunks_ = 16;

  std::vector<double> cos1_, sin1_;
  std::vector<double> prefix_re_, prefix_im_;
  std::vector<double> wrow_re_, wrow_im_;
  std::vector<double> col_re_, col_im_;
  std::vector<std::pair<int, int>> omega_k_;
  std::vector<std::pair<int, int>> feat_k_;

  std::vector<Scratch> scratch_;
  std::vector<RasterImage> f_partial_;
  std::vector<std::vector<cd>> mhat_all_;
  std::vector<cd> chat_;
  std::vector<double> a_cache_;
  aligned_vector<double> relu_store_;
  RasterImage f_;
  SpectralSamples f_hat_;
  SpectralSamples r_;
  SpectralSamples ghat_;
  bool raster_fresh_ = false;
};

}  // namespace finr
