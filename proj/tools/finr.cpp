// finr: experiment driver for fitting shallow Fourier-features INRs to
// low-pass spectral samples and numerically verifying the recovery
// machinery (certificates, nullspace tests, convex oracle).

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

#include "finr/certify.hpp"
#include "finr/config.hpp"
#include "finr/optimize.hpp"
#include "finr/oracle.hpp"
#include "finr/version.hpp"

namespace fs = std::filesystem;
using namespace finr;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "finr-out";
  std::vector<std::string> overrides;
  int jobs = 1;
  bool paper_scale = false;
};

void apply_cli(Config& cfg, const CommonArgs& args) {
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.paper_scale) cfg.set("n", "1024");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open output file " + path.string());
  return os;
}

void write_manifest(const fs::path& dir, const Config& cfg, double wall_seconds) {
  auto os = open_out(dir / "manifest.txt");
  os << "tool = finr " << kVersion << "\n";
  os << "rng = splitmix64-stream + xoshiro256++ (Box-Muller gaussians)\n";
  os << "wall_seconds = " << wall_seconds << "\n";
  os << "config:\n" << cfg.echo();
}

EtaKind::Tag parse_eta(const std::string& name) {
  if (name == "standard") return EtaKind::Tag::standard;
  if (name == "modI") return EtaKind::Tag::mod_i;
  if (name == "modII") return EtaKind::Tag::mod_ii;
  throw ConfigError("eta must be standard | modI | modII, got: " + name);
}

const char* eta_name(EtaKind::Tag tag) {
  return tag == EtaKind::Tag::standard ? "standard" : (tag == EtaKind::Tag::mod_i ? "modI" : "modII");
}

Setting parse_setting(const std::string& name) {
  if (name == "thm1") return Setting::thm1;
  if (name == "thm2") return Setting::thm2;
  throw ConfigError("setting must be thm1 | thm2, got: " + name);
}

std::vector<SchedulePhase> parse_schedule(const std::string& text) {
  // "40000@1e-3,10000@1e-4"
  std::vector<SchedulePhase> phases;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto at = tok.find('@');
    if (at == std::string::npos) throw ConfigError("schedule phase must be iters@lr, got: " + tok);
    phases.push_back({std::stoll(tok.substr(0, at)), std::stod(tok.substr(at + 1))});
  }
  if (phases.empty()) throw ConfigError("schedule is empty");
  return phases;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Runs fn over [0, count) with at most `jobs` workers; outputs are
/// stored by index by the caller, so results do not depend on
/// scheduling.
void run_indexed(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  for (std::size_t t = 0; t < n_workers; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : workers) th.join();
}

// ---- exact-recovery ----

int cmd_exact_recovery(const CommonArgs& args) {
  Config cfg;
  apply_cli(cfg, args);
  cfg.require_known({"setting", "eta", "widths", "ks", "trials", "master_seed", "n", "student_width", "sigma0",
                     "growth", "outer_iters", "inner_iters", "inner_lr", "success_mse", "stop_at_success",
                     "mse_every", "k0"});

  const Setting setting = parse_setting(cfg.get_str("setting", "thm2"));
  const EtaKind::Tag eta_tag = parse_eta(cfg.get_str("eta", setting == Setting::thm1 ? "modI" : "standard"));
  const auto widths = cfg.get_list<int>("widths", {1, 2, 3});
  auto ks = cfg.get_list<int>("ks", {});
  if (ks.empty())
    for (int w : widths) ks.push_back(2 * w);
  if (ks.size() != widths.size()) throw ConfigError("widths and ks must have equal length");
  const int trials = static_cast<int>(cfg.get_int("trials", 10));
  const std::uint64_t master_seed = cfg.get_u64("master_seed", 20260810u);

  TrialConfig tc;
  tc.n = static_cast<int>(cfg.get_int("n", 256));
  tc.k0 = static_cast<int>(cfg.get_int("k0", 2));
  tc.student_width = static_cast<int>(cfg.get_int("student_width", 100));
  tc.sigma0 = cfg.get_double("sigma0", 10.0);
  tc.inner_iters = cfg.get_int("inner_iters", 5000);
  tc.inner_lr = cfg.get_double("inner_lr", 1e-3);
  tc.success_mse = cfg.get_double("success_mse", 1e-9);
  tc.stop_at_success = cfg.get_int("stop_at_success", 1) != 0;
  tc.mse_every = cfg.get_int("mse_every", 10);
  if (cfg.has("growth")) tc.growth_thm1 = tc.growth_thm2 = cfg.get_double("growth", 1.1);
  if (cfg.has("outer_iters")) tc.outer_thm1 = tc.outer_thm2 = static_cast<int>(cfg.get_int("outer_iters", 100));

  fs::create_directories(args.out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  struct Row {
    int w = 0, k = 0, trial = 0;
    std::uint64_t seed = 0;
    bool success = false;
    bool failed_to_run = false;
    std::string error;
    double min_mse = 0.0;
    std::int64_t iters = 0;
  };
  std::vector<Row> rows;
  for (std::size_t cell = 0; cell < widths.size(); ++cell)
    for (int t = 0; t < trials; ++t) {
      Row row;
      row.w = widths[cell];
      row.k = ks[cell];
      row.trial = t;
      row.seed =
          SplitMix64(master_seed ^ (0x5bd1e995ULL * (cell + 1)) ^ (0x9e3779b9ULL * static_cast<std::uint64_t>(t + 1)))
              .next();
      rows.push_back(row);
    }

  run_indexed(rows.size(), args.jobs, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      const auto res = exact_recovery_trial(row.seed, setting, row.w, row.k, tc.student_width, eta_tag, tc);
      row.success = res.success;
      row.min_mse = res.min_mse;
      row.iters = res.iters_run;
    } catch (const std::exception& ex) {
      row.failed_to_run = true;
      row.error = ex.what();
    }
  });

  {
    auto os = open_out(fs::path(args.out_dir) / "trials.csv");
    os << "setting,eta_kind,W,K,trial,seed,success,min_mse,iters,error\n";
    char buf[64];
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof buf, "%.17g", row.min_mse);
      os << (setting == Setting::thm1 ? "thm1" : "thm2") << "," << eta_name(eta_tag) << "," << row.w << "," << row.k
         << "," << row.trial << "," << row.seed << "," << (row.success ? 1 : 0) << "," << buf << "," << row.iters
         << "," << (row.failed_to_run ? row.error : "") << "\n";
    }
  }
  {
    auto os = open_out(fs::path(args.out_dir) / "probability_table.csv");
    os << "setting,eta_kind,W,K,trials,successes,min_mse_median\n";
    for (std::size_t cell = 0; cell < widths.size(); ++cell) {
      int successes = 0;
      std::vector<double> mses;
      for (const auto& row : rows) {
        if (row.w != widths[cell] || row.k != ks[cell]) continue;
        successes += row.success ? 1 : 0;
        if (!row.failed_to_run) mses.push_back(row.min_mse);
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", median(mses));
      os << (setting == Setting::thm1 ? "thm1" : "thm2") << "," << eta_name(eta_tag) << "," << widths[cell] << ","
         << ks[cell] << "," << trials << "," << successes << "," << buf << "\n";
    }
  }
  write_manifest(args.out_dir, cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// ---- recover-phantom ----

int cmd_recover_phantom(const CommonArgs& args, const std::string& phantom) {
  Config cfg;
  apply_cli(cfg, args);
  cfg.require_known(
      {"k", "k0", "width", "n", "eta", "lambdas", "schedule", "master_seed", "n_disks", "hist_bins", "log_every"});

  const int n = static_cast<int>(cfg.get_int("n", 256));
  const std::uint64_t master_seed = cfg.get_u64("master_seed", 20260810u);
  const EtaKind::Tag eta_tag = parse_eta(cfg.get_str("eta", "modI"));
  const auto lambdas = cfg.get_list<double>("lambdas", {1e-6, 1e-4, 1e-2});
  const auto schedule = parse_schedule(cfg.get_str("schedule", "2000@1e-3,500@1e-4"));

  fs::create_directories(args.out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  const int k = static_cast<int>(cfg.get_int("k", 32));
  const int k0 = static_cast<int>(cfg.get_int("k0", 10));
  const int width = static_cast<int>(cfg.get_int("width", 100));
  RasterImage ground_truth;
  SpectralSamples y;
  const FrequencySet omega = build_box_freqs(k, FreqNorm::inf, 2, FreqKind::sampling);

  if (phantom == "dot") {
    const auto phantom_ff = FourierFeatures::general_box(std::max(k0, 8));
    const auto theta = dot_phantom(master_seed, static_cast<int>(cfg.get_int("n_disks", 50)), phantom_ff);
    ground_truth = inr_rasterize(theta, phantom_ff, n);
    y = forward_spectral(ground_truth, omega);
    save_params(theta, phantom_ff, (fs::path(args.out_dir) / "phantom_params.csv").string());
  } else if (phantom == "sl") {
    const auto ellipses = shepp_logan();
    ground_truth = ellipse_raster(ellipses, n);
    y = ellipse_spectrum(ellipses, omega);
  } else if (phantom.rfind("ellipse-file:", 0) == 0) {
    const auto ellipses = load_ellipses(phantom.substr(13));
    ground_truth = ellipse_raster(ellipses, n);
    y = ellipse_spectrum(ellipses, omega);
  } else if (phantom.rfind("teacher-file:", 0) == 0) {
    const auto [theta, tff] = load_params(phantom.substr(13));
    ground_truth = inr_rasterize(theta, tff, n);
    y = forward_spectral(ground_truth, omega);
  } else {
    throw ConfigError("phantom must be dot | sl | ellipse-file:PATH | teacher-file:PATH");
  }

  const auto ff = FourierFeatures::general_box(k0);
  const RasterImage zero_fill = adjoint_spectral(y, n);
  const double zf_mse = raster_mse(zero_fill, ground_truth);

  write_ftimg(ground_truth, (fs::path(args.out_dir) / "ground_truth.ftimg").string());
  write_pgm(ground_truth, (fs::path(args.out_dir) / "ground_truth.pgm").string());
  write_ftimg(zero_fill, (fs::path(args.out_dir) / "zero_fill.ftimg").string());
  write_pgm(zero_fill, (fs::path(args.out_dir) / "zero_fill.pgm").string());

  struct FitRow {
    double lambda = 0.0;
    double mse = 0.0;
    double near_zero_mass = 0.0;  // fraction of unit sizes below 1e-3
    INRParams theta;
    std::vector<TraceRow> trace;
  };
  std::vector<FitRow> fits(lambdas.size());
  Rng init_rng = Rng::stream(master_seed, {0xf17u});
  const INRParams theta0 = init_student(init_rng, width, ff.feature_dim());

  EtaKind kind = EtaKind::standard();
  if (eta_tag == EtaKind::Tag::mod_i) kind = EtaKind::mod_i(omega, n);
  if (eta_tag == EtaKind::Tag::mod_ii) kind = EtaKind::mod_ii(n);

  run_indexed(lambdas.size(), args.jobs, [&](std::size_t i) {
    const auto res =
        train_penalized(theta0, ff, omega, y, lambdas[i], eta_tag, schedule, n, cfg.get_int("log_every", 500));
    FitRow& row = fits[i];
    row.lambda = lambdas[i];
    row.theta = res.theta;
    row.trace = res.trace;
    row.mse = raster_mse(inr_rasterize(res.theta, ff, n), ground_truth);
    const auto sizes = unit_sizes(res.theta, kind, ff);
    std::size_t near_zero = 0;
    for (double s : sizes)
      if (s < 1e-3) ++near_zero;
    row.near_zero_mass = sizes.empty() ? 0.0 : static_cast<double>(near_zero) / static_cast<double>(sizes.size());
  });

  for (std::size_t i = 0; i < fits.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "trace_lambda_%zu.csv", i);
    auto ts = open_out(fs::path(args.out_dir) / name);
    trace_to_csv(fits[i].trace, ts);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i)
    if (fits[i].mse < fits[best].mse) best = i;

  const RasterImage inr_img = inr_rasterize(fits[best].theta, ff, n);
  RasterImage absdiff(n);
  for (std::size_t p = 0; p < absdiff.px.size(); ++p) absdiff.px[p] = std::abs(inr_img.px[p] - ground_truth.px[p]);
  write_ftimg(inr_img, (fs::path(args.out_dir) / "inr.ftimg").string());
  write_pgm(inr_img, (fs::path(args.out_dir) / "inr.pgm").string());
  write_ftimg(absdiff, (fs::path(args.out_dir) / "absdiff.ftimg").string());
  write_pgm(absdiff, (fs::path(args.out_dir) / "absdiff.pgm").string());
  save_params(fits[best].theta, ff, (fs::path(args.out_dir) / "inr_params.csv").string());

  {
    auto os = open_out(fs::path(args.out_dir) / "metrics.csv");
    os << "method,lambda,mse\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "zero_fill,,%.17g\n", zf_mse);
    os << buf;
    for (const auto& row : fits) {
      std::snprintf(buf, sizeof buf, "inr,%.17g,%.17g\n", row.lambda, row.mse);
      os << buf;
    }
  }
  {
    // unit-size histograms per lambda (log-spaced bins)
    auto os = open_out(fs::path(args.out_dir) / "unit_size_hist.csv");
    os << "lambda,bin_left,bin_right,count\n";
    const int bins = static_cast<int>(cfg.get_int("hist_bins", 24));
    char buf[128];
    for (const auto& row : fits) {
      const auto sizes = unit_sizes(row.theta, kind, ff);
      double mx = 0.0;
      for (double s : sizes) mx = std::max(mx, s);
      const double hi = std::max(mx, 1e-6);
      const double lo = hi * 1e-8;
      for (int b = 0; b < bins; ++b) {
        const double left = b == 0 ? 0.0 : lo * std::pow(hi / lo, static_cast<double>(b) / bins);
        const double right =
            b + 1 == bins ? hi * (1.0 + 1e-12) : lo * std::pow(hi / lo, static_cast<double>(b + 1) / bins);
        std::size_t count = 0;
        for (double s : sizes)
          if (s >= left && s < right) ++count;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu\n", row.lambda, left, right, count);
        os << buf;
      }
    }
  }
  {
    auto os = open_out(fs::path(args.out_dir) / "near_zero_mass.csv");
    os << "lambda,near_zero_fraction\n";
    char buf[64];
    for (const auto& row : fits) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", row.lambda, row.near_zero_mass);
      os << buf;
    }
  }
  write_manifest(args.out_dir, cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// ---- certify and friends ----

int run_certify_thm1(const Config& cfg, const fs::path& out_dir) {
  const int n = static_cast<int>(cfg.get_int("n", 256));
  const int k0 = static_cast<int>(cfg.get_int("k0", 2));
  const int k = static_cast<int>(cfg.get_int("k", 3 * k0));
  const std::size_t probes = static_cast<std::size_t>(cfg.get_int("probes", 10000));
  const std::uint64_t seed = cfg.get_u64("master_seed", 20260810u);

  if (k < 3 * k0) throw HypothesisError("certify thm1: needs K >= 3 K0 (width-1 sampling hypothesis violated)");
  const auto ff = FourierFeatures::general_box(k0);
  const auto omega = build_box_freqs(k, FreqNorm::inf, 2, FreqKind::sampling);

  Rng rng = Rng::stream(seed, {0xa7081u});
  const auto w0 = rng.sphere(ff.feature_dim());
  const double a0 = rng.uniform(1.0, 5.0);
  const auto z0 = certificate_thm1(a0, w0, ff, omega, n);
  const auto rep = check_certificate(z0, ff, {w0}, {1}, EtaKind::mod_i(omega, n), probes, seed, n);

  auto os = open_out(out_dir / "certificate_report.txt");
  os << "mode = thm1\n";
  report_to_text(rep, os);
  auto probes_os = open_out(out_dir / "probes.csv");
  report_probes_csv(rep, probes_os);
  return 0;
}

int run_certify_thm2(const Config& cfg, const fs::path& out_dir) {
  const int n = static_cast<int>(cfg.get_int("n", 256));
  const int s = static_cast<int>(cfg.get_int("s", 2));
  const std::size_t probes = static_cast<std::size_t>(cfg.get_int("probes", 10000));
  const double safety = cfg.get_double("safety", 0.5);
  const std::uint64_t seed = cfg.get_u64("master_seed", 20260810u);

  const auto omega = build_box_freqs(2 * s, FreqNorm::one, 2, FreqKind::sampling);
  Rng rng = Rng::stream(seed, {0xa70822u});
  std::vector<std::pair<double, std::vector<double>>> atoms;
  std::vector<std::vector<double>> atom_ws;
  std::vector<int> signs;
  for (int i = 0; i < s; ++i) {
    auto w = rng.sphere(4);
    while (in_singular_set_V(w)) w = rng.sphere(4);
    atoms.push_back({rng.uniform(1.0, 5.0), w});
    atom_ws.push_back(w);
    signs.push_back(1);
    auto neg = w;
    for (auto& v : neg) v = -v;
    atom_ws.push_back(neg);
    signs.push_back(1);
  }
  const auto cert = certificate_thm2(atoms, omega, n, safety);
  const auto rep = check_certificate(cert.phi_hat, FourierFeatures::restricted(), atom_ws, signs,
                                     EtaKind::mod_ii(n), probes, seed, n);
  auto os = open_out(out_dir / "certificate_report.txt");
  os << "mode = thm2\n";
  os << "s = " << s << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", cert.alpha);
  os << "alpha = " << buf << "\n";
  report_to_text(rep, os);
  auto probes_os = open_out(out_dir / "probes.csv");
  report_probes_csv(rep, probes_os);
  return 0;
}

int run_nullspace(const Config& cfg, const fs::path& out_dir) {
  const int n = static_cast<int>(cfg.get_int("n", 4096));
  const int k0 = static_cast<int>(cfg.get_int("k0", 1));
  const int k = static_cast<int>(cfg.get_int("k", 3 * k0));
  const std::uint64_t seed = cfg.get_u64("master_seed", 20260810u);

  const auto omega0 = build_box_freqs(k0, FreqNorm::inf, 2, FreqKind::features);
  const auto ff = FourierFeatures::general(omega0);
  const auto omega = build_box_freqs(k, FreqNorm::inf, 2, FreqKind::sampling);

  Rng rng = Rng::stream(seed, {0x9c11u});
  const auto w_tau = rng.sphere(ff.feature_dim());
  RasterImage relu = unit_field(ff, w_tau, n);
  for (auto& v : relu.px) v = v > 0.0 ? v : 0.0;
  const auto c = forward_spectral(relu, omega);
  const auto res = qc_nullspace(c, omega0);

  auto os = open_out(out_dir / "singular_values.csv");
  os << "index,sigma\n";
  char buf[64];
  for (std::size_t i = 0; i < res.singular_values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, res.singular_values[i]);
    os << buf;
  }
  auto rs = open_out(out_dir / "nullspace_report.txt");
  rs << "mode = nullspace\n";
  const auto tau_hat = ff.weights_to_trig(w_tau);
  const double cos_sim = std::abs(real_inner(res.nullvector, tau_hat)) / (norm2(res.nullvector) * norm2(tau_hat));
  const auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    rs << key << " = " << buf << "\n";
  };
  put("sigma_max", res.singular_values.front());
  put("sigma_min", res.singular_values.back());
  put("sigma_second", res.singular_values[res.singular_values.size() - 2]);
  put("nullvector_cosine_to_tau", cos_sim);
  return 0;
}

int run_oracle(const Config& cfg, const fs::path& out_dir) {
  const int n = static_cast<int>(cfg.get_int("n", 256));
  const int k = static_cast<int>(cfg.get_int("k", 2));
  const std::size_t m = static_cast<std::size_t>(cfg.get_int("m", 51));
  const std::uint64_t seed = cfg.get_u64("master_seed", 20260810u);
  const Setting setting = parse_setting(cfg.get_str("setting", "thm2"));
  const double feas_tol = cfg.get_double("feas_tol", 1e-8);
  const double opt_tol = cfg.get_double("opt_tol", 1e-8);
  const std::int64_t max_iters = cfg.get_int("max_iters", 400000);

  const auto ff = setting == Setting::thm1 ? FourierFeatures::general_box(static_cast<int>(cfg.get_int("k0", 2)))
                                           : FourierFeatures::restricted();
  const auto omega = build_box_freqs(k, FreqNorm::inf, 2, FreqKind::sampling);

  Rng rng = Rng::stream(seed, {0x0c7eu});
  auto w0 = rng.sphere(ff.feature_dim());
  while (ff.feature_dim() == 4 && in_singular_set_V(w0)) w0 = rng.sphere(4);
  const double a0 = rng.uniform(1.0, 5.0);

  const auto dict = build_dictionary(setting, m, seed, {w0}, ff, omega, n);
  SpectralSamples y(omega);
  for (std::size_t qi = 0; qi < y.size(); ++qi) y[qi] = a0 * dict.columns[0][qi];

  const auto res = solve_weighted_bp(dict, y, feas_tol, opt_tol, max_iters);
  const auto rep = dual_report(dict, y, res.coeffs, res.dual);

  auto os = open_out(out_dir / "oracle_report.txt");
  char buf[64];
  os << "mode = oracle\n";
  os << "atoms = " << dict.size() << " (dropped " << dict.n_dropped << ")\n";
  os << "converged = " << (res.converged ? 1 : 0) << "\n";
  os << "iters = " << res.iters << "\n";
  const auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << key << " = " << buf << "\n";
  };
  put("planted_amplitude", a0);
  put("recovered_amplitude", res.coeffs.empty() ? 0.0 : res.coeffs[0]);
  put("primal_obj", rep.primal_obj);
  put("dual_obj_feasible", rep.dual_obj_feasible);
  put("gap", rep.gap);
  put("max_violation", rep.max_violation);
  put("feas_residual", rep.feas_residual);
  {
    auto sol = open_out(out_dir / "oracle_solution.csv");
    solution_to_csv(dict, res.coeffs, sol);
    auto log = open_out(out_dir / "oracle_iterates.csv");
    log << "iter,primal,dual,feas\n";
    for (const auto& row : res.log) {
      std::snprintf(buf, sizeof buf, "%lld,", static_cast<long long>(row.iter));
      log << buf;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", row.primal_obj, row.dual_obj, row.feas);
      log << buf;
    }
  }
  if (!res.converged)
    throw DivergenceError("oracle: solver did not converge (feas=" + std::to_string(res.feas_residual) + ")");
  return 0;
}

int cmd_certify(const CommonArgs& args, const std::string& mode) {
  Config cfg;
  apply_cli(cfg, args);
  cfg.require_known(
      {"n", "k", "k0", "s", "probes", "safety", "master_seed", "m", "setting", "feas_tol", "opt_tol", "max_iters"});
  fs::create_directories(args.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  if (mode == "thm1")
    rc = run_certify_thm1(cfg, args.out_dir);
  else if (mode == "thm2")
    rc = run_certify_thm2(cfg, args.out_dir);
  else if (mode == "nullspace")
    rc = run_nullspace(cfg, args.out_dir);
  else if (mode == "oracle")
    rc = run_oracle(cfg, args.out_dir);
  else
    throw ConfigError("certify mode must be thm1 | thm2 | nullspace | oracle");
  write_manifest(args.out_dir, cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return rc;
}

// ---- rasterize ----

int cmd_rasterize(const CommonArgs& args, const std::string& params_file, const std::string& ellipse_file,
                  bool use_sl, int spectrum_k) {
  Config cfg;
  apply_cli(cfg, args);
  cfg.require_known({"n"});
  const int n = static_cast<int>(cfg.get_int("n", 256));
  fs::create_directories(args.out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  RasterImage img;
  std::vector<Ellipse> ellipses;
  bool have_ellipses = false;
  if (!params_file.empty()) {
    const auto [theta, ff] = load_params(params_file);
    img = inr_rasterize(theta, ff, n);
  } else if (!ellipse_file.empty() || use_sl) {
    ellipses = use_sl ? shepp_logan() : load_ellipses(ellipse_file);
    have_ellipses = true;
    img = ellipse_raster(ellipses, n);
  } else {
    throw ConfigError("rasterize: provide --params, --ellipses, or --sl");
  }
  write_ftimg(img, (fs::path(args.out_dir) / "image.ftimg").string());
  write_pgm(img, (fs::path(args.out_dir) / "image.pgm").string());

  if (spectrum_k > 0) {
    const auto omega = build_box_freqs(spectrum_k, FreqNorm::inf, 2, FreqKind::sampling);
    const auto y = have_ellipses ? ellipse_spectrum(ellipses, omega) : forward_spectral(img, omega);
    auto os = open_out(fs::path(args.out_dir) / "spectrum.csv");
    spectral_to_csv(y, os);
    const auto zf = adjoint_spectral(y, n);
    write_ftimg(zf, (fs::path(args.out_dir) / "zero_fill.ftimg").string());
    write_pgm(zf, (fs::path(args.out_dir) / "zero_fill.pgm").string());
  }
  write_manifest(args.out_dir, cfg, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shallow Fourier-features INR recovery toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value config file");
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_option("--set", common.overrides, "override config entries (key=value)")->take_all();
    sub->add_option("--jobs", common.jobs, "trial-level parallelism bound");
    sub->add_flag("--paper-scale", common.paper_scale, "use the full-scale grid (N=1024)");
  };

  auto* rec = app.add_subcommand("exact-recovery", "teacher-student exact recovery probability tables");
  add_common(rec);

  auto* phantom_cmd = app.add_subcommand("recover-phantom", "fit an INR to phantom spectral samples");
  std::string phantom = "dot";
  phantom_cmd->add_option("--phantom", phantom, "dot | sl | ellipse-file:PATH | teacher-file:PATH");
  add_common(phantom_cmd);

  auto* cert = app.add_subcommand("certify", "dual certificate / nullspace / oracle reports");
  std::string mode = "thm1";
  cert->add_option("--mode", mode, "thm1 | thm2 | nullspace | oracle");
  add_common(cert);

  auto* nullspace_cmd = app.add_subcommand("nullspace", "Q_c singular spectrum report");
  add_common(nullspace_cmd);

  auto* oracle_cmd = app.add_subcommand("oracle", "weighted basis-pursuit oracle on a planted problem");
  add_common(oracle_cmd);

  auto* raster_cmd = app.add_subcommand("rasterize", "render params or ellipse files to images");
  std::string params_file, ellipse_file;
  bool use_sl = false;
  int spectrum_k = 0;
  raster_cmd->add_option("--params", params_file, "INR parameter CSV");
  raster_cmd->add_option("--ellipses", ellipse_file, "ellipse CSV");
  raster_cmd->add_flag("--sl", use_sl, "built-in ten-ellipse head phantom");
  raster_cmd->add_option("--spectrum-k", spectrum_k, "also dump the spectrum and zero-filled image");
  add_common(raster_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (rec->parsed()) return cmd_exact_recovery(common);
    if (phantom_cmd->parsed()) return cmd_recover_phantom(common, phantom);
    if (cert->parsed()) return cmd_certify(common, mode);
    if (nullspace_cmd->parsed()) return cmd_certify(common, "nullspace");
    if (oracle_cmd->parsed()) return cmd_certify(common, "oracle");
    if (raster_cmd->parsed()) return cmd_rasterize(common, params_file, ellipse_file, use_sl, spectrum_k);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis violation: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
