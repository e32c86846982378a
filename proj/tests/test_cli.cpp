// End-to-end CLI checks: subcommands run, outputs exist, reruns are
// byte-identical, and error paths map to the documented exit codes.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (!ok) {
    ++failures;
    std::cerr << "FAILED: " << what << "\n";
  }
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli <finr-binary>\n";
    return 2;
  }
  const std::string finr = argv[1];
  const fs::path root = fs::temp_directory_path() / "finr_cli_test";
  fs::remove_all(root);
  fs::create_directories(root);

  const std::string rec_args =
      " --set widths=1 --set ks=2 --set trials=2 --set n=64 --set student_width=12 --set inner_iters=150"
      " --set outer_iters=12 --set setting=thm2 --set eta=standard";

  // exact-recovery: runs, table well formed, rerun byte-identical
  check(run(finr + " exact-recovery --out " + (root / "rec1").string() + rec_args) == 0, "exact-recovery runs");
  check(run(finr + " exact-recovery --out " + (root / "rec2").string() + rec_args) == 0, "exact-recovery rerun");
  check(fs::exists(root / "rec1" / "probability_table.csv"), "probability table exists");
  check(same_bytes(root / "rec1" / "probability_table.csv", root / "rec2" / "probability_table.csv"),
        "probability table deterministic");
  check(same_bytes(root / "rec1" / "trials.csv", root / "rec2" / "trials.csv"), "trials csv deterministic");
  {
    const std::string table = slurp(root / "rec1" / "probability_table.csv");
    check(table.rfind("setting,eta_kind,W,K,trials,successes,min_mse_median\n", 0) == 0, "table header");
  }

  // zero-trial run: header-only table
  check(run(finr + " exact-recovery --out " + (root / "rec0").string() + rec_args + " --set trials=0") == 0,
        "zero-trial run");
  {
    const std::string table = slurp(root / "rec0" / "trials.csv");
    check(table == "setting,eta_kind,W,K,trial,seed,success,min_mse,iters,error\n", "zero-trial header only");
  }

  // recover-phantom on the dot phantom at desk scale
  const std::string ph_args =
      " --phantom dot --set n=64 --set k=8 --set k0=8 --set width=12 --set n_disks=4"
      " --set schedule=200@1e-2,100@1e-3 --set lambdas=1e-6,1e-2";
  check(run(finr + " recover-phantom --out " + (root / "ph1").string() + ph_args) == 0, "recover-phantom runs");
  check(run(finr + " recover-phantom --out " + (root / "ph2").string() + ph_args) == 0, "recover-phantom rerun");
  for (const char* name : {"metrics.csv", "unit_size_hist.csv", "near_zero_mass.csv"})
    check(same_bytes(root / "ph1" / name, root / "ph2" / name), std::string(name) + " deterministic");
  for (const char* name : {"ground_truth.ftimg", "zero_fill.ftimg", "inr.ftimg", "absdiff.ftimg"})
    check(same_bytes(root / "ph1" / name, root / "ph2" / name), std::string(name) + " deterministic");
  for (const char* name : {"ground_truth.pgm", "inr.pgm"})
    check(fs::exists(root / "ph1" / name), std::string(name) + " exists");

  // ground-truth raster of a teacher-file phantom round-trips losslessly
  {
    const std::string raster_cmd = finr + " rasterize --params " + (root / "ph1" / "phantom_params.csv").string() +
                                   " --out " + (root / "raster").string() + " --set n=64";
    check(run(raster_cmd) == 0, "rasterize teacher params");
    check(same_bytes(root / "raster" / "image.ftimg", root / "ph1" / "ground_truth.ftimg"),
          "teacher-file raster round trip");
  }

  // certify modes
  check(run(finr + " certify --mode thm1 --out " + (root / "c1").string() +
            " --set k0=1 --set k=3 --set n=64 --set probes=200") == 0,
        "certify thm1");
  check(fs::exists(root / "c1" / "certificate_report.txt"), "thm1 report exists");
  check(run(finr + " certify --mode thm2 --out " + (root / "c2").string() +
            " --set s=1 --set n=64 --set probes=200") == 0,
        "certify thm2");
  check(run(finr + " nullspace --out " + (root / "c3").string() + " --set n=1024") == 0, "nullspace");
  check(fs::exists(root / "c3" / "singular_values.csv"), "singular values csv");
  check(run(finr + " oracle --out " + (root / "c4").string() + " --set n=64 --set m=24") == 0, "oracle");
  {
    const std::string rep = slurp(root / "c4" / "oracle_report.txt");
    check(rep.find("converged = 1") != std::string::npos, "oracle converged");
  }

  // deterministic certify rerun
  check(run(finr + " certify --mode thm1 --out " + (root / "c1b").string() +
            " --set k0=1 --set k=3 --set n=64 --set probes=200") == 0,
        "certify thm1 rerun");
  check(same_bytes(root / "c1" / "probes.csv", root / "c1b" / "probes.csv"), "probe csv deterministic");

  // rasterize the built-in head phantom with spectrum dump
  check(run(finr + " rasterize --sl --out " + (root / "sl").string() + " --set n=64 --spectrum-k 8") == 0,
        "rasterize sl");
  check(fs::exists(root / "sl" / "zero_fill.ftimg"), "sl zero fill");
  {
    const std::string spec = slurp(root / "sl" / "spectrum.csv");
    check(spec.rfind("k1,k2,re,im\n", 0) == 0, "spectrum csv header");
  }

  // exit codes: unknown config key -> 2; hypothesis violation -> 3
  check(run(finr + " exact-recovery --out " + (root / "bad").string() + " --set not_a_key=1") == 2,
        "unknown key exits 2");
  check(run(finr + " certify --mode thm1 --out " + (root / "bad2").string() + " --set k0=2 --set k=4") == 3,
        "hypothesis violation exits 3");
  check(run(finr + " certify --mode bogus --out " + (root / "bad3").string()) == 2, "bad mode exits 2");

  if (failures == 0) {
    std::cout << "test_cli: all checks passed\n";
    fs::remove_all(root);
    return 0;
  }
  std::cerr << "test_cli: " << failures << " check(s) failed\n";
  return 1;
}
