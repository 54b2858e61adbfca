#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "acfclust/acf.hpp"
#include "acfclust/nifti.hpp"
#include "acfclust/synth.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using namespace acfclust;

namespace {

struct RunResult {
  int code;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::path(ACFCLUST_BINARY_DIR) / "cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI in-process with stderr captured into a file.
RunResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "acfclust");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  const fs::path log = work_dir() / "stderr.txt";
  std::fflush(stderr);
  const int saved = dup(2);
  std::FILE* f = std::fopen(log.c_str(), "w");
  dup2(fileno(f), 2);
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::fflush(stderr);
  dup2(saved, 2);
  close(saved);
  std::fclose(f);
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {code, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> read_params(const fs::path& p) {
  std::ifstream in(p);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  std::vector<double> v;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
  return v;
}

// threshold_mm3 column of a threshold CSV, keyed by row order.
std::vector<double> read_mm3(const fs::path& p) {
  std::ifstream in(p);
  std::vector<double> out;
  bool body = false;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("pthr,", 0) == 0) {
      body = true;
      continue;
    }
    if (!body || line.empty()) continue;
    out.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  }
  return out;
}

fs::path write_series(const std::string& name, const AcfParams& p, std::size_t frames) {
  const auto g = VolumeGrid::isotropic({32, 32, 32}, 2.0);
  const SynthPlan plan = build_plan(g, p);
  std::vector<ScalarField> f;
  for (std::uint64_t s = 0; f.size() < frames; ++s) {
    auto [a, b] = synthesize_pair(plan, 700 + s);
    f.push_back(std::move(a));
    f.push_back(std::move(b));
  }
  const fs::path out = work_dir() / name;
  write_nifti(out, Series4D(std::move(f)));
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 1, help exits 0") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"simulate", "--acf", "0.5", "3", "4", "--bogus"}).code == 1);
  CHECK(run({"simulate"}).code == 1);
  CHECK(run({"--help"}).code == 0);
  const RunResult h = run({"simulate", "--help"});
  CHECK(h.code == 0);
}

TEST_CASE("simulate: validation, determinism and physical units") {
  const auto dir = work_dir();
  const RunResult bad = run({"simulate", "--acf", "0.5", "3", "4", "--grid", "8", "8", "8", "--athr", "0.05",
                             "--niter", "10", "--out", (dir / "bad.csv").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("athr") != std::string::npos);
  CHECK(run({"simulate", "--acf", "1.5", "3", "4", "--grid", "8", "8", "8"}).code == 1);

  const RunResult nomask = run({"simulate", "--acf", "0.5", "3", "4", "--mask", (dir / "absent_mask.nii").string()});
  CHECK(nomask.code == 2);
  CHECK(nomask.err.find("absent_mask.nii") != std::string::npos);

  const std::vector<std::string> base{"simulate", "--acf", "0.5", "3", "4", "--grid", "20", "20", "20",
                                      "--niter", "60", "--seed", "42"};
  auto args1 = base;
  args1.insert(args1.end(), {"--out", (dir / "sim1.csv").string()});
  auto args2 = base;
  args2.insert(args2.end(), {"--out", (dir / "sim2.csv").string(), "--jobs", "2"});
  REQUIRE(run(args1).code == 0);
  const RunResult r2 = run(args2);
  REQUIRE(r2.code == 0);
  CHECK(r2.err.find("seed 42") != std::string::npos);
  const std::string s1 = slurp(dir / "sim1.csv");
  CHECK(s1 == slurp(dir / "sim2.csv"));
  CHECK(s1.find("pthr,threshold_voxels,threshold_mm3\n0.01,") != std::string::npos);
  CHECK(s1.find("\n0.001,") != std::string::npos);
  CHECK(s1.find("# nn = NN2") != std::string::npos);
  CHECK(s1.find("# sided = 1sided") != std::string::npos);
  CHECK(s1.find("# athr = 0.05") != std::string::npos);

  // Same physical box and ACF at 2 mm and 1 mm voxels, summed over three seeds.
  std::vector<double> coarse_sum(2, 0.0), fine_sum(2, 0.0);
  for (const char* seed : {"1", "2", "3"}) {
    const std::vector<std::string> common{"simulate", "--acf", "0.5", "3", "4", "--niter", "2000", "--seed", seed,
                                          "--pthr", "0.01", "0.001"};
    auto coarse = common;
    coarse.insert(coarse.end(), {"--grid", "24", "24", "24", "--spacing", "2", "2", "2", "--out",
                                 (dir / "coarse.csv").string()});
    auto fine = common;
    fine.insert(fine.end(), {"--grid", "48", "48", "48", "--spacing", "1", "1", "1", "--out",
                             (dir / "fine.csv").string()});
    REQUIRE(run(coarse).code == 0);
    REQUIRE(run(fine).code == 0);
    const auto c = read_mm3(dir / "coarse.csv");
    const auto f = read_mm3(dir / "fine.csv");
    REQUIRE(c.size() == 2);
    REQUIRE(f.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      coarse_sum[i] += c[i];
      fine_sum[i] += f[i];
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    INFO("coarse ", coarse_sum[i] / 3, " fine ", fine_sum[i] / 3);
    CHECK(std::fabs(coarse_sum[i] - fine_sum[i]) < 0.15 * std::max(coarse_sum[i], fine_sum[i]));
  }
}

TEST_CASE("estimate: end to end against the analytic FWHM") {
  const auto dir = work_dir();
  const AcfParams p{0.5, 3.0, 4.0};
  const fs::path in = write_series("mixed.nii", p, 200);
  const RunResult r = run({"estimate", in.string(), "--out", (dir / "mixed").string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto v = read_params(dir / "mixed.params.csv");
  REQUIRE(v.size() == 4);
  const double truth = fwhm_from_acf(p).fwhm_mm;
  CHECK(std::fabs(v[3] - truth) < 0.1 * truth);
  CHECK(slurp(dir / "mixed.acf.csv").rfind("radius_mm,mean_corr,pair_count,fit\n0,1,", 0) == 0);

  const RunResult nomask = run({"estimate", in.string(), "--mask", (dir / "nope.nii").string()});
  CHECK(nomask.code == 2);
  CHECK(nomask.err.find("nope.nii") != std::string::npos);
  CHECK(run({"estimate", (dir / "missing_input.nii").string()}).code == 2);

  const auto other = VolumeGrid::isotropic({8, 8, 8}, 2.0);
  write_nifti(dir / "small_mask.nii", Mask::full(other));
  CHECK(run({"estimate", in.string(), "--mask", (dir / "small_mask.nii").string()}).code == 2);
}

TEST_CASE("estimate: classic and mixed estimators agree on Gaussian data") {
  const auto dir = work_dir();
  const fs::path in = write_series("gauss.nii", {1.0, 2.5, 1.0}, 40);
  REQUIRE(run({"estimate", in.string(), "--out", (dir / "g_mixed").string()}).code == 0);
  REQUIRE(run({"estimate", in.string(), "--gaussian-only", "--out", (dir / "g_classic").string()}).code == 0);
  const auto m = read_params(dir / "g_mixed.params.csv");
  const auto c = read_params(dir / "g_classic.params.csv");
  CHECK(std::fabs(m[3] - c[3]) < 0.05 * m[3]);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == c[2]);
}

TEST_CASE("stability and plot") {
  const auto dir = work_dir();
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "n_subjects = 2\nwibble = 3\nnn = 9\n";
  }
  const RunResult bad = run({"stability", (dir / "bad.cfg").string(), "--out", (dir / "bad_out").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("wibble") != std::string::npos);
  CHECK(bad.err.find("nn") != std::string::npos);

  {
    std::ofstream cfg(dir / "tiny.cfg");
    cfg << "n_subjects = 2\nnative_dims = 16 16 16\nnative_spacing = 3 3 3\nn_frames = 8\n"
           "n_iter = 200\nr_max_mm = 12\nseed = 5\n";
  }
  const fs::path out = dir / "tiny_out";
  const RunResult r = run({"stability", (dir / "tiny.cfg").string(), "--out", out.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.err.find("seed = 5") != std::string::npos);
  std::vector<std::string> files{"report.csv", "tables.txt"};
  for (const char* cond : {"pamenc", "rest"}) {
    files.push_back(std::string("fig2_") + cond + ".svg");
    files.push_back(std::string("fig3_") + cond + ".svg");
    for (int d : {3, 2, 1}) {
      files.push_back(std::string("blurs.") + cond + ".R" + std::to_string(d) + ".csv");
      files.push_back(std::string("csiz.") + cond + ".R" + std::to_string(d) + ".csv");
    }
  }
  for (const auto& f : files) {
    INFO(f);
    CHECK(fs::exists(out / f));
  }
  const std::string tables = slurp(out / "tables.txt");
  const auto a = tables.find("W(2) - W(3)"), b = tables.find("W(1) - W(2)"), c = tables.find("W(1) - W(3)");
  CHECK(a < b);
  CHECK(b < c);
  CHECK(c != std::string::npos);

  const std::string fig = slurp(out / "fig2_pamenc.svg");
  REQUIRE(run({"plot", (out / "report.csv").string()}).code == 0);
  CHECK(slurp(out / "fig2_pamenc.svg") == fig);
  const std::string again = slurp(out / "fig3_rest.svg");
  REQUIRE(run({"plot", (out / "report.csv").string()}).code == 0);
  CHECK(slurp(out / "fig3_rest.svg") == again);
  CHECK(slurp(out / "tables.txt") == tables);
  CHECK(run({"plot", (dir / "none.csv").string()}).code == 2);
}
