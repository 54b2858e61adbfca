#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "acfclust/acf.hpp"
#include "acfclust/clustsim.hpp"
#include "acfclust/error.hpp"
#include "acfclust/harness.hpp"
#include "acfclust/nifti.hpp"
#include "acfclust/parallel.hpp"
#include "acfclust/simd.hpp"

namespace acfclust::cli {

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::Precondition:
    case ErrorKind::Domain:
    case ErrorKind::InvalidGrid:
      return 1;
    case ErrorKind::Io:
    case ErrorKind::GridMismatch:
    case ErrorKind::DegenerateData:
    case ErrorKind::EmptyMask:
    case ErrorKind::InsufficientData:
      return 2;
    case ErrorKind::FitFailure:
    case ErrorKind::InfiniteT:
      return 3;
  }
  return 1;
}

template <class... Args>
void log(fmt::format_string<Args...> f, Args&&... args) {
  fmt::print(stderr, "acfclust: {}\n", fmt::format(f, std::forward<Args>(args)...));
}

std::ofstream open_file(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::Io, fmt::format("cannot write '{}'", path));
  return os;
}

struct EstimateArgs {
  std::vector<std::string> inputs;
  std::string mask;
  double rmax = 20.0;
  double binwidth = 0.0;
  bool gaussian_only = false;
  std::string out = "acf";
  std::string method = "auto";
};

int cmd_estimate(const EstimateArgs& a) {
  std::vector<ScalarField> frames;
  for (const auto& in : a.inputs) {
    const Series4D s = read_nifti(in);
    if (!frames.empty())
      require(s.grid() == frames.front().grid(), ErrorKind::GridMismatch,
              fmt::format("'{}' does not share the grid of '{}'", in, a.inputs.front()));
    for (const auto& f : s.frames()) frames.push_back(f);
  }
  const Series4D series(std::move(frames));
  const Mask mask = a.mask.empty() ? Mask::full(series.grid()) : read_nifti_mask(a.mask);
  require(mask.grid() == series.grid(), ErrorKind::GridMismatch,
          fmt::format("mask '{}' does not share the data grid", a.mask));

  const auto& g = series.grid();
  log("estimate: {} input(s), {} frames, grid {}x{}x{} at {}x{}x{} mm, mask {} ({} voxels)", a.inputs.size(),
      series.length(), g.nx(), g.ny(), g.nz(), g.spacing()[0], g.spacing()[1], g.spacing()[2],
      a.mask.empty() ? "full" : a.mask, mask.in_count());
  log("estimate: rmax {} mm, binwidth {} mm, model {}, pair method {}", a.rmax,
      a.binwidth > 0 ? a.binwidth : g.min_spacing(), a.gaussian_only ? "gaussian" : "mixed", a.method);

  SampleOptions so;
  so.r_max_mm = a.rmax;
  if (a.binwidth > 0) so.bin_width_mm = a.binwidth;
  so.method = a.method == "direct" ? PairMethod::Direct : a.method == "fft" ? PairMethod::Fft : PairMethod::Auto;
  const AcfSample sample = sample_acf(series, mask, so);
  {
    auto os = open_file(a.out + ".acf.csv");
    write_acf_sample_csv(os, sample);
  }

  AcfParams params;
  double fwhm = 0.0;
  if (a.gaussian_only) {
    const FwhmEstimate est = gaussian_fwhm_classic(series, mask);
    if (est.warning) log("estimate: warning: some axes gave no usable lag-one correlation");
    fwhm = est.fwhm_mm;
    const double sigma = fwhm_to_sigma(fwhm);
    params = {1.0, sigma, sigma};
  } else {
    const AcfFit fit = fit_acf(sample);
    params = fit.params;
    fwhm = fwhm_from_acf(params).fwhm_mm;
    log("estimate: fit objective {} after {} iterations (restart {})", fit.objective, fit.iterations,
        fit.restart);
  }
  auto os = open_file(a.out + ".params.csv");
  write_acf_params_csv(os, params, fwhm);
  log("estimate: a = {}, b = {}, c = {}, fwhm = {} mm", params.a, params.b, params.c, fwhm);
  return 0;
}

struct SimulateArgs {
  std::vector<double> acf;
  std::vector<int> grid{64, 64, 64};
  std::vector<double> spacing{2.0, 2.0, 2.0};
  std::string mask = "full";
  std::vector<double> pthr{0.01, 0.005, 0.002, 0.001};
  double athr = 0.05;
  std::size_t niter = 10000;
  int nn = 2;
  int sided = 1;
  std::uint64_t seed = 0;
  std::string out = "-";
  int jobs = 1;
  bool grid_given = false;
};

int cmd_simulate(const SimulateArgs& a) {
  const AcfParams params{a.acf[0], a.acf[1], a.acf[2]};
  validate(params);
  const VolumeGrid flag_grid({a.grid[0], a.grid[1], a.grid[2]}, {a.spacing[0], a.spacing[1], a.spacing[2]});
  Mask mask = Mask::full(flag_grid);
  if (a.mask != "full") {
    mask = read_nifti_mask(a.mask);
    if (a.grid_given)
      require(mask.grid().dims() == flag_grid.dims() && mask.grid().spacing() == flag_grid.spacing(),
              ErrorKind::GridMismatch, fmt::format("mask '{}' does not match --grid/--spacing", a.mask));
  }
  SimConfig cfg(params, mask);
  cfg.pthr_list = a.pthr;
  cfg.athr = a.athr;
  cfg.n_iter = a.niter;
  cfg.conn = static_cast<Connectivity>(a.nn);
  cfg.sidedness = a.sided == 1 ? Sidedness::OneSided : Sidedness::TwoSided;
  cfg.master_seed = a.seed;
  cfg.jobs = a.jobs;
  validate(cfg);

  const auto& g = cfg.grid;
  log("simulate: acf {} {} {}, grid {}x{}x{} at {}x{}x{} mm, mask {} ({} voxels)", params.a, params.b,
      params.c, g.nx(), g.ny(), g.nz(), g.spacing()[0], g.spacing()[1], g.spacing()[2], a.mask,
      mask.in_count());
  log("simulate: pthr {}, athr {}, niter {}, {}, {}, seed {}, jobs {}, simd {}", fmt::join(a.pthr, " "), a.athr,
      a.niter, to_string(cfg.conn), to_string(cfg.sidedness), a.seed, a.jobs, simd::isa_name(simd::active_isa()));

  const ThresholdTable t = clustsim(cfg);
  if (t.ill_conditioned) log("simulate: warning: ill-conditioned ACF, clipped fraction {}", t.clipped_fraction);
  if (a.out == "-") {
    write_threshold_csv(std::cout, t);
  } else {
    auto os = open_file(a.out);
    write_threshold_csv(os, t);
  }
  return 0;
}

int cmd_stability(const std::string& config_path, const std::string& out, int jobs) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  std::ostringstream echo;
  write_experiment_config(echo, cfg);
  log("stability: config '{}', output '{}', jobs {}", config_path, out, jobs);
  std::istringstream lines(echo.str());
  for (std::string l; std::getline(lines, l);) log("  {}", l);
  const StabilityReport rep = run_experiment(cfg, jobs);
  emit_report(rep, out);
  log("stability: wrote {}", out);
  return 0;
}

int cmd_plot(const std::string& report_path, std::string out) {
  std::ifstream in(report_path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, fmt::format("cannot open report '{}'", report_path));
  if (out.empty()) out = std::filesystem::path(report_path).parent_path().string();
  if (out.empty()) out = ".";
  log("plot: report '{}', output '{}'", report_path, out);
  const StabilityReport rep = read_report_csv(in);
  emit_plots(rep, out);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Spatial ACF estimation, ACF-matched noise simulation and cluster-size thresholds"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate the mixed-model ACF and FWHM of NIfTI residuals");
  e->add_option("inputs", est.inputs, "Input NIfTI volume(s), frames concatenated in order")->required();
  e->add_option("--mask", est.mask, "Mask NIfTI (nonzero = in mask); default: full grid");
  e->add_option("--rmax", est.rmax, "Largest pair distance in mm")->check(CLI::PositiveNumber);
  e->add_option("--binwidth", est.binwidth, "Distance bin width in mm (default: smallest spacing)")
      ->check(CLI::PositiveNumber);
  e->add_flag("--gaussian-only", est.gaussian_only, "Use the classic lag-one Gaussian estimator for the FWHM");
  e->add_option("--method", est.method, "Pair accumulation route")->check(CLI::IsMember({"auto", "direct", "fft"}));
  e->add_option("--out", est.out, "Output prefix: <prefix>.params.csv and <prefix>.acf.csv");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Monte Carlo cluster-size thresholds for ACF-matched noise");
  s->add_option("--acf", sim.acf, "Mixed-model ACF parameters a b c")->expected(3)->required();
  auto* grid_opt = s->add_option("--grid", sim.grid, "Grid dimensions nx ny nz")->expected(3);
  s->add_option("--spacing", sim.spacing, "Voxel spacing dx dy dz in mm")->expected(3);
  s->add_option("--mask", sim.mask, "Mask NIfTI path, or 'full'");
  s->add_option("--pthr", sim.pthr, "Per-voxel p thresholds")->expected(1, 64);
  s->add_option("--athr", sim.athr, "Global false positive rate");
  s->add_option("--niter", sim.niter, "Number of realizations")->check(CLI::PositiveNumber);
  s->add_option("--nn", sim.nn, "Connectivity: 1 (faces), 2 (+edges), 3 (+corners)")->check(CLI::Range(1, 3));
  s->add_option("--sided", sim.sided, "1 or 2 sided thresholding")->check(CLI::IsMember({1, 2}));
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_option("--out", sim.out, "Output CSV path ('-' for standard output)");
  s->add_option("--jobs", sim.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string st_config, st_out = "stability_out";
  int st_jobs = 1;
  auto* st = app.add_subcommand("stability", "Run the resampling stability experiment");
  st->add_option("config", st_config, "Experiment config file (key = value lines)")->required();
  st->add_option("--out", st_out, "Output directory");
  st->add_option("--jobs", st_jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string pl_report, pl_out;
  auto* pl = app.add_subcommand("plot", "Regenerate figures and tables from a report.csv");
  pl->add_option("report", pl_report, "report.csv from a stability run")->required();
  pl->add_option("--out", pl_out, "Output directory (default: the report's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*e) return cmd_estimate(est);
    if (*s) {
      sim.grid_given = grid_opt->count() > 0;
      return cmd_simulate(sim);
    }
    if (*st) return cmd_stability(st_config, st_out, st_jobs);
    if (*pl) return cmd_plot(pl_report, pl_out);
  } catch (const Error& err) {
    fmt::print(stderr, "acfclust: error ({}): {}\n", to_string(err.kind()), err.what());
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    fmt::print(stderr, "acfclust: error: {}\n", err.what());
    return 1;
  }
  return 1;
}

}  // namespace acfclust::cli
