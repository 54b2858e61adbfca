#include "acfclust/clustsim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "acfclust/error.hpp"
#include "acfclust/parallel.hpp"
#include "acfclust/rng.hpp"
#include "acfclust/simd.hpp"
#include "acfclust/synth.hpp"

namespace acfclust {

void validate(const SimConfig& c) {
  validate(c.params);
  require(c.mask.grid() == c.grid, ErrorKind::GridMismatch, "clustsim: mask grid differs from config grid");
  require(c.mask.in_count() > 0, ErrorKind::EmptyMask, "clustsim: mask is empty");
  require(!c.pthr_list.empty(), ErrorKind::Config, "clustsim: pthr list is empty");
  for (double p : c.pthr_list)
    require(p > 0.0 && p < 1.0, ErrorKind::Config, fmt::format("clustsim: pthr {} outside (0, 1)", p));
  require(c.athr > 0.0 && c.athr < 1.0, ErrorKind::Config,
          fmt::format("clustsim: athr {} outside (0, 1)", c.athr));
  require(c.athr * static_cast<double>(c.n_iter) >= 1.0, ErrorKind::Config,
          fmt::format("clustsim: athr * niter = {} must be >= 1",
                      c.athr * static_cast<double>(c.n_iter)));
  require(static_cast<double>(c.n_iter) >= std::ceil(1.0 / c.athr), ErrorKind::Config,
          "clustsim: niter must be >= ceil(1 / athr)");
}

namespace {

struct Worker {
  ClusterSizer sizer;
  std::vector<double> a, b, vals;
  std::vector<std::uint8_t> supra;

  Worker(const VolumeGrid& g, Connectivity conn)
      : sizer(g.dims(), conn), a(g.size()), b(g.size()), vals(g.size()), supra(g.size()) {}
};

// In-mask RMS about zero; the synthesized field has zero mean by construction.
double in_mask_sd(std::span<const double> x, std::span<const std::uint8_t> mask,
                  std::vector<double>& scratch) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) scratch[n++] = x[i];
  const auto m = simd::moments(std::span<const double>(scratch.data(), n));
  return std::sqrt(m.sumsq / static_cast<double>(n));
}

}  // namespace

MaxSizeTable run_simulation(const SimConfig& config) {
  validate(config);
  const SynthPlan plan = build_plan(config.grid, config.params);
  const auto& flags = config.mask.flags();
  const bool two = config.sidedness == Sidedness::TwoSided;
  std::vector<double> z;
  for (double p : config.pthr_list) z.push_back(z_threshold_from_p(p, config.sidedness));

  MaxSizeTable table;
  table.pthr_list = config.pthr_list;
  table.n_iter = config.n_iter;
  table.clipped_fraction = plan.clipped_fraction;
  table.ill_conditioned = plan.ill_conditioned;
  table.sizes.assign(z.size(), std::vector<std::uint32_t>(config.n_iter));

  // Realization r comes from pair r/2 (real part for even r, imaginary for odd),
  // keyed by derive_seed(master, r/2); the pairing is fixed by index alone.
  const std::uint64_t first_pair = config.first_realization / 2;
  const std::uint64_t last = config.first_realization + config.n_iter;
  const std::uint64_t n_pairs = (last + 1) / 2 - first_pair;

  const int jobs = std::max(1, config.jobs);
  std::vector<std::unique_ptr<Worker>> workers(static_cast<std::size_t>(jobs));
  parallel_for(n_pairs, jobs, [&](std::size_t item, int w) {
    auto& slot = workers[static_cast<std::size_t>(w)];
    if (!slot) slot = std::make_unique<Worker>(config.grid, config.conn);
    Worker& wk = *slot;
    const std::uint64_t pair = first_pair + item;
    synthesize_raw_pair(plan, derive_seed(config.master_seed, pair), wk.a, wk.b);
    for (int half = 0; half < 2; ++half) {
      const std::uint64_t r = 2 * pair + static_cast<std::uint64_t>(half);
      if (r < config.first_realization || r >= last) continue;
      const auto& x = half == 0 ? wk.a : wk.b;
      const double sd = in_mask_sd(x, flags, wk.vals);
      const std::size_t out = r - config.first_realization;
      for (std::size_t p = 0; p < z.size(); ++p) {
        const std::size_t count = simd::threshold_in_mask(x, flags, z[p] * sd, two, wk.supra);
        table.sizes[p][out] =
            count == 0 ? 0u : static_cast<std::uint32_t>(wk.sizer.max_size(wk.supra));
      }
    }
  });
  return table;
}

const ThresholdRow& ThresholdTable::at_pthr(double p) const {
  for (const auto& r : rows)
    if (r.pthr == p) return r;
  fail(ErrorKind::Precondition, fmt::format("threshold table has no row for pthr {}", p));
}

ThresholdTable threshold_from_table(const MaxSizeTable& table, double athr, std::size_t n_iter,
                                    double voxel_volume_mm3) {
  const double kf = std::floor(athr * static_cast<double>(n_iter));
  require(kf >= 1.0, ErrorKind::Config,
          fmt::format("athr * niter = {} gives no order statistic", athr * static_cast<double>(n_iter)));
  const auto k = static_cast<std::size_t>(kf);
  require(k <= n_iter, ErrorKind::Config, "athr * niter exceeds niter");

  ThresholdTable out;
  out.n_iter = n_iter;
  out.athr = athr;
  out.clipped_fraction = table.clipped_fraction;
  out.ill_conditioned = table.ill_conditioned;
  for (std::size_t p = 0; p < table.pthr_list.size(); ++p) {
    const auto& sizes = table.sizes[p];
    require(sizes.size() == n_iter, ErrorKind::Precondition,
            fmt::format("max-size list has {} entries, expected {}", sizes.size(), n_iter));
    // Histogram of max sizes; walk from the top to find the k-th largest.
    const std::uint32_t top = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
    std::vector<std::size_t> hist(static_cast<std::size_t>(top) + 1, 0);
    for (auto s : sizes) ++hist[s];
    std::size_t at_or_above = 0;
    std::uint64_t thr = 0;
    for (std::size_t v = hist.size(); v-- > 0;) {
      at_or_above += hist[v];
      if (at_or_above >= k) {
        thr = v;
        break;
      }
    }
    if (at_or_above > k) ++thr;
    out.rows.push_back({table.pthr_list[p], thr, static_cast<double>(thr) * voxel_volume_mm3});
  }
  return out;
}

ThresholdTable clustsim(const SimConfig& config) {
  const MaxSizeTable table = run_simulation(config);
  ThresholdTable out = threshold_from_table(table, config.athr, config.n_iter, config.grid.voxel_volume());
  out.params = config.params;
  out.fwhm_mm = fwhm_from_acf(config.params).fwhm_mm;
  out.grid = config.grid;
  out.mask_count = config.mask.in_count();
  out.seed = config.master_seed;
  out.conn = config.conn;
  out.sidedness = config.sidedness;
  return out;
}

double achieved_fpr(const std::vector<std::uint32_t>& max_sizes, std::uint64_t threshold_voxels) {
  require(!max_sizes.empty(), ErrorKind::InsufficientData, "achieved_fpr: no realizations");
  std::size_t hits = 0;
  for (auto s : max_sizes) hits += s >= threshold_voxels ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(max_sizes.size());
}

void write_threshold_csv(std::ostream& os, const ThresholdTable& t) {
  const auto& g = t.grid;
  fmt::print(os, "# a = {}\n# b = {}\n# c = {}\n# fwhm = {}\n", t.params.a, t.params.b, t.params.c,
             t.fwhm_mm);
  fmt::print(os, "# grid = {} {} {}\n# spacing = {} {} {}\n", g.nx(), g.ny(), g.nz(),
             g.spacing()[0], g.spacing()[1], g.spacing()[2]);
  fmt::print(os, "# mask_count = {}\n# niter = {}\n# athr = {}\n# seed = {}\n", t.mask_count,
             t.n_iter, t.athr, t.seed);
  fmt::print(os, "# nn = {}\n# sided = {}\n# clipped_fraction = {}\n", to_string(t.conn),
             to_string(t.sidedness), t.clipped_fraction);
  if (t.ill_conditioned) os << "# warning = ill-conditioned ACF (clipped spectral mass > 1%)\n";
  os << "pthr,threshold_voxels,threshold_mm3\n";
  for (const auto& r : t.rows) fmt::print(os, "{},{},{}\n", r.pthr, r.voxels, r.mm3);
}

}  // namespace acfclust
