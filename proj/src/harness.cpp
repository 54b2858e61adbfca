#include "acfclust/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <mutex>

#include <fmt/format.h>

#include "acfclust/error.hpp"
#include "acfclust/parallel.hpp"
#include "acfclust/rng.hpp"
#include "acfclust/synth.hpp"

namespace acfclust {

namespace {

// Fixed-point rounding to 2^-32 mm. Differences and sums of such values are
// exact in double, so per-subject deltas telescope without rounding error.
double quantize(double x) { return std::ldexp(std::nearbyint(std::ldexp(x, 32)), -32); }

constexpr std::uint64_t kClustsimStream = 1'000'000;

}  // namespace

const ThresholdRow* CellResult::at_pthr(double p) const noexcept {
  for (const auto& r : thresholds)
    if (r.pthr == p) return &r;
  return nullptr;
}

bool SubjectResult::complete() const noexcept {
  return !cells.empty() && std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

AcfParams subject_acf(const ExperimentConfig& config, std::size_t subject) {
  const CounterRng rng(derive_seed(config.master_seed, subject), 7);
  const auto u = rng.uniform_pair(0);
  const double j = config.acf_jitter;
  return {config.subject_acf.a, config.subject_acf.b * (1.0 - j + 2.0 * j * u[0]),
          config.subject_acf.c * (1.0 - j + 2.0 * j * u[1])};
}

SubjectResult run_subject(const ExperimentConfig& config, std::size_t subject,
                          std::size_t condition) {
  SubjectResult out;
  out.subject = subject;
  out.condition = config.conditions.at(condition);
  out.acf = subject_acf(config, subject);
  const std::uint64_t cond_seed =
      derive_seed(derive_seed(config.master_seed, subject), 1 + condition);

  const VolumeGrid& native = config.native_grid;
  const Mask native_mask =
      config.mask == MaskKind::Full ? Mask::full(native) : Mask::ellipsoid(native);

  std::vector<ScalarField> frames;
  frames.reserve(config.n_frames + 1);
  const SynthPlan plan = build_plan(native, out.acf);
  for (std::size_t pair = 0; frames.size() < config.n_frames; ++pair) {
    auto [f0, f1] = synthesize_pair(plan, derive_seed(cond_seed, pair));
    frames.push_back(std::move(f0));
    if (frames.size() < config.n_frames) frames.push_back(std::move(f1));
  }

  for (std::size_t di = 0; di < config.resample_sizes.size(); ++di) {
    CellResult cell;
    cell.delta_mm = config.resample_sizes[di];
    try {
      const VolumeGrid grid = native.resampled_within(cell.delta_mm);
      const Mask mask = resample_mask(native_mask, grid);
      cell.mask_count = mask.in_count();
      std::vector<ScalarField> work;
      work.reserve(frames.size());
      for (const auto& f : frames) {
        ScalarField r = resample(f, grid, Interp::Trilinear).field;
        work.push_back(config.blur_fwhm_mm > 0.0 ? gaussian_blur_in_mask(r, config.blur_fwhm_mm, mask)
                                                 : std::move(r));
      }
      SampleOptions so;
      so.r_max_mm = config.r_max_mm;
      const AcfSample sample = sample_acf(Series4D(std::move(work)), mask, so);
      const AcfFit fit = fit_acf(sample);
      cell.fit = fit.params;
      cell.fwhm_mm = quantize(fwhm_from_acf(fit.params).fwhm_mm);

      SimConfig sim(fit.params, mask);
      sim.pthr_list = config.pthr_list;
      sim.athr = config.athr;
      sim.conn = config.conn;
      sim.sidedness = config.sidedness;
      sim.n_iter = config.n_iter;
      sim.master_seed = derive_seed(cond_seed, kClustsimStream + di);
      sim.jobs = 1;
      cell.thresholds = clustsim(sim).rows;
      cell.ok = true;
    } catch (const Error& e) {
      cell.ok = false;
      cell.error = fmt::format("{}: {}", to_string(e.kind()), e.what());
    }
    out.cells.push_back(std::move(cell));
  }
  return out;
}

std::vector<DeltaSpec> delta_specs(std::size_t n_sizes) {
  std::vector<DeltaSpec> specs;
  for (std::size_t i = 1; i < n_sizes; ++i) specs.push_back({i, i - 1});
  if (n_sizes > 2) specs.push_back({n_sizes - 1, 0});
  return specs;
}

std::optional<std::vector<double>> subject_series(const SubjectResult& s, Quantity q,
                                                  double report_pthr) {
  if (!s.complete()) return std::nullopt;
  std::vector<double> v;
  for (const auto& c : s.cells) {
    if (q == Quantity::Fwhm) {
      v.push_back(c.fwhm_mm);
    } else {
      const ThresholdRow* r = c.at_pthr(report_pthr);
      if (!r) return std::nullopt;
      v.push_back(r->mm3);
    }
  }
  return v;
}

StabilityReport aggregate(std::vector<SubjectResult> subjects, const std::vector<double>& resample_sizes,
                          const std::vector<double>& pthr_list, double report_pthr,
                          const std::vector<std::string>& conditions) {
  StabilityReport rep;
  rep.resample_sizes = resample_sizes;
  rep.pthr_list = pthr_list;
  rep.report_pthr = report_pthr;
  rep.conditions = conditions;
  rep.subjects = std::move(subjects);
  const auto specs = delta_specs(resample_sizes.size());
  const std::size_t nd = resample_sizes.size();

  // series[cond][quantity] -> (subject -> values)
  using SeriesMap = std::vector<std::pair<std::size_t, std::vector<double>>>;
  std::vector<std::array<SeriesMap, 2>> series(conditions.size());

  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    ConditionSummary sum;
    sum.condition = conditions[ci];
    for (const auto& s : rep.subjects) {
      if (s.condition != conditions[ci]) continue;
      auto w = subject_series(s, Quantity::Fwhm, report_pthr);
      auto t = subject_series(s, Quantity::Threshold, report_pthr);
      if (!w || !t) continue;
      series[ci][0].emplace_back(s.subject, std::move(*w));
      series[ci][1].emplace_back(s.subject, std::move(*t));
    }
    sum.completed = series[ci][0].size();
    require(sum.completed >= 2, ErrorKind::InsufficientData,
            fmt::format("aggregate: condition '{}' has {} complete subjects, need >= 2", conditions[ci],
                        sum.completed));
    for (int q = 0; q < 2; ++q) {
      auto& means = q == 0 ? sum.mean_fwhm : sum.mean_threshold;
      means.assign(nd, 0.0);
      for (const auto& [id, v] : series[ci][q])
        for (std::size_t d = 0; d < nd; ++d) means[d] += v[d];
      for (auto& m : means) m /= static_cast<double>(sum.completed);
      auto& stats = q == 0 ? sum.fwhm_delta : sum.threshold_delta;
      for (const auto& spec : specs) {
        std::vector<double> d;
        for (const auto& [id, v] : series[ci][q]) d.push_back(v[spec.later] - v[spec.earlier]);
        stats.push_back(delta_stats(d));
      }
    }
    rep.summaries.push_back(std::move(sum));
  }

  if (conditions.size() >= 2) {
    for (int q = 0; q < 2; ++q) {
      auto& dest = q == 0 ? rep.fwhm_paired : rep.threshold_paired;
      for (const auto& spec : specs) {
        std::vector<double> x, y;
        for (const auto& [id, v] : series[0][q]) {
          const auto it = std::find_if(series[1][q].begin(), series[1][q].end(),
                                       [id](const auto& e) { return e.first == id; });
          if (it == series[1][q].end()) continue;
          x.push_back(v[spec.later] - v[spec.earlier]);
          y.push_back(it->second[spec.later] - it->second[spec.earlier]);
        }
        PairedComparison pc;
        try {
          pc.result = paired_t_test(x, y);
        } catch (const Error& e) {
          pc.error = e.what();
        }
        dest.push_back(std::move(pc));
      }
    }
  }
  return rep;
}

StabilityReport run_experiment(const ExperimentConfig& config_in, int jobs) {
  ExperimentConfig config = config_in;
  validate(config);
  const std::size_t ns = config.n_subjects;
  const std::size_t units = ns * config.conditions.size();
  std::vector<SubjectResult> results(units);
  std::mutex log_mutex;
  std::size_t done = 0;
  parallel_for(units, jobs, [&](std::size_t u, int) {
    results[u] = run_subject(config, u % ns, u / ns);
    std::lock_guard lock(log_mutex);
    ++done;
    const auto& r = results[u];
    fmt::print(stderr, "[{}/{}] subject {} {}: {}\n", done, units, r.subject, r.condition,
               r.complete() ? "ok" : "failed");
    for (const auto& c : r.cells)
      if (!c.ok) fmt::print(stderr, "  delta {} mm: {}\n", c.delta_mm, c.error);
  });
  return aggregate(std::move(results), config.resample_sizes, config.pthr_list, config.report_pthr,
                   config.conditions);
}

}  // namespace acfclust
