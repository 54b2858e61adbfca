#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "acfclust/acf.hpp"
#include "acfclust/cluster.hpp"
#include "acfclust/clustsim.hpp"
#include "acfclust/stats.hpp"
#include "acfclust/volgrid.hpp"

namespace acfclust {

enum class MaskKind { Full, Ellipsoid };

struct ExperimentConfig {
  std::size_t n_subjects = 78;
  VolumeGrid native_grid = VolumeGrid({16, 16, 12}, {3.0, 3.0, 4.0});
  std::size_t n_frames = 60;
  AcfParams subject_acf{0.5, 2.2, 2.8};
  double acf_jitter = 0.1;  // b and c scaled by U(1 - j, 1 + j) per subject
  std::vector<double> resample_sizes{3.0, 2.0, 1.0};
  double blur_fwhm_mm = 8.0;
  std::vector<std::string> conditions{"pamenc", "rest"};
  MaskKind mask = MaskKind::Full;
  std::vector<double> pthr_list{0.01, 0.005, 0.002, 0.001};
  double athr = 0.05;
  Connectivity conn = Connectivity::NN2;
  Sidedness sidedness = Sidedness::OneSided;
  std::size_t n_iter = 2000;
  double report_pthr = 0.001;
  double r_max_mm = 20.0;
  std::uint64_t master_seed = 20181;
};

// Throws Error(Config) on inconsistent settings; sorts resample sizes descending.
void validate(ExperimentConfig& config);

// key = value lines, '#' comments. Unknown keys and malformed values are
// collected and reported together in one Config error.
ExperimentConfig parse_experiment_config(std::istream& is);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void write_experiment_config(std::ostream& os, const ExperimentConfig& config);

struct CellResult {
  double delta_mm = 0.0;
  bool ok = false;
  std::string error;
  AcfParams fit;
  double fwhm_mm = 0.0;
  std::size_t mask_count = 0;
  std::vector<ThresholdRow> thresholds;

  const ThresholdRow* at_pthr(double p) const noexcept;
};

struct SubjectResult {
  std::size_t subject = 0;
  std::string condition;
  AcfParams acf;  // generating parameters
  std::vector<CellResult> cells;  // one per resample size, same order as the config

  bool complete() const noexcept;
};

AcfParams subject_acf(const ExperimentConfig& config, std::size_t subject);

// One synthetic subject under one condition.
SubjectResult run_subject(const ExperimentConfig& config, std::size_t subject,
                          std::size_t condition);

struct DeltaSpec {
  std::size_t later = 0;    // index into resample sizes
  std::size_t earlier = 0;  // delta = value(later) - value(earlier)
};

// Consecutive differences, then last minus first (for {3,2,1}: 2-3, 1-2, 1-3).
std::vector<DeltaSpec> delta_specs(std::size_t n_sizes);

struct ConditionSummary {
  std::string condition;
  std::size_t completed = 0;
  std::vector<double> mean_fwhm;       // per resample size
  std::vector<double> mean_threshold;  // mm^3 at report_pthr, per resample size
  std::vector<DeltaStats> fwhm_delta;
  std::vector<DeltaStats> threshold_delta;
};

struct PairedComparison {
  std::optional<PairedTResult> result;
  std::string error;
};

struct StabilityReport {
  std::vector<double> resample_sizes;
  std::vector<double> pthr_list;
  double report_pthr = 0.001;
  std::vector<std::string> conditions;
  std::vector<SubjectResult> subjects;  // condition-major, then subject index

  std::vector<ConditionSummary> summaries;
  // Between the first two conditions, per delta spec.
  std::vector<PairedComparison> fwhm_paired;
  std::vector<PairedComparison> threshold_paired;
};

StabilityReport aggregate(std::vector<SubjectResult> subjects, const std::vector<double>& resample_sizes,
                          const std::vector<double>& pthr_list, double report_pthr,
                          const std::vector<std::string>& conditions);

StabilityReport run_experiment(const ExperimentConfig& config, int jobs);

// Per-subject value of a quantity at each resample size: FWHM (mm) or the
// cluster threshold (mm^3) at report_pthr.
enum class Quantity { Fwhm, Threshold };
std::optional<std::vector<double>> subject_series(const SubjectResult& s, Quantity q,
                                                  double report_pthr);

void write_report_csv(std::ostream& os, const StabilityReport& report);
StabilityReport read_report_csv(std::istream& is);

void write_spaghetti_svg(std::ostream& os, const StabilityReport& report, const std::string& condition,
                         Quantity q);
void write_tables(std::ostream& os, const StabilityReport& report);

// report.csv, blurs.*, csiz.*, fig2_*.svg, fig3_*.svg, tables.txt
void emit_report(const StabilityReport& report, const std::filesystem::path& dir);
// SVGs and tables.txt only.
void emit_plots(const StabilityReport& report, const std::filesystem::path& dir);

}  // namespace acfclust
