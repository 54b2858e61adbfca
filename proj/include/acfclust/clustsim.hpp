#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "acfclust/acf.hpp"
#include "acfclust/cluster.hpp"
#include "acfclust/volgrid.hpp"

namespace acfclust {

struct SimConfig {
  AcfParams params;
  VolumeGrid grid;
  Mask mask;
  std::vector<double> pthr_list{0.01, 0.005, 0.002, 0.001};
  double athr = 0.05;
  Connectivity conn = Connectivity::NN2;
  Sidedness sidedness = Sidedness::OneSided;
  std::size_t n_iter = 10000;
  std::uint64_t master_seed = 0;
  // Realization indices run over [first_realization, first_realization + n_iter);
  // a non-zero offset gives draws disjoint from a default run.
  std::uint64_t first_realization = 0;
  int jobs = 1;

  SimConfig(const AcfParams& p, const Mask& m) : params(p), grid(m.grid()), mask(m) {}
};

void validate(const SimConfig& config);

struct MaxSizeTable {
  std::vector<double> pthr_list;
  // sizes[p][i]: largest cluster (voxels) in realization i at pthr_list[p].
  std::vector<std::vector<std::uint32_t>> sizes;
  std::size_t n_iter = 0;
  double clipped_fraction = 0.0;
  bool ill_conditioned = false;
};

MaxSizeTable run_simulation(const SimConfig& config);

struct ThresholdRow {
  double pthr = 0.0;
  std::uint64_t voxels = 0;
  double mm3 = 0.0;
};

struct ThresholdTable {
  std::vector<ThresholdRow> rows;
  // Metadata echoed into the CSV header block.
  AcfParams params;
  double fwhm_mm = 0.0;
  VolumeGrid grid = VolumeGrid::isotropic({1, 1, 1}, 1.0);
  std::size_t mask_count = 0;
  std::size_t n_iter = 0;
  double athr = 0.0;
  std::uint64_t seed = 0;
  Connectivity conn = Connectivity::NN2;
  Sidedness sidedness = Sidedness::OneSided;
  double clipped_fraction = 0.0;
  bool ill_conditioned = false;

  const ThresholdRow& at_pthr(double p) const;
};

// k = floor(athr * n_iter); threshold = k-th largest max size, plus one when
// more than k realizations reach it. Voxel volume converts to mm^3.
ThresholdTable threshold_from_table(const MaxSizeTable& table, double athr, std::size_t n_iter,
                                    double voxel_volume_mm3);

ThresholdTable clustsim(const SimConfig& config);

// Fraction of realizations whose max cluster size reaches `threshold_voxels`.
double achieved_fpr(const std::vector<std::uint32_t>& max_sizes, std::uint64_t threshold_voxels);

void write_threshold_csv(std::ostream& os, const ThresholdTable& table);

}  // namespace acfclust
