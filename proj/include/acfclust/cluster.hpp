#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "acfclust/volgrid.hpp"

namespace acfclust {

// NN1: 6 face neighbors, NN2: 18 face+edge, NN3: 26 face+edge+corner.
enum class Connectivity { NN1 = 1, NN2 = 2, NN3 = 3 };
enum class Sidedness { OneSided, TwoSided };

const char* to_string(Connectivity c) noexcept;
const char* to_string(Sidedness s) noexcept;

// Upper-tail standard normal quantile: P(Z >= z) = p (one-sided) or
// P(|Z| >= z) = p (two-sided).
double z_threshold_from_p(double p, Sidedness sidedness);

struct Cluster {
  std::vector<std::size_t> voxels;  // ascending linear indices
  std::size_t peak_index = 0;       // voxel with the largest (absolute, if two-sided) value

  std::size_t size() const noexcept { return voxels.size(); }
};

// Sorted by size descending, ties by smallest linear index.
struct ClusterSet {
  std::vector<Cluster> clusters;

  std::size_t total_voxels() const noexcept;
};

ClusterSet find_clusters(const ScalarField& field, const Mask& mask, double z_thr,
                         Connectivity conn, Sidedness sidedness);

std::size_t max_cluster_size(const ScalarField& field, const Mask& mask, double z_thr,
                             Connectivity conn, Sidedness sidedness);

// Union-find over a precomputed binary volume; the scratch buffer is reused
// between calls to avoid reallocation in Monte Carlo loops.
class ClusterSizer {
 public:
  ClusterSizer(const Index3& dims, Connectivity conn);

  std::size_t max_size(std::span<const std::uint8_t> supra);

 private:
  Index3 dims_;
  std::vector<Index3> back_offsets_;
  std::vector<std::int32_t> parent_;
  std::vector<std::int32_t> size_;

  friend ClusterSet find_clusters(const ScalarField&, const Mask&, double, Connectivity,
                                  Sidedness);
  std::size_t label(std::span<const std::uint8_t> supra);
  std::int32_t find(std::int32_t x) noexcept;
};

void write_clusters_csv(std::ostream& os, const ClusterSet& set);

}  // namespace acfclust
