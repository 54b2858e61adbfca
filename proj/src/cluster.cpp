#include "acfclust/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "acfclust/error.hpp"
#include "acfclust/simd.hpp"

namespace acfclust {

namespace {

// Wichura's AS241 (PPND16): inverse standard normal CDF, ~1e-16 relative.
double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

std::vector<Index3> backward_offsets(Connectivity conn) {
  std::vector<Index3> offs;
  for (int dz = -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        // Only neighbors earlier in linear order.
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        const int l1 = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (l1 <= static_cast<int>(conn)) offs.push_back({dx, dy, dz});
      }
  return offs;
}

}  // namespace

const char* to_string(Connectivity c) noexcept {
  switch (c) {
    case Connectivity::NN1: return "NN1";
    case Connectivity::NN2: return "NN2";
    case Connectivity::NN3: return "NN3";
  }
  return "NN?";
}

const char* to_string(Sidedness s) noexcept {
  return s == Sidedness::OneSided ? "1sided" : "2sided";
}

double z_threshold_from_p(double p, Sidedness sidedness) {
  require(p > 0.0 && p < 1.0, ErrorKind::Domain,
          fmt::format("per-voxel p must lie in (0, 1) (got {})", p));
  const double tail = sidedness == Sidedness::OneSided ? p : 0.5 * p;
  return -normal_quantile(tail);
}

std::size_t ClusterSet::total_voxels() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

ClusterSizer::ClusterSizer(const Index3& dims, Connectivity conn)
    : dims_(dims), back_offsets_(backward_offsets(conn)) {
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  require(n < static_cast<std::size_t>(INT32_MAX), ErrorKind::Precondition,
          "grid too large for cluster labelling");
  parent_.resize(n);
  size_.resize(n);
}

std::int32_t ClusterSizer::find(std::int32_t x) noexcept {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

std::size_t ClusterSizer::label(std::span<const std::uint8_t> supra) {
  const int nx = dims_[0], ny = dims_[1], nz = dims_[2];
  std::size_t best = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const auto v = static_cast<std::int32_t>((static_cast<std::size_t>(k) * ny + j) * nx + i);
        if (!supra[v]) continue;
        parent_[v] = v;
        size_[v] = 1;
        std::int32_t root = v;
        for (const auto& o : back_offsets_) {
          const int ii = i + o[0], jj = j + o[1], kk = k + o[2];
          if (ii < 0 || ii >= nx || jj < 0 || jj >= ny || kk < 0) continue;
          const auto u = static_cast<std::int32_t>((static_cast<std::size_t>(kk) * ny + jj) * nx + ii);
          if (!supra[u]) continue;
          const std::int32_t ru = find(u);
          if (ru == root) continue;
          // Union by size; the smaller linear index wins ties so roots are stable.
          std::int32_t big = ru, small = root;
          if (size_[root] > size_[ru] || (size_[root] == size_[ru] && root < ru)) std::swap(big, small);
          parent_[small] = big;
          size_[big] += size_[small];
          root = big;
        }
        best = std::max(best, static_cast<std::size_t>(size_[root]));
      }
  return best;
}

std::size_t ClusterSizer::max_size(std::span<const std::uint8_t> supra) {
  require(supra.size() == parent_.size(), ErrorKind::GridMismatch,
          "cluster sizer: volume size mismatch");
  return label(supra);
}

namespace {

std::vector<std::uint8_t> suprathreshold(const ScalarField& field, const Mask& mask, double z_thr,
                                         Sidedness sidedness) {
  require(field.grid() == mask.grid(), ErrorKind::GridMismatch,
          "clustering: field and mask grids differ");
  require(z_thr >= 0.0, ErrorKind::Precondition, "clustering: threshold must be >= 0");
  std::vector<std::uint8_t> supra(field.grid().size());
  simd::threshold_in_mask(field.values(), mask.flags(), z_thr, sidedness == Sidedness::TwoSided,
                          supra);
  return supra;
}

}  // namespace

ClusterSet find_clusters(const ScalarField& field, const Mask& mask, double z_thr,
                         Connectivity conn, Sidedness sidedness) {
  const auto supra = suprathreshold(field, mask, z_thr, sidedness);
  ClusterSizer sizer(field.grid().dims(), conn);
  sizer.label(supra);

  std::vector<std::int32_t> slot(supra.size(), -1);
  ClusterSet set;
  const bool two = sidedness == Sidedness::TwoSided;
  for (std::size_t v = 0; v < supra.size(); ++v) {
    if (!supra[v]) continue;
    const std::int32_t root = sizer.find(static_cast<std::int32_t>(v));
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int32_t>(set.clusters.size());
      set.clusters.push_back({{}, v});
    }
    Cluster& c = set.clusters[static_cast<std::size_t>(slot[root])];
    c.voxels.push_back(v);
    const double cur = two ? std::fabs(field[v]) : field[v];
    const double peak = two ? std::fabs(field[c.peak_index]) : field[c.peak_index];
    if (cur > peak) c.peak_index = v;
  }
  std::stable_sort(set.clusters.begin(), set.clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.voxels.front() < b.voxels.front();
  });
  return set;
}

std::size_t max_cluster_size(const ScalarField& field, const Mask& mask, double z_thr,
                             Connectivity conn, Sidedness sidedness) {
  const auto supra = suprathreshold(field, mask, z_thr, sidedness);
  ClusterSizer sizer(field.grid().dims(), conn);
  return sizer.max_size(supra);
}

void write_clusters_csv(std::ostream& os, const ClusterSet& set) {
  os << "cluster_id,size,peak_index\n";
  for (std::size_t i = 0; i < set.clusters.size(); ++i) {
    fmt::print(os, "{},{},{}\n", i + 1, set.clusters[i].size(), set.clusters[i].peak_index);
  }
}

}  // namespace acfclust
