#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "acfclust/acf.hpp"
#include "acfclust/simd.hpp"
#include "fft.hpp"

namespace acfclust {

namespace {

struct Offset {
  int dx, dy, dz;
  double dist_mm;
  std::size_t bin;
};

struct Normalized {
  std::vector<std::uint8_t> valid;  // in mask and non-degenerate
  std::vector<double> mean;         // per voxel (temporal) or global
  std::vector<double> inv_norm;     // per voxel or global scale
  std::size_t used = 0;
  std::size_t excluded = 0;
  bool global = false;
};

Normalized normalize(const Series4D& series, const Mask& mask) {
  const std::size_t n = series.grid().size();
  const std::size_t nt = series.length();
  Normalized out;
  out.valid.assign(n, 0);
  if (nt == 1) {
    out.global = true;
    const auto x = series.frame(0).values();
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t v = 0; v < n; ++v)
      if (mask.contains(v)) {
        sum += x[v];
        ++cnt;
      }
    const double mean = sum / static_cast<double>(cnt);
    double ss = 0.0;
    for (std::size_t v = 0; v < n; ++v)
      if (mask.contains(v)) ss += (x[v] - mean) * (x[v] - mean);
    require(ss > 0.0, ErrorKind::DegenerateData, "sample_acf: single frame has zero variance");
    out.mean.assign(1, mean);
    out.inv_norm.assign(1, 1.0 / std::sqrt(ss / static_cast<double>(cnt)));
    for (std::size_t v = 0; v < n; ++v) out.valid[v] = mask.contains(v) ? 1 : 0;
    out.used = cnt;
    return out;
  }

  out.mean.assign(n, 0.0);
  out.inv_norm.assign(n, 0.0);
  std::vector<double> sum(n, 0.0);
  std::vector<double> sumsq(n, 0.0);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto x = series.frame(t).values();
    for (std::size_t v = 0; v < n; ++v) sum[v] += x[v];
  }
  for (std::size_t v = 0; v < n; ++v) out.mean[v] = sum[v] / static_cast<double>(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto x = series.frame(t).values();
    for (std::size_t v = 0; v < n; ++v) {
      const double c = x[v] - out.mean[v];
      sumsq[v] += c * c;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!mask.contains(v)) continue;
    const double scale = out.mean[v] * out.mean[v] * static_cast<double>(nt);
    if (sumsq[v] <= 1e-14 * scale || sumsq[v] == 0.0) {
      ++out.excluded;
      continue;
    }
    out.valid[v] = 1;
    out.inv_norm[v] = 1.0 / std::sqrt(sumsq[v]);
    ++out.used;
  }
  require(out.used > 0, ErrorKind::DegenerateData,
          "sample_acf: every in-mask voxel series has zero variance");
  return out;
}

double normalized_value(const Normalized& nz, double x, std::size_t v) {
  return nz.global ? (x - nz.mean[0]) * nz.inv_norm[0] : (x - nz.mean[v]) * nz.inv_norm[v];
}

std::vector<Offset> half_offsets(const VolumeGrid& grid, double r_max, double bin_width) {
  std::vector<Offset> offs;
  const auto& d = grid.spacing();
  const int rx = std::min(grid.nx() - 1, static_cast<int>(std::floor(r_max / d[0] + 1e-9)));
  const int ry = std::min(grid.ny() - 1, static_cast<int>(std::floor(r_max / d[1] + 1e-9)));
  const int rz = std::min(grid.nz() - 1, static_cast<int>(std::floor(r_max / d[2] + 1e-9)));
  for (int dz = 0; dz <= rz; ++dz)
    for (int dy = (dz == 0 ? 0 : -ry); dy <= ry; ++dy)
      for (int dx = (dz == 0 && dy == 0 ? 1 : -rx); dx <= rx; ++dx) {
        const double dist = std::sqrt(std::pow(dx * d[0], 2) + std::pow(dy * d[1], 2) +
                                      std::pow(dz * d[2], 2));
        if (dist > r_max * (1.0 + 1e-12)) continue;
        const auto bin = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(dist / bin_width + 0.5)));
        offs.push_back({dx, dy, dz, dist, bin});
      }
  return offs;
}

struct PairSums {
  std::vector<double> sum;
  std::vector<std::uint64_t> count;
};

PairSums direct_pairs(const Series4D& series, const Normalized& nz,
                      const std::vector<Offset>& offs) {
  const VolumeGrid& g = series.grid();
  const std::size_t n = g.size();
  const std::size_t nt = series.length();
  // Voxel-major copy so each pair is one contiguous dot product over time.
  std::vector<double> u(n * nt, 0.0);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto x = series.frame(t).values();
    for (std::size_t v = 0; v < n; ++v)
      if (nz.valid[v]) u[v * nt + t] = normalized_value(nz, x[v], v);
  }
  const std::span<const double> us(u);

  PairSums out{std::vector<double>(offs.size(), 0.0), std::vector<std::uint64_t>(offs.size(), 0)};
  for (std::size_t o = 0; o < offs.size(); ++o) {
    const Offset& off = offs[o];
    const int i0 = std::max(0, -off.dx), i1 = std::min(g.nx(), g.nx() - off.dx);
    const int j0 = std::max(0, -off.dy), j1 = std::min(g.ny(), g.ny() - off.dy);
    const int k0 = std::max(0, -off.dz), k1 = std::min(g.nz(), g.nz() - off.dz);
    double sum = 0.0;
    std::uint64_t count = 0;
    for (int k = k0; k < k1; ++k)
      for (int j = j0; j < j1; ++j)
        for (int i = i0; i < i1; ++i) {
          const std::size_t a = g.index(i, j, k);
          const std::size_t b = g.index(i + off.dx, j + off.dy, k + off.dz);
          if (!nz.valid[a] || !nz.valid[b]) continue;
          sum += simd::dot(us.subspan(a * nt, nt), us.subspan(b * nt, nt));
          ++count;
        }
    out.sum[o] = sum;
    out.count[o] = count;
  }
  return out;
}

// Autocorrelation of zero-padded volumes via |FFT|^2; padding each axis to at
// least n + max_lag keeps the lags of interest free of wraparound.
PairSums fft_pairs(const Series4D& series, const Normalized& nz, const std::vector<Offset>& offs,
                   const Index3& max_lag) {
  const VolumeGrid& g = series.grid();
  const Index3 pdims{fft::good_size(g.nx() + max_lag[0]), fft::good_size(g.ny() + max_lag[1]),
                     fft::good_size(g.nz() + max_lag[2])};
  const std::size_t preal = static_cast<std::size_t>(pdims[0]) * pdims[1] * pdims[2];
  const std::size_t phalf = fft::half_spectrum_size(pdims);

  fft::Buffer<double> real(preal);
  fft::Buffer<std::complex<double>> spec(phalf);
  std::vector<double> power(phalf, 0.0);

  auto load = [&](auto&& value_at) {
    std::fill(real.data(), real.data() + preal, 0.0);
    for (int k = 0; k < g.nz(); ++k)
      for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
          const std::size_t v = g.index(i, j, k);
          if (!nz.valid[v]) continue;
          real[(static_cast<std::size_t>(k) * pdims[1] + j) * pdims[0] + i] = value_at(v);
        }
  };
  auto autocorr = [&](std::vector<double>& pw) {
    fft::Buffer<std::complex<double>> s(phalf);
    for (std::size_t i = 0; i < phalf; ++i) s[i] = {pw[i], 0.0};
    fft::inverse_c2r(pdims, s.data(), real.data());
  };
  auto lag_index = [&](const Offset& o) {
    const int x = (o.dx + pdims[0]) % pdims[0];
    const int y = (o.dy + pdims[1]) % pdims[1];
    const int z = (o.dz + pdims[2]) % pdims[2];
    return (static_cast<std::size_t>(z) * pdims[1] + y) * pdims[0] + x;
  };

  for (std::size_t t = 0; t < series.length(); ++t) {
    const auto x = series.frame(t).values();
    load([&](std::size_t v) { return normalized_value(nz, x[v], v); });
    fft::forward_r2c(pdims, real.data(), spec.data());
    simd::accumulate_power(power, spec.span());
  }
  PairSums out{std::vector<double>(offs.size(), 0.0), std::vector<std::uint64_t>(offs.size(), 0)};
  const double inv_n = 1.0 / static_cast<double>(preal);
  autocorr(power);
  for (std::size_t o = 0; o < offs.size(); ++o) out.sum[o] = real[lag_index(offs[o])] * inv_n;

  load([](std::size_t) { return 1.0; });
  fft::forward_r2c(pdims, real.data(), spec.data());
  std::fill(power.begin(), power.end(), 0.0);
  simd::accumulate_power(power, spec.span());
  autocorr(power);
  for (std::size_t o = 0; o < offs.size(); ++o) {
    out.count[o] = static_cast<std::uint64_t>(std::llround(real[lag_index(offs[o])] * inv_n));
    if (out.count[o] == 0) out.sum[o] = 0.0;
  }
  return out;
}

}  // namespace

AcfSample sample_acf(const Series4D& series, const Mask& mask, const SampleOptions& opts) {
  const VolumeGrid& g = series.grid();
  require(g == mask.grid(), ErrorKind::GridMismatch, "sample_acf: series and mask grids differ");
  require(mask.in_count() >= 100, ErrorKind::Precondition,
          fmt::format("sample_acf: mask needs >= 100 voxels (has {})", mask.in_count()));
  const double bin_width = opts.bin_width_mm.value_or(g.min_spacing());
  require(bin_width > 0.0 && opts.r_max_mm >= bin_width, ErrorKind::Precondition,
          "sample_acf: need r_max >= bin_width > 0");

  const Normalized nz = normalize(series, mask);
  const auto offs = half_offsets(g, opts.r_max_mm, bin_width);

  Index3 max_lag{};
  for (int a = 0; a < 3; ++a) {
    max_lag[a] = std::min(g.dims()[a] - 1,
                          static_cast<int>(std::floor(opts.r_max_mm / g.spacing()[a] + 1e-9)));
  }
  PairMethod method = opts.method;
  if (method == PairMethod::Auto) {
    const double nt = static_cast<double>(series.length());
    const double direct_cost = static_cast<double>(offs.size()) * static_cast<double>(g.size()) * nt;
    double padded = 1.0;
    for (int a = 0; a < 3; ++a) padded *= fft::good_size(g.dims()[a] + max_lag[a]);
    const double fft_cost = 20.0 * (nt + 2.0) * padded * std::log2(padded);
    method = direct_cost <= fft_cost ? PairMethod::Direct : PairMethod::Fft;
  }
  const PairSums sums =
      method == PairMethod::Direct ? direct_pairs(series, nz, offs) : fft_pairs(series, nz, offs, max_lag);

  std::size_t nbins = 1;
  for (const auto& o : offs) nbins = std::max(nbins, o.bin + 1);
  std::vector<double> corr_sum(nbins, 0.0);
  std::vector<double> dist_sum(nbins, 0.0);
  std::vector<std::uint64_t> count(nbins, 0);
  for (std::size_t o = 0; o < offs.size(); ++o) {
    const std::size_t b = offs[o].bin;
    corr_sum[b] += sums.sum[o];
    dist_sum[b] += offs[o].dist_mm * static_cast<double>(sums.count[o]);
    count[b] += sums.count[o];
  }

  AcfSample sample;
  sample.used_voxels = nz.used;
  sample.excluded_voxels = nz.excluded;
  sample.bins.push_back({0.0, 1.0, nz.used, false});
  for (std::size_t b = 1; b < nbins; ++b) {
    if (count[b] == 0) continue;
    const double c = static_cast<double>(count[b]);
    sample.bins.push_back({dist_sum[b] / c, std::clamp(corr_sum[b] / c, -1.0, 1.0), count[b], true});
  }
  return sample;
}

FwhmEstimate gaussian_fwhm_classic(const Series4D& series, const Mask& mask) {
  const VolumeGrid& g = series.grid();
  require(g == mask.grid(), ErrorKind::GridMismatch, "classic FWHM: series and mask grids differ");
  require(series.length() >= 2, ErrorKind::Precondition, "classic FWHM: needs >= 2 frames");
  require(mask.in_count() >= 100, ErrorKind::Precondition,
          fmt::format("classic FWHM: mask needs >= 100 voxels (has {})", mask.in_count()));

  double field_ss = 0.0;
  double field_dof = 0.0;
  std::array<double, 3> diff_ss{};
  std::array<double, 3> diff_dof{};
  std::array<std::size_t, 3> pairs_per_frame{};

  for (std::size_t t = 0; t < series.length(); ++t) {
    const auto x = series.frame(t).values();
    double sum = 0.0;
    for (std::size_t v = 0; v < x.size(); ++v)
      if (mask.contains(v)) sum += x[v];
    const double mean = sum / static_cast<double>(mask.in_count());
    for (std::size_t v = 0; v < x.size(); ++v)
      if (mask.contains(v)) field_ss += (x[v] - mean) * (x[v] - mean);
    field_dof += static_cast<double>(mask.in_count()) - 1.0;

    for (int axis = 0; axis < 3; ++axis) {
      const int ex = axis == 0, ey = axis == 1, ez = axis == 2;
      double dsum = 0.0, dss = 0.0;
      std::size_t n = 0;
      for (int k = 0; k + ez < g.nz(); ++k)
        for (int j = 0; j + ey < g.ny(); ++j)
          for (int i = 0; i + ex < g.nx(); ++i) {
            const std::size_t a = g.index(i, j, k);
            const std::size_t b = g.index(i + ex, j + ey, k + ez);
            if (!mask.contains(a) || !mask.contains(b)) continue;
            const double d = x[b] - x[a];
            dsum += d;
            dss += d * d;
            ++n;
          }
      pairs_per_frame[axis] = n;
      if (n >= 2) {
        diff_ss[axis] += dss - dsum * dsum / static_cast<double>(n);
        diff_dof[axis] += static_cast<double>(n) - 1.0;
      }
    }
  }
  const double var = field_ss / field_dof;
  require(var > 0.0, ErrorKind::DegenerateData, "classic FWHM: field has zero variance");

  FwhmEstimate est;
  est.model = AcfModel::Gaussian;
  const double k2ln2 = 2.0 * std::sqrt(2.0 * std::numbers::ln2);
  double log_sum = 0.0;
  int valid = 0;
  for (int axis = 0; axis < 3; ++axis) {
    est.axis_valid[axis] = false;
    est.axis_fwhm_mm[axis] = 0.0;
    if (pairs_per_frame[axis] < 100) continue;
    const double rho = 1.0 - (diff_ss[axis] / diff_dof[axis]) / (2.0 * var);
    if (!(rho > 0.0 && rho < 1.0)) continue;
    const double fw = k2ln2 * g.spacing()[axis] / std::sqrt(-2.0 * std::log(rho));
    est.axis_valid[axis] = true;
    est.axis_fwhm_mm[axis] = fw;
    log_sum += std::log(fw);
    ++valid;
  }
  require(valid > 0, ErrorKind::DegenerateData,
          "classic FWHM: smoothness undefined on every axis (lag-1 correlation <= 0)");
  est.warning = valid < 3;
  est.fwhm_mm = std::exp(log_sum / valid);
  return est;
}

}  // namespace acfclust
