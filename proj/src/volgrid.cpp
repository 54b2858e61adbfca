#include "acfclust/volgrid.hpp"

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

// Sample positions within this many source voxels of a lattice point are
// snapped onto it, so identity resampling is exact.
constexpr double kSnapTol = 1e-9;

struct AxisSample {
  int i0 = 0;
  int i1 = 0;
  double frac = 0.0;
  bool valid = false;
};

std::vector<AxisSample> axis_table(int n_src, double origin_src, double d_src, int n_dst,
                                   double origin_dst, double d_dst, Interp method) {
  std::vector<AxisSample> table(static_cast<std::size_t>(n_dst));
  for (int q = 0; q < n_dst; ++q) {
    double s = (origin_dst + q * d_dst - origin_src) / d_src;
    const double r = std::round(s);
    if (std::fabs(s - r) < kSnapTol) s = r;
    AxisSample& a = table[static_cast<std::size_t>(q)];
    if (method == Interp::Trilinear) {
      a.valid = s >= -kSnapTol && s <= (n_src - 1) + kSnapTol;
      s = std::clamp(s, 0.0, static_cast<double>(n_src - 1));
      int i0 = static_cast<int>(std::floor(s));
      if (i0 >= n_src - 1) i0 = std::max(0, n_src - 2);
      a.i0 = i0;
      a.i1 = std::min(i0 + 1, n_src - 1);
      a.frac = (a.i1 == a.i0) ? 0.0 : s - i0;
    } else {
      a.valid = s >= -0.5 - kSnapTol && s < n_src - 0.5 + kSnapTol;
      const int idx = std::clamp(static_cast<int>(std::floor(s + 0.5)), 0, n_src - 1);
      a.i0 = a.i1 = idx;
    }
  }
  return table;
}

std::vector<double> gaussian_weights(double sigma_vox, int radius) {
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int s = -radius; s <= radius; ++s) {
    const double v = std::exp(-0.5 * (s * s) / (sigma_vox * sigma_vox));
    w[static_cast<std::size_t>(s + radius)] = v;
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

// dst = src convolved along one axis with a symmetric kernel; edges are not
// padded, so weights falling outside the grid are simply dropped.
std::vector<double> convolve_axis(std::span<const double> src, const Index3& dims, int axis,
                                  std::span<const double> w) {
  const int radius = static_cast<int>(w.size() / 2);
  const std::size_t nx = static_cast<std::size_t>(dims[0]);
  const std::size_t ny = static_cast<std::size_t>(dims[1]);
  const std::size_t nz = static_cast<std::size_t>(dims[2]);
  std::vector<double> dst(src.size(), 0.0);
  std::span<double> out(dst);

  const int n = dims[static_cast<std::size_t>(axis)];
  for (int s = -radius; s <= radius; ++s) {
    const int lo = std::max(0, -s);
    const int hi = std::min(n, n - s);
    if (hi <= lo) continue;
    const double wt = w[static_cast<std::size_t>(s + radius)];
    const std::size_t len = static_cast<std::size_t>(hi - lo);
    switch (axis) {
      case 0:
        for (std::size_t row = 0; row < ny * nz; ++row) {
          const std::size_t base = row * nx;
          simd::axpy(out.subspan(base + lo, len), src.subspan(base + lo + s, len), wt);
        }
        break;
      case 1:
        for (std::size_t k = 0; k < nz; ++k) {
          const std::size_t base = k * nx * ny;
          simd::axpy(out.subspan(base + lo * nx, len * nx),
                     src.subspan(base + (lo + s) * nx, len * nx), wt);
        }
        break;
      default: {
        const std::size_t plane = nx * ny;
        simd::axpy(out.subspan(lo * plane, len * plane), src.subspan((lo + s) * plane, len * plane),
                   wt);
        break;
      }
    }
  }
  return dst;
}

}  // namespace

VolumeGrid::VolumeGrid(Index3 dims, Vec3 spacing_mm, Vec3 origin_mm)
    : dims_(dims), spacing_(spacing_mm), origin_(origin_mm) {
  for (int a = 0; a < 3; ++a) {
    require(dims_[a] >= 1, ErrorKind::InvalidGrid,
            fmt::format("grid dimension {} must be >= 1 (got {})", a, dims_[a]));
    require(std::isfinite(spacing_[a]) && spacing_[a] > 0.0, ErrorKind::InvalidGrid,
            fmt::format("grid spacing {} must be > 0 (got {})", a, spacing_[a]));
    require(std::isfinite(origin_[a]), ErrorKind::InvalidGrid, "grid origin must be finite");
  }
}

double VolumeGrid::min_spacing() const noexcept {
  return std::min({spacing_[0], spacing_[1], spacing_[2]});
}

Index3 VolumeGrid::coords(std::size_t idx) const noexcept {
  const std::size_t nx = static_cast<std::size_t>(dims_[0]);
  const std::size_t ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
          static_cast<int>(idx / (nx * ny))};
}

VolumeGrid VolumeGrid::resampled_within(double delta_mm) const {
  require(std::isfinite(delta_mm) && delta_mm > 0.0, ErrorKind::InvalidGrid,
          fmt::format("resampling size must be > 0 (got {})", delta_mm));
  Index3 dims{};
  Vec3 origin{};
  for (int a = 0; a < 3; ++a) {
    const double hull = (dims_[a] - 1) * spacing_[a];
    const int m = static_cast<int>(std::floor(hull / delta_mm + 1e-9)) + 1;
    dims[a] = m;
    origin[a] = origin_[a] + 0.5 * (hull - (m - 1) * delta_mm);
  }
  return VolumeGrid(dims, {delta_mm, delta_mm, delta_mm}, origin);
}

ScalarField::ScalarField(const VolumeGrid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

ScalarField::ScalarField(const VolumeGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  require(values_.size() == grid_.size(), ErrorKind::GridMismatch,
          fmt::format("field has {} values but grid has {} voxels", values_.size(), grid_.size()));
  require(std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); }),
          ErrorKind::Precondition, "field values must be finite");
}

Series4D::Series4D(std::vector<ScalarField> frames) : frames_(std::move(frames)) {
  require(!frames_.empty(), ErrorKind::Precondition, "a series needs at least one frame");
  for (const auto& f : frames_) {
    require(f.grid() == frames_.front().grid(), ErrorKind::GridMismatch,
            "all frames of a series must share one grid");
  }
}

Mask::Mask(const VolumeGrid& grid, std::vector<std::uint8_t> flags)
    : grid_(grid), flags_(std::move(flags)) {
  require(flags_.size() == grid_.size(), ErrorKind::GridMismatch,
          fmt::format("mask has {} flags but grid has {} voxels", flags_.size(), grid_.size()));
  for (auto& f : flags_) {
    f = f ? 1 : 0;
    in_count_ += f;
  }
}

Mask Mask::full(const VolumeGrid& grid) {
  return Mask(grid, std::vector<std::uint8_t>(grid.size(), 1));
}

Mask Mask::ellipsoid(const VolumeGrid& grid, double scale) {
  require(scale > 0.0, ErrorKind::Precondition, "ellipsoid scale must be > 0");
  std::vector<std::uint8_t> flags(grid.size(), 0);
  Vec3 center{};
  Vec3 semi{};
  for (int a = 0; a < 3; ++a) {
    const double hull = (grid.dims()[a] - 1) * grid.spacing()[a];
    center[a] = grid.origin()[a] + 0.5 * hull;
    semi[a] = std::max(0.5 * hull * scale, 0.5 * grid.spacing()[a]);
  }
  for (int k = 0; k < grid.nz(); ++k)
    for (int j = 0; j < grid.ny(); ++j)
      for (int i = 0; i < grid.nx(); ++i) {
        const Vec3 p = grid.position_mm(i, j, k);
        double q = 0.0;
        for (int a = 0; a < 3; ++a) q += std::pow((p[a] - center[a]) / semi[a], 2);
        flags[grid.index(i, j, k)] = q <= 1.0 ? 1 : 0;
      }
  return Mask(grid, std::move(flags));
}

ResampleResult resample(const ScalarField& field, const VolumeGrid& target, Interp method) {
  const VolumeGrid& src = field.grid();
  std::array<std::vector<AxisSample>, 3> tables;
  for (int a = 0; a < 3; ++a) {
    tables[a] = axis_table(src.dims()[a], src.origin()[a], src.spacing()[a], target.dims()[a],
                           target.origin()[a], target.spacing()[a], method);
  }

  std::vector<double> out(target.size(), 0.0);
  std::size_t outside = 0;
  const auto v = field.values();
  for (int k = 0; k < target.nz(); ++k) {
    const AxisSample& az = tables[2][static_cast<std::size_t>(k)];
    for (int j = 0; j < target.ny(); ++j) {
      const AxisSample& ay = tables[1][static_cast<std::size_t>(j)];
      for (int i = 0; i < target.nx(); ++i) {
        const AxisSample& ax = tables[0][static_cast<std::size_t>(i)];
        const std::size_t dst = target.index(i, j, k);
        if (!(ax.valid && ay.valid && az.valid)) {
          ++outside;
          continue;
        }
        if (method == Interp::Nearest) {
          out[dst] = v[src.index(ax.i0, ay.i0, az.i0)];
          continue;
        }
        const double fx = ax.frac, fy = ay.frac, fz = az.frac;
        const double c00 = (1 - fx) * v[src.index(ax.i0, ay.i0, az.i0)] + fx * v[src.index(ax.i1, ay.i0, az.i0)];
        const double c10 = (1 - fx) * v[src.index(ax.i0, ay.i1, az.i0)] + fx * v[src.index(ax.i1, ay.i1, az.i0)];
        const double c01 = (1 - fx) * v[src.index(ax.i0, ay.i0, az.i1)] + fx * v[src.index(ax.i1, ay.i0, az.i1)];
        const double c11 = (1 - fx) * v[src.index(ax.i0, ay.i1, az.i1)] + fx * v[src.index(ax.i1, ay.i1, az.i1)];
        const double c0 = (1 - fy) * c00 + fy * c10;
        const double c1 = (1 - fy) * c01 + fy * c11;
        out[dst] = (1 - fz) * c0 + fz * c1;
      }
    }
  }
  return {ScalarField(target, std::move(out)), outside};
}

Mask resample_mask(const Mask& mask, const VolumeGrid& target) {
  std::vector<double> as_real(mask.flags().begin(), mask.flags().end());
  const ResampleResult r =
      resample(ScalarField(mask.grid(), std::move(as_real)), target, Interp::Nearest);
  std::vector<std::uint8_t> flags(target.size());
  const auto v = r.field.values();
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = v[i] > 0.5 ? 1 : 0;
  Mask out(target, std::move(flags));
  require(out.in_count() > 0, ErrorKind::EmptyMask, "resampled mask is empty");
  return out;
}

double fwhm_to_sigma(double fwhm) noexcept {
  return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

int blur_kernel_radius(double fwhm_mm, double spacing_mm) {
  const double sigma_vox = fwhm_to_sigma(fwhm_mm) / spacing_mm;
  return static_cast<int>(std::ceil(4.0 * sigma_vox));
}

ScalarField gaussian_blur_in_mask(const ScalarField& field, double fwhm_mm, const Mask& mask) {
  require(field.grid() == mask.grid(), ErrorKind::GridMismatch,
          "blur: field and mask grids differ");
  require(std::isfinite(fwhm_mm) && fwhm_mm >= 0.0, ErrorKind::Precondition,
          "blur: fwhm must be >= 0");
  if (fwhm_mm == 0.0) return field;

  const VolumeGrid& grid = field.grid();
  const auto f = field.values();
  const auto m = mask.flags();
  std::vector<double> num(f.size());
  std::vector<double> den(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    num[i] = m[i] ? f[i] : 0.0;
    den[i] = m[i] ? 1.0 : 0.0;
  }
  for (int axis = 0; axis < 3; ++axis) {
    const double spacing = grid.spacing()[axis];
    const int radius = blur_kernel_radius(fwhm_mm, spacing);
    if (radius == 0) continue;
    const auto w = gaussian_weights(fwhm_to_sigma(fwhm_mm) / spacing, radius);
    num = convolve_axis(num, grid.dims(), axis, w);
    den = convolve_axis(den, grid.dims(), axis, w);
  }
  std::vector<double> out(f.begin(), f.end());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (m[i]) out[i] = num[i] / den[i];
  }
  return ScalarField(grid, std::move(out));
}

void write_slice_csv(std::ostream& os, const ScalarField& field, int z) {
  const VolumeGrid& g = field.grid();
  require(z >= 0 && z < g.nz(), ErrorKind::Precondition, "slice index out of range");
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (i) os << ',';
      fmt::print(os, "{}", field.at(i, j, z));
    }
    os << '\n';
  }
}

}  // namespace acfclust
