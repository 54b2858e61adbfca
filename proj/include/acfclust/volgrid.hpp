#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace acfclust {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

// Axis-aligned voxel lattice. Voxel (i,j,k) has its center at
// origin + (i*dx, j*dy, k*dz) in mm. Linear order is x fastest, then y, then z.
class VolumeGrid {
 public:
  VolumeGrid(Index3 dims, Vec3 spacing_mm, Vec3 origin_mm = {0.0, 0.0, 0.0});

  static VolumeGrid isotropic(Index3 dims, double spacing_mm) {
    return VolumeGrid(dims, {spacing_mm, spacing_mm, spacing_mm});
  }

  int nx() const noexcept { return dims_[0]; }
  int ny() const noexcept { return dims_[1]; }
  int nz() const noexcept { return dims_[2]; }
  const Index3& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  }
  double voxel_volume() const noexcept { return spacing_[0] * spacing_[1] * spacing_[2]; }
  double min_spacing() const noexcept;

  std::size_t index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  Index3 coords(std::size_t idx) const noexcept;
  Vec3 position_mm(int i, int j, int k) const noexcept {
    return {origin_[0] + i * spacing_[0], origin_[1] + j * spacing_[1],
            origin_[2] + k * spacing_[2]};
  }

  // Isotropic grid of spacing delta_mm whose voxel centers lie inside the
  // convex hull of this grid's voxel centers, centered within it per axis.
  VolumeGrid resampled_within(double delta_mm) const;

  friend bool operator==(const VolumeGrid&, const VolumeGrid&) = default;

 private:
  Index3 dims_;
  Vec3 spacing_;
  Vec3 origin_;
};

class ScalarField {
 public:
  explicit ScalarField(const VolumeGrid& grid);
  ScalarField(const VolumeGrid& grid, std::vector<double> values);

  const VolumeGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t idx) const noexcept { return values_[idx]; }
  double at(int i, int j, int k) const noexcept { return values_[grid_.index(i, j, k)]; }

 private:
  VolumeGrid grid_;
  std::vector<double> values_;
};

class Series4D {
 public:
  explicit Series4D(std::vector<ScalarField> frames);

  const VolumeGrid& grid() const noexcept { return frames_.front().grid(); }
  std::size_t length() const noexcept { return frames_.size(); }
  const ScalarField& frame(std::size_t t) const noexcept { return frames_[t]; }
  const std::vector<ScalarField>& frames() const noexcept { return frames_; }

 private:
  std::vector<ScalarField> frames_;
};

class Mask {
 public:
  Mask(const VolumeGrid& grid, std::vector<std::uint8_t> flags);

  static Mask full(const VolumeGrid& grid);
  // Voxel centers inside the ellipsoid inscribed in the hull of voxel
  // centers, with semi-axes shrunk by `scale`.
  static Mask ellipsoid(const VolumeGrid& grid, double scale = 0.9);

  const VolumeGrid& grid() const noexcept { return grid_; }
  std::span<const std::uint8_t> flags() const noexcept { return flags_; }
  bool contains(std::size_t idx) const noexcept { return flags_[idx] != 0; }
  std::size_t in_count() const noexcept { return in_count_; }

 private:
  VolumeGrid grid_;
  std::vector<std::uint8_t> flags_;
  std::size_t in_count_ = 0;
};

enum class Interp { Trilinear, Nearest };

struct ResampleResult {
  ScalarField field;
  std::size_t out_of_extent = 0;
};

ResampleResult resample(const ScalarField& field, const VolumeGrid& target,
                        Interp method = Interp::Trilinear);

Mask resample_mask(const Mask& mask, const VolumeGrid& target);

// Normalized Gaussian convolution restricted to the mask: in-mask voxels get
// sum(w*f*m)/sum(w*m), out-of-mask voxels are copied through unchanged.
ScalarField gaussian_blur_in_mask(const ScalarField& field, double fwhm_mm, const Mask& mask);

// Half-width (in voxels) of the truncated kernel used by the blur along an
// axis with the given spacing.
int blur_kernel_radius(double fwhm_mm, double spacing_mm);

double fwhm_to_sigma(double fwhm) noexcept;

// One z-slice as CSV (rows = y, columns = x) for quick inspection.
void write_slice_csv(std::ostream& os, const ScalarField& field, int z);

}  // namespace acfclust
