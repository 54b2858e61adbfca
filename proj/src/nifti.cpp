#include "acfclust/nifti.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "acfclust/error.hpp"

namespace acfclust {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

// Byte offsets of the NIfTI-1 header fields used here.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffMagic = 344;

enum Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

class HeaderView {
 public:
  HeaderView(std::span<std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <class T>
  T get(std::size_t off) const {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + off, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
  }

  template <class T>
  void put(std::size_t off, T v) {
    std::memcpy(bytes_.data() + off, &v, sizeof(T));
  }

 private:
  std::span<std::uint8_t> bytes_;
  bool swap_;
};

template <class T>
double decode(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), p, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  T v;
  std::memcpy(&v, raw.data(), sizeof(T));
  return static_cast<double>(v);
}

int bytes_per_voxel(std::int16_t dt) {
  switch (dt) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

double decode_voxel(std::int16_t dt, const std::uint8_t* p, bool swap) {
  switch (dt) {
    case kUint8: return decode<std::uint8_t>(p, swap);
    case kInt8: return decode<std::int8_t>(p, swap);
    case kInt16: return decode<std::int16_t>(p, swap);
    case kUint16: return decode<std::uint16_t>(p, swap);
    case kInt32: return decode<std::int32_t>(p, swap);
    case kUint32: return decode<std::uint32_t>(p, swap);
    case kFloat32: return decode<float>(p, swap);
    default: return decode<double>(p, swap);
  }
}

void write_frames(const std::filesystem::path& path, const VolumeGrid& grid,
                  std::span<const ScalarField> frames) {
  std::array<std::uint8_t, kVoxOffset> hdr{};
  HeaderView h(hdr, false);
  h.put<std::int32_t>(kOffSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  const bool is4d = frames.size() > 1;
  const std::array<std::int16_t, 8> dim{static_cast<std::int16_t>(is4d ? 4 : 3),
                                        static_cast<std::int16_t>(grid.nx()),
                                        static_cast<std::int16_t>(grid.ny()),
                                        static_cast<std::int16_t>(grid.nz()),
                                        static_cast<std::int16_t>(frames.size()),
                                        1, 1, 1};
  for (std::size_t i = 0; i < dim.size(); ++i) h.put<std::int16_t>(kOffDim + 2 * i, dim[i]);
  h.put<std::int16_t>(kOffDatatype, kFloat32);
  h.put<std::int16_t>(kOffBitpix, 32);
  const std::array<float, 8> pixdim{1.0f,
                                    static_cast<float>(grid.spacing()[0]),
                                    static_cast<float>(grid.spacing()[1]),
                                    static_cast<float>(grid.spacing()[2]),
                                    1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < pixdim.size(); ++i) h.put<float>(kOffPixdim + 4 * i, pixdim[i]);
  h.put<float>(kOffVoxOffset, static_cast<float>(kVoxOffset));
  h.put<float>(kOffSclSlope, 0.0f);
  h.put<float>(kOffSclInter, 0.0f);
  h.put<std::uint8_t>(kOffXyztUnits, 2);  // NIFTI_UNITS_MM
  const char descrip[] = "acfclust";
  std::memcpy(hdr.data() + kOffDescrip, descrip, sizeof(descrip));
  h.put<std::int16_t>(kOffQformCode, 1);
  h.put<std::int16_t>(kOffSformCode, 1);
  for (int a = 0; a < 3; ++a) {
    h.put<float>(kOffQoffset + 4 * a, static_cast<float>(grid.origin()[a]));
  }
  const std::array<std::size_t, 3> srow{kOffSrowX, kOffSrowY, kOffSrowZ};
  for (int a = 0; a < 3; ++a) {
    for (int c = 0; c < 3; ++c) {
      h.put<float>(srow[a] + 4 * c, a == c ? static_cast<float>(grid.spacing()[a]) : 0.0f);
    }
    h.put<float>(srow[a] + 12, static_cast<float>(grid.origin()[a]));
  }
  std::memcpy(hdr.data() + kOffMagic, "n+1\0", 4);

  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::Io, fmt::format("cannot open {} for writing", path.string()));
  os.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
  std::vector<float> buf(grid.size());
  for (const auto& f : frames) {
    const auto v = f.values();
    std::transform(v.begin(), v.end(), buf.begin(), [](double x) { return static_cast<float>(x); });
    if constexpr (std::endian::native == std::endian::big) {
      for (float& x : buf) {
        std::uint32_t u;
        std::memcpy(&u, &x, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&x, &u, 4);
      }
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  require(static_cast<bool>(os), ErrorKind::Io, fmt::format("write failed: {}", path.string()));
}

}  // namespace

Series4D read_nifti(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::Io, fmt::format("cannot open {}", path.string()));
  std::array<std::uint8_t, kHeaderSize> hdr{};
  is.read(reinterpret_cast<char*>(hdr.data()), hdr.size());
  require(is.gcount() == static_cast<std::streamsize>(kHeaderSize), ErrorKind::Io,
          fmt::format("{}: truncated NIfTI header", path.string()));

  bool swap = false;
  {
    HeaderView probe(hdr, false);
    const auto sz = probe.get<std::int32_t>(kOffSizeofHdr);
    if (sz != static_cast<std::int32_t>(kHeaderSize)) {
      HeaderView swapped(hdr, true);
      require(swapped.get<std::int32_t>(kOffSizeofHdr) == static_cast<std::int32_t>(kHeaderSize),
              ErrorKind::Io, fmt::format("{}: not a NIfTI-1 file (sizeof_hdr)", path.string()));
      swap = true;
    }
  }
  HeaderView h(hdr, swap);
  require(std::memcmp(hdr.data() + kOffMagic, "n+1", 4) == 0, ErrorKind::Io,
          fmt::format("{}: only single-file NIfTI-1 (magic n+1) is supported", path.string()));

  std::array<int, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = h.get<std::int16_t>(kOffDim + 2 * i);
  require(dim[0] >= 1 && dim[0] <= 7, ErrorKind::Io, fmt::format("{}: bad dim[0]", path.string()));
  for (int i = 1; i <= dim[0]; ++i) {
    require(dim[i] >= 1, ErrorKind::Io, fmt::format("{}: non-positive dimension", path.string()));
  }
  for (int i = 5; i <= dim[0]; ++i) {
    require(dim[i] == 1, ErrorKind::Io, fmt::format("{}: dimensions beyond 4D are unsupported", path.string()));
  }
  const Index3 dims{dim[1], dim[0] >= 2 ? dim[2] : 1, dim[0] >= 3 ? dim[3] : 1};
  const int nt = dim[0] >= 4 ? dim[4] : 1;

  const auto dt = h.get<std::int16_t>(kOffDatatype);
  const int bpv = bytes_per_voxel(dt);
  require(bpv > 0, ErrorKind::Io, fmt::format("{}: unsupported datatype {}", path.string(), dt));

  Vec3 spacing{};
  for (int a = 0; a < 3; ++a) {
    const double pd = std::fabs(h.get<float>(kOffPixdim + 4 * (a + 1)));
    spacing[a] = pd > 0.0 ? pd : 1.0;
  }
  Vec3 origin{};
  if (h.get<std::int16_t>(kOffSformCode) > 0) {
    const std::array<std::size_t, 3> srow{kOffSrowX, kOffSrowY, kOffSrowZ};
    for (int a = 0; a < 3; ++a) origin[a] = h.get<float>(srow[a] + 12);
  } else if (h.get<std::int16_t>(kOffQformCode) > 0) {
    for (int a = 0; a < 3; ++a) origin[a] = h.get<float>(kOffQoffset + 4 * a);
  }
  const VolumeGrid grid(dims, spacing, origin);

  double slope = h.get<float>(kOffSclSlope);
  double inter = h.get<float>(kOffSclInter);
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }

  const double vox_offset = h.get<float>(kOffVoxOffset);
  require(vox_offset >= kHeaderSize, ErrorKind::Io, fmt::format("{}: bad vox_offset", path.string()));
  is.seekg(static_cast<std::streamoff>(vox_offset));

  std::vector<std::uint8_t> raw(grid.size() * static_cast<std::size_t>(bpv));
  std::vector<ScalarField> frames;
  frames.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    require(is.gcount() == static_cast<std::streamsize>(raw.size()), ErrorKind::Io,
            fmt::format("{}: truncated voxel data", path.string()));
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = slope * decode_voxel(dt, raw.data() + i * bpv, swap) + inter;
    }
    require(std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }),
            ErrorKind::DegenerateData, fmt::format("{}: non-finite voxel values", path.string()));
    frames.emplace_back(grid, std::move(values));
  }
  return Series4D(std::move(frames));
}

Mask read_nifti_mask(const std::filesystem::path& path) {
  const Series4D s = read_nifti(path);
  const auto v = s.frame(0).values();
  std::vector<std::uint8_t> flags(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) flags[i] = v[i] != 0.0 ? 1 : 0;
  Mask m(s.grid(), std::move(flags));
  require(m.in_count() > 0, ErrorKind::EmptyMask, fmt::format("{}: mask is empty", path.string()));
  return m;
}

void write_nifti(const std::filesystem::path& path, const ScalarField& field) {
  write_frames(path, field.grid(), std::span<const ScalarField>(&field, 1));
}

void write_nifti(const std::filesystem::path& path, const Series4D& series) {
  write_frames(path, series.grid(), series.frames());
}

void write_nifti(const std::filesystem::path& path, const Mask& mask) {
  std::vector<double> v(mask.flags().begin(), mask.flags().end());
  write_nifti(path, ScalarField(mask.grid(), std::move(v)));
}

}  // namespace acfclust
