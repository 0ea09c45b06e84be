#include "abdo/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "abdo/error.hpp"

namespace abdo {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

// Field offsets in the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    if (offset + sizeof(T) > bytes_.size()) {
      throw ParseError("NIfTI header truncated", bytes_.size());
    }
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class HeaderWriter {
 public:
  explicit HeaderWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(std::size_t offset, T value) {
    std::memcpy(out_.data() + offset, &value, sizeof(T));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

std::size_t bytes_per_voxel(NiftiDatatype dt) {
  switch (dt) {
    case NiftiDatatype::kUint8: return 1;
    case NiftiDatatype::kInt16:
    case NiftiDatatype::kUint16: return 2;
    case NiftiDatatype::kInt32:
    case NiftiDatatype::kUint32:
    case NiftiDatatype::kFloat32: return 4;
    case NiftiDatatype::kFloat64: return 8;
  }
  return 0;
}

bool is_supported(std::int16_t code) {
  switch (code) {
    case 2: case 4: case 8: case 16: case 64: case 512: case 768: return true;
    default: return false;
  }
}

bool is_integer(NiftiDatatype dt) {
  return dt != NiftiDatatype::kFloat32 && dt != NiftiDatatype::kFloat64;
}

template <typename T>
T load_swapped(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), p, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  T v;
  std::memcpy(&v, raw.data(), sizeof(T));
  return v;
}

double load_voxel(NiftiDatatype dt, const std::uint8_t* p, bool swap) {
  switch (dt) {
    case NiftiDatatype::kUint8: return *p;
    case NiftiDatatype::kInt16: return load_swapped<std::int16_t>(p, swap);
    case NiftiDatatype::kUint16: return load_swapped<std::uint16_t>(p, swap);
    case NiftiDatatype::kInt32: return load_swapped<std::int32_t>(p, swap);
    case NiftiDatatype::kUint32: return load_swapped<std::uint32_t>(p, swap);
    case NiftiDatatype::kFloat32: return load_swapped<float>(p, swap);
    case NiftiDatatype::kFloat64: return load_swapped<double>(p, swap);
  }
  return 0.0;
}

Affine quaternion_affine(double b, double c, double d, const Vec3& offset, const Spacing& spacing,
                         double qfac) {
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  const double r[3][3] = {
      {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
      {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
      {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
  const double scale[3] = {spacing[0], spacing[1], qfac * spacing[2]};
  Affine m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[j];
    m[i][3] = offset[i];
  }
  m[3] = {0.0, 0.0, 0.0, 1.0};
  return m;
}

struct Quaternion {
  double b, c, d, qfac;
};

// Returns false when the rotation part is not orthonormal (e.g. sheared).
bool affine_to_quaternion(const Affine& m, const Spacing& spacing, Quaternion& q) {
  double r[3][3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = m[i][j] / spacing[j];
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const double dot = r[0][i] * r[0][j] + r[1][i] * r[1][j] + r[2][i] * r[2][j];
      if (std::abs(dot) > 1e-6) return false;
    }
  }
  const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                     r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                     r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
  q.qfac = 1.0;
  if (det < 0) {
    q.qfac = -1.0;
    for (int i = 0; i < 3; ++i) r[i][2] = -r[i][2];
  }
  double a = r[0][0] + r[1][1] + r[2][2] + 1.0;
  double b, c, d;
  if (a > 0.5) {
    a = 0.5 * std::sqrt(a);
    b = 0.25 * (r[2][1] - r[1][2]) / a;
    c = 0.25 * (r[0][2] - r[2][0]) / a;
    d = 0.25 * (r[1][0] - r[0][1]) / a;
  } else {
    const double xd = 1.0 + r[0][0] - (r[1][1] + r[2][2]);
    const double yd = 1.0 + r[1][1] - (r[0][0] + r[2][2]);
    const double zd = 1.0 + r[2][2] - (r[0][0] + r[1][1]);
    if (xd > 1.0) {
      b = 0.5 * std::sqrt(xd);
      c = 0.25 * (r[0][1] + r[1][0]) / b;
      d = 0.25 * (r[0][2] + r[2][0]) / b;
      a = 0.25 * (r[2][1] - r[1][2]) / b;
    } else if (yd > 1.0) {
      c = 0.5 * std::sqrt(yd);
      b = 0.25 * (r[0][1] + r[1][0]) / c;
      d = 0.25 * (r[1][2] + r[2][1]) / c;
      a = 0.25 * (r[0][2] - r[2][0]) / c;
    } else {
      d = 0.5 * std::sqrt(zd);
      b = 0.25 * (r[0][2] + r[2][0]) / d;
      c = 0.25 * (r[1][2] + r[2][1]) / d;
      a = 0.25 * (r[1][0] - r[0][1]) / d;
    }
    if (a < 0.0) {
      b = -b;
      c = -c;
      d = -d;
    }
  }
  q.b = b;
  q.c = c;
  q.d = d;
  return true;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t> chunk(1 << 20);
  for (;;) {
    const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int errnum = 0;
      const std::string msg = gzerror(file, &errnum);
      gzclose(file);
      throw IoError("read failed for " + path.string() + ": " + msg);
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(file);
  return bytes;
}

std::vector<std::uint8_t> make_header(const Geometry& g, NiftiDatatype dt) {
  std::vector<std::uint8_t> out(kVoxOffset, 0);
  HeaderWriter w(out);
  w.put<std::int32_t>(0, static_cast<std::int32_t>(kHeaderSize));
  const auto& shape = g.shape();
  w.put<std::int16_t>(kOffDim, 3);
  for (int i = 0; i < 3; ++i) {
    if (shape[i] > std::numeric_limits<std::int16_t>::max()) {
      throw InvalidArgument("volume dimension exceeds NIfTI-1 limit");
    }
    w.put<std::int16_t>(kOffDim + 2 * (i + 1), static_cast<std::int16_t>(shape[i]));
  }
  for (int i = 4; i < 8; ++i) w.put<std::int16_t>(kOffDim + 2 * i, 1);
  w.put<std::int16_t>(kOffDatatype, static_cast<std::int16_t>(dt));
  w.put<std::int16_t>(kOffBitpix, static_cast<std::int16_t>(8 * bytes_per_voxel(dt)));

  Quaternion q{};
  const bool has_qform = affine_to_quaternion(g.affine(), g.spacing(), q);
  w.put<float>(kOffPixdim, static_cast<float>(has_qform ? q.qfac : 1.0));
  for (int i = 0; i < 3; ++i) {
    w.put<float>(kOffPixdim + 4 * (i + 1), static_cast<float>(g.spacing()[i]));
  }
  w.put<float>(kOffVoxOffset, static_cast<float>(kVoxOffset));
  w.put<float>(kOffSclSlope, 1.0f);
  w.put<float>(kOffSclInter, 0.0f);
  out[kOffXyztUnits] = 2;  // mm
  const auto& m = g.affine();
  if (has_qform) {
    w.put<std::int16_t>(kOffQformCode, 1);
    w.put<float>(kOffQuatern, static_cast<float>(q.b));
    w.put<float>(kOffQuatern + 4, static_cast<float>(q.c));
    w.put<float>(kOffQuatern + 8, static_cast<float>(q.d));
    for (int i = 0; i < 3; ++i) w.put<float>(kOffQoffset + 4 * i, static_cast<float>(m[i][3]));
  }
  w.put<std::int16_t>(kOffSformCode, 1);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      w.put<float>(kOffSrow + 16 * r + 4 * c, static_cast<float>(m[r][c]));
    }
  }
  std::memcpy(out.data() + kOffMagic, "n+1\0", 4);
  return out;
}

bool ends_with_gz(const std::filesystem::path& path) { return path.extension() == ".gz"; }

// `gz_mode` is a gzopen mode string.
void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path,
                 const char* gz_mode) {
  std::random_device rd;
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(rd() % 1000000);

  bool ok = false;
  if (ends_with_gz(path)) {
    gzFile file = gzopen(tmp.string().c_str(), gz_mode);
    if (file != nullptr) {
      ok = true;
      std::size_t done = 0;
      while (done < bytes.size() && ok) {
        const auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        ok = gzwrite(file, bytes.data() + done, n) == static_cast<int>(n);
        done += n;
      }
      ok = (gzclose(file) == Z_OK) && ok;
    }
  } else {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (os) {
      os.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
      os.close();
      ok = static_cast<bool>(os);
    }
  }
  std::error_code ec;
  if (ok) {
    std::filesystem::rename(tmp, path, ec);
    if (!ec) return;
  }
  std::filesystem::remove(tmp, ec);
  throw IoError("cannot write " + path.string());
}

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, std::span<const T> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size_bytes());
  std::memcpy(out.data() + start, values.data(), values.size_bytes());
}

}  // namespace

NiftiImage decode_nifti(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ParseError("NIfTI header truncated", bytes.size());

  bool swap = false;
  {
    const auto native = HeaderReader(bytes, false).get<std::int32_t>(0);
    if (native != static_cast<std::int32_t>(kHeaderSize)) {
      if (HeaderReader(bytes, true).get<std::int32_t>(0) == static_cast<std::int32_t>(kHeaderSize)) {
        swap = true;
      } else {
        throw ParseError("sizeof_hdr is not 348", 0);
      }
    }
  }
  const HeaderReader h(bytes, swap);

  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
    if (std::memcmp(bytes.data() + kOffMagic, "ni1\0", 4) == 0) {
      throw UnsupportedType("two-file NIfTI (ni1) is not supported");
    }
    throw ParseError("bad NIfTI-1 magic", kOffMagic);
  }

  const auto ndim = h.get<std::int16_t>(kOffDim);
  if (ndim < 1 || ndim > 7) throw ParseError("dim[0] out of range", kOffDim);
  Shape shape{1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const auto n = h.get<std::int16_t>(kOffDim + 2 * i);
    if (n < 1) throw ParseError("non-positive dimension", kOffDim + 2 * i);
    if (i <= 3) {
      shape[i - 1] = n;
    } else if (n != 1) {
      throw UnsupportedType("only 3D volumes are supported (dim[" + std::to_string(i) +
                            "] = " + std::to_string(n) + ")");
    }
  }

  const auto code = h.get<std::int16_t>(kOffDatatype);
  if (!is_supported(code)) {
    throw UnsupportedType("unsupported NIfTI datatype code " + std::to_string(code));
  }
  const auto dt = static_cast<NiftiDatatype>(code);

  std::array<float, 8> pixdim{};
  for (int i = 0; i < 8; ++i) pixdim[i] = h.get<float>(kOffPixdim + 4 * i);
  double unit = 1.0;
  switch (bytes[kOffXyztUnits] & 0x07) {
    case 1: unit = 1000.0; break;  // meters
    case 3: unit = 0.001; break;   // microns
    default: break;
  }

  const auto qform_code = h.get<std::int16_t>(kOffQformCode);
  const auto sform_code = h.get<std::int16_t>(kOffSformCode);
  Geometry geometry;
  if (qform_code > 0 || sform_code <= 0) {
    Spacing spacing{};
    for (int i = 0; i < 3; ++i) {
      spacing[i] = std::abs(static_cast<double>(pixdim[i + 1])) * unit;
      if (!(spacing[i] > 0.0) || !std::isfinite(spacing[i])) {
        throw ParseError("non-positive pixdim", kOffPixdim + 4 * (i + 1));
      }
    }
    if (qform_code > 0) {
      const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
      const Vec3 offset{h.get<float>(kOffQoffset) * unit, h.get<float>(kOffQoffset + 4) * unit,
                        h.get<float>(kOffQoffset + 8) * unit};
      geometry = Geometry(shape, spacing,
                          quaternion_affine(h.get<float>(kOffQuatern), h.get<float>(kOffQuatern + 4),
                                            h.get<float>(kOffQuatern + 8), offset, spacing, qfac));
    } else {
      geometry = Geometry(shape, spacing);
    }
  } else {
    Affine m{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) m[r][c] = h.get<float>(kOffSrow + 16 * r + 4 * c) * unit;
    }
    m[3] = {0.0, 0.0, 0.0, 1.0};
    try {
      geometry = Geometry::from_affine(shape, m);
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("invalid sform: ") + e.what(), kOffSrow);
    }
  }

  const float vox_offset_f = h.get<float>(kOffVoxOffset);
  if (!(vox_offset_f >= static_cast<float>(kHeaderSize)) || std::floor(vox_offset_f) != vox_offset_f) {
    throw ParseError("invalid vox_offset", kOffVoxOffset);
  }
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);
  const std::size_t count = geometry.voxel_count();
  const std::size_t bpv = bytes_per_voxel(dt);
  if (bytes.size() < vox_offset + count * bpv) {
    throw ParseError("voxel data truncated", bytes.size());
  }

  const float slope = h.get<float>(kOffSclSlope);
  const float inter = h.get<float>(kOffSclInter);
  const bool scaled = slope != 0.0f && !(slope == 1.0f && inter == 0.0f);
  const std::uint8_t* data = bytes.data() + vox_offset;

  if (is_integer(dt) && !scaled) {
    bool negative = false;
    for (std::size_t i = 0; i < count && !negative; ++i) {
      negative = load_voxel(dt, data + i * bpv, swap) < 0.0;
    }
    if (!negative) {
      std::vector<Label> labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        labels[i] = static_cast<Label>(load_voxel(dt, data + i * bpv, swap));
      }
      return LabelMap(geometry, std::move(labels));
    }
  }

  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    double v = load_voxel(dt, data + i * bpv, swap);
    if (scaled) v = v * slope + inter;
    if (!std::isfinite(v)) throw ParseError("non-finite voxel value", vox_offset + i * bpv);
    values[i] = static_cast<float>(v);
  }
  return ScalarVolume(geometry, std::move(values));
}

NiftiImage read_nifti(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  try {
    return decode_nifti(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

ScalarVolume read_scalar_nifti(const std::filesystem::path& path) {
  auto image = read_nifti(path);
  if (auto* scalar = std::get_if<ScalarVolume>(&image)) return std::move(*scalar);
  const auto& labels = std::get<LabelMap>(image);
  std::vector<float> values(labels.size());
  std::transform(labels.data().begin(), labels.data().end(), values.begin(),
                 [](Label l) { return static_cast<float>(l); });
  return ScalarVolume(labels.geometry(), std::move(values));
}

LabelMap read_label_nifti(const std::filesystem::path& path) {
  auto image = read_nifti(path);
  if (auto* labels = std::get_if<LabelMap>(&image)) return std::move(*labels);
  throw InvalidArgument(path.string() + " does not contain a non-negative integer label map");
}

std::vector<std::uint8_t> encode_nifti(const ScalarVolume& volume) {
  auto out = make_header(volume.geometry(), NiftiDatatype::kFloat32);
  static_assert(std::endian::native == std::endian::little);
  append_raw(out, volume.data());
  return out;
}

std::vector<std::uint8_t> encode_nifti(const LabelMap& labels) {
  const Label max_label =
      labels.size() == 0 ? 0 : *std::max_element(labels.data().begin(), labels.data().end());
  if (max_label <= std::numeric_limits<std::uint8_t>::max()) {
    auto out = make_header(labels.geometry(), NiftiDatatype::kUint8);
    std::vector<std::uint8_t> narrow(labels.data().begin(), labels.data().end());
    append_raw(out, std::span<const std::uint8_t>(narrow));
    return out;
  }
  if (max_label <= std::numeric_limits<std::uint16_t>::max()) {
    auto out = make_header(labels.geometry(), NiftiDatatype::kUint16);
    std::vector<std::uint16_t> narrow(labels.data().begin(), labels.data().end());
    append_raw(out, std::span<const std::uint16_t>(narrow));
    return out;
  }
  auto out = make_header(labels.geometry(), NiftiDatatype::kUint32);
  append_raw(out, labels.data());
  return out;
}

void write_nifti(const ScalarVolume& volume, const std::filesystem::path& path) {
  write_bytes(encode_nifti(volume), path, "wb1h");
}

void write_nifti(const LabelMap& labels, const std::filesystem::path& path) {
  write_bytes(encode_nifti(labels), path, "wb1");
}

const Geometry& geometry_of(const NiftiImage& image) noexcept {
  return std::visit([](const auto& v) -> const Geometry& { return v.geometry(); }, image);
}

}  // namespace abdo
