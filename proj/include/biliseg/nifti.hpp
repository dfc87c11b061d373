#pragma once

// Single-file NIfTI-1 (.nii) reader/writer. Uncompressed only; the 348-byte
// header is encoded field by field so either byte order can be read.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "biliseg/errors.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

enum class NiftiDatatype : std::int16_t {
  uint8 = 2,
  int16 = 4,
  float32 = 16,
  uint16 = 512,
};

inline std::size_t bytes_per_voxel(NiftiDatatype dt) {
  switch (dt) {
    case NiftiDatatype::uint8: return 1;
    case NiftiDatatype::int16:
    case NiftiDatatype::uint16: return 2;
    case NiftiDatatype::float32: return 4;
  }
  return 0;
}

inline bool is_supported_datatype(std::int16_t code) {
  return code == 2 || code == 4 || code == 16 || code == 512;
}

struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{};
  float vox_offset = 352.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 2;  // NIFTI_UNITS_MM
  std::array<char, 4> magic{'n', '+', '1', '\0'};
};

namespace nifti_detail {

inline constexpr std::size_t header_size = 348;
inline constexpr std::size_t off_dim = 40;
inline constexpr std::size_t off_datatype = 70;
inline constexpr std::size_t off_bitpix = 72;
inline constexpr std::size_t off_pixdim = 76;
inline constexpr std::size_t off_vox_offset = 108;
inline constexpr std::size_t off_scl_slope = 112;
inline constexpr std::size_t off_scl_inter = 116;
inline constexpr std::size_t off_xyzt_units = 123;
inline constexpr std::size_t off_magic = 344;

template <typename T>
T load(std::span<const std::byte> buf, std::size_t off, bool swap) {
  std::array<std::byte, sizeof(T)> raw;
  std::memcpy(raw.data(), buf.data() + off, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

template <typename T>
void store(std::vector<std::byte>& buf, std::size_t off, T value, bool swap) {
  auto raw = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
  if (swap) std::reverse(raw.begin(), raw.end());
  std::memcpy(buf.data() + off, raw.data(), sizeof(T));
}

inline bool host_is_little() { return std::endian::native == std::endian::little; }

}  // namespace nifti_detail

/// Parses the header. `big_endian` reports the detected byte order.
inline NiftiHeader decode_nifti_header(std::span<const std::byte> bytes, bool& big_endian) {
  using namespace nifti_detail;
  if (bytes.size() < header_size) throw format_error("truncated NIfTI header", bytes.size());

  // Native load first; a byte-swapped 348 means the other order.
  bool swap = false;
  auto sizeof_hdr = load<std::int32_t>(bytes, 0, false);
  if (sizeof_hdr != 348) {
    swap = true;
    sizeof_hdr = load<std::int32_t>(bytes, 0, true);
    if (sizeof_hdr != 348) throw format_error("sizeof_hdr is not 348", 0);
  }
  big_endian = host_is_little() ? swap : !swap;

  NiftiHeader h;
  h.sizeof_hdr = sizeof_hdr;
  for (std::size_t i = 0; i < 8; ++i) {
    h.dim[i] = load<std::int16_t>(bytes, off_dim + 2 * i, swap);
    h.pixdim[i] = load<float>(bytes, off_pixdim + 4 * i, swap);
  }
  h.datatype = load<std::int16_t>(bytes, off_datatype, swap);
  h.bitpix = load<std::int16_t>(bytes, off_bitpix, swap);
  h.vox_offset = load<float>(bytes, off_vox_offset, swap);
  h.scl_slope = load<float>(bytes, off_scl_slope, swap);
  h.scl_inter = load<float>(bytes, off_scl_inter, swap);
  h.xyzt_units = static_cast<std::uint8_t>(bytes[off_xyzt_units]);
  std::memcpy(h.magic.data(), bytes.data() + off_magic, 4);

  const std::array<char, 4> single_file{'n', '+', '1', '\0'};
  if (h.magic != single_file)
    throw format_error("unsupported magic (only single-file \"n+1\" NIfTI-1 is read)", off_magic);
  if (h.dim[0] != 3) throw format_error("dim[0] must be 3", off_dim);
  for (std::size_t i = 1; i <= 3; ++i)
    if (h.dim[i] < 1) throw format_error("dim[1..3] must be >= 1", off_dim + 2 * i);
  if (!is_supported_datatype(h.datatype))
    throw format_error("unsupported datatype code " + std::to_string(h.datatype), off_datatype);
  if (h.bitpix != static_cast<std::int16_t>(
                      8 * bytes_per_voxel(static_cast<NiftiDatatype>(h.datatype))))
    throw format_error("bitpix inconsistent with datatype", off_bitpix);
  if (!(h.vox_offset >= static_cast<float>(header_size)) || !std::isfinite(h.vox_offset))
    throw format_error("vox_offset must be >= 348", off_vox_offset);
  for (std::size_t i = 1; i <= 3; ++i)
    if (!(h.pixdim[i] > 0.0f) || !std::isfinite(h.pixdim[i]))
      throw format_error("pixdim[1..3] must be positive", off_pixdim + 4 * i);
  return h;
}

/// Decodes an in-memory .nii image into intensities (scaling applied).
inline Volume decode_nifti(std::span<const std::byte> bytes) {
  using namespace nifti_detail;
  bool big_endian = false;
  const NiftiHeader h = decode_nifti_header(bytes, big_endian);
  const bool swap = big_endian == host_is_little();

  const Dims dims{static_cast<std::size_t>(h.dim[1]), static_cast<std::size_t>(h.dim[2]),
                  static_cast<std::size_t>(h.dim[3])};
  const Spacing spacing{h.pixdim[1], h.pixdim[2], h.pixdim[3]};
  const auto dt = static_cast<NiftiDatatype>(h.datatype);
  const std::size_t bpv = bytes_per_voxel(dt);
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t needed = offset + dims.count() * bpv;
  if (bytes.size() < needed) throw format_error("truncated voxel data", bytes.size());

  const bool scaled = h.scl_slope != 0.0f && std::isfinite(h.scl_slope);
  const double slope = h.scl_slope;
  const double inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;

  std::vector<float> data(dims.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t at = offset + i * bpv;
    double raw = 0.0;
    switch (dt) {
      case NiftiDatatype::uint8: raw = static_cast<double>(std::to_integer<std::uint8_t>(bytes[at])); break;
      case NiftiDatatype::int16: raw = load<std::int16_t>(bytes, at, swap); break;
      case NiftiDatatype::uint16: raw = load<std::uint16_t>(bytes, at, swap); break;
      case NiftiDatatype::float32: {
        const float f = load<float>(bytes, at, swap);
        if (!std::isfinite(f)) throw format_error("non-finite voxel value", at);
        raw = f;
        break;
      }
    }
    data[i] = static_cast<float>(scaled ? raw * slope + inter : raw);
  }
  return Volume(dims, spacing, std::move(data));
}

struct NiftiWriteOptions {
  NiftiDatatype datatype = NiftiDatatype::float32;
  bool big_endian = false;
};

/// Encodes a volume without scaling (scl_slope = 0). Integer datatypes need
/// integral in-range intensities.
inline std::vector<std::byte> encode_nifti(const Volume& vol, const NiftiWriteOptions& opt = {}) {
  using namespace nifti_detail;
  const bool swap = opt.big_endian == host_is_little();
  const std::size_t bpv = bytes_per_voxel(opt.datatype);
  const std::size_t offset = 352;
  std::vector<std::byte> out(offset + vol.size() * bpv, std::byte{0});

  const Dims& d = vol.dims();
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767)
    throw config_error("NIfTI-1 dims are limited to 32767");

  store<std::int32_t>(out, 0, 348, swap);
  const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.nx),
                                        static_cast<std::int16_t>(d.ny),
                                        static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  const std::array<float, 8> pixdim{1.0f, static_cast<float>(vol.spacing().dx),
                                    static_cast<float>(vol.spacing().dy),
                                    static_cast<float>(vol.spacing().dz), 0.0f, 0.0f, 0.0f, 0.0f};
  for (std::size_t i = 0; i < 8; ++i) {
    store(out, off_dim + 2 * i, dim[i], swap);
    store(out, off_pixdim + 4 * i, pixdim[i], swap);
  }
  store(out, off_datatype, static_cast<std::int16_t>(opt.datatype), swap);
  store(out, off_bitpix, static_cast<std::int16_t>(8 * bpv), swap);
  store(out, off_vox_offset, static_cast<float>(offset), swap);
  store(out, off_scl_slope, 0.0f, swap);
  store(out, off_scl_inter, 0.0f, swap);
  out[off_xyzt_units] = std::byte{2};
  const char magic[4] = {'n', '+', '1', '\0'};
  std::memcpy(out.data() + off_magic, magic, 4);

  auto integral_in = [&](double v, double lo, double hi, std::size_t i) {
    if (v != std::floor(v) || v < lo || v > hi)
      throw domain_error("voxel " + std::to_string(i) + " value " + std::to_string(v) +
                         " not representable in the requested datatype");
  };
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const std::size_t at = offset + i * bpv;
    const double v = vol[i];
    switch (opt.datatype) {
      case NiftiDatatype::uint8:
        integral_in(v, 0, 255, i);
        out[at] = static_cast<std::byte>(static_cast<std::uint8_t>(v));
        break;
      case NiftiDatatype::int16:
        integral_in(v, -32768, 32767, i);
        store(out, at, static_cast<std::int16_t>(v), swap);
        break;
      case NiftiDatatype::uint16:
        integral_in(v, 0, 65535, i);
        store(out, at, static_cast<std::uint16_t>(v), swap);
        break;
      case NiftiDatatype::float32: store(out, at, vol[i], swap); break;
    }
  }
  return out;
}

/// Rewrites header fields of an encoded image (used for scaled files).
inline void patch_nifti_scaling(std::vector<std::byte>& encoded, float slope, float inter,
                                bool big_endian = false) {
  const bool swap = big_endian == nifti_detail::host_is_little();
  nifti_detail::store(encoded, nifti_detail::off_scl_slope, slope, swap);
  nifti_detail::store(encoded, nifti_detail::off_scl_inter, inter, swap);
}

/// `data_offset`/`bytes_per_value` only locate offending voxels in errors.
inline Mask volume_to_mask(const Volume& vol, std::size_t data_offset = 352,
                           std::size_t bytes_per_value = 1) {
  Mask m(vol.dims(), vol.spacing(), std::uint8_t{0});
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (vol[i] == 1.0f) m[i] = 1;
    else if (vol[i] != 0.0f)
      throw format_error("mask voxel " + std::to_string(i) + " is not 0 or 1",
                         data_offset + i * bytes_per_value);
  }
  return m;
}

inline Volume mask_to_volume(const Mask& m) {
  std::vector<float> data(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) data[i] = m[i] ? 1.0f : 0.0f;
  return Volume(m.dims(), m.spacing(), std::move(data));
}

inline std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw io_error("failed reading " + path.string());
  return bytes;
}

/// Writes via a sibling temporary file and rename, so a failed write never
/// leaves a partial file at `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw io_error("failed writing " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw io_error("cannot move temporary file onto " + path.string());
  }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

inline Volume read_nifti(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_nifti(bytes);
}

inline Mask read_nifti_mask(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  bool big_endian = false;
  const NiftiHeader h = decode_nifti_header(bytes, big_endian);
  return volume_to_mask(decode_nifti(bytes), static_cast<std::size_t>(h.vox_offset),
                        bytes_per_voxel(static_cast<NiftiDatatype>(h.datatype)));
}

inline void write_nifti(const Volume& vol, const std::filesystem::path& path,
                        const NiftiWriteOptions& opt = {}) {
  write_file_atomic(path, encode_nifti(vol, opt));
}

/// Masks are stored as uint8 {0,1}.
inline void write_nifti(const Mask& mask, const std::filesystem::path& path) {
  write_file_atomic(path, encode_nifti(mask_to_volume(mask), {NiftiDatatype::uint8, false}));
}

}  // namespace biliseg
