#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "biliseg/errors.hpp"
#include "biliseg/nifti.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

struct Triangle {
  std::array<float, 3> normal{};
  std::array<std::array<float, 3>, 3> vertices{};
};

/// Blocky voxel surface: two triangles per foreground face that borders
/// background or the grid edge. Coordinates in mm (voxel centres on the
/// spacing lattice), counter-clockwise winding seen from outside.
inline std::vector<Triangle> extract_surface_mesh(const Mask& mask) {
  if (count_foreground(mask) == 0)
    throw degenerate_input_error("cannot extract a surface from an empty mask");
  const Dims& d = mask.dims();
  const std::array<double, 3> h{mask.spacing().dx, mask.spacing().dy, mask.spacing().dz};
  std::vector<Triangle> tris;

  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 p = index_of(d, i);
    const std::array<double, 3> c{p.x * h[0], p.y * h[1], p.z * h[2]};
    for (int axis = 0; axis < 3; ++axis) {
      for (const int sign : {-1, 1}) {
        Index3 n = p;
        (axis == 0 ? n.x : axis == 1 ? n.y : n.z) += sign;
        if (contains(d, n) && mask[linear_index(d, n)]) continue;

        // (u, v, axis) is right-handed, so p0..p3 runs counter-clockwise
        // around +axis; flip for the negative face.
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        std::array<std::array<float, 3>, 4> q{};
        const double su[4] = {-1, 1, 1, -1}, sv[4] = {-1, -1, 1, 1};
        for (int k = 0; k < 4; ++k) {
          std::array<double, 3> pt = c;
          pt[axis] += 0.5 * sign * h[axis];
          pt[u] += 0.5 * su[k] * h[u];
          pt[v] += 0.5 * sv[k] * h[v];
          q[k] = {float(pt[0]), float(pt[1]), float(pt[2])};
        }
        if (sign < 0) std::swap(q[1], q[3]);
        std::array<float, 3> normal{0, 0, 0};
        normal[axis] = float(sign);
        tris.push_back({normal, {q[0], q[1], q[2]}});
        tris.push_back({normal, {q[0], q[2], q[3]}});
      }
    }
  }
  return tris;
}

/// Binary little-endian STL: 80-byte header, uint32 count, 50 bytes per
/// triangle.
inline std::vector<std::byte> encode_stl(const std::vector<Triangle>& tris) {
  std::vector<std::byte> out(84 + 50 * tris.size(), std::byte{0});
  const std::string title = "biliseg voxel surface (mm)";
  std::memcpy(out.data(), title.data(), title.size());
  auto put = [&](std::size_t off, auto value) {
    auto raw = std::bit_cast<std::array<std::byte, sizeof(value)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    std::memcpy(out.data() + off, raw.data(), raw.size());
  };
  put(80, static_cast<std::uint32_t>(tris.size()));
  std::size_t off = 84;
  for (const Triangle& t : tris) {
    for (float f : t.normal) put(off, f), off += 4;
    for (const auto& v : t.vertices)
      for (float f : v) put(off, f), off += 4;
    put(off, std::uint16_t{0});
    off += 2;
  }
  return out;
}

inline void write_stl(const std::vector<Triangle>& tris, const std::filesystem::path& path) {
  write_file_atomic(path, encode_stl(tris));
}

}  // namespace biliseg
