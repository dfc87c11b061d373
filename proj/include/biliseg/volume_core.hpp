#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "biliseg/errors.hpp"

namespace biliseg {

/// Voxel size in millimetres along each axis. Anisotropy is allowed.
struct Spacing {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  bool operator==(const Spacing&) const = default;

  void validate() const {
    if (!(dx > 0.0 && dy > 0.0 && dz > 0.0) || !std::isfinite(dx) ||
        !std::isfinite(dy) || !std::isfinite(dz))
      throw config_error("voxel spacing must be finite and positive");
  }
};

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  bool operator==(const Dims&) const = default;
  std::size_t count() const { return nx * ny * nz; }
  std::size_t slice_size() const { return nx * ny; }
};

/// Signed so that neighbor offsets can step outside the grid before the
/// bounds test.
struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  bool operator==(const Index3&) const = default;
  Index3 operator+(const Index3& o) const { return {x + o.x, y + o.y, z + o.z}; }
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline bool contains(const Dims& d, const Index3& i) {
  return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < static_cast<std::int64_t>(d.nx) &&
         i.y < static_cast<std::int64_t>(d.ny) && i.z < static_cast<std::int64_t>(d.nz);
}

inline std::size_t linear_index(const Dims& d, const Index3& i) {
  return static_cast<std::size_t>(i.x) +
         d.nx * (static_cast<std::size_t>(i.y) + d.ny * static_cast<std::size_t>(i.z));
}

inline Index3 index_of(const Dims& d, std::size_t linear) {
  const std::size_t x = linear % d.nx;
  const std::size_t rest = linear / d.nx;
  return {static_cast<std::int64_t>(x), static_cast<std::int64_t>(rest % d.ny),
          static_cast<std::int64_t>(rest / d.ny)};
}

inline std::string to_string(const Index3& i) {
  return "(" + std::to_string(i.x) + "," + std::to_string(i.y) + "," + std::to_string(i.z) + ")";
}

/// Voxel centres sit on the lattice (ix*dx, iy*dy, iz*dz).
inline WorldPoint voxel_to_world(const Index3& i, const Dims& d, const Spacing& s) {
  if (!contains(d, i)) throw bounds_error("voxel index " + to_string(i) + " outside grid");
  return {static_cast<double>(i.x) * s.dx, static_cast<double>(i.y) * s.dy,
          static_cast<double>(i.z) * s.dz};
}

/// Dense 3D grid, x fastest then y then z.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing), data_(dims.count(), fill) {
    check_geometry();
  }

  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_geometry();
    if (data_.size() != dims_.count())
      throw geometry_error("voxel count " + std::to_string(data_.size()) +
                           " does not match dims product " + std::to_string(dims_.count()));
    if constexpr (std::is_floating_point_v<T>) {
      for (std::size_t i = 0; i < data_.size(); ++i)
        if (!std::isfinite(data_[i]))
          throw domain_error("non-finite intensity at voxel " + std::to_string(i));
    }
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(const Index3& i) { return data_[checked(i)]; }
  const T& at(const Index3& i) const { return data_[checked(i)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool contains(const Index3& i) const { return biliseg::contains(dims_, i); }

  template <typename U>
  bool same_geometry(const Grid<U>& other) const {
    return dims_ == other.dims() && spacing_ == other.spacing();
  }

  bool operator==(const Grid&) const = default;

 private:
  void check_geometry() const {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
      throw geometry_error("grid dimensions must be positive");
    spacing_.validate();
  }

  std::size_t checked(const Index3& i) const {
    if (!contains(i)) throw bounds_error("voxel index " + to_string(i) + " outside grid");
    return linear_index(dims_, i);
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

using Volume = Grid<float>;
using Mask = Grid<std::uint8_t>;

template <typename T>
inline Mask empty_mask_like(const Grid<T>& g) {
  return Mask(g.dims(), g.spacing(), std::uint8_t{0});
}

inline std::size_t count_foreground(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

template <typename U>
inline void require_same_geometry(const Mask& a, const Grid<U>& b, const char* what) {
  if (!a.same_geometry(b)) throw geometry_error(std::string(what) + ": dims or spacing differ");
}

// ---------------------------------------------------------------------------
// Connectivity

enum class Connectivity { face6, edge18, vertex26, edge4, vertex8 };

inline bool is_in_slice(Connectivity c) {
  return c == Connectivity::edge4 || c == Connectivity::vertex8;
}

inline std::span<const Index3> neighbor_offsets(Connectivity c) {
  static const auto tables = [] {
    std::array<std::vector<Index3>, 5> t;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nonzero = (dx != 0) + (dy != 0) + (dz != 0);
          if (nonzero == 0) continue;
          const Index3 o{dx, dy, dz};
          if (nonzero == 1) t[0].push_back(o);
          if (nonzero <= 2) t[1].push_back(o);
          t[2].push_back(o);
          if (dz == 0 && nonzero == 1) t[3].push_back(o);
          if (dz == 0) t[4].push_back(o);
        }
    return t;
  }();
  return tables[static_cast<std::size_t>(c)];
}

/// Accepts 6/18/26 (3D) and 4/8 (in-slice).
inline Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::face6;
    case 18: return Connectivity::edge18;
    case 26: return Connectivity::vertex26;
    case 4: return Connectivity::edge4;
    case 8: return Connectivity::vertex8;
    default: throw config_error("unsupported connectivity " + std::to_string(n));
  }
}

inline int connectivity_to_int(Connectivity c) {
  switch (c) {
    case Connectivity::face6: return 6;
    case Connectivity::edge18: return 18;
    case Connectivity::vertex26: return 26;
    case Connectivity::edge4: return 4;
    case Connectivity::vertex8: return 8;
  }
  return 0;
}

template <typename Fn>
inline void for_each_neighbor(const Dims& d, const Index3& at, Connectivity c, Fn&& fn) {
  for (const Index3& o : neighbor_offsets(c)) {
    const Index3 n = at + o;
    if (contains(d, n)) fn(n, linear_index(d, n));
  }
}

// ---------------------------------------------------------------------------
// Connected components

/// Labels are 1..K ordered by decreasing size; ties go to the component whose
/// first voxel (smallest linear index) comes first. 0 is background.
struct LabelMap {
  Grid<std::uint32_t> labels;
  std::vector<std::size_t> sizes;  // sizes[k - 1] is the size of label k

  std::size_t component_count() const { return sizes.size(); }
};

inline LabelMap connected_components(const Mask& mask, Connectivity conn) {
  const Dims& d = mask.dims();
  Grid<std::uint32_t> provisional(d, mask.spacing(), 0u);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;

  // Scanning in linear order means provisional labels already follow the
  // smallest-first-voxel order used for tie breaking.
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || provisional[start]) continue;
    const auto label = static_cast<std::uint32_t>(sizes.size() + 1);
    std::size_t size = 0;
    provisional[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++size;
      for_each_neighbor(d, index_of(d, cur), conn, [&](const Index3&, std::size_t n) {
        if (mask[n] && !provisional[n]) {
          provisional[n] = label;
          stack.push_back(n);
        }
      });
    }
    sizes.push_back(size);
  }

  std::vector<std::uint32_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return sizes[a] > sizes[b]; });
  std::vector<std::uint32_t> remap(sizes.size() + 1, 0u);
  std::vector<std::size_t> sorted_sizes(sizes.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    remap[order[rank] + 1] = static_cast<std::uint32_t>(rank + 1);
    sorted_sizes[rank] = sizes[order[rank]];
  }
  for (std::size_t i = 0; i < provisional.size(); ++i) provisional[i] = remap[provisional[i]];
  return {std::move(provisional), std::move(sorted_sizes)};
}

/// Mask of the voxels carrying `label`.
inline Mask component_mask(const LabelMap& lm, std::uint32_t label) {
  Mask out(lm.labels.dims(), lm.labels.spacing(), std::uint8_t{0});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lm.labels[i] == label ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Bounding boxes

/// Inclusive voxel box.
struct BBox {
  Index3 lo;
  Index3 hi;

  bool operator==(const BBox&) const = default;
  Dims dims() const {
    return {static_cast<std::size_t>(hi.x - lo.x + 1), static_cast<std::size_t>(hi.y - lo.y + 1),
            static_cast<std::size_t>(hi.z - lo.z + 1)};
  }
  bool contains(const Index3& i) const {
    return i.x >= lo.x && i.y >= lo.y && i.z >= lo.z && i.x <= hi.x && i.y <= hi.y &&
           i.z <= hi.z;
  }
};

inline BBox bbox_of(const Mask& mask, std::size_t margin) {
  const Dims& d = mask.dims();
  Index3 lo{std::int64_t(d.nx), std::int64_t(d.ny), std::int64_t(d.nz)};
  Index3 hi{-1, -1, -1};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 p = index_of(d, i);
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  if (hi.x < 0) throw degenerate_input_error("bounding box of an empty mask is undefined");
  const auto m = static_cast<std::int64_t>(margin);
  lo = {std::max<std::int64_t>(0, lo.x - m), std::max<std::int64_t>(0, lo.y - m),
        std::max<std::int64_t>(0, lo.z - m)};
  hi = {std::min<std::int64_t>(std::int64_t(d.nx) - 1, hi.x + m),
        std::min<std::int64_t>(std::int64_t(d.ny) - 1, hi.y + m),
        std::min<std::int64_t>(std::int64_t(d.nz) - 1, hi.z + m)};
  return {lo, hi};
}

template <typename T>
Grid<T> crop(const Grid<T>& g, const BBox& box) {
  if (!g.contains(box.lo) || !g.contains(box.hi))
    throw bounds_error("crop box exceeds grid");
  const Dims out_dims = box.dims();
  std::vector<T> out;
  out.reserve(out_dims.count());
  for (std::int64_t z = box.lo.z; z <= box.hi.z; ++z)
    for (std::int64_t y = box.lo.y; y <= box.hi.y; ++y)
      for (std::int64_t x = box.lo.x; x <= box.hi.x; ++x)
        out.push_back(g[linear_index(g.dims(), {x, y, z})]);
  return Grid<T>(out_dims, g.spacing(), std::move(out));
}

/// Places a cropped grid back into a full grid of `full_dims`, filling the
/// rest with `fill`.
template <typename T>
Grid<T> embed(const Grid<T>& cropped, const BBox& box, const Dims& full_dims, T fill = T{}) {
  if (cropped.dims() != box.dims()) throw geometry_error("cropped grid does not match box");
  Grid<T> out(full_dims, cropped.spacing(), fill);
  if (!out.contains(box.lo) || !out.contains(box.hi))
    throw bounds_error("embed box exceeds target grid");
  std::size_t src = 0;
  for (std::int64_t z = box.lo.z; z <= box.hi.z; ++z)
    for (std::int64_t y = box.lo.y; y <= box.hi.y; ++y)
      for (std::int64_t x = box.lo.x; x <= box.hi.x; ++x)
        out[linear_index(full_dims, {x, y, z})] = cropped[src++];
  return out;
}

}  // namespace biliseg
