#pragma once

// Synthetic branching-tube phantoms with exact ground truth.
//
// Randomness: std::mt19937_64 streams seeded through splitmix64 from
// rng_seed (tree stream: splitmix64(rng_seed), noise stream:
// splitmix64(rng_seed ^ 0x6e6f697365)). Uniforms take the top 53 bits of a
// draw; normals use Box-Muller with both outputs consumed in order.
//
// Tree growth is breadth-first. Each segment at depth < max_depth draws one
// uniform u: if u < branch_probability it spawns two children at
// +/- branch_angle/2 about a random axis perpendicular to the segment (one
// extra uniform for the axis, radius scaled by radius_taper); otherwise it
// spawns one child continuing straight with jitter (two uniforms: tilt up to
// jitter_degrees, azimuth) at the parent radius.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <random>
#include <vector>

#include "biliseg/errors.hpp"
#include "biliseg/parallel.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this * (1.0 / norm()); }
};

struct PhantomParams {
  Dims dims{64, 64, 32};
  Spacing spacing{1.0, 1.0, 1.0};
  Vec3 root{32.0, 4.0, 16.0};
  Vec3 root_direction{0.0, 1.0, 0.0};
  double segment_length = 12.0;
  double radius_root = 3.0;
  double radius_taper = 0.8;
  double branch_probability = 0.5;
  double branch_angle = 60.0;
  double jitter_degrees = 10.0;
  int max_depth = 4;
  double fg_mean = 200.0;
  double bg_mean = 40.0;
  double noise_std = 0.0;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
      throw config_error("phantom dims must be positive");
    spacing.validate();
    if (!(fg_mean > bg_mean)) throw config_error("phantom requires fg_mean > bg_mean");
    if (!(radius_root >= std::max({spacing.dx, spacing.dy, spacing.dz}) / 2.0))
      throw config_error("radius_root must be at least half the largest voxel spacing");
    if (!(radius_taper > 0.0 && radius_taper <= 1.0))
      throw config_error("radius_taper must lie in (0, 1]");
    if (!(branch_probability >= 0.0 && branch_probability <= 1.0))
      throw config_error("branch_probability must lie in [0, 1]");
    if (max_depth < 0) throw config_error("max_depth must be >= 0");
    if (!(segment_length > 0.0)) throw config_error("segment_length must be > 0");
    if (!(noise_std >= 0.0)) throw config_error("noise_std must be >= 0");
    if (!(root_direction.norm() > 0.0)) throw config_error("root_direction must be non-zero");
  }
};

struct Segment {
  Vec3 start;
  Vec3 end;
  double radius = 0.0;
  int parent = -1;  // -1 for the root segment
  int depth = 0;
};

struct CenterlineTree {
  std::vector<Segment> segments;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// mt19937_64 with explicitly defined uniform and normal draws.
class PhantomRng {
 public:
  explicit PhantomRng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

// Rotates v about unit axis by angle (Rodrigues).
inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c));
}

inline Vec3 any_perpendicular(const Vec3& d) {
  const Vec3 helper = std::abs(d.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  return d.cross(helper).normalized();
}

// Unit vector perpendicular to d at azimuth phi.
inline Vec3 perpendicular_at(const Vec3& d, double phi) {
  const Vec3 p = any_perpendicular(d);
  return rotate(p, d, phi);
}

}  // namespace detail

inline CenterlineTree generate_tree(const PhantomParams& params) {
  params.validate();
  PhantomRng rng(params.rng_seed);
  constexpr double deg = std::numbers::pi / 180.0;
  CenterlineTree tree;
  const Vec3 dir0 = params.root_direction.normalized();
  tree.segments.push_back({params.root, params.root + dir0 * params.segment_length,
                           params.radius_root, -1, 0});

  std::deque<int> open{0};
  while (!open.empty()) {
    const int idx = open.front();
    open.pop_front();
    const Segment parent = tree.segments[static_cast<std::size_t>(idx)];
    if (parent.depth >= params.max_depth) continue;
    const Vec3 dir = (parent.end - parent.start).normalized();

    auto spawn = [&](const Vec3& d, double radius) {
      tree.segments.push_back(
          {parent.end, parent.end + d * params.segment_length, radius, idx, parent.depth + 1});
      open.push_back(static_cast<int>(tree.segments.size() - 1));
    };

    if (rng.uniform() < params.branch_probability) {
      const Vec3 axis = detail::perpendicular_at(dir, 2.0 * std::numbers::pi * rng.uniform());
      const double half = 0.5 * params.branch_angle * deg;
      const double radius = parent.radius * params.radius_taper;
      spawn(detail::rotate(dir, axis, half).normalized(), radius);
      spawn(detail::rotate(dir, axis, -half).normalized(), radius);
    } else {
      const double tilt = params.jitter_degrees * deg * rng.uniform();
      const Vec3 axis = detail::perpendicular_at(dir, 2.0 * std::numbers::pi * rng.uniform());
      spawn(detail::rotate(dir, axis, tilt).normalized(), parent.radius);
    }
  }
  return tree;
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.dot(ab);
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

/// A voxel is foreground when its centre lies within some segment's radius
/// of that segment (distance == radius counts).
inline Mask rasterize_tree(const CenterlineTree& tree, const Dims& dims, const Spacing& spacing) {
  if (tree.segments.empty()) throw degenerate_input_error("cannot rasterize an empty tree");
  Mask out(dims, spacing, std::uint8_t{0});

  auto axis_range = [](double lo_mm, double hi_mm, double h, std::size_t n) {
    const auto lo = static_cast<std::int64_t>(std::floor(lo_mm / h));
    const auto hi = static_cast<std::int64_t>(std::ceil(hi_mm / h));
    return std::pair<std::int64_t, std::int64_t>{
        std::max<std::int64_t>(0, lo), std::min<std::int64_t>(static_cast<std::int64_t>(n) - 1, hi)};
  };

  // Segments only touch voxels in their padded bounding boxes; z-slices are
  // written independently, so splitting by slice keeps output deterministic.
  parallel_for(dims.nz, [&](std::size_t zi) {
    const double z = static_cast<double>(zi) * spacing.dz;
    for (const Segment& s : tree.segments) {
      const double r = s.radius;
      if (z < std::min(s.start.z, s.end.z) - r || z > std::max(s.start.z, s.end.z) + r) continue;
      const auto [x0, x1] = axis_range(std::min(s.start.x, s.end.x) - r,
                                       std::max(s.start.x, s.end.x) + r, spacing.dx, dims.nx);
      const auto [y0, y1] = axis_range(std::min(s.start.y, s.end.y) - r,
                                       std::max(s.start.y, s.end.y) + r, spacing.dy, dims.ny);
      for (std::int64_t y = y0; y <= y1; ++y)
        for (std::int64_t x = x0; x <= x1; ++x) {
          const std::size_t i = linear_index(dims, {x, y, static_cast<std::int64_t>(zi)});
          if (out[i]) continue;
          const Vec3 p{static_cast<double>(x) * spacing.dx, static_cast<double>(y) * spacing.dy, z};
          if (point_segment_distance(p, s.start, s.end) <= r) out[i] = 1;
        }
    }
  });
  if (count_foreground(out) == 0)
    throw degenerate_input_error("centerline tree does not intersect the grid");
  return out;
}

/// Two-class Gaussian intensities clamped to [0, 255], drawn in linear voxel
/// order from the noise stream.
inline Volume render_intensities(const Mask& gt, const PhantomParams& params) {
  PhantomRng rng(params.rng_seed ^ 0x6e6f697365ULL);
  std::vector<float> data(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double mean = gt[i] ? params.fg_mean : params.bg_mean;
    const double v = params.noise_std > 0.0 ? mean + params.noise_std * rng.normal() : mean;
    data[i] = static_cast<float>(std::clamp(v, 0.0, 255.0));
  }
  return Volume(gt.dims(), gt.spacing(), std::move(data));
}

struct Phantom {
  CenterlineTree tree;
  Mask truth;
  Volume volume;
};

inline Phantom make_phantom(const PhantomParams& params) {
  CenterlineTree tree = generate_tree(params);
  Mask truth = rasterize_tree(tree, params.dims, params.spacing);
  Volume volume = render_intensities(truth, params);
  return {std::move(tree), std::move(truth), std::move(volume)};
}

}  // namespace biliseg
