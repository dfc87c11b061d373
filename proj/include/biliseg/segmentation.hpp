#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "biliseg/errors.hpp"
#include "biliseg/parallel.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

// ---------------------------------------------------------------------------
// Dual thresholding

struct ThresholdPair {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct ThresholdConfig {
  double t_min = 0.0;
  double t_max = 0.0;
  std::map<std::size_t, ThresholdPair> per_slice_overrides;

  void validate(std::size_t nz) const {
    if (!(t_min < t_max)) throw config_error("threshold requires t_min < t_max");
    for (const auto& [z, pair] : per_slice_overrides) {
      if (z >= nz)
        throw config_error("threshold override for slice " + std::to_string(z) +
                           " but volume has " + std::to_string(nz) + " slices");
      if (!(pair.t_min < pair.t_max))
        throw config_error("threshold override for slice " + std::to_string(z) +
                           " requires t_min < t_max");
    }
  }
};

/// Foreground iff t_min < f <= t_max, with per-slice overrides taking
/// precedence over the global pair.
inline Mask dual_threshold(const Volume& vol, const ThresholdConfig& cfg) {
  const Dims& d = vol.dims();
  cfg.validate(d.nz);
  Mask out = empty_mask_like(vol);
  for (std::size_t z = 0; z < d.nz; ++z) {
    ThresholdPair t{cfg.t_min, cfg.t_max};
    if (auto it = cfg.per_slice_overrides.find(z); it != cfg.per_slice_overrides.end())
      t = it->second;
    const std::size_t base = z * d.slice_size();
    for (std::size_t i = base; i < base + d.slice_size(); ++i) {
      const double f = vol[i];
      out[i] = (t.t_min < f && f <= t.t_max) ? 1 : 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flood fill

struct FloodFillConfig {
  Index3 seed;
  double tolerance = 0.0;
  /// In-slice connectivities (4/8) confine the fill to the seed's slice.
  Connectivity connectivity = Connectivity::face6;
};

/// Maximal connected region containing the seed whose intensities lie in
/// [f(seed) - tolerance, f(seed) + tolerance].
inline Mask flood_fill(const Volume& vol, const FloodFillConfig& cfg) {
  if (!vol.contains(cfg.seed))
    throw bounds_error("flood fill seed " + to_string(cfg.seed) + " outside volume");
  if (!(cfg.tolerance >= 0.0)) throw config_error("flood fill tolerance must be >= 0");
  const Dims& d = vol.dims();
  const double ref = vol.at(cfg.seed);
  auto within = [&](std::size_t i) { return std::abs(double(vol[i]) - ref) <= cfg.tolerance; };

  Mask out = empty_mask_like(vol);
  std::vector<std::size_t> stack{linear_index(d, cfg.seed)};
  out[stack.back()] = 1;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    for_each_neighbor(d, index_of(d, cur), cfg.connectivity, [&](const Index3&, std::size_t n) {
      if (!out[n] && within(n)) {
        out[n] = 1;
        stack.push_back(n);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sauvola threshold

/// m * (1 + k * (s / R - 1)) with m the window mean and s its population
/// standard deviation.
inline double sauvola_threshold(std::span<const double> window, double k, double r) {
  if (window.empty()) throw degenerate_input_error("empty Sauvola window");
  const auto n = static_cast<double>(window.size());
  double sum = 0.0;
  for (double v : window) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : window) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / n);
  return mean * (1.0 + k * (s / r - 1.0));
}

/// Threshold at (x, y) on slice z using a window x window in-plane
/// neighbourhood clipped to the slice.
inline double sauvola_threshold_at(const Volume& vol, const Index3& at, int window, double k,
                                   double r, std::vector<double>& scratch) {
  const Dims& d = vol.dims();
  const int half = window / 2;
  scratch.clear();
  for (std::int64_t y = at.y - half; y <= at.y + half; ++y) {
    if (y < 0 || y >= static_cast<std::int64_t>(d.ny)) continue;
    for (std::int64_t x = at.x - half; x <= at.x + half; ++x) {
      if (x < 0 || x >= static_cast<std::int64_t>(d.nx)) continue;
      scratch.push_back(vol[linear_index(d, {x, y, at.z})]);
    }
  }
  return sauvola_threshold(scratch, k, r);
}

/// Per-voxel Sauvola thresholds for one slice.
inline std::vector<double> sauvola_slice(const Volume& vol, std::size_t z, int window, double k,
                                         double r) {
  const Dims& d = vol.dims();
  std::vector<double> out(d.slice_size());
  std::vector<double> scratch;
  scratch.reserve(static_cast<std::size_t>(window) * window);
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t x = 0; x < d.nx; ++x)
      out[x + y * d.nx] = sauvola_threshold_at(
          vol, {std::int64_t(x), std::int64_t(y), std::int64_t(z)}, window, k, r, scratch);
  return out;
}

// ---------------------------------------------------------------------------
// Region growing

struct RegionGrowConfig {
  Index3 seed;
  double k = 0.3;
  double r = 100.0;
  int window = 3;
  Connectivity in_slice_connectivity = Connectivity::edge4;
  bool propagate_slices = true;

  void validate() const {
    if (window < 3 || window % 2 == 0) throw config_error("Sauvola window must be odd and >= 3");
    if (!(r > 0.0)) throw config_error("Sauvola R must be > 0");
    if (!(k > 0.0 && k < 1.0)) throw config_error("Sauvola k must lie in (0, 1)");
    if (!is_in_slice(in_slice_connectivity))
      throw config_error("region growing needs an in-slice connectivity (4 or 8)");
  }
};

/// Slice-wise growth from a single seed. A voxel joins when its intensity
/// reaches its own Sauvola threshold; growth spreads in-slice and, once a
/// slice converges, every voxel it gained tries the same (x, y) on the
/// slices above and below. Runs to a global fixpoint. Acceptance does not
/// depend on the path, so the result is the set reachable from the seed
/// through accepted voxels.
inline Mask region_grow(const Volume& vol, const RegionGrowConfig& cfg) {
  cfg.validate();
  if (!vol.contains(cfg.seed))
    throw bounds_error("region growing seed " + to_string(cfg.seed) + " outside volume");
  const Dims& d = vol.dims();

  std::vector<std::vector<double>> thresholds(d.nz);
  if (cfg.propagate_slices) {
    parallel_for(d.nz, [&](std::size_t z) {
      thresholds[z] = sauvola_slice(vol, z, cfg.window, cfg.k, cfg.r);
    });
  } else {
    const auto z = static_cast<std::size_t>(cfg.seed.z);
    thresholds[z] = sauvola_slice(vol, z, cfg.window, cfg.k, cfg.r);
  }
  auto accepted = [&](std::size_t i) {
    const std::size_t z = i / d.slice_size();
    return static_cast<double>(vol[i]) >= thresholds[z][i % d.slice_size()];
  };

  Mask out = empty_mask_like(vol);
  std::vector<std::vector<std::size_t>> frontier(d.nz);
  std::deque<std::size_t> pending_slices;
  std::vector<std::uint8_t> queued(d.nz, 0);
  auto enqueue = [&](std::size_t z) {
    if (!queued[z]) {
      queued[z] = 1;
      pending_slices.push_back(z);
    }
  };

  const std::size_t seed = linear_index(d, cfg.seed);
  out[seed] = 1;
  frontier[static_cast<std::size_t>(cfg.seed.z)].push_back(seed);
  enqueue(static_cast<std::size_t>(cfg.seed.z));

  std::vector<std::size_t> gained;
  while (!pending_slices.empty()) {
    const std::size_t z = pending_slices.front();
    pending_slices.pop_front();
    queued[z] = 0;

    gained.clear();
    auto& stack = frontier[z];
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      gained.push_back(cur);
      for_each_neighbor(d, index_of(d, cur), cfg.in_slice_connectivity,
                        [&](const Index3&, std::size_t n) {
                          if (!out[n] && accepted(n)) {
                            out[n] = 1;
                            stack.push_back(n);
                          }
                        });
    }
    if (!cfg.propagate_slices) continue;
    for (const std::size_t i : gained) {
      for (const int dz : {-1, 1}) {
        const auto nz = static_cast<std::int64_t>(z) + dz;
        if (nz < 0 || nz >= static_cast<std::int64_t>(d.nz)) continue;
        const std::size_t n = static_cast<std::size_t>(static_cast<std::int64_t>(i) +
                                                       dz * static_cast<std::int64_t>(d.slice_size()));
        if (!out[n] && accepted(n)) {
          out[n] = 1;
          frontier[static_cast<std::size_t>(nz)].push_back(n);
          enqueue(static_cast<std::size_t>(nz));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Post-processing

struct KeepLargest {};
struct KeepSeeded {
  std::vector<Index3> seeds;
};
struct MinSize {
  std::size_t voxels = 1;
};
using PostprocessPolicy = std::variant<KeepLargest, KeepSeeded, MinSize>;

inline Mask apply_policy(const Mask& mask, const PostprocessPolicy& policy,
                         Connectivity conn = Connectivity::vertex26) {
  const LabelMap lm = connected_components(mask, conn);
  std::vector<std::uint8_t> keep(lm.component_count() + 1, 0);

  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KeepLargest>) {
          if (lm.component_count() > 0) keep[1] = 1;
        } else if constexpr (std::is_same_v<P, KeepSeeded>) {
          bool any = false;
          for (const Index3& s : p.seeds) {
            const std::uint32_t label = lm.labels.at(s);
            if (label) {
              keep[label] = 1;
              any = true;
            }
          }
          if (!any) throw degenerate_input_error("keep_seeded: every seed lies in background");
        } else {
          if (p.voxels < 1) throw config_error("min_size must be >= 1");
          for (std::size_t l = 1; l <= lm.component_count(); ++l)
            keep[l] = lm.sizes[l - 1] >= p.voxels ? 1 : 0;
        }
      },
      policy);

  Mask out = empty_mask_like(mask);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep[lm.labels[i]];
  return out;
}

/// Applies the policies in order.
inline Mask postprocess(const Mask& mask, std::span<const PostprocessPolicy> policies,
                        Connectivity conn = Connectivity::vertex26) {
  Mask out = mask;
  for (const auto& p : policies) out = apply_policy(out, p, conn);
  return out;
}

}  // namespace biliseg
