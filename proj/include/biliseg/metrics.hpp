#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "biliseg/errors.hpp"
#include "biliseg/parallel.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

/// Overlap and surface-distance scores for one (prediction, ground truth)
/// pair. The four counts are automated connected-component proxies for
/// expert-reviewed topology errors, not the expert counts themselves.
struct MetricsReport {
  double dsc = 0.0;
  double hd_mm = 0.0;
  double hd_directed_pred_to_gt = 0.0;
  double hd_directed_gt_to_pred = 0.0;
  double rvd = 0.0;
  std::size_t outliers = 0;
  std::size_t missed_components = 0;
  std::size_t false_communicating = 0;
  std::size_t false_non_communicating = 0;
};

inline double dice(const Mask& pred, const Mask& gt) {
  require_same_geometry(pred, gt, "dice");
  std::size_t both = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    np += p;
    ng += g;
    both += p && g;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + ng);
}

inline double rvd(const Mask& pred, const Mask& gt) {
  require_same_geometry(pred, gt, "rvd");
  const auto np = static_cast<double>(count_foreground(pred));
  const auto ng = static_cast<double>(count_foreground(gt));
  if (ng == 0.0) throw degenerate_input_error("RVD is undefined for an empty reference mask");
  return std::abs(np - ng) / ng;
}

// ---------------------------------------------------------------------------
// Exact Euclidean distance transform

/// Distance in mm from every voxel centre to the nearest foreground centre.
struct DistanceField {
  Grid<double> distance;
};

namespace detail {

// Lower envelope of parabolas along one axis (Felzenszwalb & Huttenlocher),
// with sample positions scaled by the axis spacing. Infinite inputs are not
// sites and are skipped.
inline void edt_1d(const double* f, double* out, std::size_t n, double h,
                   std::vector<std::size_t>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  bool any = false;
  auto pos = [h](std::size_t q) { return static_cast<double>(q) * h; };
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (!any) {
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      any = true;
      continue;
    }
    // z[0] is -inf, so k never drops below zero.
    double s;
    while (true) {
      const std::size_t r = v[k];
      s = ((f[q] + pos(q) * pos(q)) - (f[r] + pos(r) * pos(r))) / (2.0 * (pos(q) - pos(r)));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (!any) {
    std::fill(out, out + n, inf);
    return;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < pos(q)) ++k;
    const double d = pos(q) - pos(v[k]);
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace detail

/// Squared distances (mm^2) to the nearest foreground voxel centre.
inline Grid<double> squared_distance_transform(const Mask& mask) {
  if (count_foreground(mask) == 0)
    throw degenerate_input_error("distance transform of an empty mask is undefined");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Dims d = mask.dims();
  const Spacing s = mask.spacing();
  Grid<double> g(d, s, inf);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) g[i] = 0.0;

  // One pass per axis; each line is independent.
  auto run_axis = [&](std::size_t n, std::size_t stride, std::size_t lines, double h,
                      auto line_start) {
    parallel_for(lines, [&, n, stride, h](std::size_t line) {
      thread_local std::vector<double> in, out;
      thread_local std::vector<std::size_t> v;
      thread_local std::vector<double> z;
      in.resize(n);
      out.resize(n);
      const std::size_t base = line_start(line);
      for (std::size_t q = 0; q < n; ++q) in[q] = g[base + q * stride];
      detail::edt_1d(in.data(), out.data(), n, h, v, z);
      for (std::size_t q = 0; q < n; ++q) g[base + q * stride] = out[q];
    });
  };
  run_axis(d.nx, 1, d.ny * d.nz, s.dx, [&](std::size_t line) { return line * d.nx; });
  run_axis(d.ny, d.nx, d.nx * d.nz, s.dy, [&](std::size_t line) {
    return (line % d.nx) + (line / d.nx) * d.slice_size();
  });
  run_axis(d.nz, d.slice_size(), d.slice_size(), s.dz, [](std::size_t line) { return line; });
  return g;
}

inline DistanceField distance_transform(const Mask& mask) {
  Grid<double> g = squared_distance_transform(mask);
  for (double& v : g.values()) v = std::sqrt(v);
  return {std::move(g)};
}

enum class HausdorffMode { directed, symmetric };

/// Directed HD from `from` to `to`: max over voxels of `from` of the distance
/// to the nearest voxel of `to`.
inline double directed_hausdorff(const Mask& from, const Mask& to) {
  require_same_geometry(from, to, "hausdorff");
  if (count_foreground(from) == 0 || count_foreground(to) == 0)
    throw degenerate_input_error("Hausdorff distance is undefined for an empty mask");
  const Grid<double> sq = squared_distance_transform(to);
  double worst = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i)
    if (from[i]) worst = std::max(worst, sq[i]);
  return std::sqrt(worst);
}

inline double hausdorff(const Mask& pred, const Mask& gt,
                        HausdorffMode mode = HausdorffMode::symmetric) {
  const double a = directed_hausdorff(pred, gt);
  if (mode == HausdorffMode::directed) return a;
  return std::max(a, directed_hausdorff(gt, pred));
}

// ---------------------------------------------------------------------------
// Topology proxies

struct TopologyCounts {
  std::size_t outliers = 0;
  std::size_t missed_components = 0;
  std::size_t false_communicating = 0;
  std::size_t false_non_communicating = 0;

  bool operator==(const TopologyCounts&) const = default;
};

/// Builds the sparse overlap matrix between prediction and truth components
/// and counts spurious, missed, bridging and fragmenting components.
inline TopologyCounts topology_report(const Mask& pred, const Mask& gt,
                                      Connectivity conn = Connectivity::vertex26) {
  require_same_geometry(pred, gt, "topology_report");
  const LabelMap lp = connected_components(pred, conn);
  const LabelMap lg = connected_components(gt, conn);
  std::set<std::pair<std::uint32_t, std::uint32_t>> overlaps;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = lp.labels[i], g = lg.labels[i];
    if (p && g) overlaps.emplace(p, g);
  }
  std::vector<std::size_t> gt_per_pred(lp.component_count() + 1, 0);
  std::vector<std::size_t> pred_per_gt(lg.component_count() + 1, 0);
  for (const auto& [p, g] : overlaps) {
    ++gt_per_pred[p];
    ++pred_per_gt[g];
  }
  TopologyCounts t;
  for (std::size_t p = 1; p < gt_per_pred.size(); ++p) {
    if (gt_per_pred[p] == 0) ++t.outliers;
    else t.false_communicating += gt_per_pred[p] - 1;
  }
  for (std::size_t g = 1; g < pred_per_gt.size(); ++g) {
    if (pred_per_gt[g] == 0) ++t.missed_components;
    else t.false_non_communicating += pred_per_gt[g] - 1;
  }
  return t;
}

/// Computes every field of MetricsReport. Both masks must be non-empty for
/// the Hausdorff terms.
inline MetricsReport evaluate(const Mask& pred, const Mask& gt,
                              Connectivity conn = Connectivity::vertex26) {
  require_same_geometry(pred, gt, "evaluate");
  MetricsReport r;
  r.dsc = dice(pred, gt);
  r.rvd = rvd(pred, gt);
  r.hd_directed_pred_to_gt = directed_hausdorff(pred, gt);
  r.hd_directed_gt_to_pred = directed_hausdorff(gt, pred);
  r.hd_mm = std::max(r.hd_directed_pred_to_gt, r.hd_directed_gt_to_pred);
  const TopologyCounts t = topology_report(pred, gt, conn);
  r.outliers = t.outliers;
  r.missed_components = t.missed_components;
  r.false_communicating = t.false_communicating;
  r.false_non_communicating = t.false_non_communicating;
  return r;
}

}  // namespace biliseg
