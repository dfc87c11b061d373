#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "biliseg/errors.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

struct PreprocessParams {
  double p_low = 1.0;
  double p_high = 99.0;
  bool crop_enabled = false;
  double crop_percentile = 90.0;
  std::size_t crop_margin = 5;

  void validate() const {
    if (!(p_low >= 0.0 && p_low < p_high && p_high <= 100.0))
      throw config_error("percentiles must satisfy 0 <= p_low < p_high <= 100");
    if (!(crop_percentile >= 0.0 && crop_percentile <= 100.0))
      throw config_error("crop_percentile must lie in [0, 100]");
  }
};

/// Percentile of already sorted data, linear interpolation between order
/// statistics at rank p/100 * (n-1).
inline double percentile_sorted(std::span<const float> sorted, double p) {
  if (sorted.empty()) throw degenerate_input_error("percentile of empty data");
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) +
         frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

inline double percentile(std::span<const float> values, double p) {
  std::vector<float> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, p);
}

/// Linear map of [lo, hi] onto [0, 255] with clamping, lo/hi being the
/// p_low/p_high percentiles. When lo == hi the map degenerates to a step:
/// values above lo go to 255, everything else to 0 (so constant volumes
/// become all zero).
inline Volume percentile_stretch(const Volume& vol, const PreprocessParams& params) {
  params.validate();
  std::vector<float> sorted(vol.values().begin(), vol.values().end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = percentile_sorted(sorted, params.p_low);
  const double hi = percentile_sorted(sorted, params.p_high);

  std::vector<float> out(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double v = vol[i];
    double mapped;
    if (hi > lo) mapped = std::clamp((v - lo) / (hi - lo), 0.0, 1.0) * 255.0;
    else mapped = v > lo ? 255.0 : 0.0;
    out[i] = static_cast<float>(mapped);
  }
  return Volume(vol.dims(), vol.spacing(), std::move(out));
}

struct CropResult {
  Volume volume;
  BBox box;
};

/// Crops to the bounding box (plus margin) of the largest bright connected
/// structure. "Bright" is intensity >= the crop_percentile percentile; when
/// that percentile equals the volume minimum the test becomes strict so the
/// background is not counted as structure.
inline CropResult dynamic_crop(const Volume& vol, const PreprocessParams& params) {
  params.validate();
  std::vector<float> sorted(vol.values().begin(), vol.values().end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw degenerate_input_error("constant volume has no structure to crop around");
  const double threshold = percentile_sorted(sorted, params.crop_percentile);
  const bool strict = threshold <= static_cast<double>(sorted.front());

  Mask bright = empty_mask_like(vol);
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double v = vol[i];
    bright[i] = (strict ? v > threshold : v >= threshold) ? 1 : 0;
  }
  const LabelMap components = connected_components(bright, Connectivity::vertex26);
  const BBox box = bbox_of(component_mask(components, 1), params.crop_margin);
  return {crop(vol, box), box};
}

}  // namespace biliseg
