#pragma once

// Run configuration (JSON) and the preprocess -> segment -> postprocess
// pipeline driven by it. The JSON produced by run_config_to_json is itself a
// complete run configuration, so a provenance sidecar can be replayed.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biliseg/errors.hpp"
#include "biliseg/preprocess.hpp"
#include "biliseg/segmentation.hpp"
#include "biliseg/volume_core.hpp"

namespace biliseg {

enum class Method { threshold, floodfill, regiongrow };

inline Method parse_method(const std::string& s) {
  if (s == "threshold") return Method::threshold;
  if (s == "floodfill") return Method::floodfill;
  if (s == "regiongrow") return Method::regiongrow;
  throw config_error("unknown method '" + s + "' (expected threshold, floodfill or regiongrow)");
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::threshold: return "threshold";
    case Method::floodfill: return "floodfill";
    case Method::regiongrow: return "regiongrow";
  }
  return {};
}

struct RunConfig {
  Method method = Method::threshold;
  ThresholdConfig threshold;
  FloodFillConfig floodfill;
  RegionGrowConfig regiongrow;
  bool stretch = false;
  PreprocessParams preprocess;
  std::vector<PostprocessPolicy> postprocess;
  Connectivity postprocess_connectivity = Connectivity::vertex26;
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw config_error("unknown key '" + key + "' in " + where);
  }
}

inline Index3 parse_index(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw config_error(what + " must be an array of 3 integers");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw config_error(what + " must be an array of 3 integers");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

inline json index_json(const Index3& i) { return json::array({i.x, i.y, i.z}); }

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

inline PostprocessPolicy parse_policy(const json& j) {
  if (!j.is_object() || !j.contains("policy"))
    throw config_error("postprocess entries need a 'policy' field");
  const auto name = j.at("policy").get<std::string>();
  if (name == "keep_largest") {
    reject_unknown(j, {"policy"}, "keep_largest");
    return KeepLargest{};
  }
  if (name == "keep_seeded") {
    reject_unknown(j, {"policy", "seeds"}, "keep_seeded");
    KeepSeeded p;
    for (const auto& s : j.at("seeds")) p.seeds.push_back(parse_index(s, "keep_seeded seed"));
    if (p.seeds.empty()) throw config_error("keep_seeded needs at least one seed");
    return p;
  }
  if (name == "min_size") {
    reject_unknown(j, {"policy", "voxels"}, "min_size");
    const auto v = j.at("voxels").get<std::int64_t>();
    if (v < 1) throw config_error("min_size voxels must be >= 1");
    return MinSize{static_cast<std::size_t>(v)};
  }
  throw config_error("unknown postprocess policy '" + name + "'");
}

inline json policy_json(const PostprocessPolicy& p) {
  return std::visit(
      [](const auto& v) -> json {
        using P = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<P, KeepLargest>) return {{"policy", "keep_largest"}};
        else if constexpr (std::is_same_v<P, KeepSeeded>) {
          json seeds = json::array();
          for (const auto& s : v.seeds) seeds.push_back(index_json(s));
          return {{"policy", "keep_seeded"}, {"seeds", seeds}};
        } else
          return {{"policy", "min_size"}, {"voxels", v.voxels}};
      },
      p);
}

}  // namespace config_detail

/// Parses a run configuration. `method_override` (the CLI --method flag)
/// wins over the document's "method".
inline RunConfig parse_run_config(const nlohmann::json& doc,
                                  const std::optional<std::string>& method_override = {}) {
  using namespace config_detail;
  try {
    if (!doc.is_object()) throw config_error("run configuration must be a JSON object");
    reject_unknown(doc, {"method", "threshold", "floodfill", "regiongrow", "preprocess",
                         "postprocess", "postprocess_connectivity"},
                   "run configuration");
    RunConfig cfg;
    if (method_override) cfg.method = parse_method(*method_override);
    else if (doc.contains("method")) cfg.method = parse_method(doc.at("method").get<std::string>());
    else throw config_error("run configuration needs a 'method'");

    switch (cfg.method) {
      case Method::threshold: {
        const json& t = doc.at("threshold");
        reject_unknown(t, {"t_min", "t_max", "per_slice"}, "threshold");
        cfg.threshold.t_min = t.at("t_min").get<double>();
        cfg.threshold.t_max = t.at("t_max").get<double>();
        if (t.contains("per_slice")) {
          for (const auto& [key, pair] : t.at("per_slice").items()) {
            std::size_t pos = 0;
            const long long z = std::stoll(key, &pos);
            if (pos != key.size() || z < 0) throw config_error("bad per_slice key '" + key + "'");
            if (!pair.is_array() || pair.size() != 2)
              throw config_error("per_slice values must be [t_min, t_max]");
            cfg.threshold.per_slice_overrides[static_cast<std::size_t>(z)] = {
                pair[0].get<double>(), pair[1].get<double>()};
          }
        }
        if (!(cfg.threshold.t_min < cfg.threshold.t_max))
          throw config_error("threshold requires t_min < t_max");
        break;
      }
      case Method::floodfill: {
        const json& f = doc.at("floodfill");
        reject_unknown(f, {"seed", "tolerance", "connectivity"}, "floodfill");
        cfg.floodfill.seed = parse_index(f.at("seed"), "floodfill seed");
        cfg.floodfill.tolerance = f.at("tolerance").get<double>();
        if (!(cfg.floodfill.tolerance >= 0.0)) throw config_error("tolerance must be >= 0");
        cfg.floodfill.connectivity = connectivity_from_int(get_or(f, "connectivity", 6));
        break;
      }
      case Method::regiongrow: {
        const json& r = doc.at("regiongrow");
        reject_unknown(r, {"seed", "k", "R", "window", "in_slice_connectivity", "propagate_slices"},
                       "regiongrow");
        cfg.regiongrow.seed = parse_index(r.at("seed"), "regiongrow seed");
        cfg.regiongrow.k = get_or(r, "k", 0.3);
        cfg.regiongrow.r = get_or(r, "R", 100.0);
        cfg.regiongrow.window = get_or(r, "window", 3);
        cfg.regiongrow.in_slice_connectivity =
            connectivity_from_int(get_or(r, "in_slice_connectivity", 4));
        cfg.regiongrow.propagate_slices = get_or(r, "propagate_slices", true);
        cfg.regiongrow.validate();
        break;
      }
    }

    // Contrast stretch and dynamic crop default on for region growing only.
    const bool auto_pre = cfg.method == Method::regiongrow;
    const json pre = doc.value("preprocess", json::object());
    reject_unknown(pre, {"stretch", "p_low", "p_high", "crop", "crop_percentile", "crop_margin"},
                   "preprocess");
    cfg.stretch = get_or(pre, "stretch", auto_pre);
    cfg.preprocess.p_low = get_or(pre, "p_low", 1.0);
    cfg.preprocess.p_high = get_or(pre, "p_high", 99.0);
    cfg.preprocess.crop_enabled = get_or(pre, "crop", auto_pre);
    cfg.preprocess.crop_percentile = get_or(pre, "crop_percentile", 90.0);
    const auto margin = get_or<std::int64_t>(pre, "crop_margin", 5);
    if (margin < 0) throw config_error("crop_margin must be >= 0");
    cfg.preprocess.crop_margin = static_cast<std::size_t>(margin);
    cfg.preprocess.validate();

    if (doc.contains("postprocess")) {
      if (!doc.at("postprocess").is_array()) throw config_error("postprocess must be an array");
      for (const auto& p : doc.at("postprocess")) cfg.postprocess.push_back(parse_policy(p));
    }
    cfg.postprocess_connectivity =
        connectivity_from_int(get_or(doc, "postprocess_connectivity", 26));
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("invalid run configuration: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw config_error("invalid run configuration: bad per_slice key");
  } catch (const std::out_of_range&) {
    throw config_error("invalid run configuration: per_slice key out of range");
  }
}

/// Every effective parameter, in a form parse_run_config accepts.
inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  using namespace config_detail;
  json doc;
  doc["method"] = to_string(cfg.method);
  switch (cfg.method) {
    case Method::threshold: {
      json per = json::object();
      for (const auto& [z, p] : cfg.threshold.per_slice_overrides)
        per[std::to_string(z)] = json::array({p.t_min, p.t_max});
      doc["threshold"] = {{"t_min", cfg.threshold.t_min},
                          {"t_max", cfg.threshold.t_max},
                          {"per_slice", per}};
      break;
    }
    case Method::floodfill:
      doc["floodfill"] = {{"seed", index_json(cfg.floodfill.seed)},
                          {"tolerance", cfg.floodfill.tolerance},
                          {"connectivity", connectivity_to_int(cfg.floodfill.connectivity)}};
      break;
    case Method::regiongrow:
      doc["regiongrow"] = {
          {"seed", index_json(cfg.regiongrow.seed)},
          {"k", cfg.regiongrow.k},
          {"R", cfg.regiongrow.r},
          {"window", cfg.regiongrow.window},
          {"in_slice_connectivity", connectivity_to_int(cfg.regiongrow.in_slice_connectivity)},
          {"propagate_slices", cfg.regiongrow.propagate_slices}};
      break;
  }
  doc["preprocess"] = {{"stretch", cfg.stretch},
                       {"p_low", cfg.preprocess.p_low},
                       {"p_high", cfg.preprocess.p_high},
                       {"crop", cfg.preprocess.crop_enabled},
                       {"crop_percentile", cfg.preprocess.crop_percentile},
                       {"crop_margin", cfg.preprocess.crop_margin}};
  json post = json::array();
  for (const auto& p : cfg.postprocess) post.push_back(policy_json(p));
  doc["postprocess"] = post;
  doc["postprocess_connectivity"] = connectivity_to_int(cfg.postprocess_connectivity);
  return doc;
}

struct PipelineResult {
  Mask mask;
  std::optional<BBox> crop_box;
};

inline Index3 method_seed(const RunConfig& cfg) {
  return cfg.method == Method::floodfill ? cfg.floodfill.seed : cfg.regiongrow.seed;
}

/// Contrast stretch, optional dynamic crop, the chosen method, re-embedding
/// into the full grid, then post-processing.
inline PipelineResult run_pipeline(const Volume& input, const RunConfig& cfg) {
  if (cfg.method != Method::threshold && !input.contains(method_seed(cfg)))
    throw bounds_error("seed " + to_string(method_seed(cfg)) + " outside volume");

  Volume work = cfg.stretch ? percentile_stretch(input, cfg.preprocess) : input;
  std::optional<BBox> box;
  if (cfg.preprocess.crop_enabled) {
    CropResult cropped = dynamic_crop(work, cfg.preprocess);
    box = cropped.box;
    work = std::move(cropped.volume);
  }
  auto local = [&](Index3 seed) {
    if (!box) return seed;
    if (!box->contains(seed))
      throw config_error("seed " + to_string(seed) + " lies outside the dynamic crop box");
    return Index3{seed.x - box->lo.x, seed.y - box->lo.y, seed.z - box->lo.z};
  };

  Mask mask;
  switch (cfg.method) {
    case Method::threshold: {
      ThresholdConfig t = cfg.threshold;
      if (box) {
        // Overrides are keyed by full-grid slice.
        t.per_slice_overrides.clear();
        for (const auto& [z, p] : cfg.threshold.per_slice_overrides) {
          if (z >= input.dims().nz) t.per_slice_overrides[z] = p;  // validate() reports it
          else if (static_cast<std::int64_t>(z) >= box->lo.z &&
                   static_cast<std::int64_t>(z) <= box->hi.z)
            t.per_slice_overrides[z - static_cast<std::size_t>(box->lo.z)] = p;
        }
        cfg.threshold.validate(input.dims().nz);
      }
      mask = dual_threshold(work, t);
      break;
    }
    case Method::floodfill: {
      FloodFillConfig f = cfg.floodfill;
      f.seed = local(f.seed);
      mask = flood_fill(work, f);
      break;
    }
    case Method::regiongrow: {
      RegionGrowConfig r = cfg.regiongrow;
      r.seed = local(r.seed);
      mask = region_grow(work, r);
      break;
    }
  }
  if (box) mask = embed(mask, *box, input.dims(), std::uint8_t{0});
  mask = postprocess(mask, cfg.postprocess, cfg.postprocess_connectivity);
  return {std::move(mask), box};
}

}  // namespace biliseg
