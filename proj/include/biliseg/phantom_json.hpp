#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "biliseg/errors.hpp"
#include "biliseg/phantom.hpp"

namespace biliseg {

inline PhantomParams phantom_params_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw config_error("phantom parameters must be a JSON object");
    static const char* allowed[] = {
        "dims",       "spacing",        "root",          "root_direction", "segment_length",
        "radius_root", "radius_taper",  "branch_probability", "branch_angle", "jitter_degrees",
        "max_depth",  "fg_mean",        "bg_mean",       "noise_std",      "rng_seed"};
    for (const auto& [key, _] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw config_error("unknown phantom parameter '" + key + "'");
    }
    auto vec3 = [&](const char* key, Vec3 fallback) {
      if (!j.contains(key)) return fallback;
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 3) throw config_error(std::string(key) + " needs 3 numbers");
      return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    };
    PhantomParams p;
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      if (!d.is_array() || d.size() != 3) throw config_error("dims needs 3 integers");
      for (const auto& v : d)
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
          throw config_error("dims must be positive integers");
      p.dims = {d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
    }
    const Vec3 sp = vec3("spacing", {p.spacing.dx, p.spacing.dy, p.spacing.dz});
    p.spacing = {sp.x, sp.y, sp.z};
    p.root = vec3("root", p.root);
    p.root_direction = vec3("root_direction", p.root_direction);
    p.segment_length = j.value("segment_length", p.segment_length);
    p.radius_root = j.value("radius_root", p.radius_root);
    p.radius_taper = j.value("radius_taper", p.radius_taper);
    p.branch_probability = j.value("branch_probability", p.branch_probability);
    p.branch_angle = j.value("branch_angle", p.branch_angle);
    p.jitter_degrees = j.value("jitter_degrees", p.jitter_degrees);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.fg_mean = j.value("fg_mean", p.fg_mean);
    p.bg_mean = j.value("bg_mean", p.bg_mean);
    p.noise_std = j.value("noise_std", p.noise_std);
    p.rng_seed = j.value("rng_seed", p.rng_seed);
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("invalid phantom parameters: ") + e.what());
  }
}

inline nlohmann::json phantom_params_to_json(const PhantomParams& p) {
  return {{"dims", {p.dims.nx, p.dims.ny, p.dims.nz}},
          {"spacing", {p.spacing.dx, p.spacing.dy, p.spacing.dz}},
          {"root", {p.root.x, p.root.y, p.root.z}},
          {"root_direction", {p.root_direction.x, p.root_direction.y, p.root_direction.z}},
          {"segment_length", p.segment_length},
          {"radius_root", p.radius_root},
          {"radius_taper", p.radius_taper},
          {"branch_probability", p.branch_probability},
          {"branch_angle", p.branch_angle},
          {"jitter_degrees", p.jitter_degrees},
          {"max_depth", p.max_depth},
          {"fg_mean", p.fg_mean},
          {"bg_mean", p.bg_mean},
          {"noise_std", p.noise_std},
          {"rng_seed", p.rng_seed}};
}

}  // namespace biliseg
