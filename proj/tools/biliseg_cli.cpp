// biliseg: batch command line for phantom generation, preprocessing,
// segmentation, evaluation, cross-method comparison and mesh export.
//
// Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 degenerate
// result.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "biliseg/biliseg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace biliseg;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_io = 3;
constexpr int exit_degenerate = 4;

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json bbox_json(const BBox& b) {
  return {{"lo", {b.lo.x, b.lo.y, b.lo.z}}, {"hi", {b.hi.x, b.hi.y, b.hi.z}}};
}

fs::path sidecar_path(const fs::path& out) {
  fs::path p = out;
  p += ".json";
  return p;
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
  std::string config, out, truth;
};

int cmd_phantom(const PhantomArgs& a) {
  const PhantomParams params = phantom_params_from_json(load_json(a.config));
  const Phantom ph = make_phantom(params);
  const LabelMap lm = connected_components(ph.truth, Connectivity::vertex26);

  write_nifti(ph.volume, a.out);
  try {
    write_nifti(ph.truth, a.truth);
  } catch (const io_error&) {
    std::error_code ec;
    fs::remove(a.out, ec);
    throw;
  }
  std::cout << "segments: " << ph.tree.segments.size() << "\n"
            << "components: " << lm.component_count() << "\n"
            << "foreground_voxels: " << count_foreground(ph.truth) << "\n";
  return exit_ok;
}

struct PreprocessArgs {
  std::string in, out, config;
};

int cmd_preprocess(const PreprocessArgs& a) {
  PreprocessParams params;
  bool stretch = true;
  if (!a.config.empty()) {
    const json doc = load_json(a.config);
    const json pre = doc.contains("preprocess") ? doc.at("preprocess") : doc;
    try {
      stretch = pre.value("stretch", true);
      params.p_low = pre.value("p_low", params.p_low);
      params.p_high = pre.value("p_high", params.p_high);
      params.crop_enabled = pre.value("crop", false);
      params.crop_percentile = pre.value("crop_percentile", params.crop_percentile);
      const auto margin = pre.value("crop_margin", std::int64_t{5});
      if (margin < 0) throw config_error("crop_margin must be >= 0");
      params.crop_margin = static_cast<std::size_t>(margin);
    } catch (const json::exception& e) {
      throw config_error(std::string("invalid preprocess parameters: ") + e.what());
    }
  }
  params.validate();

  Volume vol = read_nifti(a.in);
  const Dims source_dims = vol.dims();
  if (stretch) vol = percentile_stretch(vol, params);
  std::optional<BBox> box;
  if (params.crop_enabled) {
    CropResult c = dynamic_crop(vol, params);
    vol = std::move(c.volume);
    box = c.box;
  }
  write_nifti(vol, a.out);
  json side{{"input", a.in},
            {"stretch", stretch},
            {"p_low", params.p_low},
            {"p_high", params.p_high},
            {"crop", params.crop_enabled},
            {"crop_percentile", params.crop_percentile},
            {"crop_margin", params.crop_margin},
            {"source_dims", {source_dims.nx, source_dims.ny, source_dims.nz}}};
  if (box) side["bbox"] = bbox_json(*box);
  write_file_atomic(sidecar_path(a.out), dump(side));
  return exit_ok;
}

struct SegmentArgs {
  std::string in, out, config, method;
  int connectivity = 0;
};

int cmd_segment(SegmentArgs a) {
  json doc = load_json(a.config);
  // A provenance sidecar from an earlier run is accepted as-is.
  if (doc.is_object() && doc.contains("config") && doc.contains("input")) {
    if (a.in.empty()) a.in = doc.at("input").get<std::string>();
    if (a.out.empty() && doc.contains("output")) a.out = doc.at("output").get<std::string>();
    doc = json(doc.at("config"));
  }
  if (a.in.empty() || a.out.empty())
    throw config_error("segment needs --in and --out (or a sidecar that records them)");

  RunConfig cfg = parse_run_config(
      doc, a.method.empty() ? std::nullopt : std::optional<std::string>(a.method));
  if (a.connectivity != 0) {
    if (cfg.method != Method::floodfill)
      throw config_error("--connectivity applies to the floodfill method only");
    cfg.floodfill.connectivity = connectivity_from_int(a.connectivity);
  }

  const Volume vol = read_nifti(a.in);
  const PipelineResult res = run_pipeline(vol, cfg);
  const std::size_t fg = count_foreground(res.mask);
  write_nifti(res.mask, a.out);

  json side{{"tool", "biliseg segment"},
            {"input", a.in},
            {"output", a.out},
            {"config", run_config_to_json(cfg)},
            {"input_dims", {vol.dims().nx, vol.dims().ny, vol.dims().nz}},
            {"input_spacing", {vol.spacing().dx, vol.spacing().dy, vol.spacing().dz}},
            {"foreground_voxels", fg}};
  side["crop_box"] = res.crop_box ? bbox_json(*res.crop_box) : json(nullptr);
  write_file_atomic(sidecar_path(a.out), dump(side));

  std::cout << "method: " << to_string(cfg.method) << "\nforeground_voxels: " << fg << "\n";
  if (fg == 0) {
    std::cerr << "segmentation produced an empty mask\n";
    return exit_degenerate;
  }
  return exit_ok;
}

struct EvaluateArgs {
  std::string in, truth, out, format = "json", method;
  int connectivity = 26;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const ReportFormat fmt = parse_report_format(a.format);
  const Connectivity conn = connectivity_from_int(a.connectivity);
  const Mask pred = read_nifti_mask(a.in);
  const Mask truth = read_nifti_mask(a.truth);
  require_same_geometry(pred, truth, "evaluate");
  if (count_foreground(truth) == 0) throw degenerate_input_error("ground-truth mask is empty");
  if (count_foreground(pred) == 0)
    throw degenerate_input_error("predicted mask is empty; Hausdorff distance is undefined");

  const MetricsReport r = evaluate(pred, truth, conn);
  if (fmt == ReportFormat::json) {
    json j = to_json(r);
    j["method"] = a.method;
    j["connectivity"] = a.connectivity;
    j["prediction"] = a.in;
    j["truth"] = a.truth;
    write_file_atomic(a.out, dump(j));
  } else {
    write_report(std::vector<CaseRecord>{{a.method, r}}, fmt, a.out);
  }
  std::cout << "dsc: " << r.dsc << "\nhd_mm: " << r.hd_mm << "\nrvd: " << r.rvd << "\n";
  return exit_ok;
}

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string out, format = "markdown";
};

int cmd_compare(const CompareArgs& a) {
  const ReportFormat fmt = parse_report_format(a.format);
  std::map<std::string, std::vector<MetricsReport>> groups;
  for (const std::string& item : a.inputs) {
    std::string method, path = item;
    if (const auto eq = item.find('='); eq != std::string::npos) {
      method = item.substr(0, eq);
      path = item.substr(eq + 1);
    }
    const json doc = load_json(path);
    if (method.empty()) {
      if (!doc.is_object() || !doc.contains("method") || !doc.at("method").is_string() ||
          doc.at("method").get<std::string>().empty())
        throw config_error(path + " has no method label; pass it as METHOD=" + path);
      method = doc.at("method").get<std::string>();
    }
    groups[method].push_back(metrics_report_from_json(doc));
  }
  if (groups.size() < 2) throw config_error("compare needs reports from at least 2 methods");
  const std::size_t n = groups.begin()->second.size();
  for (const auto& [m, reports] : groups)
    if (reports.size() != n)
      throw config_error("unbalanced groups: every method needs the same number of cases");

  const SummaryTable table = build_summary(groups);
  write_report(table, fmt, a.out);
  std::cout << render_summary(table, ReportFormat::markdown);
  return exit_ok;
}

struct MeshArgs {
  std::string in, out;
};

int cmd_mesh(const MeshArgs& a) {
  const Mask mask = read_nifti_mask(a.in);
  const auto tris = extract_surface_mesh(mask);
  write_stl(tris, a.out);
  std::cout << "triangles: " << tris.size() << "\n";
  return exit_ok;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const degenerate_input_error& e) {
    std::cerr << "degenerate input: " << e.what() << "\n";
    return exit_degenerate;
  } catch (const io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return exit_io;
  } catch (const format_error& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return exit_io;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
}

bool apply_thread_env() {
  const char* env = std::getenv("BILISEG_THREADS");
  if (!env || !*env) return true;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 0) {
    std::cerr << "BILISEG_THREADS must be a non-negative integer\n";
    return false;
  }
  set_max_threads(static_cast<unsigned>(n));
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (!apply_thread_env()) return exit_config;

  CLI::App app{"biliseg: bile-duct style tubular segmentation and evaluation toolkit"};
  app.require_subcommand(1);
  const std::vector<int> conn3d{6, 18, 26};

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic tube-tree phantom");
  phantom->add_option("--config", pa.config, "Phantom parameters JSON")->required();
  phantom->add_option("--out", pa.out, "Output intensity volume (.nii)")->required();
  phantom->add_option("--truth", pa.truth, "Output ground-truth mask (.nii)")->required();

  PreprocessArgs pr;
  auto* preprocess = app.add_subcommand("preprocess", "Contrast stretch and dynamic crop");
  preprocess->add_option("--in", pr.in, "Input volume (.nii)")->required();
  preprocess->add_option("--out", pr.out, "Output volume (.nii)")->required();
  preprocess->add_option("--config", pr.config, "Preprocess parameters JSON");

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Run one segmentation method");
  segment->add_option("--in", sa.in, "Input volume (.nii)");
  segment->add_option("--out", sa.out, "Output mask (.nii); provenance goes to <out>.json");
  segment->add_option("--config", sa.config, "Run configuration or provenance sidecar JSON")
      ->required();
  segment->add_option("--method", sa.method, "Override the configured method")
      ->check(CLI::IsMember({"threshold", "floodfill", "regiongrow"}));
  segment->add_option("--connectivity", sa.connectivity, "Flood-fill connectivity")
      ->check(CLI::IsMember(conn3d));

  EvaluateArgs ea;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a mask against ground truth");
  evaluate_cmd->add_option("--in", ea.in, "Predicted mask (.nii)")->required();
  evaluate_cmd->add_option("--truth", ea.truth, "Ground-truth mask (.nii)")->required();
  evaluate_cmd->add_option("--out", ea.out, "Report path")->required();
  evaluate_cmd->add_option("--format", ea.format, "json, csv or markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown"}));
  evaluate_cmd->add_option("--method", ea.method, "Method label stored in the report");
  evaluate_cmd->add_option("--connectivity", ea.connectivity, "Component connectivity")
      ->check(CLI::IsMember(conn3d));

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "Summarize reports per method with ANOVA");
  compare->add_option("--in", ca.inputs, "METHOD=report.json (repeatable)")->required();
  compare->add_option("--out", ca.out, "Summary table path")->required();
  compare->add_option("--format", ca.format, "json, csv or markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown"}));

  MeshArgs ma;
  auto* mesh = app.add_subcommand("mesh", "Export a mask surface as binary STL");
  mesh->add_option("--in", ma.in, "Mask (.nii)")->required();
  mesh->add_option("--out", ma.out, "Output .stl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }

  if (*phantom) return guarded([&] { return cmd_phantom(pa); });
  if (*preprocess) return guarded([&] { return cmd_preprocess(pr); });
  if (*segment) return guarded([&] { return cmd_segment(sa); });
  if (*evaluate_cmd) return guarded([&] { return cmd_evaluate(ea); });
  if (*compare) return guarded([&] { return cmd_compare(ca); });
  if (*mesh) return guarded([&] { return cmd_mesh(ma); });
  return exit_config;
}
