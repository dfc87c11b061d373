#pragma once

// Report emission. Per-case and summary tables share one column set:
//   method, DSC, HD_mm, RVD, outliers, false_communicating_IHDs,
//   false_non_communicating_IHDs
// Summary cells read "mean ±std" (3 decimals for DSC/HD/RVD; counts use 1
// decimal for the mean and 2 for the std).

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "biliseg/errors.hpp"
#include "biliseg/metrics.hpp"
#include "biliseg/nifti.hpp"
#include "biliseg/stats.hpp"

namespace biliseg {

enum class ReportFormat { json, csv, markdown };

inline ReportFormat parse_report_format(std::string_view tag) {
  if (tag == "json") return ReportFormat::json;
  if (tag == "csv") return ReportFormat::csv;
  if (tag == "markdown" || tag == "md") return ReportFormat::markdown;
  throw config_error("unknown report format '" + std::string(tag) + "'");
}

inline constexpr std::array<std::string_view, 6> metric_columns{
    "DSC", "HD_mm", "RVD", "outliers", "false_communicating_IHDs",
    "false_non_communicating_IHDs"};

inline bool is_count_column(std::size_t c) { return c >= 3; }

inline std::array<double, 6> metric_values(const MetricsReport& r) {
  return {r.dsc,
          r.hd_mm,
          r.rvd,
          static_cast<double>(r.outliers),
          static_cast<double>(r.false_communicating),
          static_cast<double>(r.false_non_communicating)};
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    // Avoid "-0.000" when rounding a tiny negative value.
    bool all_zero = s.find_first_not_of("-0.") == std::string::npos;
    if (all_zero) s.erase(0, 1);
  }
  return s;
}

/// "0.819 ±0.057" for rates, "6.2 ±3.86" for counts.
inline std::string format_mean_std(double mean, double std, bool count) {
  return count ? format_fixed(mean, 1) + " ±" + format_fixed(std, 2)
               : format_fixed(mean, 3) + " ±" + format_fixed(std, 3);
}

// ---------------------------------------------------------------------------
// Per-case records

struct CaseRecord {
  std::string method;
  MetricsReport report;
};

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"dsc", r.dsc},
          {"hd_mm", r.hd_mm},
          {"hd_directed_pred_to_gt", r.hd_directed_pred_to_gt},
          {"hd_directed_gt_to_pred", r.hd_directed_gt_to_pred},
          {"rvd", r.rvd},
          {"outliers", r.outliers},
          {"missed_components", r.missed_components},
          {"false_communicating", r.false_communicating},
          {"false_non_communicating", r.false_non_communicating},
          {"topology_counts_are_component_proxies", true}};
}

inline MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.dsc = j.at("dsc").get<double>();
    r.hd_mm = j.at("hd_mm").get<double>();
    r.hd_directed_pred_to_gt = j.value("hd_directed_pred_to_gt", r.hd_mm);
    r.hd_directed_gt_to_pred = j.value("hd_directed_gt_to_pred", r.hd_mm);
    r.rvd = j.at("rvd").get<double>();
    r.outliers = j.at("outliers").get<std::size_t>();
    r.missed_components = j.value("missed_components", std::size_t{0});
    r.false_communicating = j.at("false_communicating").get<std::size_t>();
    r.false_non_communicating = j.at("false_non_communicating").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed metrics report: ") + e.what());
  }
}

inline std::string render_cases(const std::vector<CaseRecord>& cases, ReportFormat fmt) {
  std::ostringstream os;
  switch (fmt) {
    case ReportFormat::json: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& c : cases) {
        nlohmann::json j = to_json(c.report);
        j["method"] = c.method;
        arr.push_back(std::move(j));
      }
      os << nlohmann::json{{"cases", arr}}.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
    case ReportFormat::markdown: {
      const bool md = fmt == ReportFormat::markdown;
      const std::string sep = md ? " | " : ",";
      os << (md ? "| method" : "method");
      for (auto c : metric_columns) os << sep << c;
      os << (md ? " |\n" : "\n");
      if (md) {
        os << "|---";
        for (std::size_t i = 0; i < metric_columns.size(); ++i) os << "|---";
        os << "|\n";
      }
      for (const auto& c : cases) {
        const auto v = metric_values(c.report);
        os << (md ? "| " : "") << c.method;
        for (std::size_t i = 0; i < v.size(); ++i)
          os << sep << (is_count_column(i) ? format_fixed(v[i], 0) : format_fixed(v[i], 6));
        os << (md ? " |\n" : "\n");
      }
      break;
    }
  }
  return os.str();
}

inline void write_report(const std::vector<CaseRecord>& cases, ReportFormat fmt,
                         const std::filesystem::path& path) {
  write_file_atomic(path, render_cases(cases, fmt));
}

// ---------------------------------------------------------------------------
// Summary across methods

struct SummaryRow {
  std::string method;
  std::size_t cases = 0;
  std::array<MeanStd, 6> cells{};
};

struct AnovaEntry {
  std::string metric;
  std::optional<AnovaResult> result;  // empty when F is undefined
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  std::vector<AnovaEntry> anova;
};

/// Mean ±std per method and a one-way ANOVA per metric across methods.
/// Methods come out in map (lexicographic) order.
inline SummaryTable build_summary(const std::map<std::string, std::vector<MetricsReport>>& groups) {
  if (groups.size() < 2) throw config_error("comparison needs at least 2 methods");
  SummaryTable table;
  std::array<std::vector<std::vector<double>>, 6> per_metric;
  for (const auto& [method, reports] : groups) {
    if (reports.size() < 2)
      throw config_error("method '" + method + "' needs at least 2 cases");
    SummaryRow row{method, reports.size(), {}};
    for (std::size_t c = 0; c < 6; ++c) {
      std::vector<double> values;
      for (const auto& r : reports) values.push_back(metric_values(r)[c]);
      row.cells[c] = mean_std(values);
      per_metric[c].push_back(std::move(values));
    }
    table.rows.push_back(std::move(row));
  }
  for (std::size_t c = 0; c < 6; ++c) {
    AnovaEntry e{std::string(metric_columns[c]), std::nullopt};
    try {
      e.result = one_way_anova(per_metric[c]);
    } catch (const degenerate_input_error&) {
    }
    table.anova.push_back(std::move(e));
  }
  return table;
}

inline std::string render_summary(const SummaryTable& t, ReportFormat fmt) {
  std::ostringstream os;
  switch (fmt) {
    case ReportFormat::json: {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : t.rows) {
        nlohmann::json cells, mean, sd;
        for (std::size_t c = 0; c < 6; ++c) {
          const std::string key(metric_columns[c]);
          cells[key] = format_mean_std(r.cells[c].mean, r.cells[c].std, is_count_column(c));
          mean[key] = r.cells[c].mean;
          sd[key] = r.cells[c].std;
        }
        rows.push_back(
            {{"method", r.method}, {"cases", r.cases}, {"cells", cells}, {"mean", mean}, {"std", sd}});
      }
      nlohmann::json anova = nlohmann::json::array();
      for (const auto& a : t.anova) {
        if (a.result)
          anova.push_back({{"metric", a.metric},
                           {"f_stat", a.result->f_stat},
                           {"df_between", a.result->df_between},
                           {"df_within", a.result->df_within},
                           {"p_value", a.result->p_value},
                           {"significant", a.result->significant}});
        else
          anova.push_back({{"metric", a.metric}, {"f_stat", nullptr}, {"p_value", nullptr},
                           {"significant", false}});
      }
      nlohmann::json columns = nlohmann::json::array({"method"});
      for (auto c : metric_columns) columns.push_back(std::string(c));
      nlohmann::json doc{{"columns", columns}, {"rows", rows}};
      if (!t.anova.empty()) doc["anova"] = anova;
      os << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv: {
      os << "method";
      for (auto c : metric_columns) os << ',' << c;
      os << '\n';
      for (const auto& r : t.rows) {
        os << r.method;
        for (std::size_t c = 0; c < 6; ++c)
          os << ',' << format_mean_std(r.cells[c].mean, r.cells[c].std, is_count_column(c));
        os << '\n';
      }
      if (!t.anova.empty()) {
        os << "\nmetric,F,df_between,df_within,p_value,significant\n";
        for (const auto& a : t.anova) {
          os << a.metric;
          if (a.result)
            os << ',' << format_fixed(a.result->f_stat, 4) << ',' << a.result->df_between << ','
               << a.result->df_within << ',' << format_fixed(a.result->p_value, 4) << ','
               << (a.result->significant ? "*" : "");
          else
            os << ",n/a,,,n/a,";
          os << '\n';
        }
      }
      break;
    }
    case ReportFormat::markdown: {
      os << "| method";
      for (auto c : metric_columns) os << " | " << c;
      os << " |\n|---";
      for (std::size_t i = 0; i < metric_columns.size(); ++i) os << "|---";
      os << "|\n";
      for (const auto& r : t.rows) {
        os << "| " << r.method;
        for (std::size_t c = 0; c < 6; ++c)
          os << " | " << format_mean_std(r.cells[c].mean, r.cells[c].std, is_count_column(c));
        os << " |\n";
      }
      if (!t.anova.empty()) {
        os << "\n| metric | F | df_between | df_within | p_value |\n|---|---|---|---|---|\n";
        for (const auto& a : t.anova) {
          if (a.result)
            os << "| " << a.metric << " | " << format_fixed(a.result->f_stat, 4) << " | "
               << a.result->df_between << " | " << a.result->df_within << " | "
               << format_fixed(a.result->p_value, 4) << (a.result->significant ? "*" : "")
               << " |\n";
          else
            os << "| " << a.metric << " | n/a | | | n/a |\n";
        }
      }
      break;
    }
  }
  return os.str();
}

inline void write_report(const SummaryTable& table, ReportFormat fmt,
                         const std::filesystem::path& path) {
  write_file_atomic(path, render_summary(table, fmt));
}

}  // namespace biliseg
