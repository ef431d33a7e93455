#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace rmpm::io {

// One CSV row per strategy. NaN marks an undefined value (empty CSV field,
// JSON null).
struct StrategyRow {
  std::string strategy;
  std::string regime;
  double regime_value = 0.0;
  std::size_t variants = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::vector<double> svcca;   // one per ReportBundle::taps
  double pm_iid = 0.0;
  std::vector<double> pm_ood;  // one per ReportBundle::ood
};

struct ReportBundle {
  std::vector<std::string> taps;
  std::vector<std::string> ood;
  std::vector<StrategyRow> rows;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

inline constexpr const char* kSummarySchema = "rmpm.report.v1";

// "strategy,regime,value,variants,accuracy_mean,accuracy_std,svcca_<tap>...,pm_iid,pm_<ood>..."
std::string csv_header(const ReportBundle& b);
std::string to_csv(const ReportBundle& b);

// %.9g, or "" for NaN/inf.
std::string format_number(double v);

// Copy of `j` with every floating-point number rounded to 9 significant
// digits and non-finite numbers replaced by null.
nlohmann::ordered_json rounded(const nlohmann::ordered_json& j);

// Writes strategies.csv and summary.json; returns the paths written.
std::vector<std::filesystem::path> emit_reports(const ReportBundle& b, const std::filesystem::path& out_dir);

}  // namespace rmpm::io
