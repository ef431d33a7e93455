#include "rmpm/io/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "rmpm/error.hpp"

namespace rmpm::io {
namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_header(const ReportBundle& b) {
  std::string h = "strategy,regime,value,variants,accuracy_mean,accuracy_std";
  for (const auto& t : b.taps) h += ",svcca_" + csv_field(t);
  h += ",pm_iid";
  for (const auto& o : b.ood) h += ",pm_" + csv_field(o);
  return h;
}

std::string to_csv(const ReportBundle& b) {
  std::string out = csv_header(b) + "\n";
  for (const auto& r : b.rows) {
    require(r.svcca.size() == b.taps.size(), Errc::shape_mismatch, "row has wrong number of svcca values");
    require(r.pm_ood.size() == b.ood.size(), Errc::shape_mismatch, "row has wrong number of OOD values");
    out += csv_field(r.strategy) + "," + csv_field(r.regime) + "," + format_number(r.regime_value) + "," +
           std::to_string(r.variants) + "," + format_number(r.accuracy_mean) + "," +
           format_number(r.accuracy_std);
    for (double v : r.svcca) out += "," + format_number(v);
    out += "," + format_number(r.pm_iid);
    for (double v : r.pm_ood) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json rounded(const nlohmann::ordered_json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) return nullptr;
    return std::strtod(format_number(v).c_str(), nullptr);
  }
  if (j.is_array()) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& e : j) out.push_back(rounded(e));
    return out;
  }
  if (j.is_object()) {
    auto out = nlohmann::ordered_json::object();
    for (const auto& [k, v] : j.items()) out[k] = rounded(v);
    return out;
  }
  return j;
}

std::vector<std::filesystem::path> emit_reports(const ReportBundle& b, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::io, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto csv = out_dir / "strategies.csv";
  const auto json = out_dir / "summary.json";
  write_text(csv, to_csv(b));

  nlohmann::ordered_json summary;
  summary["schema"] = kSummarySchema;
  summary["taps"] = b.taps;
  summary["ood"] = b.ood;
  for (const auto& [k, v] : b.summary.items()) summary[k] = v;
  write_text(json, rounded(summary).dump(2) + "\n");
  return {csv, json};
}

}  // namespace rmpm::io
