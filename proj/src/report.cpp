#include "stereoeval/report.hpp"

#include <fstream>

#include "stereoeval/error.hpp"

namespace stereoeval {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json counts_json(const MatchCounts& c) { return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; }

MatchCounts counts_from(const json& j) {
  return {j.at("tp").get<std::int64_t>(), j.at("fp").get<std::int64_t>(),
          j.at("fn").get<std::int64_t>()};
}

template <typename T>
std::vector<T> read_vector(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

json to_json(const EvaluationReport& r) {
  json per = json::object();
  per["psnr"] = r.per_frame.psnr;
  per["mse"] = r.per_frame.mse;
  per["ssim"] = r.per_frame.ssim;
  per["p_psnr"] = r.per_frame.p_psnr;
  per["p_psnr_mse"] = r.per_frame.p_psnr_mse;
  per["match_error"] = r.per_frame.match_error;
  json counts = json::array();
  for (const auto& c : r.per_frame.match_counts) counts.push_back(counts_json(c));
  per["match_counts"] = counts;
  json disp = json::array();
  for (const auto& d : r.per_frame.disp_err) disp.push_back(optional_number(d));
  per["disp_err"] = disp;
  per["temp_err"] = r.per_frame.temp_err;
  per["temp_pixels"] = r.per_frame.temp_pixels;

  json j;
  j["psnr"] = optional_number(r.psnr);
  j["ssim"] = optional_number(r.ssim);
  j["p_psnr"] = optional_number(r.p_psnr);
  j["match_error"] = optional_number(r.match_error);
  j["match_counts"] = r.match_counts ? counts_json(*r.match_counts) : json(nullptr);
  j["disp_err"] = optional_number(r.disp_err);
  j["temp_err"] = optional_number(r.temp_err);
  j["per_frame"] = per;
  j["disp_excluded_frames"] = r.disp_excluded_frames;
  j["errors"] = r.errors;
  j["config"] = r.config;
  return j;
}

EvaluationReport report_from_json(const json& j) {
  EvaluationReport r;
  r.psnr = read_optional(j, "psnr");
  r.ssim = read_optional(j, "ssim");
  r.p_psnr = read_optional(j, "p_psnr");
  r.match_error = read_optional(j, "match_error");
  if (j.contains("match_counts") && !j.at("match_counts").is_null()) {
    r.match_counts = counts_from(j.at("match_counts"));
  }
  r.disp_err = read_optional(j, "disp_err");
  r.temp_err = read_optional(j, "temp_err");

  if (j.contains("per_frame")) {
    const json& per = j.at("per_frame");
    r.per_frame.psnr = read_vector<double>(per, "psnr");
    r.per_frame.mse = read_vector<double>(per, "mse");
    r.per_frame.ssim = read_vector<double>(per, "ssim");
    r.per_frame.p_psnr = read_vector<double>(per, "p_psnr");
    r.per_frame.p_psnr_mse = read_vector<double>(per, "p_psnr_mse");
    r.per_frame.match_error = read_vector<double>(per, "match_error");
    if (per.contains("match_counts")) {
      for (const auto& c : per.at("match_counts")) r.per_frame.match_counts.push_back(counts_from(c));
    }
    if (per.contains("disp_err")) {
      for (const auto& d : per.at("disp_err")) {
        r.per_frame.disp_err.push_back(d.is_null() ? std::nullopt
                                                   : std::optional<double>(d.get<double>()));
      }
    }
    r.per_frame.temp_err = read_vector<double>(per, "temp_err");
    r.per_frame.temp_pixels = read_vector<std::int64_t>(per, "temp_pixels");
  }
  r.disp_excluded_frames = read_vector<int>(j, "disp_excluded_frames");
  if (j.contains("errors")) r.errors = j.at("errors").get<std::map<std::string, std::string>>();
  if (j.contains("config")) r.config = j.at("config");
  return r;
}

void save_report(const EvaluationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing", path);
  out << to_json(report).dump(2) << "\n";
  out.flush();
  if (!out) throw IoError("failed writing report", path);
}

EvaluationReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPathError("cannot open report", path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report JSON (") + e.what() + ")", path);
  }
  return report_from_json(j);
}

}  // namespace stereoeval
