#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace stereoeval {

struct MatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

/// Result of one protocol run. Aggregates are derived from the per-frame
/// vectors as follows:
///   psnr, p_psnr  10 log10(1 / mean(per_frame mse))  (pooled MSE, capped)
///   ssim, match_error, disp_err  arithmetic mean of per-frame values
///                                (disp_err skips excluded frames)
///   match_counts  component-wise sum
///   temp_err      sum(per_pair mean * pixels) / sum(pixels)
/// A metric that failed is left empty and its message recorded in errors.
struct EvaluationReport {
  struct PerFrame {
    std::vector<double> psnr;
    std::vector<double> mse;
    std::vector<double> ssim;
    std::vector<double> p_psnr;
    std::vector<double> p_psnr_mse;
    std::vector<double> match_error;
    std::vector<MatchCounts> match_counts;
    std::vector<std::optional<double>> disp_err;
    std::vector<double> temp_err;
    std::vector<std::int64_t> temp_pixels;

    friend bool operator==(const PerFrame&, const PerFrame&) = default;
  };

  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<double> p_psnr;
  std::optional<double> match_error;
  std::optional<MatchCounts> match_counts;
  std::optional<double> disp_err;
  std::optional<double> temp_err;

  PerFrame per_frame;
  std::vector<int> disp_excluded_frames;
  std::map<std::string, std::string> errors;
  nlohmann::json config = nlohmann::json::object();

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

// Throws IoError when the file cannot be written or read.
void save_report(const EvaluationReport& report, const std::filesystem::path& path);
EvaluationReport load_report(const std::filesystem::path& path);

}  // namespace stereoeval
