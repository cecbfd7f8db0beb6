#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stereoeval/feature_match.hpp"
#include "stereoeval/image.hpp"
#include "stereoeval/media_io.hpp"
#include "stereoeval/quality_metrics.hpp"
#include "stereoeval/report.hpp"
#include "stereoeval/stereo_disparity.hpp"
#include "stereoeval/temporal_flow.hpp"

namespace stereoeval {

/// Side information handed to the method under test. Warp-based methods get
/// a scale and shift; direct methods get the median disparity of frame 0.
/// The harness only transports these values into the report.
struct Global3dInfo {
  std::optional<double> scale;
  std::optional<double> shift;
  std::optional<double> median_disparity;
};

struct ProtocolConfig {
  double psnr_cap = kDefaultPsnrCap;
  PatchPsnrConfig ppsnr;
  DetectorConfig detector;
  MatchConfig match;
  SgmConfig sgm;
  FlowConfig flow;
};

struct ProtocolRun {
  StereoClip input;                       // ground-truth pair
  VideoClip candidate;                    // generated right view
  std::vector<DisparityMap> gt_disparity; // may be empty; Disp. err then fails
  Global3dInfo global;
  ProtocolConfig config;

  // Throws ShapeError when the candidate or disparity list disagrees with
  // the input clip.
  void validate() const;
};

nlohmann::json config_to_json(const ProtocolRun& run);

// Every metric runs independently. A metric that throws leaves its fields
// empty and its message under report.errors[<metric>]. When no median
// disparity is supplied and ground truth exists, it is filled from frame 0.
EvaluationReport run_protocol(const ProtocolRun& run);

// --- Degradation sweep ---

enum class DegradationKind { HorizontalShift, GaussianBlur };

struct DegradationSpec {
  DegradationKind kind = DegradationKind::HorizontalShift;
  std::vector<double> levels;  // pixels (integers) for shift, sigma for blur

  void validate(int width) const;
};

DegradationKind parse_degradation_kind(const std::string& text);
std::string to_string(DegradationKind kind);

// Moves content `k` columns to the right (left for negative k). Columns with
// no source are 0.
Frame shift_columns(const Frame& frame, int k);
Frame crop_columns(const Frame& frame, ColumnRange cols);

struct SensitivityRow {
  double level = 0.0;
  double psnr = 0.0;
  double p_psnr = 0.0;
  double ssim = 0.0;
  double match_error = 0.0;
};

// Degrades the candidate at each level and recomputes PSNR and SSIM
// (against the ground-truth right view), P-PSNR (against the left view)
// and Matchability.
//
// Shift by k: the candidate is shifted k columns, the columns that lost
// their source are dropped, and every comparison is restricted to
// [|k|, W - |k|) on both images. P-PSNR tiles that band of the left view
// and may search the shifted candidate wherever it holds real content.
// Matchability uses left keypoints inside the band only.
//
// Blur by sigma: Gaussian kernel truncated at 3 sigma, renormalised, whole
// frame compared.
std::vector<SensitivityRow> sensitivity_sweep(const ProtocolRun& run, const DegradationSpec& spec);

// Header: level,psnr,p_psnr,ssim,match_error.
CsvTable sensitivity_table(const std::vector<SensitivityRow>& rows);

}  // namespace stereoeval
