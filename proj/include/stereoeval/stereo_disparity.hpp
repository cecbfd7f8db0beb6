#pragma once

#include <optional>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

/// Semi-global matching parameters. Matching cost is the block-averaged
/// absolute difference of 8-bit-scaled grayscale, so p1/p2 are in grey
/// levels.
struct SgmConfig {
  int block = 7;
  int d_min = -16;
  int d_max = 96;
  float p1 = 8.0f;
  float p2 = 96.0f;
  int paths = 4;  // 4 (horizontal + vertical) or 8 (adds diagonals)
  int lr_tol = 1;
  // A winner must beat every non-adjacent disparity by this fraction of the
  // runner-up cost; exact ties are always rejected.
  double uniqueness = 0.05;

  void validate(int width) const;
};

// Integer disparity for the left view. valid = 0 where the block leaves the
// image (in either view), where the winner is not unique, or where the
// left-right check fails: |d_L(u,v) - d_R(u - d_L, v)| > lr_tol.
DisparityMap estimate_disparity(const Frame& left, const Frame& right, const SgmConfig& cfg);

struct AlignmentResult {
  double a = 1.0;  // gain
  double b = 0.0;  // offset, pixels
  double mae = 0.0;
  std::size_t count = 0;
};

// Closed-form least squares (a, b) = argmin sum (a pred + b - gt)^2 over
// jointly valid pixels, and the mean |a pred + b - gt| there. Throws
// DegenerateError with fewer than two joint pixels or a constant pred.
AlignmentResult align_lsq(const DisparityMap& pred, const DisparityMap& gt);

struct DisparityErrorResult {
  std::vector<std::optional<double>> per_frame;  // empty for excluded frames
  std::vector<int> excluded_frames;
  std::optional<double> mean;  // over non-excluded frames
};

// Frames whose joint-valid overlap is below this fraction of the frame are
// excluded from Disp. err.
inline constexpr double kMinJointValidFraction = 0.01;

// Aligns each estimate to its ground truth and takes the MAE. A constant
// estimate has no defined gain; it is fitted by its offset alone, which
// leaves the spread of gt around its mean as the error.
DisparityErrorResult disparity_error_from_estimates(const std::vector<DisparityMap>& estimates,
                                                    const std::vector<DisparityMap>& gt);

// estimate_disparity on every (left, candidate right) frame, then
// disparity_error_from_estimates.
DisparityErrorResult disparity_error(const StereoClip& stereo_pred,
                                     const std::vector<DisparityMap>& gt, const SgmConfig& cfg);

}  // namespace stereoeval
