#pragma once

#include <span>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

/// Forward-warped view. Pixels with valid == 0 received no source sample
/// (disocclusion holes) and hold 0 in every channel.
struct WarpResult {
  Frame image;
  Mask valid;
};

/// Ordered list of positive disparity scale factors.
class ScaleSet {
 public:
  explicit ScaleSet(std::vector<double> factors);

  // {0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.25, 1.5, 2.0, 3.0}: the synthetic
  // baseline augmentation set.
  static ScaleSet augmentation_default();

  std::span<const double> factors() const noexcept { return factors_; }
  std::size_t size() const noexcept { return factors_.size(); }

 private:
  std::vector<double> factors_;
};

// Nearest-rank order statistic over valid pixels: sorted value at index
// ceil(p/100 * n) - 1, clamped to [0, n-1]. p = 50 is the lower median.
// Throws InvalidArgumentError for p outside [0, 100], DegenerateError for an
// all-invalid map.
double percentile_disparity(const DisparityMap& d, double p);
// 3D-strength scalar: the median of the valid disparities.
double median_disparity(const DisparityMap& d);
double mean_disparity(const DisparityMap& d);
double max_disparity(const DisparityMap& d);

// Every valid source pixel (u, v) splats to column u - round(s * d(u, v)),
// ties away from zero. On collision the larger scaled disparity (nearer
// surface) wins; equal disparities keep the first writer in scan order.
// s = 0 returns the input unchanged with a full mask.
WarpResult forward_warp(const Frame& left, const DisparityMap& d, double scale);

// Mean |a - b| over valid pixels and all channels.
double masked_l1(const Frame& a, const Frame& b, const Mask& valid);

struct AugmentedPair {
  double scale = 1.0;
  WarpResult warp;
  double delta = 0.0;  // scale * median_disparity(d)
};

AugmentedPair make_augmented_pair(const Frame& left, const DisparityMap& d, double scale);
std::vector<AugmentedPair> make_augmented_pairs(const Frame& left, const DisparityMap& d,
                                                const ScaleSet& scales);

// Red from the left eye, green and blue from the right eye.
Frame anaglyph(const Frame& left, const Frame& right);

// Multiplies every value by s; validity is unchanged.
DisparityMap scale_disparity(const DisparityMap& d, double s);

}  // namespace stereoeval
