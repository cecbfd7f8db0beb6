#pragma once

#include <cstdint>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

/// Per-pixel motion f0 -> f1 in pixels. border marks pixels whose matching
/// window or search window left the image at the finest level.
struct FlowField {
  Plane du;
  Plane dv;
  Mask border;

  int height() const noexcept { return du.height(); }
  int width() const noexcept { return du.width(); }
};

struct FlowConfig {
  int levels = 3;
  int block = 9;
  int radius = 4;

  void validate() const;
};

// Coarse-to-fine integer block matching. Grayscale pyramids use the 5-tap
// binomial filter with 2x decimation. At each level every pixel searches
// +/-radius around twice the coarser estimate, minimising the SSD over a
// block x block window (replicate borders). Ties prefer the smallest
// |offset|_1, then smaller dv, then smaller du.
FlowField optical_flow(const Frame& f0, const Frame& f1, const FlowConfig& cfg = {});
FlowField optical_flow(const Plane& g0, const Plane& g1, const FlowConfig& cfg = {});

struct EpeStats {
  double sum = 0.0;
  std::int64_t pixels = 0;

  double mean() const noexcept { return pixels > 0 ? sum / static_cast<double>(pixels) : 0.0; }
};

// ||a - b||_2 accumulated over pixels that are not border in either field.
EpeStats end_point_error(const FlowField& a, const FlowField& b);

struct TemporalErrorResult {
  std::vector<double> per_pair;               // mean EPE of flow pair t -> t+1
  std::vector<std::int64_t> per_pair_pixels;  // pixels that entered each mean
  double mean = 0.0;                          // pooled over all pixels and pairs
};

// Flow on consecutive frames of both clips; EPE between the two flow
// fields, pooled over pixels and the N-1 frame pairs.
TemporalErrorResult temporal_error(const VideoClip& gt_right, const VideoClip& pred_right,
                                   const FlowConfig& cfg = {});

}  // namespace stereoeval
