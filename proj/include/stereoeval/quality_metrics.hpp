#pragma once

#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

inline constexpr double kDefaultPsnrCap = 100.0;

// Mean squared error over all pixels and channels.
double mse(const Frame& a, const Frame& b);
// 10 log10(1 / mse), saturating at `cap` (mse == 0 gives exactly `cap`).
double psnr_from_mse(double mse, double cap = kDefaultPsnrCap);

double psnr(const Frame& a, const Frame& b, double cap = kDefaultPsnrCap);
// One PSNR from the MSE pooled over every frame.
double psnr(const VideoClip& a, const VideoClip& b, double cap = kDefaultPsnrCap);

/// Windowed SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2 for unit dynamic range. Only windows fully inside the image
/// are used; the map is averaged per channel, then across channels.
double ssim(const Frame& a, const Frame& b);
inline constexpr int kSsimWindow = 11;

/// Patch-wise PSNR settings. Defaults: 16x16 non-overlapping tiles,
/// +/-32 px horizontal search, 100 dB ceiling.
struct PatchPsnrConfig {
  int patch = 16;
  int stride = 16;
  int search_range = 32;
  double psnr_cap = kDefaultPsnrCap;

  void validate() const;
};

struct PatchSearchResult {
  double mean_best_mse = 0.0;
  int patches = 0;
  double psnr = 0.0;
};

// Tiles `left` on the absolute grid (origins at multiples of stride) and
// keeps tiles lying fully inside `tile_cols`. Each tile is compared against
// `right` at the same rows, horizontal offsets in [-range, range], where the
// candidate window must stay inside `search_cols`. The smallest SSD wins
// (ties: smallest |offset|, then the negative one). Per-tile best MSEs are
// averaged and turned into a single PSNR.
PatchSearchResult patch_search(const Frame& left, const Frame& right, const PatchPsnrConfig& cfg,
                               ColumnRange tile_cols, ColumnRange search_cols);

// patch_search over the whole frame; returns the PSNR.
double patch_psnr(const Frame& left, const Frame& right_pred, const PatchPsnrConfig& cfg = {});

enum class FrameMetric { Psnr, Ssim, PatchPsnr };

struct ClipMetricResult {
  std::vector<double> per_frame;
  // PSNR-type metrics also report the per-frame MSE they pooled.
  std::vector<double> per_frame_mse;
  double aggregate = 0.0;
};

// Applies a frame metric to aligned frame pairs. SSIM aggregates by the
// arithmetic mean; PSNR and patch PSNR pool the per-frame MSE first.
ClipMetricResult clip_metric(FrameMetric metric, const VideoClip& a, const VideoClip& b,
                             const PatchPsnrConfig& cfg = {});

}  // namespace stereoeval
