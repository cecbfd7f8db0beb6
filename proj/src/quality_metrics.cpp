#include "stereoeval/quality_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stereoeval {
namespace {

void require_same_shape(const Frame& a, const Frame& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": operands differ in shape");
}

// Gaussian-weighted "valid" filtering: output is (h-10) x (w-10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int oh = h - k + 1;
  const int ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    const double* row = &src[static_cast<std::size_t>(y) * w];
    double* dst = &tmp[static_cast<std::size_t>(y) * ow];
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[i] * row[x + i];
      dst[x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    double* dst = &out[static_cast<std::size_t>(y) * ow];
    for (int i = 0; i < k; ++i) {
      const double* row = &tmp[static_cast<std::size_t>(y + i) * ow];
      const double t = taps[i];
      for (int x = 0; x < ow; ++x) dst[x] += t * row[x];
    }
  }
  return out;
}

std::vector<double> ssim_taps() {
  std::vector<double> taps(kSsimWindow);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    taps[i] = std::exp(-0.5 * x * x / (sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

}  // namespace

double mse(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "mse");
  const auto pa = a.data();
  const auto pb = b.data();
  if (pa.empty()) throw InvalidArgumentError("mse of empty frames");
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double diff = static_cast<double>(pa[i]) - pb[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(pa.size());
}

double psnr_from_mse(double mse_value, double cap) {
  if (mse_value <= 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse_value));
}

double psnr(const Frame& a, const Frame& b, double cap) { return psnr_from_mse(mse(a, b), cap); }

double psnr(const VideoClip& a, const VideoClip& b, double cap) {
  if (a.size() != b.size()) throw ShapeError("psnr: clips differ in length");
  if (a.size() == 0) throw InvalidArgumentError("psnr of empty clips");
  double sum = 0.0;
  for (int i = 0; i < a.size(); ++i) sum += mse(a.frames[i], b.frames[i]);
  return psnr_from_mse(sum / a.size(), cap);
}

double ssim(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "ssim");
  const int h = a.height();
  const int w = a.width();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw InvalidArgumentError("ssim: image smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  static const std::vector<double> taps = ssim_taps();

  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  double total = 0.0;
  for (int c = 0; c < Frame::kChannels; ++c) {
    const auto pa = a.data();
    const auto pb = b.data();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pa[i * Frame::kChannels + c];
      y[i] = pb[i * Frame::kChannels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, taps);
    const auto my = filter_valid(y, h, w, taps);
    const auto sxx = filter_valid(xx, h, w, taps);
    const auto syy = filter_valid(yy, h, w, taps);
    const auto sxy = filter_valid(xy, h, w, taps);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / Frame::kChannels;
}

void PatchPsnrConfig::validate() const {
  if (patch < 1) throw InvalidArgumentError("patch size must be >= 1");
  if (stride < 1) throw InvalidArgumentError("patch stride must be >= 1");
  if (search_range < 0) throw InvalidArgumentError("search range must be >= 0");
  if (!std::isfinite(psnr_cap)) throw InvalidArgumentError("psnr cap must be finite");
}

PatchSearchResult patch_search(const Frame& left, const Frame& right, const PatchPsnrConfig& cfg,
                               ColumnRange tile_cols, ColumnRange search_cols) {
  cfg.validate();
  require_same_shape(left, right, "patch_psnr");
  const int h = left.height();
  const int w = left.width();
  if (h < cfg.patch || w < cfg.patch) {
    throw InvalidArgumentError("patch_psnr: image smaller than one patch");
  }
  tile_cols.begin = std::max(tile_cols.begin, 0);
  tile_cols.end = std::min(tile_cols.end, w);
  search_cols.begin = std::max(search_cols.begin, 0);
  search_cols.end = std::min(search_cols.end, w);

  const int p = cfg.patch;
  const int row_len = p * Frame::kChannels;
  const double norm = 1.0 / (static_cast<double>(p) * p * Frame::kChannels);
  const auto pl = left.data();
  const auto pr = right.data();

  // Offsets visited in tie-break order: 0, -1, +1, -2, +2, ...
  std::vector<int> offsets{0};
  for (int o = 1; o <= cfg.search_range; ++o) {
    offsets.push_back(-o);
    offsets.push_back(o);
  }

  double sum = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + p <= h; y0 += cfg.stride) {
    for (int x0 = 0; x0 + p <= w; x0 += cfg.stride) {
      if (x0 < tile_cols.begin || x0 + p > tile_cols.end) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int o : offsets) {
        const int xs = x0 + o;
        if (xs < search_cols.begin || xs + p > search_cols.end) continue;
        double ssd = 0.0;
        for (int dy = 0; dy < p && ssd < best; ++dy) {
          const std::size_t li = (static_cast<std::size_t>(y0 + dy) * w + x0) * Frame::kChannels;
          const std::size_t ri = (static_cast<std::size_t>(y0 + dy) * w + xs) * Frame::kChannels;
          for (int k = 0; k < row_len; ++k) {
            const double diff = static_cast<double>(pl[li + k]) - pr[ri + k];
            ssd += diff * diff;
          }
        }
        if (ssd < best) best = ssd;
      }
      // No placement fits inside search_cols.
      if (!std::isfinite(best)) continue;
      sum += best * norm;
      ++count;
    }
  }
  if (count == 0) throw DegenerateError("patch_psnr: no tile has an admissible placement");
  PatchSearchResult result;
  result.patches = count;
  result.mean_best_mse = sum / count;
  result.psnr = psnr_from_mse(result.mean_best_mse, cfg.psnr_cap);
  return result;
}

double patch_psnr(const Frame& left, const Frame& right_pred, const PatchPsnrConfig& cfg) {
  return patch_search(left, right_pred, cfg, ColumnRange::all(left.width()),
                      ColumnRange::all(left.width()))
      .psnr;
}

ClipMetricResult clip_metric(FrameMetric metric, const VideoClip& a, const VideoClip& b,
                             const PatchPsnrConfig& cfg) {
  if (a.size() != b.size()) throw ShapeError("clip_metric: clips differ in length");
  if (a.size() == 0) throw InvalidArgumentError("clip_metric: empty clips");
  ClipMetricResult result;
  switch (metric) {
    case FrameMetric::Ssim:
      for (int i = 0; i < a.size(); ++i) result.per_frame.push_back(ssim(a.frames[i], b.frames[i]));
      result.aggregate = std::accumulate(result.per_frame.begin(), result.per_frame.end(), 0.0) /
                         a.size();
      break;
    case FrameMetric::Psnr:
    case FrameMetric::PatchPsnr: {
      const double cap = cfg.psnr_cap;
      for (int i = 0; i < a.size(); ++i) {
        double m = 0.0;
        if (metric == FrameMetric::Psnr) {
          m = mse(a.frames[i], b.frames[i]);
        } else {
          m = patch_search(a.frames[i], b.frames[i], cfg, ColumnRange::all(a.width()),
                           ColumnRange::all(a.width()))
                  .mean_best_mse;
        }
        result.per_frame_mse.push_back(m);
        result.per_frame.push_back(psnr_from_mse(m, cap));
      }
      const double pooled =
          std::accumulate(result.per_frame_mse.begin(), result.per_frame_mse.end(), 0.0) /
          a.size();
      result.aggregate = psnr_from_mse(pooled, cap);
      break;
    }
  }
  return result;
}

}  // namespace stereoeval
