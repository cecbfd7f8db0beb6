#include "stereoeval/warp_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stereoeval {

ScaleSet::ScaleSet(std::vector<double> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw InvalidArgumentError("scale set is empty");
  for (double f : factors_) {
    if (!(f > 0.0) || !std::isfinite(f)) throw InvalidArgumentError("scale factors must be > 0");
  }
}

ScaleSet ScaleSet::augmentation_default() {
  return ScaleSet({0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.25, 1.5, 2.0, 3.0});
}

double percentile_disparity(const DisparityMap& d, double p) {
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgumentError("percentile must lie in [0, 100]");
  std::vector<float> values = d.valid_values();
  if (values.empty()) throw DegenerateError("disparity map has no valid pixels");
  const auto n = static_cast<double>(values.size());
  const auto rank = static_cast<long long>(std::ceil(p * n / 100.0)) - 1;
  const auto k = static_cast<std::size_t>(std::clamp<long long>(rank, 0, values.size() - 1));
  std::nth_element(values.begin(), values.begin() + k, values.end());
  return values[k];
}

double median_disparity(const DisparityMap& d) { return percentile_disparity(d, 50.0); }

double mean_disparity(const DisparityMap& d) {
  const std::vector<float> values = d.valid_values();
  if (values.empty()) throw DegenerateError("disparity map has no valid pixels");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double max_disparity(const DisparityMap& d) { return percentile_disparity(d, 100.0); }

WarpResult forward_warp(const Frame& left, const DisparityMap& d, double scale) {
  if (d.height() != left.height() || d.width() != left.width()) {
    throw ShapeError("disparity map and frame dimensions differ");
  }
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw InvalidArgumentError("warp scale must be finite and >= 0");
  }
  const int h = left.height();
  const int w = left.width();
  if (scale == 0.0) return {left, Mask(h, w, 1)};

  WarpResult out{Frame(h, w), Mask(h, w, 0)};
  // Rows are independent; the z-buffer holds the winning scaled disparity.
  std::vector<double> zbuf(w);
  for (int v = 0; v < h; ++v) {
    std::fill(zbuf.begin(), zbuf.end(), -std::numeric_limits<double>::infinity());
    for (int u = 0; u < w; ++u) {
      if (!d.valid(v, u)) continue;
      const double sd = scale * d.values(v, u);
      const long long target = u - std::llround(sd);
      if (target < 0 || target >= w) continue;
      const int t = static_cast<int>(target);
      if (out.valid(v, t) && sd <= zbuf[t]) continue;
      zbuf[t] = sd;
      out.valid(v, t) = 1;
      for (int c = 0; c < Frame::kChannels; ++c) out.image(v, t, c) = left(v, u, c);
    }
  }
  return out;
}

double masked_l1(const Frame& a, const Frame& b, const Mask& valid) {
  if (!a.same_shape(b) || valid.height() != a.height() || valid.width() != a.width()) {
    throw ShapeError("masked_l1 operands differ in shape");
  }
  double sum = 0.0;
  std::size_t count = 0;
  const auto pa = a.data();
  const auto pb = b.data();
  const auto m = valid.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    for (int c = 0; c < Frame::kChannels; ++c) {
      sum += std::abs(static_cast<double>(pa[3 * i + c]) - pb[3 * i + c]);
    }
    count += Frame::kChannels;
  }
  if (count == 0) throw DegenerateError("masked_l1 with an empty mask");
  return sum / static_cast<double>(count);
}

AugmentedPair make_augmented_pair(const Frame& left, const DisparityMap& d, double scale) {
  AugmentedPair pair;
  pair.scale = scale;
  pair.warp = forward_warp(left, d, scale);
  pair.delta = scale * median_disparity(d);
  return pair;
}

std::vector<AugmentedPair> make_augmented_pairs(const Frame& left, const DisparityMap& d,
                                                const ScaleSet& scales) {
  std::vector<AugmentedPair> pairs;
  pairs.reserve(scales.size());
  for (double s : scales.factors()) pairs.push_back(make_augmented_pair(left, d, s));
  return pairs;
}

Frame anaglyph(const Frame& left, const Frame& right) {
  if (!left.same_shape(right)) throw ShapeError("anaglyph inputs differ in shape");
  Frame out = right;
  for (int y = 0; y < left.height(); ++y) {
    for (int x = 0; x < left.width(); ++x) out(y, x, 0) = left(y, x, 0);
  }
  return out;
}

DisparityMap scale_disparity(const DisparityMap& d, double s) {
  DisparityMap out = d;
  for (float& v : out.values.data()) v = static_cast<float>(s * v);
  return out;
}

}  // namespace stereoeval
