#include "stereoeval/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stereoeval {

Frame::Frame(int height, int width, float fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidArgumentError("negative frame dimensions");
  data_.assign(pixel_count() * kChannels, fill);
}

Frame::Frame(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 0 || width < 0) throw InvalidArgumentError("negative frame dimensions");
  if (data_.size() != pixel_count() * kChannels) {
    throw InvalidArgumentError("frame data length " + std::to_string(data_.size()) +
                               " != height*width*3");
  }
  validate();
}

void Frame::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw InvalidArgumentError("frame sample " + std::to_string(i) + " outside [0,1]");
    }
  }
}

void VideoClip::validate() const {
  if (frames.empty()) throw InvalidArgumentError("video clip has no frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!frames[i].same_shape(frames.front())) {
      throw ShapeError("frame " + std::to_string(i) + " differs in size from frame 0");
    }
  }
}

void StereoClip::validate() const {
  left.validate();
  right.validate();
  if (left.size() != right.size() || left.height() != right.height() ||
      left.width() != right.width()) {
    throw ShapeError("left and right clips differ in N, H or W");
  }
}

std::size_t DisparityMap::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(valid.data().begin(), valid.data().end(),
                                                 [](std::uint8_t m) { return m != 0; }));
}

std::vector<float> DisparityMap::valid_values() const {
  std::vector<float> out;
  out.reserve(valid_count());
  const auto v = values.data();
  const auto m = valid.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (m[i]) out.push_back(v[i]);
  }
  return out;
}

Plane to_gray(const Frame& frame) {
  Plane out(frame.height(), frame.width());
  const auto src = frame.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] + 0.114f * src[3 * i + 2];
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgumentError("gaussian sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += taps[i + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Plane convolve_separable(const Plane& src, std::span<const double> taps) {
  const int h = src.height();
  const int w = src.width();
  const int radius = static_cast<int>(taps.size() / 2);
  Plane tmp(h, w);
  Plane out(h, w);
  if (h == 0 || w == 0) return out;

  std::vector<float> padded(static_cast<std::size_t>(w) + 2 * radius);
  for (int y = 0; y < h; ++y) {
    const auto row = src.row(y);
    for (int i = 0; i < w + 2 * radius; ++i) padded[i] = row[std::clamp(i - radius, 0, w - 1)];
    auto dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * padded[x + k];
      dst[x] = static_cast<float>(acc);
    }
  }
  std::vector<double> acc(w);
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < taps.size(); ++k) {
      const int yy = std::clamp(y + static_cast<int>(k) - radius, 0, h - 1);
      const auto row = tmp.row(yy);
      const double t = taps[k];
      for (int x = 0; x < w; ++x) acc[x] += t * row[x];
    }
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) dst[x] = static_cast<float>(acc[x]);
  }
  return out;
}

Plane gaussian_blur(const Plane& src, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  return convolve_separable(src, taps);
}

std::vector<Plane> split_channels(const Frame& frame) {
  std::vector<Plane> planes(Frame::kChannels, Plane(frame.height(), frame.width()));
  const auto src = frame.data();
  for (int c = 0; c < Frame::kChannels; ++c) {
    auto dst = planes[c].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * Frame::kChannels + c];
  }
  return planes;
}

Frame gaussian_blur(const Frame& src, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  Frame out(src.height(), src.width());
  auto dst = out.data();
  const auto planes = split_channels(src);
  for (int c = 0; c < Frame::kChannels; ++c) {
    const Plane blurred = convolve_separable(planes[c], taps);
    const auto b = blurred.data();
    for (std::size_t i = 0; i < b.size(); ++i) {
      dst[i * Frame::kChannels + c] = std::clamp(b[i], 0.0f, 1.0f);
    }
  }
  return out;
}

Plane downsample_binomial(const Plane& src) {
  static constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const Plane smooth = convolve_separable(src, kTaps);
  const int h = (src.height() + 1) / 2;
  const int w = (src.width() + 1) / 2;
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(y, x) = smooth(2 * y, 2 * x);
  }
  return out;
}

}  // namespace stereoeval
