#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stereoeval/error.hpp"

namespace stereoeval {

/// Dense row-major 2-D grid. Storage for grayscale planes, masks and
/// per-pixel scalar fields.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width) {
    if (height < 0 || width < 0) throw InvalidArgumentError("negative grid dimensions");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x) { return data_[index(y, x)]; }
  const T& operator()(int y, int x) const { return data_[index(y, x)]; }

  std::span<T> row(int y) { return {data_.data() + index(y, 0), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const {
    return {data_.data() + index(y, 0), static_cast<std::size_t>(width_)};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using Plane = Grid<float>;
using Mask = Grid<std::uint8_t>;

/// H x W x 3 image, interleaved RGB, intensities in [0, 1].
class Frame {
 public:
  static constexpr int kChannels = 3;

  Frame() = default;
  Frame(int height, int width, float fill = 0.0f);
  // Takes ownership of interleaved data and checks the value invariants.
  Frame(int height, int width, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  float& operator()(int y, int x, int c) { return data_[index(y, x, c)]; }
  float operator()(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Frame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Throws InvalidArgumentError on a non-finite sample or one outside [0, 1].
  void validate() const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

struct VideoClip {
  std::vector<Frame> frames;
  double fps = 30.0;

  int size() const noexcept { return static_cast<int>(frames.size()); }
  int height() const noexcept { return frames.empty() ? 0 : frames.front().height(); }
  int width() const noexcept { return frames.empty() ? 0 : frames.front().width(); }

  // N >= 1 and every frame shares the first frame's dimensions.
  void validate() const;
};

struct StereoClip {
  VideoClip left;
  VideoClip right;
  bool rectified = true;

  void validate() const;
};

/// Horizontal left->right displacement. Positive d at left pixel (u, v)
/// means the right-view correspondence sits at (u - d, v).
struct DisparityMap {
  Plane values;
  Mask valid;

  DisparityMap() = default;
  DisparityMap(int height, int width, float value = 0.0f, bool is_valid = true)
      : values(height, width, value), valid(height, width, is_valid ? 1 : 0) {}

  int height() const noexcept { return values.height(); }
  int width() const noexcept { return values.width(); }
  std::size_t valid_count() const noexcept;
  // Values at valid pixels, row-major order.
  std::vector<float> valid_values() const;

  friend bool operator==(const DisparityMap&, const DisparityMap&) = default;
};

// Half-open column interval [begin, end).
struct ColumnRange {
  int begin = 0;
  int end = 0;

  static ColumnRange all(int width) noexcept { return {0, width}; }
  int size() const noexcept { return end > begin ? end - begin : 0; }
  bool contains(int u) const noexcept { return u >= begin && u < end; }
};

// --- basic image processing shared by the metric modules ---

// 0.299 R + 0.587 G + 0.114 B.
Plane to_gray(const Frame& frame);

// Normalised 1-D Gaussian taps with radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Separable convolution, replicate border.
Plane convolve_separable(const Plane& src, std::span<const double> taps);
Plane gaussian_blur(const Plane& src, double sigma);
Frame gaussian_blur(const Frame& src, double sigma);

// [1 4 6 4 1]/16 low-pass followed by 2x decimation (even samples).
Plane downsample_binomial(const Plane& src);

std::vector<Plane> split_channels(const Frame& frame);

}  // namespace stereoeval
