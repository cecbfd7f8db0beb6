#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

/// H x W x C feature grid, row-major with channels innermost.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels, float fill = 0.0f);
  FeatureMap(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }

  float& operator()(int y, int x, int c) { return data_[index(y, x) + c]; }
  float operator()(int y, int x, int c) const { return data_[index(y, x) + c]; }
  std::span<float> pixel(int y, int x) { return {data_.data() + index(y, x), static_cast<std::size_t>(channels_)}; }
  std::span<const float> pixel(int y, int x) const {
    return {data_.data() + index(y, x), static_cast<std::size_t>(channels_)};
  }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const FeatureMap& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t index(int y, int x) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Single-head projections. w_q, w_k, w_v are C x d and w_out is d x C,
/// all row-major.
struct AttentionWeights {
  int channels = 0;
  int head_dim = 0;
  std::vector<float> w_q, w_k, w_v, w_out;

  // All-zero projections.
  static AttentionWeights zeros(int channels, int head_dim);
  // N(0, 1/C) projections from the given seed; w_out is left zero when
  // zero_output is set.
  static AttentionWeights random(int channels, int head_dim, std::uint64_t seed,
                                 bool zero_output = false);

  void validate() const;
};

// Row-constrained cross-attention with residual update. For pixel (u, v):
//   Q = h(v,u) W_Q,  K = g(v,:) W_K,  V = g(v,:) W_V
//   alpha = softmax(Q K^T / sqrt(d)) V
//   out(v,u) = h(v,u) + alpha W_out
// The softmax subtracts the row maximum before exponentiation.
FeatureMap epipolar_attention(const FeatureMap& h, const FeatureMap& g, const AttentionWeights& w);

// Same result computed as full cross-attention over all H*W guidance
// positions with keys off the query's row masked out. O(H^2 W^2); only for
// small maps.
FeatureMap masked_full_attention(const FeatureMap& h, const FeatureMap& g,
                                 const AttentionWeights& w);

// Finest level first; level i has dimensions of level 0 divided by 2^i.
using GuidancePyramid = std::vector<FeatureMap>;

// Hand-crafted guidance features standing in for a learned extractor.
// Channel layout per level (truncated to `channels`):
//   0      grayscale intensity
//   1      gradient magnitude (central differences)
//   2..C-1 grayscale blurred with sigma = 2^(k-2), k the channel index
// Level i+1 is the binomial 2x decimation of level i's grayscale. Frame
// dimensions must be divisible by 2^(levels-1).
GuidancePyramid guided_pyramid_stub(const Frame& frame, int levels, int channels);

enum class AttentionMode { Epipolar, Full };

// Bytes of one attention matrix: epipolar H*W*W*b, full (H*W)^2*b.
std::uint64_t attention_memory_model(std::uint64_t height, std::uint64_t width,
                                     std::uint64_t bytes_per_element, AttentionMode mode);

// Weight file: "EPAW" magic, uint32 version (1), uint32 C, uint32 d, then
// w_q, w_k, w_v (C*d each) and w_out (d*C) as little-endian float32,
// row-major.
AttentionWeights load_attention_weights(const std::filesystem::path& path);
void save_attention_weights(const AttentionWeights& w, const std::filesystem::path& path);

}  // namespace stereoeval
