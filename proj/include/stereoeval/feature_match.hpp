#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

struct Keypoint {
  int u = 0;
  int v = 0;
  float score = 0.0f;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// Half-width of the square descriptor window (31 x 31).
inline constexpr int kDescriptorRadius = 15;

struct DetectorConfig {
  int max_count = 1000;
  int nms_radius = 3;
  // Keypoints closer than this to any image edge are dropped so the
  // descriptor window fits.
  int border = kDescriptorRadius + 1;
  double harris_k = 0.04;
  double window_sigma = 1.0;
  float min_response = 1e-12f;
};

// Harris corner response on a grayscale plane: Sobel gradients (scaled by
// 1/8), structure tensor smoothed with a Gaussian window, det - k trace^2.
Plane harris_response(const Plane& gray, double harris_k = 0.04, double window_sigma = 1.0);

// Grayscale (0.299R + 0.587G + 0.114B) Harris corners. A pixel survives
// non-maximum suppression when no pixel in its (2r+1)^2 neighbourhood scores
// higher, or equal with a smaller (v, u). Output ordered by score desc,
// then (v, u), truncated to max_count.
std::vector<Keypoint> detect_keypoints(const Frame& img, const DetectorConfig& cfg);
std::vector<Keypoint> detect_keypoints(const Frame& img, int max_count, int nms_radius);

/// 256-bit binary intensity-comparison descriptor.
using Descriptor = std::array<std::uint64_t, 4>;

/// Fixed comparison pattern: 256 point pairs in the 31x31 window drawn from
/// std::mt19937 seeded with kSeed, each coordinate (raw() % 31) - 15.
/// std::mt19937 output is fully specified, so the pattern is identical on
/// every platform.
class BriefPattern {
 public:
  static constexpr std::uint32_t kSeed = 0x5EED2025u;
  struct Pair {
    int du1, dv1, du2, dv2;
  };

  static const BriefPattern& instance();
  std::span<const Pair> pairs() const noexcept { return pairs_; }

 private:
  BriefPattern();
  std::vector<Pair> pairs_;
};

// Descriptors are taken on the grayscale image smoothed with sigma = 2.
Plane descriptor_image(const Frame& img);
Descriptor describe(const Plane& smoothed, int u, int v);
int hamming(const Descriptor& a, const Descriptor& b) noexcept;

struct MatchConfig {
  int v_tol = 2;
  double ratio = 0.8;
  int d_max = 64;
  int max_hamming = 64;
  // Right-view keypoints considered as match candidates.
  int candidate_count = 4000;
};

/// Left-view keypoints that found an epipolar-consistent match, keyed by
/// their (v, u) position in the left image. Members are kept sorted.
class MatchSet {
 public:
  struct Key {
    int v = 0;
    int u = 0;
    auto operator<=>(const Key&) const = default;
  };

  MatchSet() = default;
  explicit MatchSet(std::vector<Key> keys);

  void insert(Key key);
  bool contains(Key key) const;
  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  std::span<const Key> members() const noexcept { return keys_; }

  friend bool operator==(const MatchSet&, const MatchSet&) = default;

 private:
  std::vector<Key> keys_;
};

// For every left keypoint, searches the right-view keypoints (same
// detector, candidate_count strongest) with |dv| <= v_tol and
// u_left - u_right in [-d_max, d_max]. Accepts when the best Hamming
// distance is below max_hamming and below ratio x second best.
// Right keypoints must lie inside `right_valid` by at least the detector
// border; pass ColumnRange::all(width) when every column is real content.
MatchSet match_epipolar(std::span<const Keypoint> keypoints, const Frame& left, const Frame& right,
                        const MatchConfig& cfg, const DetectorConfig& detector,
                        ColumnRange right_valid);
MatchSet match_epipolar(std::span<const Keypoint> keypoints, const Frame& left, const Frame& right,
                        const MatchConfig& cfg = {});

struct MatchabilityBreakdown {
  std::int64_t n_tp = 0;
  std::int64_t n_fp = 0;
  std::int64_t n_fn = 0;
  double error = 0.0;
  // Both sets empty: error reported as 0.
  bool degenerate = false;
};

// 1 - |gt ∩ pred| / |gt ∪ pred| = (fp + fn) / (tp + fp + fn).
MatchabilityBreakdown matchability_error(const MatchSet& m_gt, const MatchSet& m_pred);

enum class MatchStatus { TruePositive, FalsePositive, FalseNegative };

struct ClassifiedMatch {
  MatchSet::Key key;
  MatchStatus status;
};

// Union of both sets, in key order, labelled tp / fp / fn.
std::vector<ClassifiedMatch> classify_matches(const MatchSet& m_gt, const MatchSet& m_pred);
std::string to_string(MatchStatus status);

}  // namespace stereoeval
