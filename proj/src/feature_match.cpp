#include "stereoeval/feature_match.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

namespace stereoeval {
namespace {

Plane sobel(const Plane& g, bool horizontal) {
  const int h = g.height();
  const int w = g.width();
  Plane out(h, w);
  auto at = [&](int y, int x) { return g(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = 0.0f;
      if (horizontal) {
        v = (at(y - 1, x + 1) + 2.0f * at(y, x + 1) + at(y + 1, x + 1)) -
            (at(y - 1, x - 1) + 2.0f * at(y, x - 1) + at(y + 1, x - 1));
      } else {
        v = (at(y + 1, x - 1) + 2.0f * at(y + 1, x) + at(y + 1, x + 1)) -
            (at(y - 1, x - 1) + 2.0f * at(y - 1, x) + at(y - 1, x + 1));
      }
      out(y, x) = v * 0.125f;
    }
  }
  return out;
}

}  // namespace

Plane harris_response(const Plane& gray, double harris_k, double window_sigma) {
  const Plane ix = sobel(gray, true);
  const Plane iy = sobel(gray, false);
  Plane a(gray.height(), gray.width());
  Plane b(gray.height(), gray.width());
  Plane c(gray.height(), gray.width());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float gx = ix.data()[i];
    const float gy = iy.data()[i];
    a.data()[i] = gx * gx;
    b.data()[i] = gy * gy;
    c.data()[i] = gx * gy;
  }
  const auto taps = gaussian_kernel(window_sigma);
  a = convolve_separable(a, taps);
  b = convolve_separable(b, taps);
  c = convolve_separable(c, taps);
  Plane r(gray.height(), gray.width());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double sa = a.data()[i];
    const double sb = b.data()[i];
    const double sc = c.data()[i];
    const double trace = sa + sb;
    r.data()[i] = static_cast<float>(sa * sb - sc * sc - harris_k * trace * trace);
  }
  return r;
}

std::vector<Keypoint> detect_keypoints(const Frame& img, const DetectorConfig& cfg) {
  if (cfg.max_count < 0 || cfg.nms_radius < 0 || cfg.border < 0) {
    throw InvalidArgumentError("detector parameters must be non-negative");
  }
  const Plane r = harris_response(to_gray(img), cfg.harris_k, cfg.window_sigma);
  const int h = r.height();
  const int w = r.width();
  const int rad = cfg.nms_radius;
  std::vector<Keypoint> kps;
  for (int v = cfg.border; v < h - cfg.border; ++v) {
    for (int u = cfg.border; u < w - cfg.border; ++u) {
      const float s = r(v, u);
      if (!(s > cfg.min_response)) continue;
      bool is_max = true;
      for (int y = std::max(0, v - rad); y <= std::min(h - 1, v + rad) && is_max; ++y) {
        for (int x = std::max(0, u - rad); x <= std::min(w - 1, u + rad); ++x) {
          const float q = r(y, x);
          if (q > s || (q == s && std::pair(y, x) < std::pair(v, u))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kps.push_back({u, v, s});
    }
  }
  std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::pair(a.v, a.u) < std::pair(b.v, b.u);
  });
  if (kps.size() > static_cast<std::size_t>(cfg.max_count)) kps.resize(cfg.max_count);
  return kps;
}

std::vector<Keypoint> detect_keypoints(const Frame& img, int max_count, int nms_radius) {
  DetectorConfig cfg;
  cfg.max_count = max_count;
  cfg.nms_radius = nms_radius;
  return detect_keypoints(img, cfg);
}

BriefPattern::BriefPattern() {
  std::mt19937 rng(kSeed);
  const auto coord = [&rng] { return static_cast<int>(rng() % 31u) - kDescriptorRadius; };
  pairs_.reserve(256);
  for (int i = 0; i < 256; ++i) {
    Pair p{};
    p.du1 = coord();
    p.dv1 = coord();
    p.du2 = coord();
    p.dv2 = coord();
    pairs_.push_back(p);
  }
}

const BriefPattern& BriefPattern::instance() {
  static const BriefPattern pattern;
  return pattern;
}

Plane descriptor_image(const Frame& img) { return gaussian_blur(to_gray(img), 2.0); }

Descriptor describe(const Plane& smoothed, int u, int v) {
  if (u < kDescriptorRadius || v < kDescriptorRadius ||
      u >= smoothed.width() - kDescriptorRadius || v >= smoothed.height() - kDescriptorRadius) {
    throw InvalidArgumentError("descriptor window leaves the image");
  }
  Descriptor d{};
  const auto pairs = BriefPattern::instance().pairs();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (smoothed(v + p.dv1, u + p.du1) < smoothed(v + p.dv2, u + p.du2)) {
      d[i / 64] |= std::uint64_t{1} << (i % 64);
    }
  }
  return d;
}

int hamming(const Descriptor& a, const Descriptor& b) noexcept {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] ^ b[i]);
  return n;
}

MatchSet::MatchSet(std::vector<Key> keys) : keys_(std::move(keys)) {
  std::sort(keys_.begin(), keys_.end());
  keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
}

void MatchSet::insert(Key key) {
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) keys_.insert(it, key);
}

bool MatchSet::contains(Key key) const { return std::binary_search(keys_.begin(), keys_.end(), key); }

MatchSet match_epipolar(std::span<const Keypoint> keypoints, const Frame& left, const Frame& right,
                        const MatchConfig& cfg, const DetectorConfig& detector,
                        ColumnRange right_valid) {
  if (!left.same_shape(right)) throw ShapeError("match_epipolar: views differ in shape");
  if (cfg.v_tol < 0 || cfg.d_max < 0 || !(cfg.ratio > 0.0)) {
    throw InvalidArgumentError("match_epipolar: invalid matching parameters");
  }
  const int h = right.height();

  DetectorConfig right_detector = detector;
  right_detector.max_count = cfg.candidate_count;
  std::vector<Keypoint> candidates = detect_keypoints(right, right_detector);
  const int margin = detector.border;
  std::erase_if(candidates, [&](const Keypoint& k) {
    return k.u < right_valid.begin + margin || k.u >= right_valid.end - margin;
  });

  const Plane left_smooth = descriptor_image(left);
  const Plane right_smooth = descriptor_image(right);

  // Candidates bucketed by row, each bucket sorted by column.
  struct Candidate {
    int u;
    Descriptor desc;
  };
  std::vector<std::vector<Candidate>> rows(h);
  for (const auto& k : candidates) rows[k.v].push_back({k.u, describe(right_smooth, k.u, k.v)});
  for (auto& r : rows) {
    std::sort(r.begin(), r.end(), [](const Candidate& a, const Candidate& b) { return a.u < b.u; });
  }

  MatchSet result;
  for (const auto& kp : keypoints) {
    if (kp.u < kDescriptorRadius || kp.v < kDescriptorRadius ||
        kp.u >= left.width() - kDescriptorRadius || kp.v >= h - kDescriptorRadius) {
      continue;
    }
    const Descriptor desc = describe(left_smooth, kp.u, kp.v);
    int best = std::numeric_limits<int>::max();
    int second = std::numeric_limits<int>::max();
    for (int v = std::max(0, kp.v - cfg.v_tol); v <= std::min(h - 1, kp.v + cfg.v_tol); ++v) {
      const auto& row = rows[v];
      auto it = std::lower_bound(row.begin(), row.end(), kp.u - cfg.d_max,
                                 [](const Candidate& c, int u) { return c.u < u; });
      for (; it != row.end() && it->u <= kp.u + cfg.d_max; ++it) {
        const int dist = hamming(desc, it->desc);
        if (dist < best) {
          second = best;
          best = dist;
        } else if (dist < second) {
          second = dist;
        }
      }
    }
    if (best >= cfg.max_hamming) continue;
    if (second != std::numeric_limits<int>::max() && !(best < cfg.ratio * second)) continue;
    result.insert({kp.v, kp.u});
  }
  return result;
}

MatchSet match_epipolar(std::span<const Keypoint> keypoints, const Frame& left, const Frame& right,
                        const MatchConfig& cfg) {
  return match_epipolar(keypoints, left, right, cfg, DetectorConfig{},
                        ColumnRange::all(right.width()));
}

MatchabilityBreakdown matchability_error(const MatchSet& m_gt, const MatchSet& m_pred) {
  const auto gt = m_gt.members();
  const auto pred = m_pred.members();
  std::vector<MatchSet::Key> common;
  std::set_intersection(gt.begin(), gt.end(), pred.begin(), pred.end(),
                        std::back_inserter(common));
  MatchabilityBreakdown out;
  out.n_tp = static_cast<std::int64_t>(common.size());
  out.n_fp = static_cast<std::int64_t>(pred.size()) - out.n_tp;
  out.n_fn = static_cast<std::int64_t>(gt.size()) - out.n_tp;
  const std::int64_t denom = out.n_tp + out.n_fp + out.n_fn;
  if (denom == 0) {
    out.degenerate = true;
    out.error = 0.0;
  } else {
    out.error = static_cast<double>(out.n_fp + out.n_fn) / static_cast<double>(denom);
  }
  return out;
}

std::vector<ClassifiedMatch> classify_matches(const MatchSet& m_gt, const MatchSet& m_pred) {
  std::vector<ClassifiedMatch> out;
  const auto gt = m_gt.members();
  const auto pred = m_pred.members();
  std::size_t i = 0, j = 0;
  while (i < gt.size() || j < pred.size()) {
    if (j == pred.size() || (i < gt.size() && gt[i] < pred[j])) {
      out.push_back({gt[i++], MatchStatus::FalseNegative});
    } else if (i == gt.size() || pred[j] < gt[i]) {
      out.push_back({pred[j++], MatchStatus::FalsePositive});
    } else {
      out.push_back({gt[i], MatchStatus::TruePositive});
      ++i;
      ++j;
    }
  }
  return out;
}

std::string to_string(MatchStatus status) {
  switch (status) {
    case MatchStatus::TruePositive: return "tp";
    case MatchStatus::FalsePositive: return "fp";
    case MatchStatus::FalseNegative: return "fn";
  }
  return "?";
}

}  // namespace stereoeval
