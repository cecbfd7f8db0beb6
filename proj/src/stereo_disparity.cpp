#include "stereoeval/stereo_disparity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stereoeval {
namespace {

// Cost volume laid out as [v][u][d].
struct Volume {
  int h = 0, w = 0, nd = 0;
  std::vector<float> data;

  Volume(int h_, int w_, int nd_, float fill)
      : h(h_), w(w_), nd(nd_), data(static_cast<std::size_t>(h_) * w_ * nd_, fill) {}
  float* at(int v, int u) { return data.data() + (static_cast<std::size_t>(v) * w + u) * nd; }
  const float* at(int v, int u) const {
    return data.data() + (static_cast<std::size_t>(v) * w + u) * nd;
  }
};

Volume matching_cost(const Plane& left, const Plane& right, const SgmConfig& cfg) {
  const int h = left.height();
  const int w = left.width();
  const int nd = cfg.d_max - cfg.d_min + 1;
  const int r = cfg.block / 2;
  const float inv_area = 1.0f / static_cast<float>(cfg.block * cfg.block);
  Volume cost(h, w, nd, 0.0f);

  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  std::vector<float> diff(static_cast<std::size_t>(ph) * pw);
  std::vector<float> hsum(static_cast<std::size_t>(ph) * w);
  for (int di = 0; di < nd; ++di) {
    const int d = cfg.d_min + di;
    // Replicate-padded absolute difference; right samples clamp at edges.
    for (int y = 0; y < ph; ++y) {
      const int sy = std::clamp(y - r, 0, h - 1);
      const auto lrow = left.row(sy);
      const auto rrow = right.row(sy);
      float* dst = &diff[static_cast<std::size_t>(y) * pw];
      for (int x = 0; x < pw; ++x) {
        const int su = std::clamp(x - r, 0, w - 1);
        const int ru = std::clamp(su - d, 0, w - 1);
        dst[x] = std::abs(lrow[su] - rrow[ru]);
      }
    }
    for (int y = 0; y < ph; ++y) {
      const float* src = &diff[static_cast<std::size_t>(y) * pw];
      float* dst = &hsum[static_cast<std::size_t>(y) * w];
      float acc = 0.0f;
      for (int x = 0; x < cfg.block; ++x) acc += src[x];
      dst[0] = acc;
      for (int x = 1; x < w; ++x) {
        acc += src[x + cfg.block - 1] - src[x - 1];
        dst[x] = acc;
      }
    }
    std::vector<float> col(w, 0.0f);
    for (int y = 0; y < cfg.block; ++y) {
      const float* src = &hsum[static_cast<std::size_t>(y) * w];
      for (int x = 0; x < w; ++x) col[x] += src[x];
    }
    for (int v = 0; v < h; ++v) {
      if (v > 0) {
        const float* add = &hsum[static_cast<std::size_t>(v + cfg.block - 1) * w];
        const float* sub = &hsum[static_cast<std::size_t>(v - 1) * w];
        for (int x = 0; x < w; ++x) col[x] += add[x] - sub[x];
      }
      for (int u = 0; u < w; ++u) cost.at(v, u)[di] = std::max(0.0f, col[u] * inv_area);
    }
  }
  return cost;
}

// One step of the path recursion:
// L(p,d) = C(p,d) + min(L(p-r,d), L(p-r,d+-1) + P1, min_k L(p-r,k) + P2) - min_k L(p-r,k)
float path_step(const float* c, const float* prev, float prev_min, float* out, int nd, float p1,
                float p2) {
  float out_min = std::numeric_limits<float>::infinity();
  const float jump = prev_min + p2;
  for (int d = 0; d < nd; ++d) {
    float best = prev[d];
    if (d > 0) best = std::min(best, prev[d - 1] + p1);
    if (d + 1 < nd) best = std::min(best, prev[d + 1] + p1);
    best = std::min(best, jump);
    const float v = c[d] + best - prev_min;
    out[d] = v;
    out_min = std::min(out_min, v);
  }
  return out_min;
}

float min_of(const float* v, int n) { return *std::min_element(v, v + n); }

void accumulate(float* sum, const float* v, int n) {
  for (int i = 0; i < n; ++i) sum[i] += v[i];
}

void aggregate_horizontal(const Volume& cost, Volume& total, int dx, float p1, float p2) {
  const int nd = cost.nd;
  std::vector<float> prev(nd), cur(nd);
  for (int v = 0; v < cost.h; ++v) {
    const int start = dx > 0 ? 0 : cost.w - 1;
    std::copy_n(cost.at(v, start), nd, prev.begin());
    float prev_min = min_of(prev.data(), nd);
    accumulate(total.at(v, start), prev.data(), nd);
    for (int step = 1; step < cost.w; ++step) {
      const int u = start + dx * step;
      prev_min = path_step(cost.at(v, u), prev.data(), prev_min, cur.data(), nd, p1, p2);
      accumulate(total.at(v, u), cur.data(), nd);
      std::swap(prev, cur);
    }
  }
}

// Paths with a vertical component (dy = +-1, dx in {-1, 0, 1}), swept row
// by row.
void aggregate_vertical(const Volume& cost, Volume& total, int dy, int dx, float p1, float p2) {
  const int nd = cost.nd;
  const int w = cost.w;
  std::vector<float> prev(static_cast<std::size_t>(w) * nd), cur(prev.size());
  std::vector<float> prev_min(w), cur_min(w);
  const int v0 = dy > 0 ? 0 : cost.h - 1;
  for (int step = 0; step < cost.h; ++step) {
    const int v = v0 + dy * step;
    for (int u = 0; u < w; ++u) {
      float* out = &cur[static_cast<std::size_t>(u) * nd];
      const int pu = u - dx;
      if (step == 0 || pu < 0 || pu >= w) {
        std::copy_n(cost.at(v, u), nd, out);
        cur_min[u] = min_of(out, nd);
      } else {
        cur_min[u] = path_step(cost.at(v, u), &prev[static_cast<std::size_t>(pu) * nd],
                               prev_min[pu], out, nd, p1, p2);
      }
      accumulate(total.at(v, u), out, nd);
    }
    std::swap(prev, cur);
    std::swap(prev_min, cur_min);
  }
}

struct Winner {
  int index = 0;
  bool unique = false;
};

Winner winner_take_all(const float* s, int nd, double uniqueness) {
  int best = 0;
  for (int d = 1; d < nd; ++d) {
    if (s[d] < s[best]) best = d;
  }
  float runner_up = std::numeric_limits<float>::infinity();
  for (int d = 0; d < nd; ++d) {
    if (std::abs(d - best) > 1) runner_up = std::min(runner_up, s[d]);
  }
  const bool unique =
      !std::isfinite(runner_up) ||
      (s[best] < runner_up && s[best] <= (1.0 - uniqueness) * static_cast<double>(runner_up));
  return {best, unique};
}

Plane gray255(const Frame& f) {
  Plane g = to_gray(f);
  for (float& v : g.data()) v *= 255.0f;
  return g;
}

}  // namespace

void SgmConfig::validate(int width) const {
  if (block < 1 || block % 2 == 0) throw InvalidArgumentError("SGM block size must be odd");
  if (d_min >= d_max) throw InvalidArgumentError("SGM requires d_min < d_max");
  if (d_max >= width || -d_min >= width) {
    throw InvalidArgumentError("SGM disparity range exceeds the image width");
  }
  if (p1 < 0 || p2 < p1) throw InvalidArgumentError("SGM requires 0 <= p1 <= p2");
  if (paths != 4 && paths != 8) throw InvalidArgumentError("SGM supports 4 or 8 paths");
  if (lr_tol < 0) throw InvalidArgumentError("SGM lr_tol must be >= 0");
  if (uniqueness < 0.0 || uniqueness >= 1.0) {
    throw InvalidArgumentError("SGM uniqueness must lie in [0, 1)");
  }
}

DisparityMap estimate_disparity(const Frame& left, const Frame& right, const SgmConfig& cfg) {
  if (!left.same_shape(right)) throw ShapeError("estimate_disparity: views differ in shape");
  cfg.validate(left.width());
  const int h = left.height();
  const int w = left.width();
  const int nd = cfg.d_max - cfg.d_min + 1;
  const int r = cfg.block / 2;

  const Volume cost = matching_cost(gray255(left), gray255(right), cfg);
  Volume total(h, w, nd, 0.0f);
  aggregate_horizontal(cost, total, +1, cfg.p1, cfg.p2);
  aggregate_horizontal(cost, total, -1, cfg.p1, cfg.p2);
  aggregate_vertical(cost, total, +1, 0, cfg.p1, cfg.p2);
  aggregate_vertical(cost, total, -1, 0, cfg.p1, cfg.p2);
  if (cfg.paths == 8) {
    aggregate_vertical(cost, total, +1, +1, cfg.p1, cfg.p2);
    aggregate_vertical(cost, total, +1, -1, cfg.p1, cfg.p2);
    aggregate_vertical(cost, total, -1, +1, cfg.p1, cfg.p2);
    aggregate_vertical(cost, total, -1, -1, cfg.p1, cfg.p2);
  }

  DisparityMap out(h, w, 0.0f, false);
  std::vector<int> left_d(w), right_d(w);
  std::vector<std::uint8_t> left_unique(w);
  std::vector<float> column(nd);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Winner win = winner_take_all(total.at(v, u), nd, cfg.uniqueness);
      left_d[u] = cfg.d_min + win.index;
      left_unique[u] = win.unique ? 1 : 0;
    }
    // Right-view winners from the same aggregated volume: S_R(x, d) = S(x + d, d).
    for (int x = 0; x < w; ++x) {
      int best = -1;
      float best_cost = std::numeric_limits<float>::infinity();
      for (int di = 0; di < nd; ++di) {
        const int u = x + cfg.d_min + di;
        if (u < 0 || u >= w) continue;
        const float c = total.at(v, u)[di];
        if (c < best_cost) {
          best_cost = c;
          best = di;
        }
      }
      right_d[x] = best < 0 ? std::numeric_limits<int>::min() : cfg.d_min + best;
    }
    if (v < r || v >= h - r) continue;
    for (int u = r; u < w - r; ++u) {
      if (!left_unique[u]) continue;
      const int d = left_d[u];
      const int x = u - d;
      if (x - r < 0 || x + r >= w) continue;
      if (right_d[x] == std::numeric_limits<int>::min() ||
          std::abs(d - right_d[x]) > cfg.lr_tol) {
        continue;
      }
      out.values(v, u) = static_cast<float>(d);
      out.valid(v, u) = 1;
    }
  }
  return out;
}

AlignmentResult align_lsq(const DisparityMap& pred, const DisparityMap& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ShapeError("align_lsq: maps differ in shape");
  }
  const auto p = pred.values.data();
  const auto g = gt.values.data();
  const auto pm = pred.valid.data();
  const auto gm = gt.valid.data();

  std::size_t n = 0;
  double sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!pm[i] || !gm[i]) continue;
    ++n;
    sum_p += p[i];
    sum_g += g[i];
  }
  if (n < 2) throw DegenerateError("align_lsq: fewer than two jointly valid pixels");
  const double mean_p = sum_p / static_cast<double>(n);
  const double mean_g = sum_g / static_cast<double>(n);
  double spp = 0.0, spg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!pm[i] || !gm[i]) continue;
    const double dp = p[i] - mean_p;
    spp += dp * dp;
    spg += dp * (g[i] - mean_g);
  }
  if (!(spp > 0.0)) throw DegenerateError("align_lsq: predicted disparity is constant");

  AlignmentResult res;
  res.count = n;
  res.a = spg / spp;
  res.b = mean_g - res.a * mean_p;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!pm[i] || !gm[i]) continue;
    abs_sum += std::abs(res.a * p[i] + res.b - g[i]);
  }
  res.mae = abs_sum / static_cast<double>(n);
  return res;
}

namespace {

// Offset-only fit for a constant estimate: the residual is gt around its
// own mean over the joint pixels.
double constant_fit_mae(const DisparityMap& pred, const DisparityMap& gt) {
  const auto g = gt.values.data();
  const auto pm = pred.valid.data();
  const auto gm = gt.valid.data();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (pm[i] && gm[i]) {
      sum += g[i];
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (pm[i] && gm[i]) abs_sum += std::abs(g[i] - mean);
  }
  return abs_sum / static_cast<double>(n);
}

std::size_t joint_valid(const DisparityMap& a, const DisparityMap& b) {
  std::size_t n = 0;
  const auto am = a.valid.data();
  const auto bm = b.valid.data();
  for (std::size_t i = 0; i < am.size(); ++i) n += (am[i] && bm[i]) ? 1 : 0;
  return n;
}

}  // namespace

DisparityErrorResult disparity_error_from_estimates(const std::vector<DisparityMap>& estimates,
                                                    const std::vector<DisparityMap>& gt) {
  if (estimates.size() != gt.size()) {
    throw ShapeError("disparity_error: frame counts differ");
  }
  DisparityErrorResult res;
  double sum = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto& est = estimates[i];
    if (est.height() != gt[i].height() || est.width() != gt[i].width()) {
      throw ShapeError("disparity_error: estimate and ground truth differ in shape");
    }
    const std::size_t joint = joint_valid(est, gt[i]);
    const double area = static_cast<double>(gt[i].height()) * gt[i].width();
    if (joint < 2 || static_cast<double>(joint) < kMinJointValidFraction * area) {
      res.per_frame.push_back(std::nullopt);
      res.excluded_frames.push_back(static_cast<int>(i));
      continue;
    }
    double mae = 0.0;
    try {
      mae = align_lsq(est, gt[i]).mae;
    } catch (const DegenerateError&) {
      mae = constant_fit_mae(est, gt[i]);
    }
    res.per_frame.push_back(mae);
    sum += mae;
    ++used;
  }
  if (used > 0) res.mean = sum / used;
  return res;
}

DisparityErrorResult disparity_error(const StereoClip& stereo_pred,
                                     const std::vector<DisparityMap>& gt, const SgmConfig& cfg) {
  if (stereo_pred.left.size() != stereo_pred.right.size() ||
      static_cast<std::size_t>(stereo_pred.left.size()) != gt.size()) {
    throw ShapeError("disparity_error: frame counts differ");
  }
  std::vector<DisparityMap> estimates;
  estimates.reserve(gt.size());
  for (int i = 0; i < stereo_pred.left.size(); ++i) {
    estimates.push_back(
        estimate_disparity(stereo_pred.left.frames[i], stereo_pred.right.frames[i], cfg));
  }
  return disparity_error_from_estimates(estimates, gt);
}

}  // namespace stereoeval
