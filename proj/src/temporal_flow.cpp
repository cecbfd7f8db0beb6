#include "stereoeval/temporal_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace stereoeval {
namespace {

// Gray levels quantised to 16 bits so window sums are exact integers and
// ties compare exactly.
using Quantised = Grid<std::int32_t>;

Quantised quantise(const Plane& p) {
  Quantised q(p.height(), p.width());
  for (std::size_t i = 0; i < p.size(); ++i) {
    q.data()[i] = static_cast<std::int32_t>(
        std::lround(std::clamp(p.data()[i], 0.0f, 1.0f) * 65535.0f));
  }
  return q;
}

struct Vec2 {
  int du = 0;
  int dv = 0;
  auto operator<=>(const Vec2&) const = default;
};

struct LevelFlow {
  Grid<std::int32_t> du, dv;
};

// Block SSD for a fixed displacement at every pixel, replicate border.
void block_ssd(const Quantised& g0, const Quantised& g1, Vec2 disp, int r,
               std::vector<std::int64_t>& diff, std::vector<std::int64_t>& hsum,
               Grid<std::int64_t>& out) {
  const int h = g0.height();
  const int w = g0.width();
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  const int block = 2 * r + 1;
  diff.resize(static_cast<std::size_t>(ph) * pw);
  hsum.resize(static_cast<std::size_t>(ph) * w);
  for (int y = 0; y < ph; ++y) {
    const int y0 = std::clamp(y - r, 0, h - 1);
    const int y1 = std::clamp(y - r + disp.dv, 0, h - 1);
    const auto r0 = g0.row(y0);
    const auto r1 = g1.row(y1);
    std::int64_t* dst = &diff[static_cast<std::size_t>(y) * pw];
    for (int x = 0; x < pw; ++x) {
      const std::int64_t d = static_cast<std::int64_t>(r0[std::clamp(x - r, 0, w - 1)]) -
                             r1[std::clamp(x - r + disp.du, 0, w - 1)];
      dst[x] = d * d;
    }
  }
  for (int y = 0; y < ph; ++y) {
    const std::int64_t* src = &diff[static_cast<std::size_t>(y) * pw];
    std::int64_t* dst = &hsum[static_cast<std::size_t>(y) * w];
    std::int64_t acc = 0;
    for (int x = 0; x < block; ++x) acc += src[x];
    dst[0] = acc;
    for (int x = 1; x < w; ++x) {
      acc += src[x + block - 1] - src[x - 1];
      dst[x] = acc;
    }
  }
  std::vector<std::int64_t> col(w, 0);
  for (int y = 0; y < block; ++y) {
    const std::int64_t* src = &hsum[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) col[x] += src[x];
  }
  for (int y = 0; y < h; ++y) {
    if (y > 0) {
      const std::int64_t* add = &hsum[static_cast<std::size_t>(y + block - 1) * w];
      const std::int64_t* sub = &hsum[static_cast<std::size_t>(y - 1) * w];
      for (int x = 0; x < w; ++x) col[x] += add[x] - sub[x];
    }
    std::copy(col.begin(), col.end(), out.row(y).begin());
  }
}

// Same SSD as block_ssd at a single pixel.
std::int64_t pixel_ssd(const Quantised& g0, const Quantised& g1, int x, int y, Vec2 disp, int r) {
  const int h = g0.height();
  const int w = g0.width();
  std::int64_t acc = 0;
  for (int j = -r; j <= r; ++j) {
    const auto r0 = g0.row(std::clamp(y + j, 0, h - 1));
    const auto r1 = g1.row(std::clamp(y + j + disp.dv, 0, h - 1));
    for (int i = -r; i <= r; ++i) {
      const std::int64_t d = static_cast<std::int64_t>(r0[std::clamp(x + i, 0, w - 1)]) -
                             r1[std::clamp(x + i + disp.du, 0, w - 1)];
      acc += d * d;
    }
  }
  return acc;
}

LevelFlow search_level(const Quantised& g0, const Quantised& g1, const LevelFlow& guess,
                       const FlowConfig& cfg) {
  const int h = g0.height();
  const int w = g0.width();
  const int rad = cfg.radius;
  const int r = cfg.block / 2;
  const int span = 2 * rad + 1;

  // How many pixels need each displacement, over the bounding box of
  // guess +/- rad.
  const auto [du_lo, du_hi] = std::minmax_element(guess.du.data().begin(), guess.du.data().end());
  const auto [dv_lo, dv_hi] = std::minmax_element(guess.dv.data().begin(), guess.dv.data().end());
  const int du0 = *du_lo - rad;
  const int dv0 = *dv_lo - rad;
  const int nu = *du_hi - *du_lo + span;
  const int nv = *dv_hi - *dv_lo + span;
  std::vector<std::int64_t> need(static_cast<std::size_t>(nu) * nv, 0);
  for (std::size_t i = 0; i < guess.du.size(); ++i) {
    const int bu = guess.du.data()[i] - du0 - rad;
    const int bv = guess.dv.data()[i] - dv0 - rad;
    for (int oy = 0; oy < span; ++oy) {
      std::int64_t* row = &need[static_cast<std::size_t>(bv + oy) * nu + bu];
      for (int ox = 0; ox < span; ++ox) ++row[ox];
    }
  }
  // A full-image box pass costs about as much as half a pixel-wise window
  // sum per pixel; rarer displacements are summed pixel by pixel.
  const std::int64_t block_area = static_cast<std::int64_t>(cfg.block) * cfg.block;
  const std::int64_t dense_threshold = static_cast<std::int64_t>(h) * w / 2;
  auto is_dense = [&](Vec2 d) {
    return need[static_cast<std::size_t>(d.dv - dv0) * nu + (d.du - du0)] * block_area >= dense_threshold;
  };

  LevelFlow out{guess.du, guess.dv};
  Grid<std::int64_t> best_cost(h, w, std::numeric_limits<std::int64_t>::max());
  Grid<std::int32_t> best_rank(h, w, std::numeric_limits<std::int32_t>::max());
  // Rank encodes the tie-break (|o|_1, dv, du) for offsets within +/-rad.
  auto rank_of = [&](int ox, int oy) {
    return ((std::abs(ox) + std::abs(oy)) * span + (oy + rad)) * span + (ox + rad);
  };
  auto offer = [&](int x, int y, Vec2 disp, std::int64_t c) {
    const int rank = rank_of(disp.du - guess.du(y, x), disp.dv - guess.dv(y, x));
    if (c < best_cost(y, x) || (c == best_cost(y, x) && rank < best_rank(y, x))) {
      best_cost(y, x) = c;
      best_rank(y, x) = rank;
      out.du(y, x) = disp.du;
      out.dv(y, x) = disp.dv;
    }
  };

  Grid<std::int64_t> ssd(h, w);
  std::vector<std::int64_t> diff, hsum;
  for (int v = 0; v < nv; ++v) {
    for (int u = 0; u < nu; ++u) {
      const Vec2 disp{du0 + u, dv0 + v};
      if (!is_dense(disp)) continue;
      block_ssd(g0, g1, disp, r, diff, hsum, ssd);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (std::abs(disp.du - guess.du(y, x)) > rad || std::abs(disp.dv - guess.dv(y, x)) > rad) {
            continue;
          }
          offer(x, y, disp, ssd(y, x));
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int oy = -rad; oy <= rad; ++oy) {
        for (int ox = -rad; ox <= rad; ++ox) {
          const Vec2 disp{guess.du(y, x) + ox, guess.dv(y, x) + oy};
          if (is_dense(disp)) continue;
          offer(x, y, disp, pixel_ssd(g0, g1, x, y, disp, r));
        }
      }
    }
  }
  return out;
}

}  // namespace

void FlowConfig::validate() const {
  if (levels < 1) throw InvalidArgumentError("flow levels must be >= 1");
  if (block < 1 || block % 2 == 0) throw InvalidArgumentError("flow block size must be odd");
  if (radius < 0) throw InvalidArgumentError("flow radius must be >= 0");
}

FlowField optical_flow(const Plane& g0, const Plane& g1, const FlowConfig& cfg) {
  cfg.validate();
  if (!g0.same_shape(g1)) throw ShapeError("optical_flow: frames differ in shape");
  const long long min_side = (1LL << (cfg.levels - 1)) * cfg.block;
  if (g0.height() < min_side || g0.width() < min_side) {
    throw InvalidArgumentError("optical_flow: image smaller than 2^(levels-1) * block (" +
                               std::to_string(min_side) + ")");
  }

  std::vector<Plane> p0{g0}, p1{g1};
  for (int l = 1; l < cfg.levels; ++l) {
    p0.push_back(downsample_binomial(p0.back()));
    p1.push_back(downsample_binomial(p1.back()));
  }

  LevelFlow flow;
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const int h = p0[l].height();
    const int w = p0[l].width();
    LevelFlow guess{Grid<std::int32_t>(h, w, 0), Grid<std::int32_t>(h, w, 0)};
    if (l < cfg.levels - 1) {
      for (int y = 0; y < h; ++y) {
        const int cy = std::min(y / 2, flow.du.height() - 1);
        for (int x = 0; x < w; ++x) {
          const int cx = std::min(x / 2, flow.du.width() - 1);
          guess.du(y, x) = 2 * flow.du(cy, cx);
          guess.dv(y, x) = 2 * flow.dv(cy, cx);
        }
      }
    }
    const LevelFlow found = search_level(quantise(p0[l]), quantise(p1[l]), guess, cfg);
    if (l == 0) {
      FlowField out{Plane(h, w), Plane(h, w), Mask(h, w, 0)};
      const int r = cfg.block / 2;
      const int reach = r + cfg.radius;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out.du(y, x) = static_cast<float>(found.du(y, x));
          out.dv(y, x) = static_cast<float>(found.dv(y, x));
          const int gx = x + guess.du(y, x);
          const int gy = y + guess.dv(y, x);
          const bool own_window_out = x < r || y < r || x >= w - r || y >= h - r;
          const bool search_out = gx - reach < 0 || gy - reach < 0 || gx + reach >= w ||
                                  gy + reach >= h;
          out.border(y, x) = (own_window_out || search_out) ? 1 : 0;
        }
      }
      return out;
    }
    flow = found;
  }
  return {};
}

FlowField optical_flow(const Frame& f0, const Frame& f1, const FlowConfig& cfg) {
  if (!f0.same_shape(f1)) throw ShapeError("optical_flow: frames differ in shape");
  return optical_flow(to_gray(f0), to_gray(f1), cfg);
}

EpeStats end_point_error(const FlowField& a, const FlowField& b) {
  if (!a.du.same_shape(b.du)) throw ShapeError("end_point_error: flow fields differ in shape");
  EpeStats stats;
  for (std::size_t i = 0; i < a.du.size(); ++i) {
    if (a.border.data()[i] || b.border.data()[i]) continue;
    const double eu = static_cast<double>(a.du.data()[i]) - b.du.data()[i];
    const double ev = static_cast<double>(a.dv.data()[i]) - b.dv.data()[i];
    stats.sum += std::sqrt(eu * eu + ev * ev);
    ++stats.pixels;
  }
  return stats;
}

TemporalErrorResult temporal_error(const VideoClip& gt_right, const VideoClip& pred_right,
                                   const FlowConfig& cfg) {
  if (gt_right.size() != pred_right.size()) {
    throw ShapeError("temporal_error: clips differ in length");
  }
  if (gt_right.size() < 2) throw InvalidArgumentError("temporal_error needs at least two frames");
  if (gt_right.height() != pred_right.height() || gt_right.width() != pred_right.width()) {
    throw ShapeError("temporal_error: clips differ in frame size");
  }
  TemporalErrorResult res;
  double sum = 0.0;
  std::int64_t pixels = 0;
  for (int t = 0; t + 1 < gt_right.size(); ++t) {
    const FlowField fg = optical_flow(gt_right.frames[t], gt_right.frames[t + 1], cfg);
    const FlowField fp = optical_flow(pred_right.frames[t], pred_right.frames[t + 1], cfg);
    const EpeStats s = end_point_error(fg, fp);
    res.per_pair.push_back(s.mean());
    res.per_pair_pixels.push_back(s.pixels);
    sum += s.sum;
    pixels += s.pixels;
  }
  res.mean = pixels > 0 ? sum / static_cast<double>(pixels) : 0.0;
  return res;
}

}  // namespace stereoeval
