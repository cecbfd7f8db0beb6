#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <tuple>

#include "stereoeval/synthetic_scene.hpp"
#include "stereoeval/temporal_flow.hpp"

using namespace stereoeval;

namespace {

Frame textured(int h, int w, std::uint64_t seed) {
  return make_synthetic_scene(seed, w, h, 1, DisparityProfile::parse("constant:0")).clip.left.frames[0];
}

Frame crop(const Frame& f, int y0, int x0, int h, int w) {
  Frame out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out(y, x, c) = f(y0 + y, x0 + x, c);
    }
  }
  return out;
}

// f1(y, x) = f0(y - dv, x - du): content moves by (du, dv).
std::pair<Frame, Frame> translated_pair(int h, int w, int du, int dv, std::uint64_t seed) {
  const int m = 24;
  const Frame big = textured(h + 2 * m, w + 2 * m, seed);
  return {crop(big, m, m, h, w), crop(big, m - dv, m - du, h, w)};
}

struct OracleFlow {
  std::vector<int> du, dv;
};

std::int64_t q(float v) { return std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f); }

// One level of exhaustive integer search around a per-pixel guess, written
// without any of the library's box-filter machinery.
OracleFlow oracle_level(const Plane& a, const Plane& b, const OracleFlow& guess, int block, int radius) {
  const int h = a.height(), w = a.width(), r = block / 2;
  OracleFlow out{guess.du, guess.dv};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      std::tuple<int, int, int> best_key{};
      for (int oy = -radius; oy <= radius; ++oy) {
        for (int ox = -radius; ox <= radius; ++ox) {
          const int du = guess.du[i] + ox, dv = guess.dv[i] + oy;
          std::int64_t ssd = 0;
          for (int j = -r; j <= r; ++j) {
            for (int k = -r; k <= r; ++k) {
              const std::int64_t d = q(a(std::clamp(y + j, 0, h - 1), std::clamp(x + k, 0, w - 1))) -
                                     q(b(std::clamp(y + j + dv, 0, h - 1), std::clamp(x + k + du, 0, w - 1)));
              ssd += d * d;
            }
          }
          const std::tuple<int, int, int> key{std::abs(ox) + std::abs(oy), oy, ox};
          if (ssd < best || (ssd == best && key < best_key)) {
            best = ssd;
            best_key = key;
            out.du[i] = du;
            out.dv[i] = dv;
          }
        }
      }
    }
  }
  return out;
}

OracleFlow oracle_flow(const Frame& f0, const Frame& f1, const FlowConfig& cfg) {
  std::vector<Plane> p0{to_gray(f0)}, p1{to_gray(f1)};
  for (int l = 1; l < cfg.levels; ++l) {
    p0.push_back(downsample_binomial(p0.back()));
    p1.push_back(downsample_binomial(p1.back()));
  }
  OracleFlow flow;
  int ch = 0, cw = 0;
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const int h = p0[l].height(), w = p0[l].width();
    OracleFlow guess{std::vector<int>(static_cast<std::size_t>(h) * w, 0),
                     std::vector<int>(static_cast<std::size_t>(h) * w, 0)};
    if (!flow.du.empty()) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t c = static_cast<std::size_t>(std::min(y / 2, ch - 1)) * cw + std::min(x / 2, cw - 1);
          guess.du[static_cast<std::size_t>(y) * w + x] = 2 * flow.du[c];
          guess.dv[static_cast<std::size_t>(y) * w + x] = 2 * flow.dv[c];
        }
      }
    }
    flow = oracle_level(p0[l], p1[l], guess, cfg.block, cfg.radius);
    ch = h;
    cw = w;
  }
  return flow;
}

double interior_fraction(const FlowField& f, int du, int dv) {
  int good = 0, total = 0;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (f.border(y, x)) continue;
      ++total;
      good += (f.du(y, x) == du && f.dv(y, x) == dv) ? 1 : 0;
    }
  }
  REQUIRE(total > 0);
  return static_cast<double>(good) / total;
}

VideoClip panning_clip(int n, int h, int w, int step, std::uint64_t seed) {
  const int m = 8;
  const Frame big = textured(h + 2 * m, w + 2 * m + step * n, seed);
  VideoClip clip;
  for (int t = 0; t < n; ++t) clip.frames.push_back(crop(big, m, m + step * t, h, w));
  return clip;
}

}  // namespace

TEST_CASE("identical frames give a zero field") {
  const Frame f = textured(64, 80, 1);
  const FlowField z = optical_flow(f, f);
  for (float v : z.du.data()) CHECK(v == 0.0f);
  for (float v : z.dv.data()) CHECK(v == 0.0f);
}

TEST_CASE("translations are recovered on the interior") {
  for (auto [du, dv] : {std::pair{3, 0}, std::pair{10, 2}, std::pair{-6, 5}}) {
    const auto [f0, f1] = translated_pair(96, 128, du, dv, 2);
    const FlowField f = optical_flow(f0, f1);
    CHECK(interior_fraction(f, du, dv) >= 0.9);
  }
}

TEST_CASE("flow equals an exhaustive coarse-to-fine oracle") {
  for (int levels : {1, 2, 3}) {
    FlowConfig cfg;
    cfg.levels = levels;
    cfg.radius = levels == 1 ? 3 : 2;
    cfg.block = 5;
    const auto [f0, f1] = translated_pair(40, 48, 5, -3, 10 + levels);
    // Add a local disturbance so guesses differ across the image and the
    // rarely needed displacements take the per-pixel path.
    Frame g1 = f1;
    for (int y = 10; y < 22; ++y) {
      for (int x = 12; x < 30; ++x) {
        for (int c = 0; c < 3; ++c) g1(y, x, c) = f0(y, x, c);
      }
    }
    const FlowField got = optical_flow(f0, g1, cfg);
    const OracleFlow want = oracle_flow(f0, g1, cfg);
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 48; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * 48 + x;
        CHECK(got.du(y, x) == static_cast<float>(want.du[i]));
        CHECK(got.dv(y, x) == static_cast<float>(want.dv[i]));
      }
    }
  }
}

TEST_CASE("border mask covers the frame edge") {
  const auto [f0, f1] = translated_pair(64, 64, 2, 0, 3);
  const FlowField f = optical_flow(f0, f1);
  CHECK(f.border(0, 0) == 1);
  CHECK(f.border(63, 32) == 1);
  CHECK(f.border(32, 32) == 0);
}

TEST_CASE("end_point_error is symmetric and skips border pixels") {
  const auto [f0, f1] = translated_pair(64, 64, 3, 1, 4);
  const FlowField a = optical_flow(f0, f1);
  const FlowField b = optical_flow(f1, f0);
  const EpeStats ab = end_point_error(a, b);
  const EpeStats ba = end_point_error(b, a);
  CHECK(ab.sum == ba.sum);
  CHECK(ab.pixels == ba.pixels);
  CHECK(ab.mean() > 0.0);

  FlowField c = a;
  std::fill(c.border.data().begin(), c.border.data().end(), std::uint8_t{1});
  CHECK(end_point_error(a, c).pixels == 0);
  CHECK(end_point_error(a, c).mean() == 0.0);
}

TEST_CASE("temporal_error of a clip against itself is exactly zero") {
  const VideoClip v = panning_clip(4, 64, 64, 2, 5);
  const TemporalErrorResult r = temporal_error(v, v);
  CHECK(r.mean == 0.0);
  REQUIRE(r.per_pair.size() == 3);
  for (double e : r.per_pair) CHECK(e == 0.0);

  VideoClip still;
  for (int t = 0; t < 3; ++t) still.frames.push_back(v.frames[0]);
  CHECK(temporal_error(still, still).mean == 0.0);
}

TEST_CASE("a perturbed frame only affects its neighbouring pairs") {
  // Frame 2 replaced by its one-column translate.
  const Frame big = textured(80, 100, 6);
  VideoClip v, p;
  for (int t = 0; t < 5; ++t) v.frames.push_back(crop(big, 8, 8 + 2 * t, 64, 64));
  p = v;
  p.frames[2] = crop(big, 8, 8 + 2 * 2 - 1, 64, 64);
  const TemporalErrorResult r = temporal_error(v, p);
  REQUIRE(r.per_pair.size() == 4);
  CHECK(r.per_pair[0] == 0.0);
  CHECK(r.per_pair[1] > 0.0);
  CHECK(r.per_pair[2] > 0.0);
  CHECK(r.per_pair[3] == 0.0);
  double sum = 0.0;
  std::int64_t px = 0;
  for (std::size_t i = 0; i < r.per_pair.size(); ++i) {
    sum += r.per_pair[i] * r.per_pair_pixels[i];
    px += r.per_pair_pixels[i];
  }
  CHECK(r.mean == doctest::Approx(sum / px).epsilon(1e-12));
}

TEST_CASE("temporal and flow argument errors") {
  const Frame f = textured(64, 64, 7);
  VideoClip one{{f}};
  CHECK_THROWS_AS(temporal_error(one, one), InvalidArgumentError);
  VideoClip two{{f, f}};
  CHECK_THROWS_AS(temporal_error(two, one), ShapeError);
  CHECK_THROWS_AS(optical_flow(Frame(20, 20), Frame(20, 20)), InvalidArgumentError);
  CHECK_THROWS_AS(optical_flow(f, Frame(64, 65)), ShapeError);
  FlowConfig bad;
  bad.block = 4;
  CHECK_THROWS_AS(optical_flow(f, f, bad), InvalidArgumentError);
}
