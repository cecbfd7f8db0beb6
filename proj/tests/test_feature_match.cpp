#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "stereoeval/eval_harness.hpp"
#include "stereoeval/feature_match.hpp"
#include "stereoeval/synthetic_scene.hpp"

using namespace stereoeval;

namespace {

Frame textured(int h, int w, std::uint64_t seed) {
  return make_synthetic_scene(seed, w, h, 1, DisparityProfile::parse("constant:0")).clip.left.frames[0];
}

Frame gray_frame(const Plane& p) {
  Frame f(p.height(), p.width());
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      for (int c = 0; c < 3; ++c) f(y, x, c) = p(y, x);
    }
  }
  return f;
}

// Harris response by explicit 2-D sums in double precision.
double harris_oracle(const Plane& g, int v, int u, double k, double sigma) {
  const int h = g.height(), w = g.width();
  auto at = [&](int y, int x) -> double { return g(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
  auto grad = [&](int y, int x, double& gx, double& gy) {
    gx = gy = 0.0;
    const int sx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    for (int i = -1; i <= 1; ++i) {
      for (int j = -1; j <= 1; ++j) {
        gx += sx[i + 1][j + 1] * at(y + i, x + j) / 8.0;
        gy += sx[j + 1][i + 1] * at(y + i, x + j) / 8.0;
      }
    }
  };
  const int rad = static_cast<int>(std::ceil(3 * sigma));
  double norm = 0.0;
  for (int i = -rad; i <= rad; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
  double a = 0, b = 0, c = 0;
  for (int i = -rad; i <= rad; ++i) {
    for (int j = -rad; j <= rad; ++j) {
      const double wgt = std::exp(-0.5 * (i * i + j * j) / (sigma * sigma)) / (norm * norm);
      const int y = std::clamp(v + i, 0, h - 1), x = std::clamp(u + j, 0, w - 1);
      double gx, gy;
      grad(y, x, gx, gy);
      a += wgt * gx * gx;
      b += wgt * gy * gy;
      c += wgt * gx * gy;
    }
  }
  return a * b - c * c - k * (a + b) * (a + b);
}

MatchSet random_set(std::mt19937& rng, int universe) {
  MatchSet s;
  for (int i = 0; i < universe; ++i) {
    if (rng() % 2) s.insert({i / 10, i % 10});
  }
  return s;
}

}  // namespace

TEST_CASE("flat image has no keypoints") {
  CHECK(detect_keypoints(Frame(64, 64, 0.4f), 1000, 3).empty());
}

TEST_CASE("single bright pixel: response oracle and concentration") {
  Plane g(48, 48, 0.0f);
  g(24, 24) = 1.0f;
  const Plane r = harris_response(g);
  for (int v = 14; v < 35; ++v) {
    for (int u = 14; u < 35; ++u) {
      CHECK(r(v, u) == doctest::Approx(harris_oracle(g, v, u, 0.04, 1.0)).epsilon(1e-4).scale(1e-6));
    }
  }
  const auto kps = detect_keypoints(gray_frame(g), 1000, 3);
  REQUIRE_FALSE(kps.empty());
  for (const auto& k : kps) {
    CHECK(std::abs(k.u - 24) <= 4);
    CHECK(std::abs(k.v - 24) <= 4);
  }
}

TEST_CASE("checkerboard: one keypoint per interior corner") {
  Plane g(96, 96);
  for (int y = 0; y < 96; ++y) {
    for (int x = 0; x < 96; ++x) g(y, x) = ((x / 8 + y / 8) % 2) ? 0.9f : 0.1f;
  }
  DetectorConfig cfg;
  cfg.border = 12;  // corners at 16..80 are inside, 8 and 88 are not
  const auto kps = detect_keypoints(gray_frame(g), cfg);
  CHECK(kps.size() == 81);
  std::set<std::pair<int, int>> corners;
  for (const auto& k : kps) {
    const int cv = (k.v + 4) / 8 * 8;
    const int cu = (k.u + 4) / 8 * 8;
    CHECK(std::abs(k.v + 0.5 - cv) <= 1.0);
    CHECK(std::abs(k.u + 0.5 - cu) <= 1.0);
    corners.insert({cv, cu});
  }
  CHECK(corners.size() == 81);
}

TEST_CASE("detector ordering and truncation") {
  const Frame f = textured(128, 128, 4);
  const auto all = detect_keypoints(f, 1000, 3);
  REQUIRE(all.size() > 20);
  for (std::size_t i = 1; i < all.size(); ++i) {
    const bool ordered = all[i - 1].score > all[i].score ||
                         (all[i - 1].score == all[i].score &&
                          std::pair(all[i - 1].v, all[i - 1].u) < std::pair(all[i].v, all[i].u));
    CHECK(ordered);
  }
  const auto top = detect_keypoints(f, 10, 3);
  REQUIRE(top.size() == 10);
  CHECK(std::equal(top.begin(), top.end(), all.begin()));
  for (const auto& k : all) {
    CHECK(k.u >= 16);
    CHECK(k.v >= 16);
    CHECK(k.u < 112);
    CHECK(k.v < 112);
  }
}

TEST_CASE("descriptor pattern is fixed and in the window") {
  const auto pairs = BriefPattern::instance().pairs();
  REQUIRE(pairs.size() == 256);
  std::mt19937 rng(0x5EED2025u);
  for (const auto& p : pairs) {
    for (int c : {p.du1, p.dv1, p.du2, p.dv2}) {
      CHECK(c == static_cast<int>(rng() % 31u) - 15);
    }
  }
  Descriptor a{}, b{};
  b[0] = 0b1011;
  b[3] = 1ull << 63;
  CHECK(hamming(a, b) == 4);
  CHECK_THROWS(describe(Plane(40, 40), 10, 20));
}

TEST_CASE("matching a view against itself keeps nearly every keypoint") {
  const Frame f = textured(192, 256, 5);
  const auto kps = detect_keypoints(f, DetectorConfig{});
  const MatchSet m = match_epipolar(kps, f, f);
  CHECK(m.size() >= 0.95 * kps.size());
  CHECK(match_epipolar(kps, f, f) == m);  // deterministic
  for (const auto& key : m.members()) {
    const bool found = std::any_of(kps.begin(), kps.end(), [&](const Keypoint& k) { return k.u == key.u && k.v == key.v; });
    CHECK(found);
  }
}

TEST_CASE("shift stability and blur sensitivity") {
  const Frame f = textured(192, 320, 6);
  const DetectorConfig det;
  const MatchConfig mc;
  const auto kps_all = detect_keypoints(f, det);
  for (int k : {4, 16, 32}) {
    const ColumnRange band{k, 320 - k};
    auto kps = kps_all;
    std::erase_if(kps, [&](const Keypoint& p) { return p.u < band.begin + 16 || p.u >= band.end - 16; });
    const MatchSet base = match_epipolar(kps, f, f, mc, det, ColumnRange::all(320));
    const MatchSet shifted = match_epipolar(kps, f, shift_columns(f, k), mc, det, ColumnRange{k, 320});
    CHECK(matchability_error(base, shifted).error <= 0.05);
  }
  const MatchSet base = match_epipolar(kps_all, f, f);
  const MatchSet blurred = match_epipolar(kps_all, f, gaussian_blur(f, 4.0));
  CHECK(blurred.size() < 0.7 * base.size());
}

TEST_CASE("matchability examples") {
  const MatchSet a({{1, 1}, {2, 2}, {3, 3}});
  const auto same = matchability_error(a, a);
  CHECK(same.error == 0.0);
  CHECK(same.n_fp == 0);
  CHECK(same.n_fn == 0);
  CHECK(matchability_error(a, MatchSet({{9, 9}})).error == 1.0);

  // tp 3, fp 1, fn 2
  const MatchSet gt({{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const MatchSet pred({{0, 0}, {0, 1}, {0, 2}, {5, 5}});
  const auto b = matchability_error(gt, pred);
  CHECK(b.n_tp == 3);
  CHECK(b.n_fp == 1);
  CHECK(b.n_fn == 2);
  CHECK(b.error == 0.5);

  const auto empty = matchability_error(MatchSet{}, MatchSet{});
  CHECK(empty.degenerate);
  CHECK(empty.error == 0.0);
}

TEST_CASE("Jaccard complement identity and symmetry on fuzzed sets") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const MatchSet gt = random_set(rng, 1 + trial % 40);
    const MatchSet pred = random_set(rng, 1 + (trial * 7) % 40);
    std::set<MatchSet::Key> g(gt.members().begin(), gt.members().end());
    std::set<MatchSet::Key> p(pred.members().begin(), pred.members().end());
    std::size_t inter = 0;
    for (const auto& k : g) inter += p.count(k);
    const std::size_t uni = g.size() + p.size() - inter;
    const auto b = matchability_error(gt, pred);
    if (uni == 0) {
      CHECK(b.degenerate);
      continue;
    }
    CHECK(b.error == doctest::Approx(1.0 - static_cast<double>(inter) / uni).epsilon(1e-15));
    CHECK(b.error == static_cast<double>(b.n_fp + b.n_fn) / static_cast<double>(b.n_tp + b.n_fp + b.n_fn));
    const auto swapped = matchability_error(pred, gt);
    CHECK(swapped.error == b.error);
    CHECK(swapped.n_fp == b.n_fn);
    CHECK(swapped.n_fn == b.n_fp);
    CHECK(b.error >= 0.0);
    CHECK(b.error <= 1.0);
  }
}

TEST_CASE("classify_matches labels the union") {
  const MatchSet gt({{0, 0}, {0, 1}});
  const MatchSet pred({{0, 1}, {2, 2}});
  const auto c = classify_matches(gt, pred);
  REQUIRE(c.size() == 3);
  CHECK(to_string(c[0].status) == "fn");
  CHECK(to_string(c[1].status) == "tp");
  CHECK(to_string(c[2].status) == "fp");
}

TEST_CASE("MatchSet keeps keys unique and sorted") {
  MatchSet s;
  s.insert({3, 1});
  s.insert({1, 9});
  s.insert({3, 1});
  REQUIRE(s.size() == 2);
  CHECK(s.members()[0].v == 1);
  CHECK(s.contains({3, 1}));
  CHECK_FALSE(s.contains({3, 2}));
}
