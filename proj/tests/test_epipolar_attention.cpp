#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "stereoeval/epipolar_attention.hpp"
#include "tmpdir.hpp"

using namespace stereoeval;

namespace {

FeatureMap random_map(int h, int w, int c, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureMap m(h, w, c);
  for (float& v : m.data()) v = n(rng);
  return m;
}

double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  }
  return m;
}

// Identity-like C x C matrix stored row-major.
std::vector<float> eye(int c) {
  std::vector<float> m(static_cast<std::size_t>(c) * c, 0.0f);
  for (int i = 0; i < c; ++i) m[static_cast<std::size_t>(i) * c + i] = 1.0f;
  return m;
}

// Direct per-query softmax over the query's row, long double throughout.
FeatureMap naive_attention(const FeatureMap& h, const FeatureMap& g, const AttentionWeights& w) {
  const int H = h.height(), W = h.width(), C = w.channels, d = w.head_dim;
  auto proj = [&](const FeatureMap& f, int y, int x, const std::vector<float>& m) {
    std::vector<long double> out(d, 0.0L);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < C; ++i) out[j] += static_cast<long double>(f(y, x, i)) * m[static_cast<std::size_t>(i) * d + j];
    }
    return out;
  };
  FeatureMap out = h;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto q = proj(h, y, x, w.w_q);
      std::vector<long double> logits(W);
      for (int k = 0; k < W; ++k) {
        const auto key = proj(g, y, k, w.w_k);
        long double dot = 0.0L;
        for (int j = 0; j < d; ++j) dot += q[j] * key[j];
        logits[k] = dot / std::sqrt(static_cast<long double>(d));
      }
      long double z = 0.0L;
      for (long double l : logits) z += std::exp(l);
      std::vector<long double> alpha(d, 0.0L);
      for (int k = 0; k < W; ++k) {
        const auto val = proj(g, y, k, w.w_v);
        for (int j = 0; j < d; ++j) alpha[j] += std::exp(logits[k]) / z * val[j];
      }
      for (int i = 0; i < C; ++i) {
        long double r = h(y, x, i);
        for (int j = 0; j < d; ++j) r += alpha[j] * w.w_out[static_cast<std::size_t>(j) * C + i];
        out(y, x, i) = static_cast<float>(r);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("zero output projection leaves the input unchanged") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + trial % 16, w = 1 + (trial * 7) % 16, c = 1 + trial % 8;
    const FeatureMap hm = random_map(h, w, c, rng);
    const FeatureMap gm = random_map(h, w, c, rng);
    const auto weights = AttentionWeights::random(c, 1 + trial % 8, 100 + trial, true);
    CHECK(max_abs_diff(epipolar_attention(hm, gm, weights), hm) <= 1e-6);
  }
  const FeatureMap hm = random_map(4, 4, 3, rng);
  CHECK(epipolar_attention(hm, random_map(4, 4, 3, rng), AttentionWeights::zeros(3, 2)) == hm);
}

TEST_CASE("single-column rows attend to their only key") {
  std::mt19937_64 rng(2);
  const FeatureMap h = random_map(5, 1, 3, rng);
  const FeatureMap g = random_map(5, 1, 3, rng);
  AttentionWeights w = AttentionWeights::random(3, 3, 9);
  w.w_v = eye(3);
  w.w_out = eye(3);
  const FeatureMap out = epipolar_attention(h, g, w);
  for (int y = 0; y < 5; ++y) {
    for (int c = 0; c < 3; ++c) CHECK(out(y, 0, c) == doctest::Approx(h(y, 0, c) + g(y, 0, c)).epsilon(1e-6));
  }
}

TEST_CASE("zero queries give a uniform row average") {
  // With Q = 0 every weight is 1/W, so the update is the row mean of g.
  std::mt19937_64 rng(3);
  const FeatureMap h = random_map(3, 7, 2, rng);
  const FeatureMap g = random_map(3, 7, 2, rng);
  AttentionWeights w = AttentionWeights::zeros(2, 2);
  w.w_k = eye(2);
  w.w_v = eye(2);
  w.w_out = eye(2);
  const FeatureMap out = epipolar_attention(h, g, w);
  for (int y = 0; y < 3; ++y) {
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (int x = 0; x < 7; ++x) mean += g(y, x, c);
      mean /= 7;
      for (int x = 0; x < 7; ++x) CHECK(out(y, x, c) == doctest::Approx(h(y, x, c) + mean).epsilon(1e-6));
    }
  }
}

TEST_CASE("epipolar attention equals the masked dense oracle") {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 1 + trial % 6, w = 1 + (trial / 6) % 8, c = 1 + (trial * 3) % 8, d = 1 + (trial * 5) % 8;
    const FeatureMap hm = random_map(h, w, c, rng);
    const FeatureMap gm = random_map(h, w, c, rng);
    const auto weights = AttentionWeights::random(c, d, 500 + trial);
    const FeatureMap a = epipolar_attention(hm, gm, weights);
    worst = std::max(worst, max_abs_diff(a, masked_full_attention(hm, gm, weights)));
    worst = std::max(worst, max_abs_diff(a, naive_attention(hm, gm, weights)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("large logits stay finite") {
  std::mt19937_64 rng(5);
  FeatureMap h = random_map(2, 6, 4, rng);
  FeatureMap g = random_map(2, 6, 4, rng);
  for (float& v : h.data()) v *= 300.0f;
  for (float& v : g.data()) v *= 300.0f;
  const auto w = AttentionWeights::random(4, 4, 6);
  const FeatureMap out = epipolar_attention(h, g, w);
  for (float v : out.data()) CHECK(std::isfinite(v));
  CHECK(max_abs_diff(out, masked_full_attention(h, g, w)) <= 1e-3);
}

TEST_CASE("guidance from another row has no influence") {
  std::mt19937_64 rng(6);
  const FeatureMap h = random_map(4, 5, 3, rng);
  const FeatureMap g = random_map(4, 5, 3, rng);
  const auto w = AttentionWeights::random(3, 4, 7);
  FeatureMap g2 = g;
  for (int x = 0; x < 5; ++x) {
    for (int c = 0; c < 3; ++c) g2(2, x, c) += 5.0f;
  }
  const FeatureMap a = epipolar_attention(h, g, w);
  const FeatureMap b = epipolar_attention(h, g2, w);
  for (int y = 0; y < 4; ++y) {
    bool same = true;
    for (int x = 0; x < 5; ++x) {
      for (int c = 0; c < 3; ++c) same = same && a(y, x, c) == b(y, x, c);
    }
    CHECK(same == (y != 2));
  }
}

TEST_CASE("attention argument errors") {
  const FeatureMap a(2, 3, 4), b(2, 4, 4);
  CHECK_THROWS_AS(epipolar_attention(a, b, AttentionWeights::zeros(4, 2)), ShapeError);
  CHECK_THROWS_AS(epipolar_attention(a, a, AttentionWeights::zeros(3, 2)), ShapeError);
  AttentionWeights bad = AttentionWeights::zeros(4, 2);
  bad.w_q.pop_back();
  CHECK_THROWS_AS(epipolar_attention(a, a, bad), ShapeError);
  CHECK_THROWS_AS(AttentionWeights::zeros(0, 2).validate(), InvalidArgumentError);
  CHECK_THROWS_AS(FeatureMap(1, 1, 2, std::vector<float>{1.0f}), InvalidArgumentError);
  CHECK_THROWS_AS(FeatureMap(1, 1, 1, std::vector<float>{NAN}), InvalidArgumentError);
}

TEST_CASE("guidance pyramid shapes and content") {
  Frame f(32, 48);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 48; ++x) {
      for (int c = 0; c < 3; ++c) f(y, x, c) = static_cast<float>((x * 7 + y * 3 + c) % 17) / 16.0f;
    }
  }
  const GuidancePyramid p = guided_pyramid_stub(f, 4, 5);
  REQUIRE(p.size() == 4);
  for (int l = 0; l < 4; ++l) {
    CHECK(p[l].height() == (32 >> l));
    CHECK(p[l].width() == (48 >> l));
    CHECK(p[l].channels() == 5);
  }
  const Plane gray = to_gray(f);
  CHECK(p[0](5, 9, 0) == gray(5, 9));
  CHECK(guided_pyramid_stub(f, 4, 5) == p);
  CHECK(guided_pyramid_stub(f, 1, 1).front().channels() == 1);

  const GuidancePyramid flat = guided_pyramid_stub(Frame(16, 16, 0.25f), 3, 4);
  for (const auto& level : flat) {
    for (int y = 0; y < level.height(); ++y) {
      for (int x = 0; x < level.width(); ++x) {
        CHECK(level(y, x, 0) == doctest::Approx(0.25));
        CHECK(level(y, x, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
        CHECK(level(y, x, 3) == doctest::Approx(0.25));
      }
    }
  }
  CHECK_THROWS_AS(guided_pyramid_stub(Frame(30, 48), 3, 2), InvalidArgumentError);
  CHECK_THROWS_AS(guided_pyramid_stub(f, 0, 2), InvalidArgumentError);
}

TEST_CASE("attention memory model") {
  CHECK(attention_memory_model(512, 512, 2, AttentionMode::Epipolar) == 268'435'456ull);
  CHECK(attention_memory_model(512, 512, 2, AttentionMode::Full) == 137'438'953'472ull);
  CHECK(attention_memory_model(1, 1, 2, AttentionMode::Epipolar) == 2);
  CHECK(attention_memory_model(1, 1, 2, AttentionMode::Full) == 2);
  for (std::uint64_t hw : {8ull, 64ull, 256ull}) {
    const auto e1 = attention_memory_model(hw, hw, 4, AttentionMode::Epipolar);
    const auto f1 = attention_memory_model(hw, hw, 4, AttentionMode::Full);
    CHECK(attention_memory_model(2 * hw, 2 * hw, 4, AttentionMode::Epipolar) == 8 * e1);
    CHECK(attention_memory_model(2 * hw, 2 * hw, 4, AttentionMode::Full) == 16 * f1);
    CHECK(attention_memory_model(hw, 2 * hw, 4, AttentionMode::Epipolar) == 4 * e1);
    CHECK(f1 / e1 == hw);
  }
  CHECK_THROWS_AS(attention_memory_model(0, 4, 2, AttentionMode::Full), InvalidArgumentError);
  CHECK_THROWS_AS(attention_memory_model(1ull << 32, 1ull << 32, 2, AttentionMode::Full), InvalidArgumentError);
}

TEST_CASE("weight file round trip and errors") {
  TempDir dir;
  const auto w = AttentionWeights::random(6, 3, 11);
  save_attention_weights(w, dir / "w.bin");
  const auto back = load_attention_weights(dir / "w.bin");
  CHECK(back.channels == 6);
  CHECK(back.head_dim == 3);
  CHECK(back.w_q == w.w_q);
  CHECK(back.w_k == w.w_k);
  CHECK(back.w_v == w.w_v);
  CHECK(back.w_out == w.w_out);
  CHECK(std::filesystem::file_size(dir / "w.bin") == 16 + 4 * 4 * 6 * 3);

  CHECK(AttentionWeights::random(6, 3, 11).w_q == w.w_q);
  CHECK(AttentionWeights::random(6, 3, 12).w_q != w.w_q);

  CHECK_THROWS_AS(load_attention_weights(dir / "missing.bin"), MissingPathError);
  std::ofstream(dir / "junk.bin") << "NOPE....";
  CHECK_THROWS_AS(load_attention_weights(dir / "junk.bin"), FormatError);
  std::filesystem::resize_file(dir / "w.bin", 40);
  CHECK_THROWS_AS(load_attention_weights(dir / "w.bin"), FormatError);
}
