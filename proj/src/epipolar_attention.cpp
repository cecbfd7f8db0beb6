#include "stereoeval/epipolar_attention.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>

namespace stereoeval {

FeatureMap::FeatureMap(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw InvalidArgumentError("negative feature map dimensions");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0 || channels < 0) {
    throw InvalidArgumentError("negative feature map dimensions");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InvalidArgumentError("feature map data length != H*W*C");
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw InvalidArgumentError("feature map holds a non-finite value");
  }
}

AttentionWeights AttentionWeights::zeros(int channels, int head_dim) {
  AttentionWeights w;
  w.channels = channels;
  w.head_dim = head_dim;
  const std::size_t n = static_cast<std::size_t>(channels) * head_dim;
  w.w_q.assign(n, 0.0f);
  w.w_k.assign(n, 0.0f);
  w.w_v.assign(n, 0.0f);
  w.w_out.assign(n, 0.0f);
  return w;
}

AttentionWeights AttentionWeights::random(int channels, int head_dim, std::uint64_t seed,
                                          bool zero_output) {
  AttentionWeights w = zeros(channels, head_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f / std::sqrt(static_cast<float>(channels)));
  for (auto* m : {&w.w_q, &w.w_k, &w.w_v}) {
    for (float& x : *m) x = normal(rng);
  }
  if (!zero_output) {
    for (float& x : w.w_out) x = normal(rng);
  }
  return w;
}

void AttentionWeights::validate() const {
  if (channels < 1) throw InvalidArgumentError("attention channels must be >= 1");
  if (head_dim < 1) throw InvalidArgumentError("attention head dimension must be >= 1");
  const std::size_t n = static_cast<std::size_t>(channels) * head_dim;
  if (w_q.size() != n || w_k.size() != n || w_v.size() != n || w_out.size() != n) {
    throw ShapeError("attention weight matrices do not match C x d");
  }
  for (const auto* m : {&w_q, &w_k, &w_v, &w_out}) {
    for (float x : *m) {
      if (!std::isfinite(x)) throw InvalidArgumentError("attention weights must be finite");
    }
  }
}

namespace {

void check_operands(const FeatureMap& h, const FeatureMap& g, const AttentionWeights& w) {
  w.validate();
  if (!h.same_shape(g)) throw ShapeError("attention: decoder and guidance maps differ in shape");
  if (h.channels() != w.channels) throw ShapeError("attention: weights expect a different C");
}

// x (1 x C) times m (C x d), into out (1 x d).
void project(std::span<const float> x, const std::vector<float>& m, int d, double* out) {
  std::fill(out, out + d, 0.0);
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double xc = x[c];
    const float* mrow = &m[c * static_cast<std::size_t>(d)];
    for (int j = 0; j < d; ++j) out[j] += xc * mrow[j];
  }
}

// Residual output for one query given its attention result alpha (1 x d).
void write_residual(std::span<const float> h_in, const double* alpha, const AttentionWeights& w,
                    std::span<float> out) {
  const int c_count = w.channels;
  const int d = w.head_dim;
  for (int c = 0; c < c_count; ++c) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += alpha[j] * w.w_out[static_cast<std::size_t>(j) * c_count + c];
    out[c] = static_cast<float>(h_in[c] + acc);
  }
}

}  // namespace

FeatureMap epipolar_attention(const FeatureMap& h, const FeatureMap& g, const AttentionWeights& w) {
  check_operands(h, g, w);
  const int rows = h.height();
  const int cols = h.width();
  const int d = w.head_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  FeatureMap out(rows, cols, h.channels());
  std::vector<double> keys(static_cast<std::size_t>(cols) * d);
  std::vector<double> values(keys.size());
  std::vector<double> logits(cols);
  std::vector<double> q(d), alpha(d);
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      project(g.pixel(v, u), w.w_k, d, &keys[static_cast<std::size_t>(u) * d]);
      project(g.pixel(v, u), w.w_v, d, &values[static_cast<std::size_t>(u) * d]);
    }
    for (int u = 0; u < cols; ++u) {
      project(h.pixel(v, u), w.w_q, d, q.data());
      double max_logit = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < cols; ++k) {
        const double* key = &keys[static_cast<std::size_t>(k) * d];
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += q[j] * key[j];
        logits[k] = dot * inv_sqrt_d;
        max_logit = std::max(max_logit, logits[k]);
      }
      double denom = 0.0;
      for (int k = 0; k < cols; ++k) {
        logits[k] = std::exp(logits[k] - max_logit);
        denom += logits[k];
      }
      std::fill(alpha.begin(), alpha.end(), 0.0);
      for (int k = 0; k < cols; ++k) {
        const double p = logits[k] / denom;
        const double* val = &values[static_cast<std::size_t>(k) * d];
        for (int j = 0; j < d; ++j) alpha[j] += p * val[j];
      }
      write_residual(h.pixel(v, u), alpha.data(), w, out.pixel(v, u));
    }
  }
  return out;
}

FeatureMap masked_full_attention(const FeatureMap& h, const FeatureMap& g,
                                 const AttentionWeights& w) {
  check_operands(h, g, w);
  const int rows = h.height();
  const int cols = h.width();
  const int d = w.head_dim;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> keys(n * d), values(n * d);
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * cols + u;
      project(g.pixel(v, u), w.w_k, d, &keys[i * d]);
      project(g.pixel(v, u), w.w_v, d, &values[i * d]);
    }
  }
  FeatureMap out(rows, cols, h.channels());
  std::vector<double> logits(n), q(d), alpha(d);
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      project(h.pixel(v, u), w.w_q, d, q.data());
      double max_logit = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        const bool same_row = static_cast<int>(k / cols) == v;
        if (!same_row) {
          logits[k] = -std::numeric_limits<double>::infinity();
          continue;
        }
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += q[j] * keys[k * d + j];
        logits[k] = dot * inv_sqrt_d;
        max_logit = std::max(max_logit, logits[k]);
      }
      double denom = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        logits[k] = std::exp(logits[k] - max_logit);  // masked entries become 0
        denom += logits[k];
      }
      std::fill(alpha.begin(), alpha.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        if (logits[k] == 0.0) continue;
        const double p = logits[k] / denom;
        for (int j = 0; j < d; ++j) alpha[j] += p * values[k * d + j];
      }
      write_residual(h.pixel(v, u), alpha.data(), w, out.pixel(v, u));
    }
  }
  return out;
}

GuidancePyramid guided_pyramid_stub(const Frame& frame, int levels, int channels) {
  if (levels < 1) throw InvalidArgumentError("pyramid needs at least one level");
  if (channels < 1) throw InvalidArgumentError("pyramid needs at least one channel");
  const int factor = 1 << (levels - 1);
  if (frame.height() < factor || frame.width() < factor || frame.height() % factor != 0 ||
      frame.width() % factor != 0) {
    throw InvalidArgumentError("frame of " + std::to_string(frame.width()) + "x" +
                               std::to_string(frame.height()) + " cannot hold " +
                               std::to_string(levels) + " pyramid levels");
  }

  GuidancePyramid pyramid;
  Plane gray = to_gray(frame);
  for (int l = 0; l < levels; ++l) {
    if (l > 0) gray = downsample_binomial(gray);
    const int hh = gray.height();
    const int ww = gray.width();
    FeatureMap level(hh, ww, channels);
    for (int y = 0; y < hh; ++y) {
      for (int x = 0; x < ww; ++x) level(y, x, 0) = gray(y, x);
    }
    if (channels > 1) {
      for (int y = 0; y < hh; ++y) {
        for (int x = 0; x < ww; ++x) {
          const float gx = 0.5f * (gray(y, std::min(x + 1, ww - 1)) - gray(y, std::max(x - 1, 0)));
          const float gy = 0.5f * (gray(std::min(y + 1, hh - 1), x) - gray(std::max(y - 1, 0), x));
          level(y, x, 1) = std::sqrt(gx * gx + gy * gy);
        }
      }
    }
    for (int c = 2; c < channels; ++c) {
      const Plane blurred = gaussian_blur(gray, std::ldexp(1.0, c - 2));
      for (int y = 0; y < hh; ++y) {
        for (int x = 0; x < ww; ++x) level(y, x, c) = blurred(y, x);
      }
    }
    pyramid.push_back(std::move(level));
  }
  return pyramid;
}

std::uint64_t attention_memory_model(std::uint64_t height, std::uint64_t width,
                                     std::uint64_t bytes_per_element, AttentionMode mode) {
  if (height < 1 || width < 1) throw InvalidArgumentError("attention map must be at least 1x1");
  const auto mul = [](std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) throw InvalidArgumentError("attention memory overflows 64 bits");
    return r;
  };
  const std::uint64_t pixels = mul(height, width);
  const std::uint64_t entries = mode == AttentionMode::Epipolar ? mul(pixels, width) : mul(pixels, pixels);
  return mul(entries, bytes_per_element);
}

namespace {

constexpr char kMagic[4] = {'E', 'P', 'A', 'W'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

void save_attention_weights(const AttentionWeights& w, const std::filesystem::path& path) {
  w.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open weights for writing", path);
  out.write(kMagic, 4);
  for (std::uint32_t v : {kVersion, static_cast<std::uint32_t>(w.channels),
                          static_cast<std::uint32_t>(w.head_dim)}) {
    const std::uint32_t le = to_le(v);
    out.write(reinterpret_cast<const char*>(&le), 4);
  }
  for (const auto* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_out}) {
    for (float x : *m) {
      const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(x));
      out.write(reinterpret_cast<const char*>(&le), 4);
    }
  }
  if (!out) throw IoError("failed writing weights", path);
}

AttentionWeights load_attention_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPathError("cannot open weights", path);
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not an EPAW weight file", path);
  for (auto& v : header) v = to_le(v);
  if (header[0] != kVersion) throw FormatError("unsupported weight file version", path);
  if (header[1] == 0 || header[2] == 0 || header[1] > 65536 || header[2] > 65536) {
    throw FormatError("weight file has invalid dimensions", path);
  }
  AttentionWeights w = AttentionWeights::zeros(static_cast<int>(header[1]), static_cast<int>(header[2]));
  for (auto* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_out}) {
    for (float& x : *m) {
      std::uint32_t le = 0;
      in.read(reinterpret_cast<char*>(&le), 4);
      x = std::bit_cast<float>(to_le(le));
    }
  }
  if (!in) throw FormatError("truncated weight file", path);
  w.validate();
  return w;
}

}  // namespace stereoeval
