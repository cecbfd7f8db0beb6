#include "stereoeval/synthetic_scene.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "stereoeval/warp_synth.hpp"

namespace stereoeval {

namespace {

int parse_int(std::string_view s, const std::string& whole) {
  int value = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw InvalidArgumentError("bad disparity profile '" + whole + "'");
  }
  return value;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, int layer, std::int64_t ix, std::int64_t iy, int channel) {
  std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(layer) << 56));
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  h = splitmix64(h ^ static_cast<std::uint64_t>(channel));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

constexpr std::array<int, 6> kPeriods = {2, 4, 8, 16, 32, 64};

// Bilinear value-noise octaves weighted by their period (a roughly 1/f
// spectrum, like natural images), mapped to [0, 1]. `surface` separates the background and foreground textures.
double texture(std::uint64_t seed, int surface, std::int64_t x, std::int64_t y, int channel) {
  double sum = 0.0, wsum = 0.0;
  for (std::size_t o = 0; o < kPeriods.size(); ++o) {
    const double wt = kPeriods[o];
    wsum += wt;
    const int p = kPeriods[o];
    const int layer = surface * 16 + static_cast<int>(o);
    const std::int64_t x0 = x >= 0 ? x / p : -((-x + p - 1) / p);
    const std::int64_t y0 = y >= 0 ? y / p : -((-y + p - 1) / p);
    const double fx = static_cast<double>(x - x0 * p) / p;
    const double fy = static_cast<double>(y - y0 * p) / p;
    const double a = lattice(seed, layer, x0, y0, channel);
    const double b = lattice(seed, layer, x0 + 1, y0, channel);
    const double c = lattice(seed, layer, x0, y0 + 1, channel);
    const double d = lattice(seed, layer, x0 + 1, y0 + 1, channel);
    sum += wt * ((a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy);
  }
  const double v = sum / wsum;
  // Stretch around the mean; the octave average concentrates near 0.5.
  const double stretched = 0.5 + (v - 0.5) * 2.5;
  return std::round(std::clamp(stretched, 0.0, 1.0) * 255.0) / 255.0;
}

struct Square {
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
};

}  // namespace

DisparityProfile DisparityProfile::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InvalidArgumentError("bad disparity profile '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string_view args = std::string_view(text).substr(colon + 1);
  DisparityProfile p;
  if (kind == "constant") {
    p.kind = Kind::Constant;
    p.background = p.foreground = parse_int(args, text);
  } else if (kind == "two_plane") {
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) {
      throw InvalidArgumentError("two_plane profile needs 'bg,fg': '" + text + "'");
    }
    p.kind = Kind::TwoPlane;
    p.background = parse_int(args.substr(0, comma), text);
    p.foreground = parse_int(args.substr(comma + 1), text);
  } else {
    throw InvalidArgumentError("unknown disparity profile kind '" + kind + "'");
  }
  return p;
}

std::string DisparityProfile::to_string() const {
  if (kind == Kind::Constant) return "constant:" + std::to_string(background);
  return "two_plane:" + std::to_string(background) + "," + std::to_string(foreground);
}

SyntheticScene make_synthetic_scene(std::uint64_t seed, int width, int height, int n_frames,
                                    const DisparityProfile& profile, int motion) {
  if (width < 1 || height < 1 || n_frames < 1) {
    throw InvalidArgumentError("synthetic scene needs positive width, height and frame count");
  }
  const int reach = std::max(std::abs(profile.background), std::abs(profile.foreground));
  if (reach >= width) throw InvalidArgumentError("profile disparity must be smaller than the width");

  Square fg;
  if (profile.kind == DisparityProfile::Kind::TwoPlane) {
    const int side = 3 * std::min(width, height) / 8;
    fg = {(height - side) / 2, (height - side) / 2 + side, (width - side) / 2, (width - side) / 2 + side};
  }

  DisparityMap disp(height, width, static_cast<float>(profile.background));
  for (int y = fg.y0; y < fg.y1; ++y) {
    for (int x = fg.x0; x < fg.x1; ++x) disp.values(y, x) = static_cast<float>(profile.foreground);
  }

  SyntheticScene scene;
  for (int t = 0; t < n_frames; ++t) {
    const std::int64_t pan = static_cast<std::int64_t>(t) * motion;
    Frame left(height, width);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const int surface = fg.contains(y, x) ? 1 : 0;
        for (int c = 0; c < Frame::kChannels; ++c) {
          left(y, x, c) = static_cast<float>(texture(seed, surface, x + pan, y, c));
        }
      }
    }
    WarpResult warp = forward_warp(left, disp, 1.0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (warp.valid(y, x)) continue;
        // Background seen through the hole sits at left column x + bg.
        const std::int64_t src = x + profile.background + pan;
        for (int c = 0; c < Frame::kChannels; ++c) {
          warp.image(y, x, c) = static_cast<float>(texture(seed, 0, src, y, c));
        }
      }
    }
    scene.clip.left.frames.push_back(std::move(left));
    scene.clip.right.frames.push_back(std::move(warp.image));
    scene.disparity.push_back(disp);
  }
  return scene;
}

}  // namespace stereoeval
