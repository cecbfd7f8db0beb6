#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

/// Piecewise-constant disparity layout for generated scenes.
///   constant:D        every pixel at disparity D
///   two_plane:B,F     background B with a centred foreground square at F
///                     (side 3/8 of the shorter image side, so the
///                     background holds the majority of pixels)
struct DisparityProfile {
  enum class Kind { Constant, TwoPlane };
  Kind kind = Kind::Constant;
  int background = 0;
  int foreground = 0;

  static DisparityProfile parse(const std::string& text);
  std::string to_string() const;
};

struct SyntheticScene {
  StereoClip clip;
  std::vector<DisparityMap> disparity;  // left-view ground truth per frame
};

// Multi-octave value-noise texture (lattice periods 2..64 px, amplitude
// proportional to period, independent per channel) viewed by a camera
// panning `motion` px per frame to the right.
// The foreground square carries its own texture. The right view is the
// forward warp of the left view by the ground truth; disocclusions are
// filled from the background texture, so the pair is complete. Intensities
// are quantised to 8-bit levels so the scene survives a PNG round trip.
SyntheticScene make_synthetic_scene(std::uint64_t seed, int width, int height, int n_frames,
                                    const DisparityProfile& profile, int motion = 2);

}  // namespace stereoeval
