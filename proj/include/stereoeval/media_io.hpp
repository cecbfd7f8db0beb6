#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stereoeval/image.hpp"

namespace stereoeval {

namespace fs = std::filesystem;

// 8-bit RGB PNG. Gray and RGBA inputs are expanded/stripped to RGB; 16-bit
// inputs are reduced to 8 bits. Samples map to [0,1] via x/255.
Frame load_png(const fs::path& path);
// Samples are rounded to the nearest 8-bit level.
void save_png(const Frame& frame, const fs::path& path);
// Single-channel 8-bit mask: nonzero -> 255.
void save_mask_png(const Mask& mask, const fs::path& path);

// Loads every PNG in `dir` whose stem is a decimal frame index (000.png,
// 000017.png, ...), ordered by index.
//
// Throws MissingPathError when `dir` does not exist, UnreadableFileError for
// a file that is not a decodable PNG, and DimensionMismatchError naming the
// first frame whose size differs from frame 0.
VideoClip load_clip(const fs::path& dir);
// Writes %03d.png (or %06d.png when N > 1000), creating `dir`.
void save_clip(const VideoClip& clip, const fs::path& dir);

std::string frame_file_name(int index, int count, const std::string& ext);

// PFM, single channel. Non-finite samples load as valid=false (value 0);
// invalid pixels are written as +inf. Both byte orders are accepted; files
// are written little-endian.
DisparityMap load_disparity(const fs::path& path);
void save_disparity(const DisparityMap& map, const fs::path& path);

// Raw single-channel PFM plane, no validity handling.
Plane load_pfm(const fs::path& path);
void save_pfm(const Plane& plane, const fs::path& path);

// Numbered *.pfm files in `dir`, ordered by index.
std::vector<DisparityMap> load_disparity_sequence(const fs::path& dir);
void save_disparity_sequence(const std::vector<DisparityMap>& maps, const fs::path& dir);

// Plain CSV table: a header row, then one row per record.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
void write_csv(const CsvTable& table, const fs::path& path);
CsvTable read_csv(const fs::path& path);

}  // namespace stereoeval
