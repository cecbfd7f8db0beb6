#include "stereoeval/media_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace stereoeval {
namespace {

bool is_frame_index_stem(const std::string& stem) {
  return !stem.empty() && std::all_of(stem.begin(), stem.end(),
                                      [](unsigned char c) { return std::isdigit(c) != 0; });
}

// Numbered files with the given extension, sorted by their integer index.
std::vector<fs::path> numbered_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw MissingPathError("no such directory", dir);
  std::vector<std::pair<long long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e != ext) continue;
    const std::string stem = p.stem().string();
    if (!is_frame_index_stem(stem)) continue;
    found.emplace_back(std::stoll(stem), p);
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  out.reserve(found.size());
  for (auto& [idx, p] : found) out.push_back(std::move(p));
  return out;
}

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec && !fs::is_directory(parent)) throw IoError("cannot create directory", parent);
}

std::uint8_t to_byte(float v) {
  const float scaled = std::clamp(v, 0.0f, 1.0f) * 255.0f;
  return static_cast<std::uint8_t>(std::lround(scaled));
}

}  // namespace

Frame load_png(const fs::path& path) {
  if (!fs::exists(path)) throw MissingPathError("no such file", path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw UnreadableFileError(std::string("cannot decode PNG (") + image.message + ")", path);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    throw UnreadableFileError(std::string("cannot decode PNG (") + image.message + ")", path);
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  std::vector<float> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0f;
  return Frame(h, w, std::move(data));
}

void save_png(const Frame& frame, const fs::path& path) {
  ensure_parent(path);
  const auto src = frame.data();
  std::vector<std::uint8_t> bytes(src.size());
  std::transform(src.begin(), src.end(), bytes.begin(), to_byte);

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width());
  image.height = static_cast<png_uint_32>(frame.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError(std::string("cannot write PNG (") + image.message + ")", path);
  }
}

void save_mask_png(const Mask& mask, const fs::path& path) {
  ensure_parent(path);
  std::vector<std::uint8_t> bytes(mask.size());
  std::transform(mask.data().begin(), mask.data().end(), bytes.begin(),
                 [](std::uint8_t m) -> std::uint8_t { return m ? 255 : 0; });
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(mask.width());
  image.height = static_cast<png_uint_32>(mask.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError(std::string("cannot write PNG (") + image.message + ")", path);
  }
}

VideoClip load_clip(const fs::path& dir) {
  const auto files = numbered_files(dir, ".png");
  if (files.empty()) throw MissingPathError("no numbered PNG frames in directory", dir);
  VideoClip clip;
  clip.frames.reserve(files.size());
  for (const auto& f : files) {
    Frame frame = load_png(f);
    if (!clip.frames.empty() && !frame.same_shape(clip.frames.front())) {
      std::ostringstream msg;
      msg << "frame is " << frame.width() << "x" << frame.height() << ", expected "
          << clip.width() << "x" << clip.height();
      throw DimensionMismatchError(msg.str(), f);
    }
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

std::string frame_file_name(int index, int count, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), count > 1000 ? "%06d" : "%03d", index);
  return std::string(buf) + ext;
}

void save_clip(const VideoClip& clip, const fs::path& dir) {
  for (int i = 0; i < clip.size(); ++i) {
    save_png(clip.frames[i], dir / frame_file_name(i, clip.size(), ".png"));
  }
}

Plane load_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPathError("cannot open PFM", path);

  std::string magic;
  in >> magic;
  if (!in) throw FormatError("malformed PFM header", path);
  if (magic == "PF") throw ChannelCountError("PFM has 3 channels, expected 1", path);
  if (magic != "Pf") throw FormatError("malformed PFM header (magic '" + magic + "')", path);

  long long w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale)) {
    throw FormatError("malformed PFM header", path);
  }
  in.get();  // single whitespace before the raster

  const bool little = scale < 0.0;
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4) {
    throw FormatError("truncated PFM raster", path);
  }
  const bool host_little = std::endian::native == std::endian::little;
  Plane plane(static_cast<int>(h), static_cast<int>(w));
  for (long long y = 0; y < h; ++y) {
    // Rows are stored bottom to top.
    auto dst = plane.row(static_cast<int>(h - 1 - y));
    for (long long x = 0; x < w; ++x) {
      std::uint32_t bits = raw[static_cast<std::size_t>(y * w + x)];
      if (little != host_little) bits = __builtin_bswap32(bits);
      dst[static_cast<std::size_t>(x)] = std::bit_cast<float>(bits);
    }
  }
  return plane;
}

void save_pfm(const Plane& plane, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing", path);
  out << "Pf\n" << plane.width() << " " << plane.height() << "\n-1.0\n";
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(plane.width()));
  for (int y = plane.height() - 1; y >= 0; --y) {
    const auto src = plane.row(y);
    for (int x = 0; x < plane.width(); ++x) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(src[x]);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      raw[x] = bits;
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
  }
  if (!out) throw IoError("write failed", path);
}

DisparityMap load_disparity(const fs::path& path) {
  Plane plane = load_pfm(path);
  DisparityMap map(plane.height(), plane.width());
  const auto src = plane.data();
  auto vals = map.values.data();
  auto valid = map.valid.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (std::isfinite(src[i])) {
      vals[i] = src[i];
      valid[i] = 1;
    } else {
      vals[i] = 0.0f;
      valid[i] = 0;
    }
  }
  return map;
}

void save_disparity(const DisparityMap& map, const fs::path& path) {
  if (!map.values.same_shape(map.valid)) throw ShapeError("disparity values/mask size mismatch");
  Plane plane = map.values;
  auto dst = plane.data();
  const auto valid = map.valid.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!valid[i]) dst[i] = std::numeric_limits<float>::infinity();
  }
  save_pfm(plane, path);
}

std::vector<DisparityMap> load_disparity_sequence(const fs::path& dir) {
  const auto files = numbered_files(dir, ".pfm");
  if (files.empty()) throw MissingPathError("no numbered PFM files in directory", dir);
  std::vector<DisparityMap> maps;
  maps.reserve(files.size());
  for (const auto& f : files) maps.push_back(load_disparity(f));
  return maps;
}

void save_disparity_sequence(const std::vector<DisparityMap>& maps, const fs::path& dir) {
  const int n = static_cast<int>(maps.size());
  for (int i = 0; i < n; ++i) save_disparity(maps[i], dir / frame_file_name(i, n, ".pfm"));
}

void write_csv(const CsvTable& table, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing", path);
  auto write_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
  if (!out) throw IoError("write failed", path);
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPathError("cannot open CSV", path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace stereoeval
