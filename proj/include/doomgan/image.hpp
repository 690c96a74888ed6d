#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace doomgan {

// 8-bit single-channel raster, row-major; (x, y) with y growing downward.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> px;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::uint8_t& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return px.size(); }
  bool empty() const { return px.empty(); }

  bool operator==(const Image&) const = default;
};

// k quarter turns clockwise: pixel (row r, col c) of an n x n image lands at
// (row c, col n-1-r). Non-square images are supported (dimensions swap).
Image rotate90(const Image& img, int k);

std::size_t count_nonzero(const Image& img);

void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

}  // namespace doomgan
