#include "doomgan/image.hpp"

#include "doomgan/error.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>

namespace doomgan {

Image rotate90(const Image& img, int k) {
  k = ((k % 4) + 4) % 4;
  Image cur = img;
  for (int step = 0; step < k; ++step) {
    Image next(cur.height, cur.width);
    // source (x=c, y=r) -> destination (x = h-1-r, y = c)
    for (int r = 0; r < cur.height; ++r) {
      for (int c = 0; c < cur.width; ++c) next.at(cur.height - 1 - r, c) = cur.at(c, r);
    }
    cur = std::move(next);
  }
  return cur;
}

std::size_t count_nonzero(const Image& img) {
  return static_cast<std::size_t>(
      std::count_if(img.px.begin(), img.px.end(), [](std::uint8_t v) { return v != 0; }));
}

void write_png(const std::filesystem::path& path, const Image& img) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.px.data(), 0, nullptr)) {
    throw Error(Errc::Io, "cannot write " + path.string() + ": " + png.message);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error(Errc::Io, "cannot read " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.px.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw Error(Errc::Io, "cannot decode " + path.string() + ": " + msg);
  }
  return img;
}

}  // namespace doomgan
