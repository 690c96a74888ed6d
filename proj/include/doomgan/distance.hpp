#pragma once

#include "doomgan/image.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace doomgan {

// Exact Euclidean distance from each floor pixel center (value != 0) to the
// nearest non-floor pixel center. Pixels outside the raster count as
// non-floor. Values are kept squared (exact integers); 0 on non-floor.
struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> sq;

  std::int64_t sq_at(int x, int y) const { return sq[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return std::sqrt(static_cast<double>(sq_at(x, y))); }
};

DistanceField distance_transform(const Image& floor);

}  // namespace doomgan
