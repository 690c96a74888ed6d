#pragma once

#include "doomgan/image.hpp"
#include "doomgan/raster.hpp"
#include "doomgan/wad.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace doomgan {

struct ReconstructionConfig {
  int floor_threshold = 128;  // floor pixel iff value >= threshold
  int min_component_area = 4;
  int height_levels = 8;
  double simplify_tolerance = 0.5;  // pixels; 0 disables simplification
  double scale = 32.0;              // map units per pixel
  // Height range used when the image set carries no usable mapping.
  int fallback_hmin = 0;
  int fallback_hmax = 128;
  ThingPalette palette = ThingPalette::doom_default();
  // Concrete thing type per category (player start, monster, ...).
  std::array<std::int16_t, kThingCategoryCount> default_types{1, 3001, 2001, 2048, 2012, 5, 14, 2028, 87};

  void validate() const;
  static std::array<std::int16_t, kThingCategoryCount> load_default_types(const std::filesystem::path& path);
};

// Optimal 1-D k-means (squared error); returns the sorted centers of at most k
// non-empty clusters.
std::vector<double> kmeans_1d(std::span<const double> values, int k);

LevelImageSet quantize_images(const LevelImageSet& imgs, const ReconstructionConfig& cfg);

// ---------------------------------------------------------------------------
// Boundary geometry on the pixel-corner lattice: corner (X, Y) with
// 0 <= X <= W, 0 <= Y <= H, Y growing downward like image rows.

using LatticePoint = std::array<int, 2>;

// Maximal boundary path between two labels. Walking pts in order, `left`
// is the label on the left-hand side in the y-up (map) frame and `right`
// the one on the right. Label 0 is the void outside the floor.
struct BoundaryChain {
  int left = 0;
  int right = 0;
  bool closed = false;  // pts.front() == pts.back(), no junction on it
  std::vector<LatticePoint> pts;
};

// labels: row-major w*h, 0 = void. Chains break at corners shared by three
// or more labels. Collinear points are merged; tolerance > 0 applies
// Douglas-Peucker per chain, reverting any chain whose simplification would
// cross or touch another chain.
std::vector<BoundaryChain> boundary_chains(const std::vector<int>& labels, int w, int h,
                                           double tolerance);

struct RegionPolygon {
  int label = 0;
  std::uint8_t height_value = 0;
  // Pixel-corner coordinates in a y-up frame: (X, H - Y). Outer loops are
  // counterclockwise, holes clockwise; no closing duplicate.
  std::vector<std::vector<LatticePoint>> loops;
};

// 4-connected components of floor pixels with equal height value, labelled
// 1..R in raster order of their first pixel.
std::vector<int> plateau_labels(const Image& floor, const Image& height, int* region_count = nullptr);

std::vector<RegionPolygon> trace_regions(const Image& floor, const Image& height, double tolerance = 0.5);

// Map placement of a lattice: corner (X, Y) lands at
// (origin_x + (X - W/2) * scale, origin_y + (H/2 - Y) * scale).
struct LatticeFrame {
  int width = 0, height = 0;
  double origin_x = 0.0, origin_y = 0.0;
  double scale = 32.0;
  std::array<std::int16_t, 2> to_map(const LatticePoint& p) const;
  std::array<std::int16_t, 2> pixel_center(int x, int y) const;
};

struct SectorStyle {
  std::int16_t floor_height = 0;
  std::int16_t ceiling_height = 128;
  std::int16_t light = 160;
};

// One sector per label 1..region_count; shared boundaries two-sided,
// boundaries against label 0 one-sided with the sector on the right.
WadLevel level_from_labels(const std::vector<int>& labels, int w, int h, const LatticeFrame& frame,
                           std::span<const SectorStyle> sectors, double tolerance);

WadLevel build_level(const LevelImageSet& imgs, const ReconstructionConfig& cfg);

// Rasterize a reconstructed level back onto the source canvas.
LevelImageSet rerasterize(const WadLevel& level, const LevelImageSet& like, const ReconstructionConfig& cfg);

double floor_iou(const Image& a, const Image& b);

struct ReconstructionResult {
  LevelImageSet cleaned;
  WadLevel level;
  double iou = 0.0;
  int regions = 0;
  nlohmann::json manifest(const ReconstructionConfig& cfg) const;
};

ReconstructionResult reconstruct(const LevelImageSet& imgs, const ReconstructionConfig& cfg);

}  // namespace doomgan
