#pragma once

#include "doomgan/image.hpp"
#include "doomgan/raster.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace doomgan {

// Per-map-type image lists; every image in the corpus has the same size.
struct Corpus {
  std::map<MapType, std::vector<Image>> maps;

  static Corpus from_image_sets(std::span<const LevelImageSet> sets);
  const std::vector<Image>& of(MapType t) const;
  std::size_t size(MapType t) const;
  void validate() const;  // throws EmptyCorpus / SizeMismatch
};

double pixel_entropy(const Image& img);
double delta_entropy(const Corpus& a, const Corpus& b, MapType t);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

// Mean of the SSIM map over all fully-contained windows (no padding).
double ssim(const Image& x, const Image& y, const SsimParams& params = {});

double encoding_error(const Image& img, const std::set<std::uint8_t>& meaningful);
// Meaningful value sets per map type; nullopt for height (every value is meaningful).
std::optional<std::set<std::uint8_t>> meaningful_values(MapType t, const ThingPalette& palette);

struct HarrisParams {
  double k = 0.04;
  double sigma = 1.0;  // realised as the 5-tap binomial kernel (variance 1)
  double relative_threshold = 0.01;
  int nms_size = 3;
};

// Integer Sobel gradients and integer binomial smoothing keep the response
// exact, so the count is invariant under quarter turns.
std::vector<std::pair<int, int>> harris_corners(const Image& img);
std::size_t harris_corner_count(const Image& img);

double corner_error(const Corpus& a, const Corpus& b, MapType t);

struct MapMetrics {
  double delta_entropy = 0.0;
  double mean_ssim = 0.0;
  std::optional<double> encoding_error_reference;
  std::optional<double> encoding_error_generated;
  std::optional<double> corner_error;
  double mean_corners_reference = 0.0;
  double mean_corners_generated = 0.0;
};

struct MetricsReport {
  std::map<MapType, MapMetrics> maps;
  std::size_t reference_size = 0;
  std::size_t generated_size = 0;

  nlohmann::json to_json() const;
  std::string table() const;
};

inline constexpr std::array<MapType, 5> kEvaluatedMapTypes = {
    MapType::Floor, MapType::Wall, MapType::Height, MapType::Things, MapType::Triggers};

// SSIM pairs the i-th generated image with the i-th reference one,
// recycling the shorter list.
MetricsReport evaluate_corpora(const Corpus& reference, const Corpus& generated,
                               const ThingPalette& palette = ThingPalette::doom_default());

}  // namespace doomgan
