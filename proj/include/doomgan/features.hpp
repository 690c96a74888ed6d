#pragma once

#include "doomgan/distance.hpp"
#include "doomgan/image.hpp"
#include "doomgan/raster.hpp"

#include <json.hpp>

#include <array>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace doomgan {

struct Point2 {
  double x = 0.0, y = 0.0;
};

struct Circle {
  Point2 center;
  double radius = 0.0;
  double diameter() const { return 2.0 * radius; }
};

// Minimum enclosing circle (Welzl, move-to-front, deterministic shuffle).
Circle smallest_enclosing_circle(std::span<const Point2> points);

// Convex hull of integer points (monotone chain), counterclockwise in a
// y-up frame, collinear points dropped.
std::vector<std::array<long, 2>> convex_hull(std::vector<std::array<long, 2>> pts);
// Twice the signed area of a closed polygon.
long long twice_area(std::span<const std::array<long, 2>> poly);

// ---------------------------------------------------------------------------

struct RoomGraph {
  int node_count = 0;                      // nodes are labels 1..node_count
  std::vector<std::pair<int, int>> edges;  // a < b, sorted, unique
  std::vector<std::size_t> area;           // area[label - 1] in pixels

  std::vector<std::vector<int>> adjacency() const;  // 0-based
};

// Edge (a, b) iff some pixel of room a is 4-adjacent to one of room b.
RoomGraph build_room_graph(const Image& rooms);

struct GraphStats {
  double closeness_mean = 0.0;
  double betweenness_mean = 0.0;
  double assortativity = 0.0;
  int nodes_used = 0;              // size of the component the stats were taken on
  bool largest_component_only = false;
};

// Computed on the largest connected component when g is disconnected.
GraphStats graph_features(const RoomGraph& g);

// Per-node values on the analysed component (exposed for testing).
std::vector<double> closeness_centrality(const std::vector<std::vector<int>>& adj);
std::vector<double> betweenness_centrality(const std::vector<std::vector<int>>& adj);
double degree_assortativity(const std::vector<std::vector<int>>& adj);

// ---------------------------------------------------------------------------

inline constexpr std::size_t kConditioningSize = 7;
inline constexpr std::array<const char*, kConditioningSize> kConditioningNames = {
    "equivalent_diameter", "major_axis", "minor_axis", "solidity",
    "nodes",               "wall_dist_skewness", "wall_dist_kurtosis"};

struct FeatureVector {
  double equivalent_diameter = 0.0;
  double major_axis = 0.0;
  double minor_axis = 0.0;
  double solidity = 0.0;
  double nodes = 0.0;
  double wall_dist_skewness = 0.0;
  double wall_dist_kurtosis = 0.0;
  std::map<std::string, double> extended;

  std::array<double, kConditioningSize> conditioning() const;
};

// Population skewness m3/m2^1.5 and non-excess kurtosis m4/m2^2; (0, 0) when m2 == 0.
std::pair<double, double> skewness_kurtosis(std::span<const double> values);

FeatureVector extract_feature_vector(const LevelImageSet& imgs);

// ---------------------------------------------------------------------------

struct NormalizationStats {
  std::array<double, kConditioningSize> mean{};
  std::array<double, kConditioningSize> stddev{};
  std::size_t count = 0;

  static NormalizationStats from_corpus(std::span<const FeatureVector> corpus);
  bool is_constant(std::size_t slot) const { return stddev[slot] == 0.0; }

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
};

std::array<double, kConditioningSize> normalize_features(const FeatureVector& v,
                                                         const NormalizationStats& stats);
std::array<double, kConditioningSize> denormalize_features(
    const std::array<double, kConditioningSize>& z, const NormalizationStats& stats);

// CSV: level_id, the seven features, then extended columns in key order.
std::string feature_csv_header(const FeatureVector& prototype);
std::string feature_csv_row(const std::string& level_id, const FeatureVector& v);
nlohmann::json feature_to_json(const FeatureVector& v);
FeatureVector feature_from_json(const nlohmann::json& j);

}  // namespace doomgan
