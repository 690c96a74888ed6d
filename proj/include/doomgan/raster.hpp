#pragma once

#include "doomgan/image.hpp"
#include "doomgan/wad.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string_view>

namespace doomgan {

// ---------------------------------------------------------------------------
// Thing palette

enum class ThingCategory : std::uint8_t {
  PlayerStart,
  Monster,
  Weapon,
  Ammo,
  HealthArmor,
  Key,
  TeleportDest,
  Decoration,
  Other,
};

inline constexpr std::size_t kThingCategoryCount = 9;

std::string_view thing_category_name(ThingCategory c) noexcept;
std::optional<ThingCategory> thing_category_from_name(std::string_view name) noexcept;

struct ThingPalette {
  // Index = ThingCategory; lower index wins when two things share a pixel.
  std::array<std::uint8_t, kThingCategoryCount> gray{32, 64, 96, 128, 160, 192, 208, 224, 240};
  std::map<std::int16_t, ThingCategory> categories;  // unknown ids -> Other

  static ThingPalette doom_default();
  static ThingPalette from_json_file(const std::filesystem::path& path);

  ThingCategory category_of(std::int16_t type) const;
  std::uint8_t value_of(std::int16_t type) const { return gray[static_cast<std::size_t>(category_of(type))]; }
  std::optional<ThingCategory> category_for_value(std::uint8_t v) const;
};

// ---------------------------------------------------------------------------
// Trigger encoding: value = 32 * category + min(tag, 31)

enum class TriggerCategory : std::uint8_t {
  LocalDoor = 1,
  RemoteDoor,
  Lift,
  Switch,
  Teleport,
  Exit,
  Other,
};

std::optional<TriggerCategory> trigger_category(std::int16_t special) noexcept;
std::uint8_t encode_trigger(TriggerCategory c, std::int16_t tag) noexcept;

// ---------------------------------------------------------------------------

enum class MapType : std::uint8_t { Floor, Wall, Height, Things, Triggers, Rooms };

inline constexpr std::array<MapType, 6> kAllMapTypes = {MapType::Floor,  MapType::Wall,
                                                        MapType::Height, MapType::Things,
                                                        MapType::Triggers, MapType::Rooms};

std::string_view map_type_name(MapType t) noexcept;

struct RasterConfig {
  int width = 128;
  int height = 128;
  double scale = 32.0;  // map units per pixel
  ThingPalette palette = ThingPalette::doom_default();
  // Map point placed at the canvas center; defaults to the bounding-box center.
  std::optional<std::array<double, 2>> center;
};

struct RasterMeta {
  double origin_x = 0.0;  // map coordinates of the canvas center
  double origin_y = 0.0;
  double scale = 32.0;
  int hmin = 0;
  int hmax = 0;
  bool operator==(const RasterMeta&) const = default;
};

struct LevelImageSet {
  Image floor, wall, height, things, triggers, rooms;
  RasterMeta meta;

  const Image& channel(MapType t) const;
  Image& channel(MapType t);
  int width() const { return floor.width; }
  int heightpx() const { return floor.height; }
  bool operator==(const LevelImageSet&) const = default;
};

// Affine floor-height mapping over traversable pixels; 0 is reserved.
std::uint8_t height_to_gray(int h, int hmin, int hmax);
double gray_to_height(std::uint8_t v, int hmin, int hmax);

LevelImageSet rasterize_level(const WadLevel& level, const RasterConfig& cfg);

// Distance-transform watershed room segmentation; labels 1..R, 0 off-floor.
Image segment_rooms(const Image& floor);
int room_count(const Image& rooms);

// Persistence: <dir>/<stem>_<maptype>.png plus <dir>/<stem>_meta.json.
void save_image_set(const LevelImageSet& set, const std::filesystem::path& dir, std::string_view stem);
LevelImageSet load_image_set(const std::filesystem::path& dir, std::string_view stem);

}  // namespace doomgan
