#include "doomgan/error.hpp"
#include "doomgan/raster.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>

namespace doomgan {

namespace {

constexpr std::array<std::string_view, kThingCategoryCount> kCategoryNames = {
    "player_start", "monster", "weapon", "ammo", "health_armor",
    "key",          "teleport_destination", "decoration", "other"};

void assign(std::map<std::int16_t, ThingCategory>& m, ThingCategory c,
            std::initializer_list<int> ids) {
  for (int id : ids) m[static_cast<std::int16_t>(id)] = c;
}

}  // namespace

std::string_view thing_category_name(ThingCategory c) noexcept {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

std::optional<ThingCategory> thing_category_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<ThingCategory>(i);
  }
  return std::nullopt;
}

// Mirrors data/thing_categories.json.
ThingPalette ThingPalette::doom_default() {
  ThingPalette p;
  auto& m = p.categories;
  assign(m, ThingCategory::PlayerStart, {1, 2, 3, 4, 11});
  assign(m, ThingCategory::Monster, {7, 9, 16, 58, 64, 65, 66, 67, 68, 69, 71, 72, 84, 88, 89,
                                     3001, 3002, 3003, 3004, 3005, 3006});
  assign(m, ThingCategory::Weapon, {82, 2001, 2002, 2003, 2004, 2005, 2006});
  assign(m, ThingCategory::Ammo, {8, 17, 2007, 2008, 2010, 2046, 2047, 2048, 2049});
  assign(m, ThingCategory::HealthArmor, {83, 2011, 2012, 2013, 2014, 2015, 2018, 2019, 2022,
                                         2023, 2024, 2025, 2026, 2045});
  assign(m, ThingCategory::Key, {5, 6, 13, 38, 39, 40});
  assign(m, ThingCategory::TeleportDest, {14});
  assign(m, ThingCategory::Decoration,
         {10, 12, 15, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33, 34, 35,
          36, 37, 41, 42, 43, 44, 45, 46, 47, 48, 49, 50, 51, 52, 53, 54, 55, 56, 57, 59, 60,
          61, 62, 63, 70, 73, 74, 75, 76, 77, 78, 79, 80, 81, 85, 86, 2028, 2035});
  return p;
}

ThingPalette ThingPalette::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open palette " + path.string());
  const auto j = nlohmann::json::parse(in);
  ThingPalette p;
  p.categories.clear();
  if (j.contains("gray")) {
    const auto& g = j.at("gray");
    for (std::size_t i = 0; i < kThingCategoryCount; ++i) {
      p.gray[i] = g.at(std::string(kCategoryNames[i])).get<std::uint8_t>();
    }
  }
  for (const auto& [cat_name, ids] : j.at("categories").items()) {
    const auto cat = thing_category_from_name(cat_name);
    if (!cat) throw Error(Errc::Io, "unknown thing category " + cat_name);
    for (const auto& id : ids) p.categories[id.get<std::int16_t>()] = *cat;
  }
  std::set<std::uint8_t> seen;
  for (auto v : p.gray) {
    if (v == 0 || !seen.insert(v).second) {
      throw Error(Errc::Io, "palette gray values must be distinct and nonzero");
    }
  }
  return p;
}

ThingCategory ThingPalette::category_of(std::int16_t type) const {
  auto it = categories.find(type);
  return it == categories.end() ? ThingCategory::Other : it->second;
}

std::optional<ThingCategory> ThingPalette::category_for_value(std::uint8_t v) const {
  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (gray[i] == v) return static_cast<ThingCategory>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::optional<TriggerCategory> trigger_category(std::int16_t special) noexcept {
  if (special == 0) return std::nullopt;
  static const std::set<int> kLocalDoor = {1, 26, 27, 28, 31, 32, 33, 34, 117, 118};
  static const std::set<int> kRemoteDoor = {2,   3,   4,   16,  29,  42,  46,  50,  61,  63,
                                            75,  76,  86,  90,  99,  103, 105, 106, 107, 108,
                                            109, 110, 111, 112, 113, 114, 115, 116, 133, 134,
                                            135, 136, 137};
  static const std::set<int> kLift = {10, 21, 53, 62, 87, 88, 120, 121, 122, 123};
  static const std::set<int> kSwitch = {7,  9,  14, 15,  18,  20,  23,  41,  43,  45,  49,
                                        55, 60, 64, 65,  66,  67,  68,  69,  70,  71,  101,
                                        102, 127, 131, 132, 138, 139, 140, 158, 159, 160, 161};
  static const std::set<int> kTeleport = {39, 97, 125, 126};
  static const std::set<int> kExit = {11, 51, 52, 124};
  const int s = special;
  if (kLocalDoor.contains(s)) return TriggerCategory::LocalDoor;
  if (kRemoteDoor.contains(s)) return TriggerCategory::RemoteDoor;
  if (kLift.contains(s)) return TriggerCategory::Lift;
  if (kSwitch.contains(s)) return TriggerCategory::Switch;
  if (kTeleport.contains(s)) return TriggerCategory::Teleport;
  if (kExit.contains(s)) return TriggerCategory::Exit;
  return TriggerCategory::Other;
}

std::uint8_t encode_trigger(TriggerCategory c, std::int16_t tag) noexcept {
  const int t = std::clamp<int>(tag, 0, 31);
  return static_cast<std::uint8_t>(32 * static_cast<int>(c) + t);
}

}  // namespace doomgan
