#pragma once

#include "doomgan/nn.hpp"
#include "doomgan/raster.hpp"
#include "doomgan/wad.hpp"

#include <vector>

namespace doomgan {

// Three sectors: a low room A, a raised room B beside it and a higher
// platform C nested inside B. A/B and C/B boundaries are two-sided.
WadLevel nested_plateau_level();

// One rectangular sector with a player start in the middle.
WadLevel rectangle_level(int width_units, int height_units, std::int16_t floor_height = 0);

struct DungeonParams {
  int canvas = 32;         // pixels per side the level must fit in
  double scale = 32.0;     // map units per pixel
  int min_rooms = 2;
  int max_rooms = 4;
  int min_room_size = 5;   // pixels
  int max_room_size = 10;
  int corridor_width = 2;
  int extra_things = 3;
  bool with_triggers = true;
};

// Axis-aligned rooms joined by L-shaped corridors, each its own sector with
// one of a few floor heights. Always contains a player start.
WadLevel random_dungeon(nn::Rng& rng, const DungeonParams& params = {});

// Rasterized procedural corpus, all sets canvas x canvas.
std::vector<LevelImageSet> procedural_corpus(int count, std::uint64_t seed, const DungeonParams& params = {});

// Canonical PWAD holding the given levels (marker names taken from each level).
WadFile level_wad(const std::vector<WadLevel>& levels);

// A structurally valid WAD byte image with random lump contents, gaps,
// empty lumps and directory placement.
Bytes fuzz_wad_bytes(nn::Rng& rng);

}  // namespace doomgan
