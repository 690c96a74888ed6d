#include "doomgan/synthetic.hpp"

#include "doomgan/error.hpp"
#include "doomgan/reconstruct.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

namespace doomgan {

namespace {

Sidedef wall_side(std::uint16_t sector, bool two_sided) {
  Sidedef s;
  s.sector = sector;
  s.upper = make_name8(two_sided ? "STARTAN3" : "-");
  s.lower = make_name8(two_sided ? "STARTAN3" : "-");
  s.middle = make_name8(two_sided ? "-" : "STARTAN3");
  return s;
}

Sector make_sector(std::int16_t floor_h, std::int16_t light = 160) {
  Sector s;
  s.floor_height = floor_h;
  s.ceiling_height = static_cast<std::int16_t>(floor_h + 128);
  s.floor_tex = make_name8("FLOOR4_8");
  s.ceiling_tex = make_name8("CEIL3_5");
  s.light = light;
  return s;
}

struct LevelBuilder {
  WadLevel lvl;

  std::uint16_t vertex(int x, int y) {
    for (std::size_t i = 0; i < lvl.vertexes.size(); ++i)
      if (lvl.vertexes[i].x == x && lvl.vertexes[i].y == y) return static_cast<std::uint16_t>(i);
    lvl.vertexes.push_back({static_cast<std::int16_t>(x), static_cast<std::int16_t>(y)});
    return static_cast<std::uint16_t>(lvl.vertexes.size() - 1);
  }
  // Sector `right` lies to the right of a -> b.
  void one_sided(std::array<int, 2> a, std::array<int, 2> b, std::uint16_t right, std::int16_t special = 0) {
    Linedef d;
    d.start = vertex(a[0], a[1]);
    d.end = vertex(b[0], b[1]);
    d.flags = linedef_flags::kImpassable;
    d.special = special;
    lvl.sidedefs.push_back(wall_side(right, false));
    d.right = static_cast<std::uint16_t>(lvl.sidedefs.size() - 1);
    lvl.linedefs.push_back(d);
  }
  void two_sided(std::array<int, 2> a, std::array<int, 2> b, std::uint16_t right, std::uint16_t left) {
    Linedef d;
    d.start = vertex(a[0], a[1]);
    d.end = vertex(b[0], b[1]);
    d.flags = linedef_flags::kTwoSided;
    lvl.sidedefs.push_back(wall_side(right, true));
    d.right = static_cast<std::uint16_t>(lvl.sidedefs.size() - 1);
    lvl.sidedefs.push_back(wall_side(left, true));
    d.left = static_cast<std::uint16_t>(lvl.sidedefs.size() - 1);
    lvl.linedefs.push_back(d);
  }
  void thing(int x, int y, std::int16_t type, std::int16_t angle = 0) {
    lvl.things.push_back({static_cast<std::int16_t>(x), static_cast<std::int16_t>(y), angle, type, 7});
  }
};

}  // namespace

WadLevel nested_plateau_level() {
  LevelBuilder b;
  b.lvl.name = "MAP01";
  b.lvl.sectors = {make_sector(0), make_sector(32), make_sector(64, 192)};
  // A
  b.one_sided({0, 0}, {0, 256}, 0);
  b.one_sided({0, 256}, {256, 256}, 0);
  b.one_sided({256, 0}, {0, 0}, 0);
  b.two_sided({256, 256}, {256, 0}, 0, 1);
  // B
  b.one_sided({256, 256}, {640, 256}, 1);
  b.one_sided({640, 256}, {640, 0}, 1, 11);
  b.one_sided({640, 0}, {256, 0}, 1);
  // C, raised inside B
  b.two_sided({384, 64}, {384, 192}, 2, 1);
  b.two_sided({384, 192}, {512, 192}, 2, 1);
  b.two_sided({512, 192}, {512, 64}, 2, 1);
  b.two_sided({512, 64}, {384, 64}, 2, 1);
  b.thing(128, 128, 1, 90);
  b.thing(320, 128, 2001);
  b.thing(448, 128, 3001, 180);
  return b.lvl;
}

WadLevel rectangle_level(int width_units, int height_units, std::int16_t floor_height) {
  LevelBuilder b;
  b.lvl.name = "MAP01";
  b.lvl.sectors = {make_sector(floor_height)};
  b.one_sided({0, 0}, {0, height_units}, 0);
  b.one_sided({0, height_units}, {width_units, height_units}, 0);
  b.one_sided({width_units, height_units}, {width_units, 0}, 0);
  b.one_sided({width_units, 0}, {0, 0}, 0);
  b.thing(width_units / 2, height_units / 2, 1, 90);
  return b.lvl;
}

WadLevel random_dungeon(nn::Rng& rng, const DungeonParams& p) {
  const int C = p.canvas;
  if (C < p.max_room_size + 4 || p.min_room_size < 2 || p.min_rooms < 1 || p.max_rooms < p.min_rooms)
    throw Error(Errc::InvalidConfig, "dungeon parameters do not fit the canvas");
  struct Room {
    int x0, y0, w, h;
  };
  std::vector<Room> rooms;
  const int target = p.min_rooms + rng.below(p.max_rooms - p.min_rooms + 1);
  while (static_cast<int>(rooms.size()) < p.min_rooms) {
    rooms.clear();
    for (int attempt = 0; attempt < 200 && static_cast<int>(rooms.size()) < target; ++attempt) {
      Room r;
      r.w = p.min_room_size + rng.below(p.max_room_size - p.min_room_size + 1);
      r.h = p.min_room_size + rng.below(p.max_room_size - p.min_room_size + 1);
      r.x0 = 1 + rng.below(C - 2 - r.w + 1);
      r.y0 = 1 + rng.below(C - 2 - r.h + 1);
      bool clash = false;
      for (const auto& o : rooms)
        if (r.x0 < o.x0 + o.w + 2 && o.x0 < r.x0 + r.w + 2 && r.y0 < o.y0 + o.h + 2 && o.y0 < r.y0 + r.h + 2)
          clash = true;
      if (!clash) rooms.push_back(r);
    }
  }

  std::vector<int> labels(static_cast<std::size_t>(C) * C, 0);
  auto at = [&](int x, int y) -> int& { return labels[static_cast<std::size_t>(y) * C + x]; };
  static constexpr std::int16_t kHeights[] = {0, 24, 48, 72};
  std::vector<std::int16_t> heights;
  int next = 0;
  for (const auto& r : rooms) {
    ++next;
    heights.push_back(kHeights[rng.below(4)]);
    for (int y = r.y0; y < r.y0 + r.h; ++y)
      for (int x = r.x0; x < r.x0 + r.w; ++x) at(x, y) = next;
  }
  const int cw = p.corridor_width;
  auto fill = [&](int x0, int y0, int x1, int y1, int label) {
    for (int y = std::max(1, y0); y <= std::min(C - 2, y1); ++y)
      for (int x = std::max(1, x0); x <= std::min(C - 2, x1); ++x)
        if (at(x, y) == 0) at(x, y) = label;
  };
  for (std::size_t i = 0; i + 1 < rooms.size(); ++i) {
    const Room& a = rooms[i];
    const Room& b = rooms[i + 1];
    int ax = a.x0 + a.w / 2 - cw / 2, ay = a.y0 + a.h / 2 - cw / 2;
    int bx = b.x0 + b.w / 2 - cw / 2, by = b.y0 + b.h / 2 - cw / 2;
    ++next;
    heights.push_back(heights[i]);
    fill(std::min(ax, bx), ay, std::max(ax, bx) + cw - 1, ay + cw - 1, next);
    fill(bx, std::min(ay, by), bx + cw - 1, std::max(ay, by) + cw - 1, next);
  }
  // Drop labels that received no pixels and renumber in first-use order.
  std::vector<int> remap(static_cast<std::size_t>(next) + 1, 0);
  std::vector<SectorStyle> styles;
  for (int& l : labels) {
    if (l == 0) continue;
    if (remap[static_cast<std::size_t>(l)] == 0) {
      auto fh = heights[static_cast<std::size_t>(l - 1)];
      styles.push_back({fh, static_cast<std::int16_t>(fh + 128), 160});
      remap[static_cast<std::size_t>(l)] = static_cast<int>(styles.size());
    }
    l = remap[static_cast<std::size_t>(l)];
  }

  LatticeFrame frame{C, C, 0.0, 0.0, p.scale};
  WadLevel lvl = level_from_labels(labels, C, C, frame, styles, 0.0);

  auto place = [&](const Room& r, std::int16_t type) {
    int x = r.x0 + 1 + rng.below(std::max(1, r.w - 2));
    int y = r.y0 + 1 + rng.below(std::max(1, r.h - 2));
    auto pos = frame.pixel_center(x, y);
    lvl.things.push_back({pos[0], pos[1], 0, type, 7});
  };
  {
    const Room& r0 = rooms.front();
    auto pos = frame.pixel_center(r0.x0 + r0.w / 2, r0.y0 + r0.h / 2);
    lvl.things.push_back({pos[0], pos[1], 90, 1, 7});
  }
  static constexpr std::int16_t kTypes[] = {3001, 3004, 9, 2001, 2007, 2048, 2011, 2018, 5, 2028};
  for (int i = 0; i < p.extra_things; ++i)
    place(rooms[static_cast<std::size_t>(rng.below(static_cast<int>(rooms.size())))],
          kTypes[rng.below(static_cast<int>(std::size(kTypes)))]);

  if (p.with_triggers && !lvl.linedefs.empty()) {
    std::vector<std::size_t> two, one;
    for (std::size_t i = 0; i < lvl.linedefs.size(); ++i) (lvl.linedefs[i].left ? two : one).push_back(i);
    if (!two.empty()) lvl.linedefs[two[static_cast<std::size_t>(rng.below(static_cast<int>(two.size())))]].special = 1;
    if (!one.empty()) {
      auto& exit = lvl.linedefs[one[static_cast<std::size_t>(rng.below(static_cast<int>(one.size())))]];
      exit.special = 11;
    }
    if (lvl.sectors.size() > 1 && !one.empty()) {
      lvl.sectors[1].tag = 1;
      auto& lift = lvl.linedefs[one[static_cast<std::size_t>(rng.below(static_cast<int>(one.size())))]];
      if (lift.special == 0) {
        lift.special = 62;
        lift.tag = 1;
      }
    }
  }
  return lvl;
}

std::vector<LevelImageSet> procedural_corpus(int count, std::uint64_t seed, const DungeonParams& params) {
  nn::Rng rng(seed);
  RasterConfig rc;
  rc.width = rc.height = params.canvas;
  rc.scale = params.scale;
  std::vector<LevelImageSet> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) out.push_back(rasterize_level(random_dungeon(rng, params), rc));
  return out;
}

WadFile level_wad(const std::vector<WadLevel>& levels) {
  std::vector<std::pair<std::string, Bytes>> lumps;
  for (const auto& l : levels) {
    auto ll = level_lumps(l);
    lumps.insert(lumps.end(), ll.begin(), ll.end());
  }
  return make_wad(WadKind::PWAD, std::move(lumps));
}

Bytes fuzz_wad_bytes(nn::Rng& rng) {
  static const char* kNames[] = {"MAP01", "E1M1", "THINGS", "LINEDEFS", "SIDEDEFS", "VERTEXES",
                                 "SECTORS", "PLAYPAL", "DEMO1", "F_START", "F_END", "TEXTURE1"};
  const int n = rng.below(13);
  Bytes out(12, 0);
  auto random_bytes = [&](int k) {
    for (int i = 0; i < k; ++i) out.push_back(static_cast<std::uint8_t>(rng.below(256)));
  };
  auto gap = [&] {
    if (rng.below(3) == 0) random_bytes(1 + rng.below(8));
  };
  struct Entry {
    std::uint32_t off = 0, size = 0;
    std::array<std::uint8_t, 8> name{};
  };
  std::vector<Entry> entries(static_cast<std::size_t>(n));
  for (auto& e : entries) {
    if (rng.below(5) == 0) {
      for (auto& c : e.name) c = static_cast<std::uint8_t>(rng.below(256));
    } else {
      const char* s = kNames[rng.below(static_cast<int>(std::size(kNames)))];
      std::memcpy(e.name.data(), s, std::min<std::size_t>(8, std::strlen(s)));
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.below(i + 1))]);

  const int dir_slot = rng.below(n + 1);
  std::size_t dir_pos = 12;
  std::vector<int> placed;  // entries with data
  for (int k = 0; k <= n; ++k) {
    if (k == dir_slot) {
      gap();
      dir_pos = out.size();
      out.resize(out.size() + 16 * static_cast<std::size_t>(n), 0);
    }
    if (k == n) break;
    Entry& e = entries[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    int kind = rng.below(10);
    if (kind < 2) {
      e.off = static_cast<std::uint32_t>(rng.below(static_cast<int>(out.size()) + 1));
      e.size = 0;
    } else if (kind == 2 && !placed.empty()) {
      // Alias an earlier payload exactly.
      const Entry& src = entries[static_cast<std::size_t>(placed[static_cast<std::size_t>(rng.below(static_cast<int>(placed.size())))])];
      e.off = src.off;
      e.size = src.size;
    } else {
      gap();
      e.off = static_cast<std::uint32_t>(out.size());
      e.size = static_cast<std::uint32_t>(1 + rng.below(64));
      random_bytes(static_cast<int>(e.size));
      placed.push_back(order[static_cast<std::size_t>(k)]);
    }
  }
  gap();

  std::memcpy(out.data(), rng.below(2) ? "IWAD" : "PWAD", 4);
  auto put = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  put(4, static_cast<std::uint32_t>(n));
  put(8, static_cast<std::uint32_t>(dir_pos));
  for (int i = 0; i < n; ++i) {
    const Entry& e = entries[static_cast<std::size_t>(i)];
    std::size_t at = dir_pos + 16 * static_cast<std::size_t>(i);
    put(at, e.off);
    put(at + 4, e.size);
    std::memcpy(out.data() + at + 8, e.name.data(), 8);
  }
  return out;
}

}  // namespace doomgan
