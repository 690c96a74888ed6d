#include "doomgan/wad.hpp"

#include "doomgan/error.hpp"

#include <algorithm>
#include <cstring>
#include <set>

namespace doomgan {

namespace {

constexpr std::size_t kHeaderSize = 12;
constexpr std::size_t kDirEntrySize = 16;
constexpr std::uint16_t kNoSidedef = 0xFFFF;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::int16_t read_i16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::int16_t>(read_u16(b, at));
}

Name8 read_name(std::span<const std::uint8_t> b, std::size_t at) {
  Name8 n{};
  std::memcpy(n.data(), b.data() + at, 8);
  return n;
}

void put_u32(Bytes& out, std::size_t at, std::uint32_t v) {
  out[at] = static_cast<std::uint8_t>(v);
  out[at + 1] = static_cast<std::uint8_t>(v >> 8);
  out[at + 2] = static_cast<std::uint8_t>(v >> 16);
  out[at + 3] = static_cast<std::uint8_t>(v >> 24);
}

void push_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void push_i16(Bytes& out, std::int16_t v) { push_u16(out, static_cast<std::uint16_t>(v)); }

void push_name(Bytes& out, const Name8& n) {
  for (char c : n) out.push_back(static_cast<std::uint8_t>(c));
}

std::uint16_t side_to_disk(const std::optional<std::uint16_t>& s) { return s ? *s : kNoSidedef; }

std::optional<std::uint16_t> side_from_disk(std::uint16_t v) {
  if (v == kNoSidedef) return std::nullopt;
  return v;
}

template <typename T, typename Decode>
std::vector<T> decode_records(const Lump& lump, std::size_t record_size, Decode decode) {
  if (lump.data.size() % record_size != 0) {
    throw Error(Errc::MisalignedLump, lump.name_str() + " size " + std::to_string(lump.data.size()) +
                                          " is not a multiple of " + std::to_string(record_size));
  }
  std::span<const std::uint8_t> b(lump.data);
  std::vector<T> out;
  out.reserve(lump.data.size() / record_size);
  for (std::size_t at = 0; at < b.size(); at += record_size) out.push_back(decode(b, at));
  return out;
}

}  // namespace

Name8 make_name8(std::string_view text) {
  if (text.size() > 8) throw Error(Errc::NameTooLong, std::string(text));
  Name8 n{};
  std::copy(text.begin(), text.end(), n.begin());
  return n;
}

std::string name8_str(const Name8& n) {
  std::size_t len = 0;
  while (len < n.size() && n[len] != '\0') ++len;
  return std::string(n.data(), len);
}

std::optional<std::size_t> WadFile::find(std::string_view name, std::size_t from) const {
  for (std::size_t i = from; i < lumps.size(); ++i) {
    if (lumps[i].name_str() == name) return i;
  }
  return std::nullopt;
}

void pack_canonical(WadFile& wad) {
  std::uint32_t at = kHeaderSize;
  for (auto& l : wad.lumps) {
    l.offset = at;
    at += l.size();
  }
  wad.directory_offset = at;
  wad.slack.clear();
}

WadFile make_wad(WadKind kind, std::vector<std::pair<std::string, Bytes>> lumps) {
  WadFile w;
  w.kind = kind;
  for (auto& [name, data] : lumps) {
    Lump l;
    l.name = make_name8(name);
    l.data = std::move(data);
    w.lumps.push_back(std::move(l));
  }
  pack_canonical(w);
  return w;
}

WadFile parse_wad(std::span<const std::uint8_t> bytes) {
  WadFile w;
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "IWAD", 4) == 0) {
    w.kind = WadKind::IWAD;
  } else if (bytes.size() >= 4 && std::memcmp(bytes.data(), "PWAD", 4) == 0) {
    w.kind = WadKind::PWAD;
  } else {
    throw Error(Errc::BadMagic, "expected IWAD or PWAD");
  }
  if (bytes.size() < kHeaderSize) {
    throw Error(Errc::TruncatedDirectory, "file shorter than the 12-byte header");
  }
  const std::uint64_t count = read_u32(bytes, 4);
  const std::uint64_t dir = read_u32(bytes, 8);
  const std::uint64_t dir_end = dir + count * kDirEntrySize;
  if (dir_end > bytes.size()) {
    throw Error(Errc::TruncatedDirectory, "directory of " + std::to_string(count) +
                                              " entries at " + std::to_string(dir) +
                                              " exceeds file size " + std::to_string(bytes.size()));
  }
  if (count > 0 && dir < kHeaderSize) {
    throw Error(Errc::OverlappingOutOfBounds, "directory overlaps the header");
  }
  w.directory_offset = static_cast<std::uint32_t>(dir);

  std::vector<bool> covered(bytes.size(), false);
  std::fill(covered.begin(), covered.begin() + kHeaderSize, true);
  std::fill(covered.begin() + static_cast<std::ptrdiff_t>(dir),
            covered.begin() + static_cast<std::ptrdiff_t>(dir_end), true);

  w.lumps.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t e = dir + i * kDirEntrySize;
    Lump l;
    l.offset = read_u32(bytes, e);
    const std::uint64_t size = read_u32(bytes, e + 4);
    l.name = read_name(bytes, e + 8);
    const std::uint64_t end = static_cast<std::uint64_t>(l.offset) + size;
    if (end > bytes.size()) {
      throw Error(Errc::OverlappingOutOfBounds,
                  "lump " + l.name_str() + " range exceeds file size");
    }
    if (size > 0) {
      const bool hits_header = l.offset < kHeaderSize;
      const bool hits_dir = l.offset < dir_end && end > dir && count > 0;
      if (hits_header || hits_dir) {
        throw Error(Errc::OverlappingOutOfBounds,
                    "lump " + l.name_str() + " overlaps the header or directory");
      }
      l.data.assign(bytes.begin() + l.offset, bytes.begin() + static_cast<std::ptrdiff_t>(end));
      std::fill(covered.begin() + l.offset, covered.begin() + static_cast<std::ptrdiff_t>(end), true);
    }
    w.lumps.push_back(std::move(l));
  }

  for (std::size_t i = 0; i < bytes.size();) {
    if (covered[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < bytes.size() && !covered[j]) ++j;
    w.slack.push_back({static_cast<std::uint32_t>(i), Bytes(bytes.begin() + i, bytes.begin() + j)});
    i = j;
  }
  return w;
}

Bytes write_wad(const WadFile& wad) {
  const std::uint64_t count = wad.lumps.size();
  const std::uint64_t dir = wad.directory_offset;
  const std::uint64_t dir_end = dir + count * kDirEntrySize;
  if (count > 0 && dir < kHeaderSize) {
    throw Error(Errc::OverlappingOutOfBounds, "directory overlaps the header");
  }
  std::uint64_t total = std::max<std::uint64_t>(kHeaderSize, dir_end);
  for (const auto& l : wad.lumps) total = std::max<std::uint64_t>(total, l.offset + std::uint64_t{l.size()});
  for (const auto& s : wad.slack) total = std::max<std::uint64_t>(total, s.offset + std::uint64_t{s.data.size()});
  if (total > 0xFFFFFFFFull) throw Error(Errc::OverlappingOutOfBounds, "archive exceeds 4 GiB");

  Bytes out(total, 0);
  std::vector<bool> written(total, false);
  auto place = [&](std::uint64_t at, const Bytes& data, const std::string& what) {
    for (std::size_t k = 0; k < data.size(); ++k) {
      const std::size_t p = at + k;
      if (written[p] && out[p] != data[k]) {
        throw Error(Errc::OverlappingOutOfBounds, what + " conflicts with overlapping content");
      }
      out[p] = data[k];
      written[p] = true;
    }
  };

  for (const auto& l : wad.lumps) {
    if (l.size() == 0) continue;
    const std::uint64_t end = l.offset + std::uint64_t{l.size()};
    if (l.offset < kHeaderSize || (count > 0 && l.offset < dir_end && end > dir)) {
      throw Error(Errc::OverlappingOutOfBounds,
                  "lump " + l.name_str() + " overlaps the header or directory");
    }
    place(l.offset, l.data, "lump " + l.name_str());
  }
  for (const auto& s : wad.slack) place(s.offset, s.data, "slack");

  std::memcpy(out.data(), wad.kind == WadKind::IWAD ? "IWAD" : "PWAD", 4);
  put_u32(out, 4, static_cast<std::uint32_t>(count));
  put_u32(out, 8, static_cast<std::uint32_t>(dir));
  for (std::size_t i = 0; i < wad.lumps.size(); ++i) {
    const std::size_t e = dir + i * kDirEntrySize;
    put_u32(out, e, wad.lumps[i].offset);
    put_u32(out, e + 4, wad.lumps[i].size());
    std::memcpy(out.data() + e + 8, wad.lumps[i].name.data(), 8);
  }
  return out;
}

// ---------------------------------------------------------------------------

bool is_level_marker_name(std::string_view n) {
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (n.size() == 4 && n[0] == 'E' && digit(n[1]) && n[2] == 'M' && digit(n[3])) return true;
  if (n.size() == 5 && n.substr(0, 3) == "MAP" && digit(n[3]) && digit(n[4])) return true;
  return false;
}

bool is_level_lump_name(std::string_view n) {
  static const std::set<std::string_view> kNames = {
      "THINGS", "LINEDEFS", "SIDEDEFS", "VERTEXES", "SEGS",     "SSECTORS",
      "NODES",  "SECTORS",  "REJECT",   "BLOCKMAP", "BEHAVIOR", "SCRIPTS"};
  return kNames.contains(n);
}

std::vector<std::string> list_levels(const WadFile& wad) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 1 < wad.lumps.size(); ++i) {
    const std::string n = wad.lumps[i].name_str();
    if (is_level_marker_name(n) && wad.lumps[i + 1].name_str() == "THINGS") out.push_back(n);
  }
  return out;
}

WadLevel extract_level(const WadFile& wad, std::string_view marker) {
  std::optional<std::size_t> at;
  for (std::size_t i = 0; i < wad.lumps.size(); ++i) {
    if (wad.lumps[i].name_str() == marker) {
      // Prefer a marker that is actually followed by level data.
      if (i + 1 < wad.lumps.size() && wad.lumps[i + 1].name_str() == "THINGS") {
        at = i;
        break;
      }
      if (!at) at = i;
    }
  }
  if (!at) throw Error(Errc::MissingLump, "level marker " + std::string(marker));

  const Lump* things = nullptr;
  const Lump* vertexes = nullptr;
  const Lump* linedefs = nullptr;
  const Lump* sidedefs = nullptr;
  const Lump* sectors = nullptr;
  WadLevel level;
  level.name = std::string(marker);
  for (std::size_t i = *at + 1; i < wad.lumps.size(); ++i) {
    const Lump& l = wad.lumps[i];
    const std::string n = l.name_str();
    if (!is_level_lump_name(n)) break;
    if (n == "THINGS" && !things) things = &l;
    else if (n == "VERTEXES" && !vertexes) vertexes = &l;
    else if (n == "LINEDEFS" && !linedefs) linedefs = &l;
    else if (n == "SIDEDEFS" && !sidedefs) sidedefs = &l;
    else if (n == "SECTORS" && !sectors) sectors = &l;
    else level.extra_lumps.emplace_back(n, l.data);
  }
  auto require = [&](const Lump* l, const char* name) {
    if (!l) throw Error(Errc::MissingLump, std::string(name) + " for level " + level.name);
  };
  require(things, "THINGS");
  require(vertexes, "VERTEXES");
  require(linedefs, "LINEDEFS");
  require(sidedefs, "SIDEDEFS");
  require(sectors, "SECTORS");

  using Span = std::span<const std::uint8_t>;
  level.things = decode_records<Thing>(*things, kThingSize, [](Span b, std::size_t a) {
    return Thing{read_i16(b, a), read_i16(b, a + 2), read_i16(b, a + 4), read_i16(b, a + 6),
                 read_u16(b, a + 8)};
  });
  level.vertexes = decode_records<Vertex>(*vertexes, kVertexSize, [](Span b, std::size_t a) {
    return Vertex{read_i16(b, a), read_i16(b, a + 2)};
  });
  level.linedefs = decode_records<Linedef>(*linedefs, kLinedefSize, [](Span b, std::size_t a) {
    Linedef d;
    d.start = read_u16(b, a);
    d.end = read_u16(b, a + 2);
    d.flags = read_u16(b, a + 4);
    d.special = read_i16(b, a + 6);
    d.tag = read_i16(b, a + 8);
    d.right = side_from_disk(read_u16(b, a + 10));
    d.left = side_from_disk(read_u16(b, a + 12));
    return d;
  });
  level.sidedefs = decode_records<Sidedef>(*sidedefs, kSidedefSize, [](Span b, std::size_t a) {
    Sidedef s;
    s.x_off = read_i16(b, a);
    s.y_off = read_i16(b, a + 2);
    s.upper = read_name(b, a + 4);
    s.lower = read_name(b, a + 12);
    s.middle = read_name(b, a + 20);
    s.sector = read_u16(b, a + 28);
    return s;
  });
  level.sectors = decode_records<Sector>(*sectors, kSectorSize, [](Span b, std::size_t a) {
    Sector s;
    s.floor_height = read_i16(b, a);
    s.ceiling_height = read_i16(b, a + 2);
    s.floor_tex = read_name(b, a + 4);
    s.ceiling_tex = read_name(b, a + 12);
    s.light = read_i16(b, a + 20);
    s.special = read_i16(b, a + 22);
    s.tag = read_i16(b, a + 24);
    return s;
  });
  return level;
}

Bytes encode_things(std::span<const Thing> v) {
  Bytes out;
  out.reserve(v.size() * kThingSize);
  for (const auto& t : v) {
    push_i16(out, t.x);
    push_i16(out, t.y);
    push_i16(out, t.angle);
    push_i16(out, t.type);
    push_u16(out, t.flags);
  }
  return out;
}

Bytes encode_vertexes(std::span<const Vertex> v) {
  Bytes out;
  out.reserve(v.size() * kVertexSize);
  for (const auto& p : v) {
    push_i16(out, p.x);
    push_i16(out, p.y);
  }
  return out;
}

Bytes encode_linedefs(std::span<const Linedef> v) {
  Bytes out;
  out.reserve(v.size() * kLinedefSize);
  for (const auto& d : v) {
    push_u16(out, d.start);
    push_u16(out, d.end);
    push_u16(out, d.flags);
    push_i16(out, d.special);
    push_i16(out, d.tag);
    push_u16(out, side_to_disk(d.right));
    push_u16(out, side_to_disk(d.left));
  }
  return out;
}

Bytes encode_sidedefs(std::span<const Sidedef> v) {
  Bytes out;
  out.reserve(v.size() * kSidedefSize);
  for (const auto& s : v) {
    push_i16(out, s.x_off);
    push_i16(out, s.y_off);
    push_name(out, s.upper);
    push_name(out, s.lower);
    push_name(out, s.middle);
    push_u16(out, s.sector);
  }
  return out;
}

Bytes encode_sectors(std::span<const Sector> v) {
  Bytes out;
  out.reserve(v.size() * kSectorSize);
  for (const auto& s : v) {
    push_i16(out, s.floor_height);
    push_i16(out, s.ceiling_height);
    push_name(out, s.floor_tex);
    push_name(out, s.ceiling_tex);
    push_i16(out, s.light);
    push_i16(out, s.special);
    push_i16(out, s.tag);
  }
  return out;
}

std::vector<std::pair<std::string, Bytes>> level_lumps(const WadLevel& level) {
  std::vector<std::pair<std::string, Bytes>> out;
  out.emplace_back(level.name, Bytes{});
  out.emplace_back("THINGS", encode_things(level.things));
  out.emplace_back("LINEDEFS", encode_linedefs(level.linedefs));
  out.emplace_back("SIDEDEFS", encode_sidedefs(level.sidedefs));
  out.emplace_back("VERTEXES", encode_vertexes(level.vertexes));
  auto emit_extra = [&](std::string_view name) {
    for (const auto& [n, data] : level.extra_lumps) {
      if (n == name) out.emplace_back(n, data);
    }
  };
  emit_extra("SEGS");
  emit_extra("SSECTORS");
  emit_extra("NODES");
  out.emplace_back("SECTORS", encode_sectors(level.sectors));
  emit_extra("REJECT");
  emit_extra("BLOCKMAP");
  static const std::set<std::string_view> kPlaced = {"SEGS", "SSECTORS", "NODES", "REJECT",
                                                     "BLOCKMAP"};
  for (const auto& [n, data] : level.extra_lumps) {
    if (!kPlaced.contains(n)) out.emplace_back(n, data);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view defect_name(DefectKind kind) noexcept {
  switch (kind) {
    case DefectKind::DanglingVertex: return "DanglingVertex";
    case DefectKind::DanglingSidedef: return "DanglingSidedef";
    case DefectKind::DanglingSector: return "DanglingSector";
    case DefectKind::MissingRightSidedef: return "MissingRightSidedef";
    case DefectKind::ZeroLengthLinedef: return "ZeroLengthLinedef";
    case DefectKind::MissingPlayerStart: return "MissingPlayerStart";
  }
  return "Unknown";
}

std::size_t ValidationReport::count(DefectKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(defects.begin(), defects.end(), [&](const Defect& d) { return d.kind == kind; }));
}

ValidationReport validate_level(const WadLevel& level) {
  ValidationReport r;
  const std::size_t nv = level.vertexes.size();
  const std::size_t ns = level.sidedefs.size();
  for (std::size_t i = 0; i < level.linedefs.size(); ++i) {
    const Linedef& d = level.linedefs[i];
    const bool start_ok = d.start < nv;
    const bool end_ok = d.end < nv;
    if (!start_ok || !end_ok) {
      r.defects.push_back({DefectKind::DanglingVertex, i,
                           "linedef " + std::to_string(i) + " references a missing vertex"});
    } else {
      const Vertex& a = level.vertexes[d.start];
      const Vertex& b = level.vertexes[d.end];
      if (a.x == b.x && a.y == b.y) {
        r.defects.push_back({DefectKind::ZeroLengthLinedef, i,
                             "linedef " + std::to_string(i) + " has zero length"});
      }
    }
    if (!d.right) {
      r.defects.push_back({DefectKind::MissingRightSidedef, i,
                           "linedef " + std::to_string(i) + " has no right sidedef"});
    } else if (*d.right >= ns) {
      r.defects.push_back({DefectKind::DanglingSidedef, i,
                           "linedef " + std::to_string(i) + " right sidedef out of range"});
    }
    if (d.left && *d.left >= ns) {
      r.defects.push_back({DefectKind::DanglingSidedef, i,
                           "linedef " + std::to_string(i) + " left sidedef out of range"});
    }
  }
  for (std::size_t i = 0; i < ns; ++i) {
    if (level.sidedefs[i].sector >= level.sectors.size()) {
      r.defects.push_back({DefectKind::DanglingSector, i,
                           "sidedef " + std::to_string(i) + " references a missing sector"});
    }
  }
  const bool has_start = std::any_of(level.things.begin(), level.things.end(),
                                     [](const Thing& t) { return t.type == 1; });
  if (!has_start) r.defects.push_back({DefectKind::MissingPlayerStart, 0, "no player 1 start"});
  return r;
}

}  // namespace doomgan
