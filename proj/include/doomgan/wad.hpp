#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace doomgan {

using Bytes = std::vector<std::uint8_t>;

// Raw 8-byte lump/texture name, zero padded. Bytes after the first NUL are
// kept as-is so that re-encoding is byte-exact.
using Name8 = std::array<char, 8>;

Name8 make_name8(std::string_view text);  // throws Errc::NameTooLong
std::string name8_str(const Name8& n);   // text up to the first NUL

enum class WadKind { IWAD, PWAD };

struct Lump {
  Name8 name{};
  std::uint32_t offset = 0;
  Bytes data;

  std::string name_str() const { return name8_str(name); }
  std::uint32_t size() const { return static_cast<std::uint32_t>(data.size()); }
  bool operator==(const Lump&) const = default;
};

// Bytes of the source file that belong to no lump, the header or the
// directory. Only populated by parse_wad; keeps write_wad byte-exact.
struct SlackRange {
  std::uint32_t offset = 0;
  Bytes data;
  bool operator==(const SlackRange&) const = default;
};

struct WadFile {
  WadKind kind = WadKind::PWAD;
  std::vector<Lump> lumps;  // directory order
  std::uint32_t directory_offset = 12;
  std::vector<SlackRange> slack;

  std::optional<std::size_t> find(std::string_view name, std::size_t from = 0) const;
  bool operator==(const WadFile&) const = default;
};

// Builds a WadFile with the canonical layout: payloads contiguous from byte
// 12 in directory order, directory trailing, no slack.
WadFile make_wad(WadKind kind, std::vector<std::pair<std::string, Bytes>> lumps);

// Recomputes offsets and directory position to the canonical layout.
void pack_canonical(WadFile& wad);

WadFile parse_wad(std::span<const std::uint8_t> bytes);
Bytes write_wad(const WadFile& wad);

// ---------------------------------------------------------------------------
// Level records

struct Thing {
  std::int16_t x = 0, y = 0;
  std::int16_t angle = 0;
  std::int16_t type = 0;
  std::uint16_t flags = 0;
  bool operator==(const Thing&) const = default;
};

struct Vertex {
  std::int16_t x = 0, y = 0;
  bool operator==(const Vertex&) const = default;
};

namespace linedef_flags {
inline constexpr std::uint16_t kImpassable = 0x0001;
inline constexpr std::uint16_t kTwoSided = 0x0004;
}  // namespace linedef_flags

struct Linedef {
  std::uint16_t start = 0, end = 0;
  std::uint16_t flags = 0;
  std::int16_t special = 0;
  std::int16_t tag = 0;
  std::optional<std::uint16_t> right;  // 0xFFFF on disk = absent
  std::optional<std::uint16_t> left;
  bool operator==(const Linedef&) const = default;
};

struct Sidedef {
  std::int16_t x_off = 0, y_off = 0;
  Name8 upper{}, lower{}, middle{};
  std::uint16_t sector = 0;
  bool operator==(const Sidedef&) const = default;
};

struct Sector {
  std::int16_t floor_height = 0, ceiling_height = 0;
  Name8 floor_tex{}, ceiling_tex{};
  std::int16_t light = 0, special = 0, tag = 0;
  bool operator==(const Sector&) const = default;
};

struct WadLevel {
  std::string name;
  std::vector<Thing> things;
  std::vector<Vertex> vertexes;
  std::vector<Linedef> linedefs;
  std::vector<Sidedef> sidedefs;
  std::vector<Sector> sectors;
  // SEGS, SSECTORS, NODES, REJECT, BLOCKMAP, ... in source order.
  std::vector<std::pair<std::string, Bytes>> extra_lumps;
  bool operator==(const WadLevel&) const = default;
};

inline constexpr std::size_t kThingSize = 10;
inline constexpr std::size_t kVertexSize = 4;
inline constexpr std::size_t kLinedefSize = 14;
inline constexpr std::size_t kSidedefSize = 30;
inline constexpr std::size_t kSectorSize = 26;

bool is_level_marker_name(std::string_view name);
bool is_level_lump_name(std::string_view name);

// Markers (ExMy / MAPnn) that are immediately followed by a THINGS lump.
std::vector<std::string> list_levels(const WadFile& wad);

WadLevel extract_level(const WadFile& wad, std::string_view marker);

// Marker plus data lumps in the engine's conventional order.
std::vector<std::pair<std::string, Bytes>> level_lumps(const WadLevel& level);

Bytes encode_things(std::span<const Thing> v);
Bytes encode_vertexes(std::span<const Vertex> v);
Bytes encode_linedefs(std::span<const Linedef> v);
Bytes encode_sidedefs(std::span<const Sidedef> v);
Bytes encode_sectors(std::span<const Sector> v);

// ---------------------------------------------------------------------------
// Validation

enum class DefectKind {
  DanglingVertex,
  DanglingSidedef,
  DanglingSector,
  MissingRightSidedef,
  ZeroLengthLinedef,
  MissingPlayerStart,
};

std::string_view defect_name(DefectKind kind) noexcept;

struct Defect {
  DefectKind kind;
  std::size_t index = 0;  // offending record (linedef/sidedef), 0 for level-wide
  std::string detail;
};

struct ValidationReport {
  std::vector<Defect> defects;
  bool ok() const { return defects.empty(); }
  std::size_t count(DefectKind kind) const;
};

ValidationReport validate_level(const WadLevel& level);

}  // namespace doomgan
