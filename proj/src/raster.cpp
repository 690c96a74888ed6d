#include "doomgan/raster.hpp"

#include "doomgan/distance.hpp"
#include "doomgan/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>

namespace doomgan {

namespace {

double round_half_away(double v) { return v < 0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

struct LatticePoint {
  long x = 0, y = 0;
  auto operator<=>(const LatticePoint&) const = default;
};

struct Edge {
  LatticePoint a, b;
};

// 8-connected integer line between two pixels.
template <typename Plot>
void trace_line(int x0, int y0, int x1, int y1, Plot plot) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    plot(x0, y0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

// Pixels running along the segment a->b, half a pixel to its right (in the
// map frame), i.e. the inner boundary row of the sector on that side.
template <typename Plot>
void trace_side(double ax, double ay, double bx, double by, bool right_side, Plot plot) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return;
  const double ux = dx / len, uy = dy / len;
  // Lattice frame has y down, so the map-frame right normal is (-uy, ux).
  double nx = -uy, ny = ux;
  if (!right_side) {
    nx = -nx;
    ny = -ny;
  }
  const double sx = ax + 0.5 * nx + 0.5 * ux;
  const double sy = ay + 0.5 * ny + 0.5 * uy;
  const double ex = bx + 0.5 * nx - 0.5 * ux;
  const double ey = by + 0.5 * ny - 0.5 * uy;
  trace_line(static_cast<int>(std::floor(sx)), static_cast<int>(std::floor(sy)),
             static_cast<int>(std::floor(ex)), static_cast<int>(std::floor(ey)), plot);
}

}  // namespace

std::string_view map_type_name(MapType t) noexcept {
  switch (t) {
    case MapType::Floor: return "floor";
    case MapType::Wall: return "wall";
    case MapType::Height: return "height";
    case MapType::Things: return "things";
    case MapType::Triggers: return "triggers";
    case MapType::Rooms: return "rooms";
  }
  return "unknown";
}

const Image& LevelImageSet::channel(MapType t) const {
  switch (t) {
    case MapType::Floor: return floor;
    case MapType::Wall: return wall;
    case MapType::Height: return height;
    case MapType::Things: return things;
    case MapType::Triggers: return triggers;
    case MapType::Rooms: return rooms;
  }
  return floor;
}

Image& LevelImageSet::channel(MapType t) {
  return const_cast<Image&>(std::as_const(*this).channel(t));
}

std::uint8_t height_to_gray(int h, int hmin, int hmax) {
  if (hmax == hmin) return 128;
  const double t = static_cast<double>(h - hmin) / static_cast<double>(hmax - hmin);
  return static_cast<std::uint8_t>(1 + round_half_away(254.0 * std::clamp(t, 0.0, 1.0)));
}

double gray_to_height(std::uint8_t v, int hmin, int hmax) {
  if (hmax == hmin || v == 0) return hmin;
  return hmin + (static_cast<double>(v) - 1.0) / 254.0 * (hmax - hmin);
}

// Narrow passages put walls on both of their sides, which can fill 2x2
// blocks. Each such block loses one pixel, preferring one with no empty
// 4-neighbour, else its bottom-right pixel, scanning row-major.
static void thin_walls(Image& wall, const Image& floor) {
  auto on_boundary = [&](int x, int y) {
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (!floor.in_bounds(nx, ny) || floor.at(nx, ny) == 0) return true;
    }
    return false;
  };
  for (int y = 0; y + 1 < wall.height; ++y)
    for (int x = 0; x + 1 < wall.width; ++x) {
      if (!(wall.at(x, y) && wall.at(x + 1, y) && wall.at(x, y + 1) && wall.at(x + 1, y + 1))) continue;
      std::pair<int, int> victim{x + 1, y + 1};
      for (auto [cx, cy] : {std::pair{x, y}, {x + 1, y}, {x, y + 1}, {x + 1, y + 1}})
        if (!on_boundary(cx, cy)) {
          victim = {cx, cy};
          break;
        }
      wall.at(victim.first, victim.second) = 0;
    }
}

LevelImageSet rasterize_level(const WadLevel& level, const RasterConfig& cfg) {
  const int W = cfg.width;
  const int H = cfg.height;
  LevelImageSet out;
  for (MapType t : kAllMapTypes) out.channel(t) = Image(W, H);
  out.meta.scale = cfg.scale;

  // Bounding box over vertices used by linedefs.
  double minx = std::numeric_limits<double>::infinity(), maxx = -minx;
  double miny = minx, maxy = -minx;
  for (const auto& d : level.linedefs) {
    for (auto vi : {d.start, d.end}) {
      const Vertex& v = level.vertexes.at(vi);
      minx = std::min<double>(minx, v.x);
      maxx = std::max<double>(maxx, v.x);
      miny = std::min<double>(miny, v.y);
      maxy = std::max<double>(maxy, v.y);
    }
  }
  if (level.linedefs.empty()) {
    minx = maxx = miny = maxy = 0.0;
  }
  const double cx = cfg.center ? (*cfg.center)[0] : 0.5 * (minx + maxx);
  const double cy = cfg.center ? (*cfg.center)[1] : 0.5 * (miny + maxy);
  out.meta.origin_x = cx;
  out.meta.origin_y = cy;

  const long half_w = W / 2;
  const long half_h = H / 2;
  auto to_lattice = [&](const Vertex& v) {
    return LatticePoint{half_w + static_cast<long>(round_half_away((v.x - cx) / cfg.scale)),
                        half_h - static_cast<long>(round_half_away((v.y - cy) / cfg.scale))};
  };
  std::vector<LatticePoint> lat(level.vertexes.size());
  for (std::size_t i = 0; i < level.vertexes.size(); ++i) lat[i] = to_lattice(level.vertexes[i]);
  for (const auto& d : level.linedefs) {
    for (auto vi : {d.start, d.end}) {
      const auto& p = lat[vi];
      if (p.x < 0 || p.y < 0 || p.x > W || p.y > H) {
        throw Error(Errc::DoesNotFit, "level " + level.name + " exceeds the " + std::to_string(W) +
                                          "x" + std::to_string(H) + " canvas at scale " +
                                          std::to_string(cfg.scale));
      }
    }
  }

  // Sector boundary edges from sidedef ownership.
  const std::size_t nsec = level.sectors.size();
  std::vector<std::vector<Edge>> sector_edges(nsec);
  auto side_sector = [&](const std::optional<std::uint16_t>& s) -> std::optional<std::size_t> {
    if (!s) return std::nullopt;
    return level.sidedefs.at(*s).sector;
  };
  for (const auto& d : level.linedefs) {
    const auto rs = side_sector(d.right);
    const auto ls = side_sector(d.left);
    if (rs && ls && *rs == *ls) continue;
    const Edge e{lat[d.start], lat[d.end]};
    if (e.a == e.b) continue;
    if (rs) sector_edges.at(*rs).push_back(e);
    if (ls) sector_edges.at(*ls).push_back(e);
  }

  std::vector<int> owner(static_cast<std::size_t>(W) * H, -1);
  std::vector<double> xs;
  for (std::size_t s = 0; s < nsec; ++s) {
    const auto& edges = sector_edges[s];
    if (edges.empty()) continue;
    std::map<LatticePoint, int> degree;
    for (const auto& e : edges) {
      ++degree[e.a];
      ++degree[e.b];
    }
    for (const auto& [p, deg] : degree) {
      if (deg % 2 != 0) {
        throw Error(Errc::UnclosedSector, "sector " + std::to_string(s) + " of level " +
                                              level.name + " has an open boundary");
      }
    }
    for (int row = 0; row < H; ++row) {
      const double yc = row + 0.5;
      xs.clear();
      for (const auto& e : edges) {
        const bool a_below = static_cast<double>(e.a.y) <= yc;
        const bool b_below = static_cast<double>(e.b.y) <= yc;
        if (a_below == b_below) continue;
        const double t = (yc - static_cast<double>(e.a.y)) / static_cast<double>(e.b.y - e.a.y);
        xs.push_back(static_cast<double>(e.a.x) + t * static_cast<double>(e.b.x - e.a.x));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        const int from = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
        const int to = std::min(W, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
        for (int col = from; col < to; ++col) {
          int& o = owner[static_cast<std::size_t>(row) * W + col];
          if (o < 0) o = static_cast<int>(s);
        }
      }
    }
  }

  // Floor and height.
  int hmin = std::numeric_limits<int>::max(), hmax = std::numeric_limits<int>::min();
  for (int o : owner) {
    if (o < 0) continue;
    hmin = std::min<int>(hmin, level.sectors[o].floor_height);
    hmax = std::max<int>(hmax, level.sectors[o].floor_height);
  }
  if (hmin > hmax) hmin = hmax = 0;
  out.meta.hmin = hmin;
  out.meta.hmax = hmax;
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] < 0) continue;
    out.floor.px[i] = 255;
    out.height.px[i] = height_to_gray(level.sectors[owner[i]].floor_height, hmin, hmax);
  }

  auto vertex_xy = [&](std::uint16_t vi) {
    return std::pair<double, double>{static_cast<double>(lat[vi].x), static_cast<double>(lat[vi].y)};
  };

  // Walls: one-sided linedefs.
  for (const auto& d : level.linedefs) {
    if (d.right.has_value() == d.left.has_value()) continue;
    const auto [ax, ay] = vertex_xy(d.start);
    const auto [bx, by] = vertex_xy(d.end);
    trace_side(ax, ay, bx, by, d.right.has_value(), [&](int x, int y) {
      if (out.wall.in_bounds(x, y)) out.wall.at(x, y) = 255;
    });
  }
  thin_walls(out.wall, out.floor);

  // Things: single pixels, highest-priority category wins.
  std::vector<int> thing_rank(static_cast<std::size_t>(W) * H, std::numeric_limits<int>::max());
  for (const auto& t : level.things) {
    const double px = half_w + (t.x - cx) / cfg.scale;
    const double py = half_h - (t.y - cy) / cfg.scale;
    const int x = static_cast<int>(std::floor(px));
    const int y = static_cast<int>(std::floor(py));
    if (!out.floor.in_bounds(x, y) || out.floor.at(x, y) == 0) continue;
    const auto cat = cfg.palette.category_of(t.type);
    const int rank = static_cast<int>(cat);
    int& cur = thing_rank[static_cast<std::size_t>(y) * W + x];
    if (rank < cur) {
      cur = rank;
      out.things.at(x, y) = cfg.palette.gray[static_cast<std::size_t>(cat)];
    }
  }

  // Triggers: activating linedefs and the centroid pixel of each tagged sector.
  std::vector<std::int64_t> sum_x(nsec, 0), sum_y(nsec, 0), count(nsec, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int o = owner[static_cast<std::size_t>(y) * W + x];
      if (o < 0) continue;
      sum_x[o] += x;
      sum_y[o] += y;
      ++count[o];
    }
  }
  auto centroid_pixel = [&](std::size_t s) -> std::optional<std::pair<int, int>> {
    if (count[s] == 0) return std::nullopt;
    const double mx = static_cast<double>(sum_x[s]) / count[s];
    const double my = static_cast<double>(sum_y[s]) / count[s];
    std::optional<std::pair<int, int>> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (owner[static_cast<std::size_t>(y) * W + x] != static_cast<int>(s)) continue;
        const double dd = (x - mx) * (x - mx) + (y - my) * (y - my);
        if (dd < best_d) {
          best_d = dd;
          best = std::pair{x, y};
        }
      }
    }
    return best;
  };
  auto mark = [&](int x, int y, std::uint8_t v) {
    if (out.triggers.in_bounds(x, y)) out.triggers.at(x, y) = std::max(out.triggers.at(x, y), v);
  };
  for (const auto& d : level.linedefs) {
    const auto cat = trigger_category(d.special);
    if (!cat) continue;
    const std::uint8_t v = encode_trigger(*cat, d.tag);
    const auto [ax, ay] = vertex_xy(d.start);
    const auto [bx, by] = vertex_xy(d.end);
    trace_side(ax, ay, bx, by, d.right.has_value() || !d.left.has_value(),
               [&](int x, int y) { mark(x, y, v); });
    if (d.tag <= 0) continue;
    for (std::size_t s = 0; s < nsec; ++s) {
      if (level.sectors[s].tag != d.tag) continue;
      if (auto p = centroid_pixel(s)) mark(p->first, p->second, v);
    }
  }

  out.rooms = segment_rooms(out.floor);
  return out;
}

// ---------------------------------------------------------------------------
// Room segmentation

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

constexpr int kSeedMergeRadiusSq = 4;
constexpr int kMinRegionArea = 4;

// Splits every label into its 4-connected components; returns the count.
int split_components(std::vector<int>& labels, int w, int h) {
  std::vector<int> out(labels.size(), 0);
  int next = 0;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (labels[start] == 0 || out[start] != 0) continue;
    ++next;
    const int lab = labels[start];
    out[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
        const int q = n[1] * w + n[0];
        if (labels[q] == lab && out[q] == 0) {
          out[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  labels = std::move(out);
  return next;
}

}  // namespace

Image segment_rooms(const Image& floor) {
  const int w = floor.width, h = floor.height;
  Image result(w, h);
  if (floor.empty()) return result;
  const DistanceField dist = distance_transform(floor);
  const auto n = static_cast<std::size_t>(w) * h;
  auto is_floor = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && floor.at(x, y) != 0; };

  // Seeds: pixels whose distance is not exceeded by any 8-neighbor.
  std::vector<int> seeds;
  std::vector<int> seed_index(n, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!is_floor(x, y)) continue;
      const auto d = dist.sq_at(x, y);
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && is_floor(x + dx, y + dy) && dist.sq_at(x + dx, y + dy) > d) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) {
        seed_index[static_cast<std::size_t>(y) * w + x] = static_cast<int>(seeds.size());
        seeds.push_back(y * w + x);
      }
    }
  }

  UnionFind uf(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const int x = seeds[i] % w, y = seeds[i] / w;
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        if (dx * dx + dy * dy > kSeedMergeRadiusSq) continue;
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int j = seed_index[static_cast<std::size_t>(ny) * w + nx];
        if (j >= 0) uf.unite(static_cast<int>(i), j);
      }
    }
  }

  std::vector<int> labels(n, 0);
  std::map<int, int> root_label;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const int r = uf.find(static_cast<int>(i));
    auto [it, inserted] = root_label.try_emplace(r, static_cast<int>(root_label.size()) + 1);
    labels[seeds[i]] = it->second;
  }

  // Priority flood in descending distance; ties resolved first-in-first-out.
  using Entry = std::tuple<std::int64_t, std::int64_t, int, int>;  // -dist, seq, pixel, label
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::int64_t seq = 0;
  auto push_neighbors = [&](int p, int lab) {
    const int x = p % w, y = p / w;
    const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
    for (const auto& q : nbr) {
      if (!is_floor(q[0], q[1])) continue;
      const int qi = q[1] * w + q[0];
      if (labels[qi] != 0) continue;
      queue.emplace(-dist.sq[qi], seq++, qi, lab);
    }
  };
  for (int s : seeds) push_neighbors(s, labels[s]);
  while (!queue.empty()) {
    const auto [neg_d, order, p, lab] = queue.top();
    queue.pop();
    if (labels[p] != 0) continue;
    labels[p] = lab;
    push_neighbors(p, lab);
  }

  int count = split_components(labels, w, h);

  // Fold regions below the minimum area into the neighbor sharing the
  // longest boundary (ties -> smaller label).
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> area(count + 1, 0);
    for (int l : labels) area[l]++;
    for (int lab = 1; lab <= count; ++lab) {
      if (area[lab] == 0 || area[lab] >= kMinRegionArea) continue;
      std::map<int, int> shared;
      for (int p = 0; p < w * h; ++p) {
        if (labels[p] != lab) continue;
        const int x = p % w, y = p / w;
        const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& q : nbr) {
          if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
          const int other = labels[q[1] * w + q[0]];
          if (other != 0 && other != lab) shared[other]++;
        }
      }
      if (shared.empty()) continue;
      int target = shared.begin()->first;
      for (const auto& [other, len] : shared) {
        if (len > shared[target]) target = other;
      }
      for (int& l : labels) {
        if (l == lab) l = target;
      }
      area[target] += area[lab];
      area[lab] = 0;
      changed = true;
    }
  }

  // Consecutive labels in raster order of first appearance.
  std::map<int, int> relabel;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] == 0) continue;
    auto [it, inserted] = relabel.try_emplace(labels[p], static_cast<int>(relabel.size()) + 1);
    result.px[p] = static_cast<std::uint8_t>(std::min(it->second, 255));
  }
  return result;
}

int room_count(const Image& rooms) {
  int r = 0;
  for (auto v : rooms.px) r = std::max<int>(r, v);
  return r;
}

// ---------------------------------------------------------------------------

void save_image_set(const LevelImageSet& set, const std::filesystem::path& dir, std::string_view stem) {
  std::filesystem::create_directories(dir);
  for (MapType t : kAllMapTypes) {
    write_png(dir / (std::string(stem) + "_" + std::string(map_type_name(t)) + ".png"), set.channel(t));
  }
  nlohmann::json j = {{"origin", {set.meta.origin_x, set.meta.origin_y}},
                      {"scale", set.meta.scale},
                      {"hmin", set.meta.hmin},
                      {"hmax", set.meta.hmax}};
  std::ofstream(dir / (std::string(stem) + "_meta.json")) << j.dump(2) << "\n";
}

LevelImageSet load_image_set(const std::filesystem::path& dir, std::string_view stem) {
  LevelImageSet set;
  for (MapType t : kAllMapTypes) {
    set.channel(t) = read_png(dir / (std::string(stem) + "_" + std::string(map_type_name(t)) + ".png"));
    if (set.channel(t).width != set.floor.width || set.channel(t).height != set.floor.height) {
      throw Error(Errc::SizeMismatch, "image set " + std::string(stem) + " has mixed dimensions");
    }
  }
  const auto meta_path = dir / (std::string(stem) + "_meta.json");
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    const auto j = nlohmann::json::parse(in);
    set.meta.origin_x = j.at("origin").at(0).get<double>();
    set.meta.origin_y = j.at("origin").at(1).get<double>();
    set.meta.scale = j.at("scale").get<double>();
    set.meta.hmin = j.at("hmin").get<int>();
    set.meta.hmax = j.at("hmax").get<int>();
  }
  return set;
}

}  // namespace doomgan
