#include "doomgan/reconstruct.hpp"

#include "doomgan/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>

namespace doomgan {

void ReconstructionConfig::validate() const {
  if (floor_threshold <= 0 || floor_threshold >= 255)
    throw Error(Errc::InvalidConfig, "floor threshold must lie in (0, 255)");
  if (min_component_area < 0) throw Error(Errc::InvalidConfig, "negative minimum component area");
  if (height_levels < 1) throw Error(Errc::InvalidConfig, "height levels must be >= 1");
  if (!(simplify_tolerance >= 0.0)) throw Error(Errc::InvalidConfig, "negative simplification tolerance");
  if (!(scale > 0.0)) throw Error(Errc::InvalidConfig, "scale must be positive");
}

std::array<std::int16_t, kThingCategoryCount> ReconstructionConfig::load_default_types(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, path.string() + ": " + e.what());
  }
  std::array<std::int16_t, kThingCategoryCount> out = ReconstructionConfig{}.default_types;
  for (const auto& [name, id] : j.items()) {
    auto cat = thing_category_from_name(name);
    if (!cat) throw Error(Errc::Io, "unknown thing category " + name);
    out[static_cast<std::size_t>(*cat)] = id.get<std::int16_t>();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> kmeans_1d(std::span<const double> values, int k) {
  if (values.empty() || k < 1) return {};
  std::map<double, double> hist;
  for (double v : values) hist[v] += 1.0;
  std::vector<double> xs, ws;
  for (const auto& [v, w] : hist) {
    xs.push_back(v);
    ws.push_back(w);
  }
  const std::size_t m = xs.size();
  if (m <= static_cast<std::size_t>(k)) return xs;

  std::vector<double> sw(m + 1, 0.0), sx(m + 1, 0.0), sxx(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    sw[i + 1] = sw[i] + ws[i];
    sx[i + 1] = sx[i] + ws[i] * xs[i];
    sxx[i + 1] = sxx[i] + ws[i] * xs[i] * xs[i];
  }
  // Squared error of one cluster spanning distinct values [i, j).
  auto cost = [&](std::size_t i, std::size_t j) {
    double w = sw[j] - sw[i];
    double s = sx[j] - sx[i];
    return (sxx[j] - sxx[i]) - s * s / w;
  };
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t kk = static_cast<std::size_t>(k);
  std::vector<std::vector<double>> best(kk + 1, std::vector<double>(m + 1, inf));
  std::vector<std::vector<std::size_t>> split(kk + 1, std::vector<std::size_t>(m + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t c = 1; c <= kk; ++c)
    for (std::size_t j = c; j <= m; ++j)
      for (std::size_t i = c - 1; i < j; ++i) {
        if (best[c - 1][i] == inf) continue;
        double v = best[c - 1][i] + cost(i, j);
        if (v < best[c][j] - 1e-12 * std::max(1.0, std::abs(v))) {
          best[c][j] = v;
          split[c][j] = i;
        }
      }
  std::vector<double> centers;
  std::size_t j = m;
  for (std::size_t c = kk; c >= 1; --c) {
    std::size_t i = split[c][j];
    centers.push_back((sx[j] - sx[i]) / (sw[j] - sw[i]));
    j = i;
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

namespace {

// 4-connected components over pixels where member(x, y) holds.
template <typename Pred, typename Same>
std::vector<int> label_components(int w, int h, Pred member, Same same, int* count) {
  std::vector<int> lab(static_cast<std::size_t>(w) * h, 0);
  int next = 0;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int idx = y * w + x;
      if (lab[idx] != 0 || !member(x, y)) continue;
      lab[idx] = ++next;
      stack.push_back(idx);
      while (!stack.empty()) {
        int p = stack.back();
        stack.pop_back();
        int px = p % w, py = p / w;
        const int nx[4] = {px + 1, px - 1, px, px};
        const int ny[4] = {py, py, py + 1, py - 1};
        for (int d = 0; d < 4; ++d) {
          if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
          int q = ny[d] * w + nx[d];
          if (lab[q] != 0 || !member(nx[d], ny[d]) || !same(px, py, nx[d], ny[d])) continue;
          lab[q] = next;
          stack.push_back(q);
        }
      }
    }
  if (count) *count = next;
  return lab;
}

std::uint8_t nearest_of(std::uint8_t v, const std::vector<std::uint8_t>& sorted_choices) {
  std::uint8_t best = sorted_choices.front();
  int best_d = std::abs(int(v) - int(best));
  for (std::uint8_t c : sorted_choices) {
    int d = std::abs(int(v) - int(c));
    if (d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

LevelImageSet quantize_images(const LevelImageSet& imgs, const ReconstructionConfig& cfg) {
  cfg.validate();
  const int w = imgs.floor.width, h = imgs.floor.height;
  LevelImageSet out = imgs;

  Image floor(w, h);
  for (std::size_t i = 0; i < floor.size(); ++i) floor.px[i] = imgs.floor.px[i] >= cfg.floor_threshold ? 255 : 0;
  int ncomp = 0;
  auto comp = label_components(
      w, h, [&](int x, int y) { return floor.at(x, y) != 0; }, [](int, int, int, int) { return true; },
      &ncomp);
  std::vector<int> area(static_cast<std::size_t>(ncomp) + 1, 0);
  for (int c : comp) ++area[static_cast<std::size_t>(c)];
  for (std::size_t i = 0; i < floor.size(); ++i)
    if (comp[i] != 0 && area[static_cast<std::size_t>(comp[i])] < cfg.min_component_area) floor.px[i] = 0;
  out.floor = floor;

  Image wall(w, h);
  if (imgs.wall.size() == floor.size())
    for (std::size_t i = 0; i < wall.size(); ++i) wall.px[i] = imgs.wall.px[i] >= cfg.floor_threshold ? 255 : 0;
  out.wall = wall;

  Image height(w, h);
  std::vector<double> hv;
  for (std::size_t i = 0; i < floor.size(); ++i)
    if (floor.px[i]) hv.push_back(std::max<double>(1.0, imgs.height.px[i]));
  std::vector<double> centers = kmeans_1d(hv, cfg.height_levels);
  for (std::size_t i = 0; i < floor.size(); ++i) {
    if (!floor.px[i]) continue;
    double v = std::max<double>(1.0, imgs.height.px[i]);
    double best = centers.front();
    for (double c : centers)
      if (std::abs(v - c) < std::abs(v - best)) best = c;
    height.px[i] = static_cast<std::uint8_t>(std::clamp(std::floor(best + 0.5), 1.0, 255.0));
  }
  out.height = height;

  std::vector<std::uint8_t> choices{0};
  for (auto g : cfg.palette.gray) choices.push_back(g);
  std::sort(choices.begin(), choices.end());
  Image things(w, h);
  if (imgs.things.size() == floor.size())
    for (std::size_t i = 0; i < things.size(); ++i)
      things.px[i] = floor.px[i] ? nearest_of(imgs.things.px[i], choices) : 0;
  out.things = things;
  return out;
}

std::vector<int> plateau_labels(const Image& floor, const Image& height, int* region_count) {
  const int w = floor.width, h = floor.height;
  if (height.width != w || height.height != h) throw Error(Errc::SizeMismatch, "floor and height sizes differ");
  return label_components(
      w, h, [&](int x, int y) { return floor.at(x, y) != 0; },
      [&](int ax, int ay, int bx, int by) { return height.at(ax, ay) == height.at(bx, by); }, region_count);
}

// ---------------------------------------------------------------------------

namespace {

struct Seg {
  LatticePoint a, b;
};

long long cross(const LatticePoint& o, const LatticePoint& a, const LatticePoint& b) {
  return static_cast<long long>(a[0] - o[0]) * (b[1] - o[1]) -
         static_cast<long long>(a[1] - o[1]) * (b[0] - o[0]);
}

int sgn(long long v) { return (v > 0) - (v < 0); }

bool on_segment(const LatticePoint& a, const LatticePoint& b, const LatticePoint& p) {
  return cross(a, b, p) == 0 && std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) &&
         std::min(a[1], b[1]) <= p[1] && p[1] <= std::max(a[1], b[1]);
}

bool intersects(const Seg& s, const Seg& t) {
  int d1 = sgn(cross(s.a, s.b, t.a)), d2 = sgn(cross(s.a, s.b, t.b));
  int d3 = sgn(cross(t.a, t.b, s.a)), d4 = sgn(cross(t.a, t.b, s.b));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && on_segment(s.a, s.b, t.a)) || (d2 == 0 && on_segment(s.a, s.b, t.b)) ||
         (d3 == 0 && on_segment(t.a, t.b, s.a)) || (d4 == 0 && on_segment(t.a, t.b, s.b));
}

// Two segments may meet only at one endpoint they share.
bool conflict(const Seg& s, const Seg& t) {
  if (std::max(s.a[0], s.b[0]) < std::min(t.a[0], t.b[0]) || std::max(t.a[0], t.b[0]) < std::min(s.a[0], s.b[0]) ||
      std::max(s.a[1], s.b[1]) < std::min(t.a[1], t.b[1]) || std::max(t.a[1], t.b[1]) < std::min(s.a[1], s.b[1]))
    return false;
  const LatticePoint* shared = nullptr;
  const LatticePoint *so = nullptr, *to = nullptr;
  if (s.a == t.a) { shared = &s.a; so = &s.b; to = &t.b; }
  else if (s.a == t.b) { shared = &s.a; so = &s.b; to = &t.a; }
  else if (s.b == t.a) { shared = &s.b; so = &s.a; to = &t.b; }
  else if (s.b == t.b) { shared = &s.b; so = &s.a; to = &t.a; }
  if (!shared) return intersects(s, t);
  if (*so == *to) return true;  // duplicate segment
  if (cross(*shared, *so, *to) != 0) return false;
  return on_segment(s.a, s.b, *to) || on_segment(t.a, t.b, *so);
}

double point_segment_distance(const LatticePoint& p, const LatticePoint& a, const LatticePoint& b) {
  double dx = b[0] - a[0], dy = b[1] - a[1];
  double len2 = dx * dx + dy * dy;
  double t = len2 == 0.0 ? 0.0 : std::clamp(((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2, 0.0, 1.0);
  double ex = a[0] + t * dx - p[0], ey = a[1] + t * dy - p[1];
  return std::sqrt(ex * ex + ey * ey);
}

void douglas_peucker(const std::vector<LatticePoint>& pts, std::size_t lo, std::size_t hi, double tol,
                     std::vector<char>& keep) {
  if (hi <= lo + 1) return;
  double best = -1.0;
  std::size_t at = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
    if (d > best) {
      best = d;
      at = i;
    }
  }
  if (best > tol) {
    keep[at] = 1;
    douglas_peucker(pts, lo, at, tol, keep);
    douglas_peucker(pts, at, hi, tol, keep);
  }
}

std::vector<LatticePoint> simplify_chain(const BoundaryChain& c, double tol) {
  const auto& p = c.pts;
  std::vector<char> keep(p.size(), 0);
  keep.front() = keep.back() = 1;
  if (c.closed) {
    std::size_t far = 0;
    double best = -1.0;
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
      double dx = p[i][0] - p[0][0], dy = p[i][1] - p[0][1];
      double d = dx * dx + dy * dy;
      if (d > best) {
        best = d;
        far = i;
      }
    }
    keep[far] = 1;
    douglas_peucker(p, 0, far, tol, keep);
    douglas_peucker(p, far, p.size() - 1, tol, keep);
  } else {
    douglas_peucker(p, 0, p.size() - 1, tol, keep);
  }
  std::vector<LatticePoint> out;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (keep[i]) out.push_back(p[i]);
  return out;
}

std::vector<Seg> segments_of(const std::vector<LatticePoint>& pts) {
  std::vector<Seg> s;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s.push_back({pts[i], pts[i + 1]});
  return s;
}

bool self_conflict(const std::vector<Seg>& segs) {
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j)
      if (conflict(segs[i], segs[j])) {
        // Consecutive segments share an endpoint by construction; conflict()
        // already allows that unless they fold back onto each other.
        return true;
      }
  return false;
}

}  // namespace

std::vector<BoundaryChain> boundary_chains(const std::vector<int>& labels, int w, int h, double tolerance) {
  if (labels.size() != static_cast<std::size_t>(w) * h) throw Error(Errc::SizeMismatch, "label grid size");
  auto cell = [&](int x, int y) { return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : labels[static_cast<std::size_t>(y) * w + x]; };
  const int cw = w + 1, ch = h + 1;
  // Direction order: +X, +Y, -X, -Y.
  const int DX[4] = {1, 0, -1, 0};
  const int DY[4] = {0, 1, 0, -1};
  // Edge from corner (X, Y) in direction d separates these two cells.
  auto edge_cells = [&](int X, int Y, int d) -> std::pair<int, int> {
    switch (d) {
      case 0: return {cell(X, Y - 1), cell(X, Y)};
      case 1: return {cell(X - 1, Y), cell(X, Y)};
      case 2: return {cell(X - 1, Y - 1), cell(X - 1, Y)};
      default: return {cell(X - 1, Y - 1), cell(X, Y - 1)};
    }
  };
  auto has_edge = [&](int X, int Y, int d) {
    int nx = X + DX[d], ny = Y + DY[d];
    if (nx < 0 || ny < 0 || nx > w || ny > h) return false;
    auto [a, b] = edge_cells(X, Y, d);
    return a != b;
  };
  // Right/left labels of a unit step, map frame.
  auto sides = [&](int X, int Y, int d) -> std::pair<int, int> {
    // Right normal in lattice coordinates is (-dy, dx).
    double mx = X + 0.5 * DX[d], my = Y + 0.5 * DY[d];
    double nx = -DY[d], ny = DX[d];
    int rx = static_cast<int>(std::floor(mx + 0.5 * nx)), ry = static_cast<int>(std::floor(my + 0.5 * ny));
    int lx = static_cast<int>(std::floor(mx - 0.5 * nx)), ly = static_cast<int>(std::floor(my - 0.5 * ny));
    return {cell(lx, ly), cell(rx, ry)};
  };

  std::vector<std::uint8_t> degree(static_cast<std::size_t>(cw) * ch, 0);
  for (int Y = 0; Y <= h; ++Y)
    for (int X = 0; X <= w; ++X)
      for (int d = 0; d < 4; ++d) degree[static_cast<std::size_t>(Y) * cw + X] += has_edge(X, Y, d);

  // visited[corner*4 + d] marks the unit edge leaving corner in direction d.
  std::vector<char> visited(static_cast<std::size_t>(cw) * ch * 4, 0);
  auto mark = [&](int X, int Y, int d) {
    visited[(static_cast<std::size_t>(Y) * cw + X) * 4 + d] = 1;
    int nx = X + DX[d], ny = Y + DY[d];
    visited[(static_cast<std::size_t>(ny) * cw + nx) * 4 + ((d + 2) % 4)] = 1;
  };
  auto is_visited = [&](int X, int Y, int d) { return visited[(static_cast<std::size_t>(Y) * cw + X) * 4 + d] != 0; };
  auto is_junction = [&](int X, int Y) { return degree[static_cast<std::size_t>(Y) * cw + X] != 2; };

  std::vector<BoundaryChain> chains;
  auto walk = [&](int X0, int Y0, int d0, bool loop) {
    BoundaryChain c;
    auto [l, r] = sides(X0, Y0, d0);
    c.left = l;
    c.right = r;
    c.closed = loop;
    std::vector<LatticePoint> raw{{X0, Y0}};
    int X = X0, Y = Y0, d = d0;
    while (true) {
      mark(X, Y, d);
      X += DX[d];
      Y += DY[d];
      raw.push_back({X, Y});
      if ((X == X0 && Y == Y0) || is_junction(X, Y)) break;
      int back = (d + 2) % 4;
      int nd = -1;
      for (int e = 0; e < 4; ++e)
        if (e != back && has_edge(X, Y, e)) nd = e;
      d = nd;
    }
    // Merge collinear runs.
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (i > 0 && i + 1 < raw.size()) {
        const auto& a = raw[i - 1];
        const auto& b = raw[i];
        const auto& n = raw[i + 1];
        if ((b[0] - a[0]) == (n[0] - b[0]) && (b[1] - a[1]) == (n[1] - b[1])) continue;
      }
      c.pts.push_back(raw[i]);
    }
    chains.push_back(std::move(c));
  };

  for (int Y = 0; Y <= h; ++Y)
    for (int X = 0; X <= w; ++X) {
      if (!is_junction(X, Y) || degree[static_cast<std::size_t>(Y) * cw + X] == 0) continue;
      for (int d = 0; d < 4; ++d)
        if (has_edge(X, Y, d) && !is_visited(X, Y, d)) walk(X, Y, d, false);
    }
  for (int Y = 0; Y <= h; ++Y)
    for (int X = 0; X <= w; ++X)
      for (int d = 0; d < 4; ++d)
        if (has_edge(X, Y, d) && !is_visited(X, Y, d)) walk(X, Y, d, true);

  if (tolerance > 0.0) {
    std::vector<std::vector<Seg>> segs;
    for (const auto& c : chains) segs.push_back(segments_of(c.pts));
    for (std::size_t ci = 0; ci < chains.size(); ++ci) {
      if (chains[ci].pts.size() <= (chains[ci].closed ? 4u : 2u)) continue;
      auto simp = simplify_chain(chains[ci], tolerance);
      if (simp.size() == chains[ci].pts.size()) continue;
      if (chains[ci].closed && simp.size() < 4) continue;
      auto ns = segments_of(simp);
      bool bad = self_conflict(ns);
      for (std::size_t cj = 0; cj < chains.size() && !bad; ++cj) {
        if (cj == ci) continue;
        for (const auto& s : ns) {
          for (const auto& t : segs[cj])
            if (conflict(s, t)) {
              bad = true;
              break;
            }
          if (bad) break;
        }
      }
      if (bad) continue;
      chains[ci].pts = std::move(simp);
      segs[ci] = std::move(ns);
    }
  }
  return chains;
}

std::vector<RegionPolygon> trace_regions(const Image& floor, const Image& height, double tolerance) {
  const int w = floor.width, h = floor.height;
  int regions = 0;
  auto labels = plateau_labels(floor, height, &regions);
  std::vector<RegionPolygon> out(static_cast<std::size_t>(regions));
  for (int i = 0; i < regions; ++i) out[static_cast<std::size_t>(i)].label = i + 1;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) out[static_cast<std::size_t>(labels[i] - 1)].height_value = height.px[i];
  if (regions == 0) return out;

  auto chains = boundary_chains(labels, w, h, tolerance);
  // Directed pieces with the region on the left.
  std::vector<std::vector<std::vector<LatticePoint>>> pieces(static_cast<std::size_t>(regions));
  std::vector<std::vector<char>> piece_closed(static_cast<std::size_t>(regions));
  for (const auto& c : chains) {
    if (c.left > 0) {
      pieces[static_cast<std::size_t>(c.left - 1)].push_back(c.pts);
      piece_closed[static_cast<std::size_t>(c.left - 1)].push_back(c.closed);
    }
    if (c.right > 0) {
      auto rev = c.pts;
      std::reverse(rev.begin(), rev.end());
      pieces[static_cast<std::size_t>(c.right - 1)].push_back(std::move(rev));
      piece_closed[static_cast<std::size_t>(c.right - 1)].push_back(c.closed);
    }
  }

  // Map-frame direction of a lattice step.
  auto dir = [](const LatticePoint& a, const LatticePoint& b) {
    return std::array<double, 2>{double(b[0] - a[0]), -double(b[1] - a[1])};
  };
  for (int r = 0; r < regions; ++r) {
    auto& ps = pieces[static_cast<std::size_t>(r)];
    std::vector<char> used(ps.size(), 0);
    std::multimap<LatticePoint, std::size_t> by_start;
    for (std::size_t i = 0; i < ps.size(); ++i) by_start.emplace(ps[i].front(), i);
    for (std::size_t s = 0; s < ps.size(); ++s) {
      if (used[s]) continue;
      used[s] = 1;
      std::vector<LatticePoint> loop = ps[s];
      if (!piece_closed[static_cast<std::size_t>(r)][s]) {
        while (loop.back() != loop.front()) {
          auto din = dir(loop[loop.size() - 2], loop.back());
          std::size_t pick = SIZE_MAX;
          double best = -10.0;
          auto [lo, hi] = by_start.equal_range(loop.back());
          for (auto it = lo; it != hi; ++it) {
            if (used[it->second]) continue;
            const auto& cand = ps[it->second];
            auto dout = dir(cand[0], cand[1]);
            double turn = std::atan2(din[0] * dout[1] - din[1] * dout[0], din[0] * dout[0] + din[1] * dout[1]);
            if (turn > best) {
              best = turn;
              pick = it->second;
            }
          }
          if (pick == SIZE_MAX) break;  // cannot happen on closed boundaries
          used[pick] = 1;
          loop.insert(loop.end(), ps[pick].begin() + 1, ps[pick].end());
        }
      }
      loop.pop_back();
      for (auto& p : loop) p[1] = h - p[1];
      out[static_cast<std::size_t>(r)].loops.push_back(std::move(loop));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::array<std::int16_t, 2> LatticeFrame::to_map(const LatticePoint& p) const {
  double x = origin_x + (p[0] - width / 2) * scale;
  double y = origin_y + (height / 2 - p[1]) * scale;
  return {static_cast<std::int16_t>(std::lround(x)), static_cast<std::int16_t>(std::lround(y))};
}

std::array<std::int16_t, 2> LatticeFrame::pixel_center(int x, int y) const {
  double mx = origin_x + (x + 0.5 - width / 2) * scale;
  double my = origin_y + (height / 2 - y - 0.5) * scale;
  return {static_cast<std::int16_t>(std::lround(mx)), static_cast<std::int16_t>(std::lround(my))};
}

WadLevel level_from_labels(const std::vector<int>& labels, int w, int h, const LatticeFrame& frame,
                           std::span<const SectorStyle> sectors, double tolerance) {
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  if (static_cast<std::size_t>(max_label) > sectors.size())
    throw Error(Errc::SizeMismatch, "fewer sector styles than labels");

  WadLevel lvl;
  lvl.name = "MAP01";
  for (const auto& s : sectors) {
    Sector sec;
    sec.floor_height = s.floor_height;
    sec.ceiling_height = s.ceiling_height;
    sec.light = s.light;
    sec.floor_tex = make_name8("FLOOR4_8");
    sec.ceiling_tex = make_name8("CEIL3_5");
    lvl.sectors.push_back(sec);
  }

  std::map<LatticePoint, std::uint16_t> vid;
  auto vertex = [&](const LatticePoint& p) {
    auto it = vid.find(p);
    if (it != vid.end()) return it->second;
    auto m = frame.to_map(p);
    auto idx = static_cast<std::uint16_t>(lvl.vertexes.size());
    lvl.vertexes.push_back({m[0], m[1]});
    vid.emplace(p, idx);
    return idx;
  };
  auto sidedef = [&](int label, bool two_sided) {
    Sidedef sd;
    sd.sector = static_cast<std::uint16_t>(label - 1);
    const Name8 wall = make_name8("STARTAN3");
    const Name8 none = make_name8("-");
    sd.upper = two_sided ? wall : none;
    sd.lower = two_sided ? wall : none;
    sd.middle = two_sided ? none : wall;
    lvl.sidedefs.push_back(sd);
    return static_cast<std::uint16_t>(lvl.sidedefs.size() - 1);
  };

  for (const auto& c : boundary_chains(labels, w, h, tolerance)) {
    for (std::size_t i = 0; i + 1 < c.pts.size(); ++i) {
      LatticePoint a = c.pts[i], b = c.pts[i + 1];
      Linedef d;
      if (c.left > 0 && c.right > 0) {
        d.start = vertex(a);
        d.end = vertex(b);
        d.flags = linedef_flags::kTwoSided;
        d.right = sidedef(c.right, true);
        d.left = sidedef(c.left, true);
      } else {
        int inside = c.right > 0 ? c.right : c.left;
        if (c.right == 0) std::swap(a, b);
        d.start = vertex(a);
        d.end = vertex(b);
        d.flags = linedef_flags::kImpassable;
        d.right = sidedef(inside, false);
      }
      lvl.linedefs.push_back(d);
    }
  }
  return lvl;
}

WadLevel build_level(const LevelImageSet& imgs, const ReconstructionConfig& cfg) {
  cfg.validate();
  const int w = imgs.floor.width, h = imgs.floor.height;
  Image floor(w, h);
  for (std::size_t i = 0; i < floor.size(); ++i) floor.px[i] = imgs.floor.px[i] >= cfg.floor_threshold ? 255 : 0;
  if (count_nonzero(floor) == 0) throw Error(Errc::EmptyFloor, "no floor pixels to reconstruct");
  Image height = imgs.height;
  if (height.size() != floor.size()) throw Error(Errc::SizeMismatch, "height map size");

  int regions = 0;
  auto labels = plateau_labels(floor, height, &regions);

  int hmin = imgs.meta.hmin, hmax = imgs.meta.hmax;
  std::set<std::uint8_t> distinct;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) distinct.insert(height.px[i]);
  if (hmin == hmax && distinct.size() > 1) {
    hmin = cfg.fallback_hmin;
    hmax = cfg.fallback_hmax;
  }
  std::vector<SectorStyle> styles(static_cast<std::size_t>(regions));
  std::vector<std::size_t> area(static_cast<std::size_t>(regions), 0);
  std::vector<double> sx(static_cast<std::size_t>(regions), 0.0), sy(static_cast<std::size_t>(regions), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int l = labels[static_cast<std::size_t>(y) * w + x];
      if (!l) continue;
      auto r = static_cast<std::size_t>(l - 1);
      auto fh = static_cast<std::int16_t>(std::lround(gray_to_height(height.at(x, y), hmin, hmax)));
      styles[r] = {fh, static_cast<std::int16_t>(fh + 128), 160};
      ++area[r];
      sx[r] += x + 0.5;
      sy[r] += y + 0.5;
    }

  LatticeFrame frame{w, h, imgs.meta.origin_x, imgs.meta.origin_y, cfg.scale};
  WadLevel lvl = level_from_labels(labels, w, h, frame, styles, cfg.simplify_tolerance);

  std::vector<std::uint8_t> choices{0};
  for (auto g : cfg.palette.gray) choices.push_back(g);
  std::sort(choices.begin(), choices.end());
  bool have_start = false;
  if (imgs.things.size() == floor.size()) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!floor.at(x, y)) continue;
        std::uint8_t v = nearest_of(imgs.things.at(x, y), choices);
        if (v == 0) continue;
        auto cat = cfg.palette.category_for_value(v);
        if (!cat) continue;
        Thing t;
        auto pos = frame.pixel_center(x, y);
        t.x = pos[0];
        t.y = pos[1];
        t.flags = 7;
        t.type = cfg.default_types[static_cast<std::size_t>(*cat)];
        if (*cat == ThingCategory::PlayerStart) {
          if (have_start) t.type = 11;  // extra starts become deathmatch starts
          have_start = true;
        }
        lvl.things.push_back(t);
      }
  }
  if (!have_start) {
    std::size_t big = 0;
    for (std::size_t r = 1; r < area.size(); ++r)
      if (area[r] > area[big]) big = r;
    double cx = sx[big] / area[big], cy = sy[big] / area[big];
    // The centroid may fall outside a non-convex sector; use its nearest pixel.
    int bx = 0, by = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (labels[static_cast<std::size_t>(y) * w + x] != static_cast<int>(big) + 1) continue;
        double d = (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy);
        if (d < bd) {
          bd = d;
          bx = x;
          by = y;
        }
      }
    Thing t;
    auto pos = frame.pixel_center(bx, by);
    t.x = pos[0];
    t.y = pos[1];
    t.angle = 90;
    t.flags = 7;
    t.type = cfg.default_types[static_cast<std::size_t>(ThingCategory::PlayerStart)];
    lvl.things.insert(lvl.things.begin(), t);
  }
  return lvl;
}

LevelImageSet rerasterize(const WadLevel& level, const LevelImageSet& like, const ReconstructionConfig& cfg) {
  RasterConfig rc;
  rc.width = like.floor.width;
  rc.height = like.floor.height;
  rc.scale = cfg.scale;
  rc.palette = cfg.palette;
  rc.center = std::array<double, 2>{like.meta.origin_x, like.meta.origin_y};
  return rasterize_level(level, rc);
}

double floor_iou(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw Error(Errc::SizeMismatch, "IoU of differently sized images");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool x = a.px[i] != 0, y = b.px[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json ReconstructionResult::manifest(const ReconstructionConfig& cfg) const {
  nlohmann::json j;
  j["parameters"] = {{"floor_threshold", cfg.floor_threshold},
                     {"min_component_area", cfg.min_component_area},
                     {"height_levels", cfg.height_levels},
                     {"simplify_tolerance", cfg.simplify_tolerance},
                     {"scale", cfg.scale}};
  j["regions"] = regions;
  j["sectors"] = level.sectors.size();
  j["linedefs"] = level.linedefs.size();
  j["vertexes"] = level.vertexes.size();
  j["things"] = level.things.size();
  j["floor_iou"] = iou;
  auto report = validate_level(level);
  j["defects"] = report.defects.size();
  return j;
}

ReconstructionResult reconstruct(const LevelImageSet& imgs, const ReconstructionConfig& cfg) {
  ReconstructionResult r;
  r.cleaned = quantize_images(imgs, cfg);
  r.level = build_level(r.cleaned, cfg);
  plateau_labels(r.cleaned.floor, r.cleaned.height, &r.regions);
  r.iou = floor_iou(rerasterize(r.level, r.cleaned, cfg).floor, r.cleaned.floor);
  return r;
}

}  // namespace doomgan
