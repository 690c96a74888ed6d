#include "doomgan/features.hpp"

#include "doomgan/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <queue>
#include <random>
#include <sstream>

namespace doomgan {

// ---------------------------------------------------------------------------
// Smallest enclosing circle

namespace {

constexpr double kCircleEps = 1e-12;

bool circle_contains(const Circle& c, const Point2& p) {
  return std::hypot(p.x - c.center.x, p.y - c.center.y) <= c.radius * (1.0 + kCircleEps) + kCircleEps;
}

Circle circle_from_two(const Point2& a, const Point2& b) {
  const Point2 c{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
  return {c, std::max(std::hypot(a.x - c.x, a.y - c.y), std::hypot(b.x - c.x, b.y - c.y))};
}

std::optional<Circle> circumcircle(const Point2& a, const Point2& b, const Point2& c) {
  // Translate to improve conditioning.
  const double ox = (std::min({a.x, b.x, c.x}) + std::max({a.x, b.x, c.x})) / 2.0;
  const double oy = (std::min({a.y, b.y, c.y}) + std::max({a.y, b.y, c.y})) / 2.0;
  const double ax = a.x - ox, ay = a.y - oy;
  const double bx = b.x - ox, by = b.y - oy;
  const double cx = c.x - ox, cy = c.y - oy;
  const double d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0;
  if (d == 0.0) return std::nullopt;
  const double x = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) +
                    (cx * cx + cy * cy) * (ay - by)) / d;
  const double y = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) +
                    (cx * cx + cy * cy) * (bx - ax)) / d;
  const Point2 center{ox + x, oy + y};
  const double r = std::max({std::hypot(a.x - center.x, a.y - center.y),
                             std::hypot(b.x - center.x, b.y - center.y),
                             std::hypot(c.x - center.x, c.y - center.y)});
  return Circle{center, r};
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Smallest circle through p and q enclosing pts[0..end).
Circle circle_two_points(std::span<const Point2> pts, std::size_t end, const Point2& p, const Point2& q) {
  const Circle base = circle_from_two(p, q);
  std::optional<Circle> left, right;
  for (std::size_t i = 0; i < end; ++i) {
    const Point2& r = pts[i];
    if (circle_contains(base, r)) continue;
    const double cr = cross(p, q, r);
    const auto c = circumcircle(p, q, r);
    if (!c) continue;
    const double side = cross(p, q, c->center);
    if (cr > 0.0 && (!left || side > cross(p, q, left->center))) left = c;
    else if (cr < 0.0 && (!right || side < cross(p, q, right->center))) right = c;
  }
  if (!left && !right) return base;
  if (!left) return *right;
  if (!right) return *left;
  return left->radius <= right->radius ? *left : *right;
}

Circle circle_one_point(std::span<const Point2> pts, std::size_t end, const Point2& p) {
  Circle c{p, 0.0};
  for (std::size_t i = 0; i < end; ++i) {
    const Point2& q = pts[i];
    if (circle_contains(c, q)) continue;
    c = c.radius == 0.0 ? circle_from_two(p, q) : circle_two_points(pts, i, p, q);
  }
  return c;
}

}  // namespace

Circle smallest_enclosing_circle(std::span<const Point2> points) {
  if (points.empty()) throw Error(Errc::EmptyInput, "smallest_enclosing_circle of no points");
  std::vector<Point2> pts(points.begin(), points.end());
  std::mt19937_64 rng(0x5eedc1cULL);
  std::shuffle(pts.begin(), pts.end(), rng);
  std::optional<Circle> c;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!c || !circle_contains(*c, pts[i])) c = circle_one_point(pts, i, pts[i]);
  }
  return *c;
}

std::vector<std::array<long, 2>> convex_hull(std::vector<std::array<long, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto turn = [](const std::array<long, 2>& o, const std::array<long, 2>& a, const std::array<long, 2>& b) {
    return static_cast<long long>(a[0] - o[0]) * (b[1] - o[1]) -
           static_cast<long long>(a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<long, 2>> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

long long twice_area(std::span<const std::array<long, 2>> poly) {
  long long acc = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    acc += static_cast<long long>(a[0]) * b[1] - static_cast<long long>(b[0]) * a[1];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Room graph

std::vector<std::vector<int>> RoomGraph::adjacency() const {
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& [a, b] : edges) {
    adj[a - 1].push_back(b - 1);
    adj[b - 1].push_back(a - 1);
  }
  for (auto& l : adj) std::sort(l.begin(), l.end());
  return adj;
}

RoomGraph build_room_graph(const Image& rooms) {
  RoomGraph g;
  g.node_count = room_count(rooms);
  g.area.assign(g.node_count, 0);
  std::vector<std::pair<int, int>> edges;
  for (int y = 0; y < rooms.height; ++y) {
    for (int x = 0; x < rooms.width; ++x) {
      const int a = rooms.at(x, y);
      if (a == 0) continue;
      g.area[a - 1]++;
      if (x + 1 < rooms.width) {
        const int b = rooms.at(x + 1, y);
        if (b != 0 && b != a) edges.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < rooms.height) {
        const int b = rooms.at(x, y + 1);
        if (b != 0 && b != a) edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

namespace {

std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adj, int src) {
  std::vector<int> dist(adj.size(), -1);
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int u : adj[v]) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        q.push(u);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<double> closeness_centrality(const std::vector<std::vector<int>>& adj) {
  const std::size_t n = adj.size();
  std::vector<double> c(n, 0.0);
  if (n < 2) return c;
  for (std::size_t v = 0; v < n; ++v) {
    const auto d = bfs_distances(adj, static_cast<int>(v));
    long long total = 0;
    for (int x : d) total += std::max(x, 0);
    c[v] = total > 0 ? static_cast<double>(n - 1) / static_cast<double>(total) : 0.0;
  }
  return c;
}

std::vector<double> betweenness_centrality(const std::vector<std::vector<int>>& adj) {
  // Brandes accumulation, undirected, normalised by 2 / ((n-1)(n-2)).
  const std::size_t n = adj.size();
  std::vector<double> cb(n, 0.0);
  if (n < 3) return cb;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<int> order;
    std::vector<std::vector<int>> preds(n);
    std::vector<double> sigma(n, 0.0), delta(n, 0.0);
    std::vector<int> dist(n, -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::queue<int> q;
    q.push(static_cast<int>(s));
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      order.push_back(v);
      for (int w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int w = *it;
      for (int v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != static_cast<int>(s)) cb[w] += delta[w];
    }
  }
  const double scale = 1.0 / static_cast<double>((n - 1) * (n - 2));  // (1/2) * 2/((n-1)(n-2))
  for (auto& v : cb) v *= scale;
  return cb;
}

double degree_assortativity(const std::vector<std::vector<int>>& adj) {
  double sx = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t v = 0; v < adj.size(); ++v) {
    for (int u : adj[v]) {
      const double a = static_cast<double>(adj[v].size());
      const double b = static_cast<double>(adj[u].size());
      sx += a;
      sxx += a * a;
      sxy += a * b;
      ++m;
    }
  }
  if (m == 0) return 0.0;
  const double mean = sx / m;
  const double var = sxx / m - mean * mean;
  if (var <= 1e-12 * std::max(1.0, mean * mean)) return 0.0;
  return (sxy / m - mean * mean) / var;
}

GraphStats graph_features(const RoomGraph& g) {
  if (g.node_count == 0) throw Error(Errc::EmptyGraph, "room graph has no nodes");
  const auto adj = g.adjacency();
  const int n = g.node_count;

  // Largest connected component; ties go to the one holding the smallest label.
  std::vector<int> comp(n, -1);
  int ncomp = 0, best = 0;
  std::vector<int> comp_size;
  for (int v = 0; v < n; ++v) {
    if (comp[v] >= 0) continue;
    const auto d = bfs_distances(adj, v);
    int size = 0;
    for (int u = 0; u < n; ++u) {
      if (d[u] >= 0) {
        comp[u] = ncomp;
        ++size;
      }
    }
    comp_size.push_back(size);
    if (size > comp_size[best]) best = ncomp;
    ++ncomp;
  }
  std::vector<int> remap(n, -1);
  int m = 0;
  for (int v = 0; v < n; ++v) {
    if (comp[v] == best) remap[v] = m++;
  }
  std::vector<std::vector<int>> sub(m);
  for (int v = 0; v < n; ++v) {
    if (remap[v] < 0) continue;
    for (int u : adj[v]) sub[remap[v]].push_back(remap[u]);
  }

  GraphStats s;
  s.nodes_used = m;
  s.largest_component_only = ncomp > 1;
  const auto cc = closeness_centrality(sub);
  const auto bc = betweenness_centrality(sub);
  for (int v = 0; v < m; ++v) {
    s.closeness_mean += cc[v];
    s.betweenness_mean += bc[v];
  }
  s.closeness_mean /= m;
  s.betweenness_mean /= m;
  s.assortativity = degree_assortativity(sub);
  return s;
}

// ---------------------------------------------------------------------------
// Feature vector

std::array<double, kConditioningSize> FeatureVector::conditioning() const {
  return {equivalent_diameter, major_axis, minor_axis,       solidity,
          nodes,               wall_dist_skewness, wall_dist_kurtosis};
}

std::pair<double, double> skewness_kurtosis(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(values.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 1e-15 * std::max(1.0, mean * mean)) return {0.0, 0.0};
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2)};
}

FeatureVector extract_feature_vector(const LevelImageSet& imgs) {
  const Image& floor = imgs.floor;
  std::vector<std::array<long, 2>> centers, corners;
  long minx = floor.width, maxx = -1, miny = floor.height, maxy = -1;
  std::size_t area = 0, perimeter = 0;
  for (int y = 0; y < floor.height; ++y) {
    for (int x = 0; x < floor.width; ++x) {
      if (floor.at(x, y) == 0) continue;
      ++area;
      centers.push_back({x, y});
      corners.push_back({x, y});
      corners.push_back({x + 1, y});
      corners.push_back({x, y + 1});
      corners.push_back({x + 1, y + 1});
      minx = std::min<long>(minx, x);
      maxx = std::max<long>(maxx, x);
      miny = std::min<long>(miny, y);
      maxy = std::max<long>(maxy, y);
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nbr) {
        if (!floor.in_bounds(q[0], q[1]) || floor.at(q[0], q[1]) == 0) ++perimeter;
      }
    }
  }
  if (area == 0) throw Error(Errc::EmptyFloor, "floor map has no walkable pixels");

  FeatureVector f;
  const auto center_hull = convex_hull(centers);
  std::vector<Point2> hull_pts;
  hull_pts.reserve(center_hull.size());
  for (const auto& p : center_hull) hull_pts.push_back({p[0] + 0.5, p[1] + 0.5});
  f.equivalent_diameter = smallest_enclosing_circle(hull_pts).diameter();

  const double w = static_cast<double>(maxx - minx + 1);
  const double h = static_cast<double>(maxy - miny + 1);
  f.major_axis = std::max(w, h);
  f.minor_axis = std::min(w, h);

  const auto corner_hull = convex_hull(std::move(corners));
  const double hull_area = static_cast<double>(std::llabs(twice_area(corner_hull))) / 2.0;
  f.solidity = static_cast<double>(area) / hull_area;

  f.nodes = static_cast<double>(room_count(imgs.rooms));

  const DistanceField dist = distance_transform(floor);
  std::vector<double> values;
  values.reserve(area);
  for (int y = 0; y < floor.height; ++y) {
    for (int x = 0; x < floor.width; ++x) {
      if (floor.at(x, y) != 0) values.push_back(dist.at(x, y));
    }
  }
  std::tie(f.wall_dist_skewness, f.wall_dist_kurtosis) = skewness_kurtosis(values);

  f.extended["floor_pixels"] = static_cast<double>(area);
  f.extended["perimeter_px"] = static_cast<double>(perimeter);
  const RoomGraph g = build_room_graph(imgs.rooms);
  f.extended["graph_edges"] = static_cast<double>(g.edges.size());
  if (g.node_count > 0) {
    const GraphStats gs = graph_features(g);
    f.extended["closeness_mean"] = gs.closeness_mean;
    f.extended["betweenness_mean"] = gs.betweenness_mean;
    f.extended["assortativity"] = gs.assortativity;
    f.extended["graph_nodes_used"] = gs.nodes_used;
    f.extended["graph_largest_component_only"] = gs.largest_component_only ? 1.0 : 0.0;
  } else {
    f.extended["closeness_mean"] = 0.0;
    f.extended["betweenness_mean"] = 0.0;
    f.extended["assortativity"] = 0.0;
    f.extended["graph_nodes_used"] = 0.0;
    f.extended["graph_largest_component_only"] = 0.0;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Normalization

NormalizationStats NormalizationStats::from_corpus(std::span<const FeatureVector> corpus) {
  NormalizationStats s;
  s.count = corpus.size();
  if (corpus.empty()) return s;
  for (const auto& f : corpus) {
    const auto c = f.conditioning();
    for (std::size_t i = 0; i < kConditioningSize; ++i) s.mean[i] += c[i];
  }
  for (auto& m : s.mean) m /= static_cast<double>(corpus.size());
  for (const auto& f : corpus) {
    const auto c = f.conditioning();
    for (std::size_t i = 0; i < kConditioningSize; ++i) {
      const double d = c[i] - s.mean[i];
      s.stddev[i] += d * d;
    }
  }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(corpus.size()));
    if (v < 1e-12) v = 0.0;
  }
  return s;
}

nlohmann::json NormalizationStats::to_json() const {
  nlohmann::json j;
  j["count"] = count;
  for (std::size_t i = 0; i < kConditioningSize; ++i) {
    j["features"][kConditioningNames[i]] = {{"mean", mean[i]}, {"std", stddev[i]},
                                            {"constant", stddev[i] == 0.0}};
  }
  return j;
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  NormalizationStats s;
  s.count = j.at("count").get<std::size_t>();
  for (std::size_t i = 0; i < kConditioningSize; ++i) {
    const auto& e = j.at("features").at(kConditioningNames[i]);
    s.mean[i] = e.at("mean").get<double>();
    s.stddev[i] = e.at("std").get<double>();
  }
  return s;
}

std::array<double, kConditioningSize> normalize_features(const FeatureVector& v,
                                                         const NormalizationStats& stats) {
  std::array<double, kConditioningSize> z{};
  const auto c = v.conditioning();
  for (std::size_t i = 0; i < kConditioningSize; ++i) {
    z[i] = stats.is_constant(i) ? 0.0 : (c[i] - stats.mean[i]) / stats.stddev[i];
  }
  return z;
}

std::array<double, kConditioningSize> denormalize_features(
    const std::array<double, kConditioningSize>& z, const NormalizationStats& stats) {
  std::array<double, kConditioningSize> v{};
  for (std::size_t i = 0; i < kConditioningSize; ++i) v[i] = stats.mean[i] + z[i] * stats.stddev[i];
  return v;
}

// ---------------------------------------------------------------------------

std::string feature_csv_header(const FeatureVector& prototype) {
  std::string out = "level_id";
  for (const char* n : kConditioningNames) out += std::string(",") + n;
  for (const auto& [k, v] : prototype.extended) out += "," + k;
  return out;
}

std::string feature_csv_row(const std::string& level_id, const FeatureVector& v) {
  std::ostringstream os;
  os << std::setprecision(17) << level_id;
  for (double x : v.conditioning()) os << ',' << x;
  for (const auto& [k, x] : v.extended) os << ',' << x;
  return os.str();
}

nlohmann::json feature_to_json(const FeatureVector& v) {
  nlohmann::json j;
  const auto c = v.conditioning();
  for (std::size_t i = 0; i < kConditioningSize; ++i) j[kConditioningNames[i]] = c[i];
  j["extended"] = v.extended;
  return j;
}

FeatureVector feature_from_json(const nlohmann::json& j) {
  FeatureVector f;
  f.equivalent_diameter = j.at("equivalent_diameter").get<double>();
  f.major_axis = j.at("major_axis").get<double>();
  f.minor_axis = j.at("minor_axis").get<double>();
  f.solidity = j.at("solidity").get<double>();
  f.nodes = j.at("nodes").get<double>();
  f.wall_dist_skewness = j.at("wall_dist_skewness").get<double>();
  f.wall_dist_kurtosis = j.at("wall_dist_kurtosis").get<double>();
  if (j.contains("extended")) f.extended = j.at("extended").get<std::map<std::string, double>>();
  return f;
}

}  // namespace doomgan
