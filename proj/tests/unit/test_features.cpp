#include "../support/oracles.hpp"
#include "doomgan/distance.hpp"
#include "doomgan/error.hpp"
#include "doomgan/features.hpp"
#include "doomgan/synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace doomgan;

namespace {

Image block(int w, int h, int x0, int y0, int bw, int bh) {
  Image img(w, h);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) img.at(x, y) = 255;
  return img;
}

LevelImageSet floor_only(const Image& floor) {
  LevelImageSet s;
  s.floor = floor;
  s.wall = s.height = s.things = s.triggers = Image(floor.width, floor.height);
  for (std::size_t i = 0; i < floor.px.size(); ++i) s.height.px[i] = floor.px[i] ? 128 : 0;
  s.rooms = segment_rooms(floor);
  return s;
}

std::vector<std::vector<int>> from_edges(int n, const std::vector<std::pair<int, int>>& e) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (auto [a, b] : e) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  return adj;
}

}  // namespace

TEST_CASE("distance transform: corridor, square, empty") {
  DistanceField c = distance_transform(block(7, 3, 0, 1, 7, 1));
  for (int x = 0; x < 7; ++x) CHECK(c.at(x, 1) == 1.0);

  Image sq = block(5, 5, 0, 0, 5, 5);
  DistanceField d = distance_transform(sq);
  CHECK(d.at(2, 2) == 3.0);
  CHECK(d.sq == testsupport::brute_edt(sq));

  DistanceField e = distance_transform(Image(6, 4));
  for (auto v : e.sq) CHECK(v == 0);
}

TEST_CASE("distance transform equals the all-pairs oracle on random masks") {
  nn::Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    int w = 1 + rng.below(24), h = 1 + rng.below(24);
    double p = rng.uniform();
    Image m(w, h);
    for (auto& v : m.px) v = rng.uniform() < p ? 255 : 0;
    CHECK(distance_transform(m).sq == testsupport::brute_edt(m));
  }
}

TEST_CASE("enclosing circle: single point, rectangle of centers, error on empty") {
  std::vector<Point2> one{{3.0, 4.0}};
  CHECK(smallest_enclosing_circle(one).diameter() == 0.0);
  std::vector<Point2> rect;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 3; ++x) rect.push_back({x + 0.5, y + 0.5});
  CHECK(smallest_enclosing_circle(rect).diameter() == doctest::Approx(std::sqrt(13.0)).epsilon(1e-12));
  try {
    smallest_enclosing_circle(std::vector<Point2>{});
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyInput);
  }
}

TEST_CASE("enclosing circle matches pair/triple brute force") {
  nn::Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    std::vector<Point2> p(static_cast<std::size_t>(1 + rng.below(12)));
    for (auto& q : p) q = {rng.uniform() * 20, rng.uniform() * 20};
    CHECK(smallest_enclosing_circle(p).radius == doctest::Approx(testsupport::brute_min_circle_radius(p)).epsilon(1e-9));
  }
}

TEST_CASE("solidity: full rectangle is 1, L-tromino is 3/3.5") {
  FeatureVector r = extract_feature_vector(floor_only(block(10, 10, 2, 3, 5, 4)));
  CHECK(r.solidity == doctest::Approx(1.0));
  CHECK(r.major_axis == 5.0);
  CHECK(r.minor_axis == 4.0);

  Image l(4, 4);
  l.at(1, 1) = l.at(2, 1) = l.at(1, 2) = 255;
  FeatureVector t = extract_feature_vector(floor_only(l));
  CHECK(t.solidity == doctest::Approx(3.0 / 3.5).epsilon(1e-12));
}

TEST_CASE("hull area of the L-tromino corner points") {
  std::vector<std::array<long, 2>> pts;
  for (auto [x, y] : {std::pair{0, 0}, {1, 0}, {0, 1}})
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) pts.push_back({x + dx, y + dy});
  auto hull = convex_hull(pts);
  CHECK(twice_area(hull) == 7);
}

TEST_CASE("moments: degenerate and known distributions") {
  std::vector<double> c{2, 2, 2};
  CHECK(skewness_kurtosis(c) == std::pair{0.0, 0.0});
  std::vector<double> sym{1, 2, 3};
  auto [s, k] = skewness_kurtosis(sym);
  CHECK(s == doctest::Approx(0.0));
  CHECK(k == doctest::Approx(1.5));  // m2 = 2/3, m4 = 2/3
}

TEST_CASE("room graph: single room, corridor path, 2x2 checkerboard") {
  Image one(3, 3, 1);
  RoomGraph g1 = build_room_graph(one);
  CHECK(g1.node_count == 1);
  CHECK(g1.edges.empty());

  Image path(6, 1);
  path.px = {1, 1, 2, 2, 3, 3};
  CHECK(build_room_graph(path).edges == std::vector<std::pair<int, int>>{{1, 2}, {2, 3}});

  Image quad(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) quad.at(x, y) = static_cast<std::uint8_t>(1 + (x >= 2) + 2 * (y >= 2));
  CHECK(build_room_graph(quad).edges == std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 4}, {3, 4}});
}

TEST_CASE("graph features: P3, K1 and the star") {
  auto p3 = from_edges(3, {{0, 1}, {1, 2}});
  auto c = closeness_centrality(p3);
  CHECK(c[0] == doctest::Approx(2.0 / 3.0));
  CHECK(c[1] == doctest::Approx(1.0));
  CHECK(betweenness_centrality(p3)[1] == doctest::Approx(1.0));

  RoomGraph k1;
  k1.node_count = 1;
  k1.area = {4};
  GraphStats s = graph_features(k1);
  CHECK(s.closeness_mean == 0.0);
  CHECK(s.betweenness_mean == 0.0);

  auto star = from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK(degree_assortativity(star) == doctest::Approx(-1.0));
  auto cycle = from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  CHECK(degree_assortativity(cycle) == 0.0);

  try {
    graph_features(RoomGraph{});
    FAIL("expected EmptyGraph");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyGraph);
  }
}

TEST_CASE("disconnected graphs are reduced to the largest component") {
  RoomGraph g;
  g.node_count = 5;
  g.edges = {{1, 2}, {3, 4}, {4, 5}};
  g.area = {1, 1, 1, 1, 1};
  GraphStats s = graph_features(g);
  CHECK(s.largest_component_only);
  CHECK(s.nodes_used == 3);
  CHECK(s.closeness_mean == doctest::Approx((2.0 / 3 + 1 + 2.0 / 3) / 3));
}

TEST_CASE("graph statistics match the brute-force oracle") {
  nn::Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    int n = 2 + rng.below(15);
    std::vector<std::pair<int, int>> e;
    for (int v = 1; v < n; ++v) e.push_back({rng.below(v), v});  // spanning tree keeps it connected
    for (int extra = rng.below(n); extra > 0; --extra) {
      int a = rng.below(n), b = rng.below(n);
      if (a == b) continue;
      if (std::find(e.begin(), e.end(), std::pair{std::min(a, b), std::max(a, b)}) != e.end()) continue;
      if (std::find(e.begin(), e.end(), std::pair{std::max(a, b), std::min(a, b)}) != e.end()) continue;
      e.push_back({a, b});
    }
    auto adj = from_edges(n, e);
    auto c = closeness_centrality(adj), oc = testsupport::brute_closeness(adj);
    auto b = betweenness_centrality(adj), ob = testsupport::brute_betweenness(adj);
    for (int v = 0; v < n; ++v) {
      CHECK(std::abs(c[v] - oc[v]) < 1e-9);
      CHECK(std::abs(b[v] - ob[v]) < 1e-9);
    }
    CHECK(std::abs(degree_assortativity(adj) - testsupport::brute_assortativity(adj)) < 1e-9);
  }
}

TEST_CASE("feature vector: invariants and empty-floor error") {
  nn::Rng rng(3);
  for (const auto& s : procedural_corpus(6, 11)) {
    FeatureVector f = extract_feature_vector(s);
    CHECK(f.major_axis >= f.minor_axis);
    CHECK(f.solidity > 0.0);
    CHECK(f.solidity <= 1.0);
    CHECK(f.nodes >= 1.0);
    CHECK(f.extended.count("closeness_mean") == 1);
  }
  try {
    extract_feature_vector(floor_only(Image(8, 8)));
    FAIL("expected EmptyFloor");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyFloor);
  }
}

TEST_CASE("feature invariants under quarter turns") {
  for (const auto& s : procedural_corpus(5, 4)) {
    FeatureVector f = extract_feature_vector(s);
    for (int k = 1; k <= 3; ++k) {
      LevelImageSet r = s;
      for (MapType t : kAllMapTypes) r.channel(t) = rotate90(s.channel(t), k);
      FeatureVector g = extract_feature_vector(r);
      CHECK(g.equivalent_diameter == doctest::Approx(f.equivalent_diameter).epsilon(1e-12));
      CHECK(g.solidity == doctest::Approx(f.solidity).epsilon(1e-12));
      CHECK(g.nodes == f.nodes);
      CHECK(g.wall_dist_skewness == doctest::Approx(f.wall_dist_skewness).epsilon(1e-9));
      CHECK(g.wall_dist_kurtosis == doctest::Approx(f.wall_dist_kurtosis).epsilon(1e-9));
      CHECK(std::set{g.major_axis, g.minor_axis} == std::set{f.major_axis, f.minor_axis});
    }
  }
}

TEST_CASE("normalization: mean maps to zero, constant slots to zero, inverse round-trips") {
  std::vector<FeatureVector> corpus(3);
  for (int i = 0; i < 3; ++i) {
    corpus[i].equivalent_diameter = 10 + i;
    corpus[i].major_axis = 5 * i;
    corpus[i].minor_axis = 2;
    corpus[i].solidity = 0.5 + 0.1 * i;
    corpus[i].nodes = 1 + i;
    corpus[i].wall_dist_skewness = -i;
    corpus[i].wall_dist_kurtosis = i * i;
  }
  NormalizationStats st = NormalizationStats::from_corpus(corpus);
  CHECK(st.is_constant(2));
  auto z = normalize_features(corpus[1], st);
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(z[2] == 0.0);
  auto back = denormalize_features(normalize_features(corpus[2], st), st);
  auto orig = corpus[2].conditioning();
  for (std::size_t i = 0; i < kConditioningSize; ++i)
    if (!st.is_constant(i)) CHECK(back[i] == doctest::Approx(orig[i]));
  auto st2 = NormalizationStats::from_json(st.to_json());
  CHECK(st2.mean == st.mean);
  CHECK(st2.stddev == st.stddev);
}

TEST_CASE("feature CSV and JSON forms") {
  FeatureVector f = extract_feature_vector(procedural_corpus(1, 2)[0]);
  std::string head = feature_csv_header(f);
  CHECK(head.rfind("level_id,equivalent_diameter,major_axis,minor_axis,solidity,nodes,wall_dist_skewness,wall_dist_kurtosis", 0) == 0);
  std::string row = feature_csv_row("MAP01", f);
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(head.begin(), head.end(), ','));
  FeatureVector g = feature_from_json(feature_to_json(f));
  CHECK(g.conditioning() == f.conditioning());
  CHECK(g.extended == f.extended);
}
