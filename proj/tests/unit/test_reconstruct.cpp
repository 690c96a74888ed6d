#include "../support/oracles.hpp"
#include "doomgan/error.hpp"
#include "doomgan/reconstruct.hpp"
#include "doomgan/synthetic.hpp"

#include <doctest.h>

#include <set>

using namespace doomgan;

namespace {

LevelImageSet blank(int w, int h) {
  LevelImageSet s;
  s.floor = s.wall = s.height = s.things = s.triggers = s.rooms = Image(w, h);
  s.meta.hmin = 0;
  s.meta.hmax = 128;
  return s;
}

void fill(LevelImageSet& s, int x0, int y0, int w, int h, std::uint8_t height) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) {
      s.floor.at(x, y) = 255;
      s.height.at(x, y) = height;
    }
}

long long loop_twice_area(const std::vector<LatticePoint>& loop) {
  long long a = 0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const auto& p = loop[i];
    const auto& q = loop[(i + 1) % loop.size()];
    a += static_cast<long long>(p[0]) * q[1] - static_cast<long long>(q[0]) * p[1];
  }
  return a;
}

RasterConfig canvas(int n) {
  RasterConfig c;
  c.width = c.height = n;
  return c;
}

}  // namespace

TEST_CASE("1-D k-means: two obvious clusters and the exhaustive oracle") {
  std::vector<double> v{100, 101, 199, 200};
  auto c = kmeans_1d(v, 2);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == doctest::Approx(100.5));
  CHECK(c[1] == doctest::Approx(199.5));

  nn::Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    std::vector<double> vals(static_cast<std::size_t>(2 + rng.below(9)));
    for (auto& x : vals) x = static_cast<double>(1 + rng.below(255));
    int k = 1 + rng.below(4);
    auto got = kmeans_1d(vals, k);
    auto want = testsupport::brute_kmeans_1d(vals, k);
    // Equal-cost optima can differ; compare costs.
    auto cost = [&](const std::vector<double>& centers) {
      double s = 0;
      for (double x : vals) {
        double best = 1e300;
        for (double m : centers) best = std::min(best, (x - m) * (x - m));
        s += best;
      }
      return s;
    };
    CHECK(cost(got) == doctest::Approx(cost(want)).epsilon(1e-9));
  }
}

TEST_CASE("quantize: clean input unchanged, speckles removed, heights clustered") {
  LevelImageSet s = blank(12, 12);
  fill(s, 2, 2, 6, 5, 200);
  ReconstructionConfig cfg;
  LevelImageSet q = quantize_images(s, cfg);
  CHECK(q.floor == s.floor);
  CHECK(q.height == s.height);

  LevelImageSet sp = s;
  sp.floor.at(10, 10) = sp.floor.at(10, 11) = 255;
  sp.height.at(10, 10) = sp.height.at(10, 11) = 50;
  CHECK(quantize_images(sp, cfg).floor == s.floor);

  LevelImageSet noisy = blank(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      noisy.floor.at(x, y) = static_cast<std::uint8_t>(200 + (x + y) % 3);
      noisy.height.at(x, y) = static_cast<std::uint8_t>(x < 4 ? 100 + y % 2 : 199 + y % 2);
    }
  ReconstructionConfig two = cfg;
  two.height_levels = 2;
  LevelImageSet nq = quantize_images(noisy, two);
  std::set<int> hv(nq.height.px.begin(), nq.height.px.end());
  CHECK(hv.size() == 2);
  for (auto v : nq.floor.px) CHECK(v == 255);
}

TEST_CASE("quantize snaps things to the palette and drops off-floor ones") {
  LevelImageSet s = blank(8, 8);
  fill(s, 0, 0, 4, 8, 128);
  s.things.at(1, 1) = 35;   // near player start (32)
  s.things.at(6, 6) = 64;   // off floor
  LevelImageSet q = quantize_images(s, ReconstructionConfig{});
  CHECK(q.things.at(1, 1) == 32);
  CHECK(q.things.at(6, 6) == 0);
}

TEST_CASE("trace: a 2x2 block gives one counterclockwise square") {
  LevelImageSet s = blank(4, 4);
  fill(s, 1, 1, 2, 2, 128);
  auto regions = trace_regions(s.floor, s.height);
  REQUIRE(regions.size() == 1);
  REQUIRE(regions[0].loops.size() == 1);
  CHECK(regions[0].loops[0].size() == 4);
  CHECK(loop_twice_area(regions[0].loops[0]) == 8);
}

TEST_CASE("trace: a one-pixel hole becomes a clockwise 4-vertex loop") {
  LevelImageSet s = blank(5, 5);
  fill(s, 1, 1, 3, 3, 128);
  s.floor.at(2, 2) = 0;
  s.height.at(2, 2) = 0;
  auto regions = trace_regions(s.floor, s.height);
  REQUIRE(regions.size() == 1);
  REQUIRE(regions[0].loops.size() == 2);
  int outer = 0, hole = 0;
  for (const auto& l : regions[0].loops) {
    long long a = loop_twice_area(l);
    if (a > 0) {
      ++outer;
      CHECK(a == 18);
    } else {
      ++hole;
      CHECK(l.size() == 4);
      CHECK(a == -2);
    }
  }
  CHECK(outer == 1);
  CHECK(hole == 1);
}

TEST_CASE("trace: plateaus sharing an edge share their boundary vertices exactly") {
  // 8x8: left half height 60, right half height 180, on rows 1..6.
  LevelImageSet s = blank(8, 8);
  fill(s, 1, 1, 3, 6, 60);
  fill(s, 4, 1, 3, 6, 180);
  auto regions = trace_regions(s.floor, s.height, 0.0);
  REQUIRE(regions.size() == 2);
  // Rows 1..6 become y-up corners 1..7; the shared edge is X = 4.
  std::set<LatticePoint> a(regions[0].loops[0].begin(), regions[0].loops[0].end());
  std::set<LatticePoint> b(regions[1].loops[0].begin(), regions[1].loops[0].end());
  std::vector<LatticePoint> shared;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
  CHECK(shared == std::vector<LatticePoint>{{4, 1}, {4, 7}});
  CHECK(a == std::set<LatticePoint>{{1, 1}, {4, 1}, {4, 7}, {1, 7}});
  CHECK(b == std::set<LatticePoint>{{4, 1}, {7, 1}, {7, 7}, {4, 7}});
}

TEST_CASE("trace: empty floor gives no regions") {
  LevelImageSet s = blank(6, 6);
  CHECK(trace_regions(s.floor, s.height).empty());
}

TEST_CASE("build_level: one rectangle gives one sector, four walls and a start") {
  LevelImageSet s = rasterize_level(rectangle_level(256, 128), canvas(16));
  s.things = Image(16, 16);  // force the fallback start placement
  WadLevel l = build_level(s, ReconstructionConfig{});
  CHECK(l.sectors.size() == 1);
  CHECK(l.vertexes.size() == 4);
  CHECK(l.linedefs.size() == 4);
  for (const auto& ld : l.linedefs) {
    CHECK_FALSE(ld.left.has_value());
    CHECK((ld.flags & linedef_flags::kImpassable) != 0);
  }
  REQUIRE(l.things.size() == 1);
  CHECK(l.things[0].type == 1);
  CHECK(validate_level(l).ok());
  CHECK(l.sectors[0].ceiling_height - l.sectors[0].floor_height == 128);
  CHECK(l.sectors[0].light == 160);
}

TEST_CASE("build_level: the nested plateau keeps its step two-sided") {
  LevelImageSet s = rasterize_level(nested_plateau_level(), canvas(32));
  ReconstructionResult r = reconstruct(s, ReconstructionConfig{});
  CHECK(r.level.sectors.size() == 3);
  int two_sided = 0;
  for (const auto& ld : r.level.linedefs)
    if (ld.left) {
      ++two_sided;
      CHECK((ld.flags & linedef_flags::kTwoSided) != 0);
    }
  CHECK(two_sided >= 5);  // A|B edge plus the platform's four sides
  CHECK(validate_level(r.level).ok());
  CHECK(r.iou >= 0.99);
  std::set<int> heights;
  for (const auto& sec : r.level.sectors) heights.insert(sec.floor_height);
  CHECK(heights == std::set<int>{0, 32, 64});
}

TEST_CASE("build_level rejects an empty floor") {
  try {
    build_level(blank(8, 8), ReconstructionConfig{});
    FAIL("expected EmptyFloor");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyFloor);
  }
}

TEST_CASE("round trip on clean synthetic sets") {
  for (const auto& s : procedural_corpus(8, 21)) {
    ReconstructionResult r = reconstruct(s, ReconstructionConfig{});
    CHECK(validate_level(r.level).ok());
    CHECK(r.iou >= 0.9);
    int plateaus = 0;
    plateau_labels(r.cleaned.floor, r.cleaned.height, &plateaus);
    CHECK(static_cast<int>(r.level.sectors.size()) == plateaus);
    for (const auto& ld : r.level.linedefs) CHECK(ld.right.has_value());
  }
}

TEST_CASE("things decode to category defaults") {
  LevelImageSet s = rasterize_level(nested_plateau_level(), canvas(32));
  WadLevel l = build_level(s, ReconstructionConfig{});
  std::multiset<int> types;
  for (const auto& t : l.things) types.insert(t.type);
  CHECK(types.count(1) == 1);
  CHECK(types.count(2001) == 1);  // shotgun: weapon default
  CHECK(types.count(3001) == 1);  // imp: monster default
}

TEST_CASE("reconstruction config validation") {
  ReconstructionConfig c;
  c.floor_threshold = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.simplify_tolerance = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.height_levels = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("manifest records parameters and IoU") {
  auto sets = procedural_corpus(1, 3);
  ReconstructionConfig cfg;
  ReconstructionResult r = reconstruct(sets[0], cfg);
  auto j = r.manifest(cfg);
  CHECK(j.at("floor_iou").get<double>() == r.iou);
  CHECK(j.at("parameters").at("floor_threshold") == 128);
  CHECK(j.at("defects") == 0);
}
