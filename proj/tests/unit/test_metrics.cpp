#include "../support/oracles.hpp"
#include "doomgan/error.hpp"
#include "doomgan/metrics.hpp"
#include "doomgan/synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace doomgan;

namespace {

Image random_image(nn::Rng& rng, int w, int h) {
  Image img(w, h);
  for (auto& v : img.px) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// 256 pixels with 2^bits distinct values, equally often.
Image entropy_image(int bits) {
  Image img(16, 16);
  const int levels = 1 << bits;
  for (int i = 0; i < 256; ++i) img.px[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i % levels * (256 / levels));
  return img;
}

Corpus floors(std::vector<Image> imgs) {
  Corpus c;
  c.maps[MapType::Floor] = std::move(imgs);
  return c;
}

}  // namespace

TEST_CASE("pixel entropy of constant, half/half and uniform images") {
  CHECK(pixel_entropy(Image(8, 8, 7)) == 0.0);
  Image half(8, 8);
  for (int i = 0; i < 32; ++i) half.px[static_cast<std::size_t>(i)] = 255;
  CHECK(pixel_entropy(half) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pixel_entropy(entropy_image(8)) == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("delta entropy takes means first") {
  Corpus a = floors({Image(16, 16), entropy_image(8)});
  Corpus b = floors({entropy_image(4)});
  CHECK(delta_entropy(a, b, MapType::Floor) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(delta_entropy(a, a, MapType::Floor) == 0.0);
  Image half(16, 16);
  for (int i = 0; i < 128; ++i) half.px[static_cast<std::size_t>(i)] = 255;
  CHECK(delta_entropy(floors({Image(16, 16)}), floors({half, half}), MapType::Floor) == doctest::Approx(1.0));
  try {
    delta_entropy(Corpus{}, a, MapType::Floor);
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyCorpus);
  }
}

TEST_CASE("ssim: identity, constant extremes, symmetry, errors") {
  nn::Rng rng(1);
  Image x = random_image(rng, 20, 16), y = random_image(rng, 20, 16);
  CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-14));
  const double c1 = std::pow(0.01 * 255, 2);
  CHECK(ssim(Image(11, 11, 0), Image(11, 11, 255)) == doctest::Approx(c1 / (255.0 * 255.0 + c1)).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(Image(11, 11), Image(12, 11)), Error);
  CHECK_THROWS_AS(ssim(Image(10, 10), Image(10, 10)), Error);
}

TEST_CASE("ssim matches the per-window oracle on 8x8 pairs") {
  nn::Rng rng(2);
  SsimParams p;
  p.window = 5;
  for (int i = 0; i < 10; ++i) {
    Image x = random_image(rng, 8, 8), y = random_image(rng, 8, 8);
    CHECK(std::abs(ssim(x, y, p) - testsupport::naive_ssim(x, y, p)) < 1e-6);
  }
}

TEST_CASE("encoding error") {
  Image bin(4, 4);
  bin.px[3] = 255;
  CHECK(encoding_error(bin, {0, 255}) == 0.0);
  CHECK(encoding_error(Image(1, 1, 128), {0, 255}) == doctest::Approx(127.0 / 255.0));
  std::set<std::uint8_t> all;
  for (int v = 0; v < 256; ++v) all.insert(static_cast<std::uint8_t>(v));
  nn::Rng rng(3);
  CHECK(encoding_error(random_image(rng, 9, 9), all) == 0.0);
  CHECK_THROWS_AS(encoding_error(bin, {}), Error);
}

TEST_CASE("meaningful value sets") {
  auto pal = ThingPalette::doom_default();
  CHECK(*meaningful_values(MapType::Floor, pal) == std::set<std::uint8_t>{0, 255});
  CHECK(*meaningful_values(MapType::Wall, pal) == std::set<std::uint8_t>{0, 255});
  CHECK_FALSE(meaningful_values(MapType::Height, pal).has_value());
  auto things = *meaningful_values(MapType::Things, pal);
  CHECK(things.size() == 10);
  CHECK(things.count(0) == 1);
  CHECK(meaningful_values(MapType::Triggers, pal)->count(encode_trigger(TriggerCategory::Exit, 3)) == 1);
}

TEST_CASE("harris: blank image, axis-aligned square, quarter turns") {
  CHECK(harris_corner_count(Image(32, 32)) == 0);
  Image sq(64, 64);
  for (int y = 22; y < 42; ++y)
    for (int x = 22; x < 42; ++x) sq.at(x, y) = 255;
  auto corners = harris_corners(sq);
  CHECK(corners.size() == 4);
  for (auto [x, y] : corners) {
    CHECK((std::abs(x - 22) <= 2 || std::abs(x - 41) <= 2));
    CHECK((std::abs(y - 22) <= 2 || std::abs(y - 41) <= 2));
  }
  nn::Rng rng(4);
  for (const auto& s : procedural_corpus(5, 8)) {
    const std::size_t n = harris_corner_count(s.floor);
    for (int k = 1; k <= 3; ++k) CHECK(harris_corner_count(rotate90(s.floor, k)) == n);
  }
}

TEST_CASE("corner error formula") {
  Image sq(32, 32);
  for (int y = 8; y < 24; ++y)
    for (int x = 8; x < 24; ++x) sq.at(x, y) = 255;
  Corpus four = floors({sq});
  Corpus none = floors({Image(32, 32)});
  CHECK(corner_error(four, four, MapType::Floor) == 0.0);
  CHECK(corner_error(four, none, MapType::Floor) == doctest::Approx(1.0));
  CHECK(corner_error(none, four, MapType::Floor) == doctest::Approx(4.0));
}

TEST_CASE("evaluate_corpora: self comparison and noisy floors") {
  auto sets = procedural_corpus(4, 5);
  Corpus c = Corpus::from_image_sets(sets);
  MetricsReport r = evaluate_corpora(c, c);
  for (MapType t : kEvaluatedMapTypes) {
    const auto& m = r.maps.at(t);
    CHECK(m.delta_entropy == 0.0);
    CHECK(std::abs(m.mean_ssim - 1.0) < 1e-9);
    CHECK(m.encoding_error_reference == m.encoding_error_generated);
    if (m.corner_error) CHECK(*m.corner_error == 0.0);
  }
  CHECK(r.maps.at(MapType::Floor).corner_error.has_value());
  CHECK_FALSE(r.maps.at(MapType::Height).corner_error.has_value());

  auto noisy = sets;
  nn::Rng rng(6);
  for (auto& s : noisy)
    for (auto& v : s.floor.px) v = static_cast<std::uint8_t>(rng.below(256));
  MetricsReport rn = evaluate_corpora(c, Corpus::from_image_sets(noisy));
  CHECK(*rn.maps.at(MapType::Floor).encoding_error_reference == 0.0);
  CHECK(*rn.maps.at(MapType::Floor).encoding_error_generated > 0.0);
  CHECK(rn.to_json().contains("maps"));
  CHECK_FALSE(rn.table().empty());
}

TEST_CASE("reordering a corpus changes only the SSIM pairing") {
  auto sets = procedural_corpus(4, 6);
  auto rev = sets;
  std::reverse(rev.begin(), rev.end());
  Corpus a = Corpus::from_image_sets(sets);
  MetricsReport r1 = evaluate_corpora(a, Corpus::from_image_sets(procedural_corpus(3, 7)));
  MetricsReport r2 = evaluate_corpora(Corpus::from_image_sets(rev), Corpus::from_image_sets(procedural_corpus(3, 7)));
  for (MapType t : kEvaluatedMapTypes) {
    CHECK(r1.maps.at(t).delta_entropy == doctest::Approx(r2.maps.at(t).delta_entropy).epsilon(1e-12));
    CHECK(r1.maps.at(t).encoding_error_reference.value_or(0) ==
          doctest::Approx(r2.maps.at(t).encoding_error_reference.value_or(0)).epsilon(1e-12));
  }
}

TEST_CASE("corpus validation") {
  Corpus c = floors({Image(8, 8), Image(9, 8)});
  CHECK_THROWS_AS(c.validate(), Error);
}
