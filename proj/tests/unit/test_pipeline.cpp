#include "doomgan/error.hpp"
#include "doomgan/pipeline.hpp"
#include "doomgan/synthetic.hpp"

#include <doctest.h>

#include <fstream>

namespace fs = std::filesystem;
using namespace doomgan;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("doomgan_pipeline_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const Bytes& b) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RasterConfig canvas(int n) {
  RasterConfig c;
  c.width = c.height = n;
  return c;
}

// Three WADs: two small rectangles and one that cannot fit a 16 px canvas,
// plus a corrupt file.
void populate(const fs::path& in) {
  write_bytes(in / "a.wad", write_wad(level_wad({rectangle_level(256, 192)})));
  write_bytes(in / "b.wad", write_wad(level_wad({rectangle_level(192, 160, 16)})));
  write_bytes(in / "big.wad", write_wad(level_wad({rectangle_level(4096, 256)})));
  write_bytes(in / "junk.wad", Bytes{'N', 'O', 'P', 'E'});
}

TrainingConfig tiny_training() {
  TrainingConfig c;
  c.arch.noise_dim = 5;
  c.arch.generator_channels = {4, 3};
  c.arch.critic_channels = {3, 4};
  c.batch_size = 2;
  c.iterations = 0;
  c.log_every = 1;
  c.checkpoint_every = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("build_dataset: inclusion, exclusion reasons, order and files") {
  TempDir t("build");
  populate(t.path / "in");
  DatasetManifest m = build_dataset(t.path / "in", canvas(16), t.path / "out");
  REQUIRE(m.entries.size() == 4);
  CHECK(m.entries[0].id == "a_MAP01");
  CHECK(m.entries[0].included);
  CHECK(m.entries[1].id == "b_MAP01");
  CHECK(m.entries[2].reason == "does-not-fit");
  CHECK(m.entries[3].reason.starts_with("parse-error"));
  CHECK(m.included_count() == 2);
  REQUIRE(m.stats.has_value());
  for (MapType t2 : kAllMapTypes)
    CHECK(fs::exists(t.path / "out" / "images" / ("a_MAP01_" + std::string(map_type_name(t2)) + ".png")));
  CHECK(slurp(t.path / "out" / "features.csv").starts_with("level_id,"));

  DatasetManifest back = DatasetManifest::load(t.path / "out");
  CHECK(back.to_json() == m.to_json());
  Dataset d = back.load_dataset();
  CHECK(d.levels.size() == 2);
  CHECK(d.features.size() == 2);
}

TEST_CASE("build_dataset is reproducible and leaves its input alone") {
  TempDir t("repro");
  populate(t.path / "in");
  const std::string before = slurp(t.path / "in" / "a.wad");
  build_dataset(t.path / "in", canvas(16), t.path / "one");
  build_dataset(t.path / "in", canvas(16), t.path / "two");
  CHECK(slurp(t.path / "one" / "manifest.json") == slurp(t.path / "two" / "manifest.json"));
  CHECK(slurp(t.path / "one" / "features.csv") == slurp(t.path / "two" / "features.csv"));
  CHECK(slurp(t.path / "one" / "images" / "b_MAP01_height.png") == slurp(t.path / "two" / "images" / "b_MAP01_height.png"));
  CHECK(slurp(t.path / "in" / "a.wad") == before);
}

TEST_CASE("build_dataset without WADs reports NoInput") {
  TempDir t("empty");
  try {
    build_dataset(t.path, canvas(16), t.path / "out");
    FAIL("expected NoInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoInput);
  }
}

TEST_CASE("run_training: zero iterations, resume, missing features") {
  TempDir t("train");
  populate(t.path / "in");
  build_dataset(t.path / "in", canvas(16), t.path / "data");

  TrainingRun r0 = run_training(t.path / "data", tiny_training(), t.path / "model0");
  CHECK(r0.model.iteration == 0);
  CHECK(fs::exists(t.path / "model0" / "latest.ckpt"));
  CHECK(fs::exists(t.path / "model0" / "config.json"));

  TrainingConfig c = tiny_training();
  c.iterations = 4;
  TrainingRun straight = run_training(t.path / "data", c, t.path / "straight");
  CHECK(slurp(t.path / "straight" / "training_log.csv").starts_with("iteration,L_D_train,L_D_valid,L_G\n"));
  CHECK(fs::exists(t.path / "straight" / "checkpoint_2.ckpt"));

  c.iterations = 2;
  run_training(t.path / "data", c, t.path / "resumed");
  c.iterations = 4;
  TrainingRun resumed = run_training(t.path / "data", c, t.path / "resumed");
  CHECK(resumed.resumed);
  CHECK(parameter_hash(resumed.model.generator.params()) == parameter_hash(straight.model.generator.params()));
  CHECK(parameter_hash(resumed.model.critic.params()) == parameter_hash(straight.model.critic.params()));

  // A manifest without feature rows cannot drive a conditional model.
  auto j = nlohmann::json::parse(slurp(t.path / "data" / "manifest.json"));
  for (auto& lvl : j["levels"]) lvl.erase("features");
  std::ofstream(t.path / "data" / "manifest.json") << j.dump();
  TrainingConfig cc = tiny_training();
  cc.arch.conditional = true;
  try {
    run_training(t.path / "data", cc, t.path / "cond");
    FAIL("expected MissingFeatures");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingFeatures);
  }
  CHECK_FALSE(fs::exists(t.path / "cond" / "latest.ckpt"));
}

TEST_CASE("generation, evaluation and reconstruction outputs") {
  TempDir t("gen");
  populate(t.path / "in");
  build_dataset(t.path / "in", canvas(16), t.path / "data");
  TrainingConfig c = tiny_training();
  c.arch.conditional = true;
  run_training(t.path / "data", c, t.path / "model");

  GenerationOptions g;
  g.count = 3;
  CHECK_THROWS_AS(run_generation(t.path / "model" / "latest.ckpt", t.path / "gen", g), Error);

  // One-row conditioning manifest.
  DatasetManifest one = DatasetManifest::load(t.path / "data");
  one.entries.resize(1);
  one.root = t.path / "one";
  one.save();
  g.conditioning_manifest = t.path / "one";
  auto samples = run_generation(t.path / "model" / "latest.ckpt", t.path / "gen", g);
  REQUIRE(samples.size() == 3);
  for (const auto& s : samples) {
    CHECK(s.conditioning_id == "a_MAP01");
    for (MapType mt : kAllMapTypes)
      CHECK(fs::exists(t.path / "gen" / s.stem / (s.stem + "_" + std::string(map_type_name(mt)) + ".png")));
  }
  CHECK(load_image_tree(t.path / "gen").size() == 3);

  EvaluationResult self = run_evaluation(t.path / "data", t.path / "data" / "images", t.path / "self.json");
  auto js = nlohmann::json::parse(slurp(t.path / "self.json"));
  CHECK(js.contains("reference_fingerprint"));
  CHECK(self.reference_fingerprint == self.generated_fingerprint);
  CHECK(self.report.maps.at(MapType::Floor).delta_entropy == 0.0);
  CHECK(std::abs(self.report.maps.at(MapType::Floor).mean_ssim - 1.0) < 1e-9);
  CHECK(*self.report.maps.at(MapType::Floor).corner_error == 0.0);

  CHECK_THROWS_AS(run_evaluation(t.path / "data", t.path / "missing"), Error);

  // Reconstruct a clean dataset image set.
  auto sets = DatasetManifest::load(t.path / "data").load_images();
  save_image_set(sets[0], t.path / "clean", "s");
  ReconstructionResult r = run_reconstruct(t.path / "clean", t.path / "out" / "level.wad");
  CHECK(validate_level(r.level).ok());
  CHECK(fs::exists(t.path / "out" / "level.wad.json"));
  const std::string bytes = slurp(t.path / "out" / "level.wad");
  WadFile w = parse_wad(Bytes(bytes.begin(), bytes.end()));
  CHECK(list_levels(w) == std::vector<std::string>{"MAP01"});
}

TEST_CASE("shipped data files agree with the built-in defaults") {
  const fs::path data(DOOMGAN_DATA_DIR);
  ThingPalette p = ThingPalette::from_json_file(data / "thing_categories.json");
  ThingPalette d = ThingPalette::doom_default();
  CHECK(p.gray == d.gray);
  CHECK(p.categories == d.categories);
  CHECK(ReconstructionConfig::load_default_types(data / "thing_defaults.json") == ReconstructionConfig{}.default_types);
  for (std::size_t c = 0; c + 1 < kThingCategoryCount; ++c) {
    const auto id = ReconstructionConfig{}.default_types[c];
    CHECK(d.category_of(id) == static_cast<ThingCategory>(c));
  }
  CHECK(d.category_of(ReconstructionConfig{}.default_types.back()) == ThingCategory::Other);
}

TEST_CASE("corpus fingerprint tracks content") {
  auto sets = procedural_corpus(2, 4);
  const auto h = corpus_fingerprint(sets);
  CHECK(h == corpus_fingerprint(sets));
  sets[1].things.px[0] ^= 1;
  CHECK(h != corpus_fingerprint(sets));
  CHECK(fingerprint_hex(0xabcULL) == "0000000000000abc");
}
