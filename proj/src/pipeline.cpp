#include "doomgan/pipeline.hpp"

#include "doomgan/error.hpp"
#include "doomgan/synthetic.hpp"
#include "doomgan/wad.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;

namespace doomgan {

int log_level() {
  static const int level = [] {
    const char* v = std::getenv("DOOMGAN_LOG");
    if (!v || !*v) return 1;
    return std::clamp(std::atoi(v), 0, 2);
  }();
  return level;
}

void log_message(int level, const std::string& msg) {
  if (level <= log_level()) std::cerr << msg << '\n';
}

namespace {

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + p.string());
    out << text;
  }
  fs::rename(tmp, p);
}

nlohmann::json raster_json(const RasterConfig& r) {
  return {{"width", r.width}, {"height", r.height}, {"scale", r.scale}};
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string reason_for(const Error& e) {
  switch (e.code()) {
    case Errc::DoesNotFit: return "does-not-fit";
    case Errc::UnclosedSector: return "unclosed-sector";
    case Errc::EmptyFloor: return "empty-floor";
    default: return "parse-error: " + std::string(e.what());
  }
}

}  // namespace

std::size_t DatasetManifest::included_count() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.included; }));
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json j;
  j["raster"] = raster_json(raster);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json x = {{"id", e.id}, {"source", e.source}, {"marker", e.marker}, {"included", e.included}};
    if (!e.reason.empty()) x["reason"] = e.reason;
    if (e.included) {
      x["images"] = nlohmann::json::object();
      for (MapType t : kAllMapTypes)
        x["images"][std::string(map_type_name(t))] = e.image_stem + "_" + std::string(map_type_name(t)) + ".png";
      x["image_stem"] = e.image_stem;
    }
    if (e.features) x["features"] = feature_to_json(*e.features);
    list.push_back(x);
  }
  j["levels"] = list;
  j["statistics"] = {{"scanned", entries.size()}, {"included", included_count()}};
  if (stats) j["statistics"]["normalization"] = stats->to_json();
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  try {
    m.raster.width = j.at("raster").at("width").get<int>();
    m.raster.height = j.at("raster").at("height").get<int>();
    m.raster.scale = j.at("raster").at("scale").get<double>();
    for (const auto& x : j.at("levels")) {
      ManifestEntry e;
      e.id = x.at("id").get<std::string>();
      e.source = x.at("source").get<std::string>();
      e.marker = x.at("marker").get<std::string>();
      e.included = x.at("included").get<bool>();
      e.reason = x.value("reason", std::string());
      e.image_stem = x.value("image_stem", std::string());
      if (x.contains("features")) e.features = feature_from_json(x.at("features"));
      m.entries.push_back(std::move(e));
    }
    const auto& st = j.at("statistics");
    if (st.contains("normalization")) m.stats = NormalizationStats::from_json(st.at("normalization"));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Io, "malformed manifest: " + std::string(ex.what()));
  }
  return m;
}

void DatasetManifest::save() const {
  write_text(root / "manifest.json", to_json().dump(2) + "\n");
  std::string csv;
  bool header = false;
  for (const auto& e : entries) {
    if (!e.included || !e.features) continue;
    if (!header) {
      csv += feature_csv_header(*e.features) + "\n";
      header = true;
    }
    csv += feature_csv_row(e.id, *e.features) + "\n";
  }
  if (!header) csv = feature_csv_header(FeatureVector{}) + "\n";
  write_text(root / "features.csv", csv);
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
  fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  if (!fs::exists(file)) throw Error(Errc::NoInput, "no manifest at " + path.string());
  std::ifstream in(file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Io, file.string() + ": " + ex.what());
  }
  return from_json(j, file.parent_path());
}

std::vector<LevelImageSet> DatasetManifest::load_images() const {
  std::vector<LevelImageSet> out;
  for (const auto& e : entries) {
    if (!e.included) continue;
    fs::path stem = root / e.image_stem;
    out.push_back(load_image_set(stem.parent_path(), stem.filename().string()));
  }
  return out;
}

Dataset DatasetManifest::load_dataset() const {
  Dataset d;
  d.levels = load_images();
  bool all = true;
  for (const auto& e : entries)
    if (e.included && !e.features) all = false;
  if (all)
    for (const auto& e : entries)
      if (e.included) d.features.push_back(*e.features);
  return d;
}

DatasetManifest build_dataset(const fs::path& input_dir, const RasterConfig& raster, const fs::path& output_dir) {
  if (!fs::is_directory(input_dir)) throw Error(Errc::NoInput, input_dir.string() + " is not a directory");
  std::vector<fs::path> wads;
  for (const auto& de : fs::recursive_directory_iterator(input_dir))
    if (de.is_regular_file() && lower(de.path().extension().string()) == ".wad") wads.push_back(de.path());
  std::sort(wads.begin(), wads.end());
  if (wads.empty()) throw Error(Errc::NoInput, "no WAD files under " + input_dir.string());

  DatasetManifest m;
  m.raster = raster;
  m.root = output_dir;
  fs::create_directories(output_dir / "images");
  std::set<std::string> used_ids;
  auto unique_id = [&](std::string base) {
    std::string id = base;
    for (int k = 2; used_ids.count(id); ++k) id = base + "_" + std::to_string(k);
    used_ids.insert(id);
    return id;
  };

  for (const auto& path : wads) {
    const std::string rel = fs::relative(path, input_dir).generic_string();
    const std::string stem = path.stem().string();
    WadFile wad;
    try {
      wad = parse_wad(read_file(path));
    } catch (const Error& e) {
      ManifestEntry x;
      x.id = unique_id(stem);
      x.source = rel;
      x.reason = "parse-error: " + std::string(e.what());
      log_message(1, "skip " + rel + ": " + e.what());
      m.entries.push_back(std::move(x));
      continue;
    }
    for (const auto& marker : list_levels(wad)) {
      ManifestEntry x;
      x.id = unique_id(stem + "_" + marker);
      x.source = rel;
      x.marker = marker;
      try {
        WadLevel level = extract_level(wad, marker);
        LevelImageSet imgs = rasterize_level(level, raster);
        FeatureVector f = extract_feature_vector(imgs);
        x.image_stem = "images/" + x.id;
        save_image_set(imgs, output_dir / "images", x.id);
        x.features = f;
        x.included = true;
        log_message(2, "level " + x.id + " included");
      } catch (const Error& e) {
        x.reason = reason_for(e);
        log_message(1, "exclude " + x.id + ": " + x.reason);
      }
      m.entries.push_back(std::move(x));
    }
  }

  std::vector<FeatureVector> fs_rows;
  for (const auto& e : m.entries)
    if (e.included) fs_rows.push_back(*e.features);
  if (!fs_rows.empty()) m.stats = NormalizationStats::from_corpus(fs_rows);
  m.save();
  log_message(1, "dataset: " + std::to_string(m.included_count()) + " of " + std::to_string(m.entries.size()) +
                     " levels included");
  return m;
}

// ---------------------------------------------------------------------------

namespace {

void write_curves(const fs::path& p, const std::vector<LossPoint>& curves) {
  std::string csv = "iteration,L_D_train,L_D_valid,L_G\n";
  char buf[160];
  for (const auto& c : curves) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(c.iteration), c.critic_train,
                  c.critic_valid, c.generator);
    csv += buf;
  }
  write_text(p, csv);
}

bool same_run(const TrainingConfig& a, const TrainingConfig& b) {
  // Everything except the iteration target must match to continue a run.
  auto ja = a.to_json(), jb = b.to_json();
  ja.erase("iterations");
  jb.erase("iterations");
  ja.erase("checkpoint_every");
  jb.erase("checkpoint_every");
  return ja == jb;
}

}  // namespace

TrainingRun run_training(const fs::path& manifest_path, TrainingConfig cfg, const fs::path& model_dir, bool resume) {
  DatasetManifest manifest = DatasetManifest::load(manifest_path);
  Dataset data = manifest.load_dataset();
  if (data.levels.empty()) throw Error(Errc::EmptyDataset, "manifest has no included levels");
  if (cfg.arch.conditional && data.features.size() != data.levels.size())
    throw Error(Errc::MissingFeatures, "conditional training needs a feature row for every level");
  cfg.arch.image_size = manifest.raster.width;
  cfg.validate();

  fs::create_directories(model_dir);
  const fs::path latest = model_dir / "latest.ckpt";
  TrainingRun run;
  if (resume && fs::exists(latest)) {
    GanModel m = GanModel::load(latest);
    if (!same_run(m.config, cfg))
      throw Error(Errc::BadCheckpoint, latest.string() + " was written with a different configuration");
    m.config.iterations = cfg.iterations;
    m.config.checkpoint_every = cfg.checkpoint_every;
    run.model = std::move(m);
    run.resumed = true;
    log_message(1, "resuming from iteration " + std::to_string(run.model.iteration));
  } else {
    run.model = init_model(data, cfg);
  }
  write_text(model_dir / "config.json", cfg.to_json().dump(2) + "\n");

  TrainCallbacks cb;
  cb.on_log = [&](const LossPoint& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "iter %lld  L_D train %.4f  valid %.4f  L_G %.4f", static_cast<long long>(p.iteration),
                  p.critic_train, p.critic_valid, p.generator);
    log_message(1, buf);
    write_curves(model_dir / "training_log.csv", run.model.curves);
  };
  cb.on_checkpoint = [&](const GanModel& m) {
    m.save(model_dir / ("checkpoint_" + std::to_string(m.iteration) + ".ckpt"));
    m.save(latest);
    log_message(2, "checkpoint at iteration " + std::to_string(m.iteration));
  };
  train_until(run.model, data, cfg.iterations, cb);
  run.model.save(latest);
  write_curves(model_dir / "training_log.csv", run.model.curves);
  run.checkpoint = latest;
  return run;
}

// ---------------------------------------------------------------------------

std::vector<GeneratedSample> run_generation(const fs::path& checkpoint, const fs::path& out_dir,
                                            const GenerationOptions& opts) {
  GanModel model = GanModel::load(checkpoint);
  std::vector<std::array<double, kConditioningSize>> rows;
  std::vector<std::string> row_ids;
  if (model.config.arch.conditional) {
    if (!opts.conditioning_manifest)
      throw Error(Errc::MissingConditioning, "conditional model needs --conditioning <manifest>");
    auto m = DatasetManifest::load(*opts.conditioning_manifest);
    for (const auto& e : m.entries)
      if (e.included && e.features) {
        rows.push_back(normalize_features(*e.features, *model.stats));
        row_ids.push_back(e.id);
      }
    if (rows.empty() && opts.count > 0) throw Error(Errc::MissingConditioning, "conditioning manifest has no feature rows");
  }
  auto sets = sample(model, opts.count, opts.seed, rows);
  std::vector<GeneratedSample> out;
  nlohmann::json index = nlohmann::json::array();
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    GeneratedSample g;
    g.stem = "sample" + std::to_string(i);
    sets[i].meta.scale = opts.reconstruction.scale;
    save_image_set(sets[i], out_dir / g.stem, g.stem);
    nlohmann::json rec = {{"stem", g.stem}};
    if (!rows.empty()) {
      g.conditioning_id = row_ids[i % row_ids.size()];
      rec["conditioning_id"] = *g.conditioning_id;
    }
    if (opts.reconstruct) {
      try {
        auto r = reconstruct(sets[i], opts.reconstruction);
        {
          auto bytes = write_wad(level_wad({r.level}));
          std::ofstream(out_dir / g.stem / (g.stem + ".wad"), std::ios::binary)
              .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        }
        g.reconstruction_iou = r.iou;
        g.reconstruction_defects = validate_level(r.level).defects.size();
        rec["reconstruction"] = r.manifest(opts.reconstruction);
      } catch (const Error& e) {
        rec["reconstruction_error"] = e.what();
      }
    }
    index.push_back(rec);
    out.push_back(std::move(g));
  }
  write_text(out_dir / "samples.json",
             nlohmann::json{{"checkpoint", checkpoint.filename().string()},
                            {"iteration", model.iteration},
                            {"seed", opts.seed},
                            {"samples", index}}
                     .dump(2) +
                 "\n");
  return out;
}

std::vector<LevelImageSet> load_image_tree(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::NoInput, dir.string() + " is not a directory");
  if (fs::exists(dir / "manifest.json")) return DatasetManifest::load(dir).load_images();
  std::vector<fs::path> floors;
  const std::string suffix = "_floor.png";
  for (const auto& de : fs::recursive_directory_iterator(dir)) {
    const std::string name = de.path().filename().string();
    if (de.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) floors.push_back(de.path());
  }
  std::sort(floors.begin(), floors.end());
  std::vector<LevelImageSet> out;
  for (const auto& f : floors) {
    const std::string name = f.filename().string();
    out.push_back(load_image_set(f.parent_path(), name.substr(0, name.size() - suffix.size())));
  }
  return out;
}

std::uint64_t corpus_fingerprint(const std::vector<LevelImageSet>& sets) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : sets)
    for (MapType t : kAllMapTypes) {
      const Image& img = s.channel(t);
      for (int v : {img.width, img.height})
        for (int k = 0; k < 4; ++k) mix(static_cast<std::uint8_t>(v >> (8 * k)));
      for (auto p : img.px) mix(p);
    }
  return h;
}

std::string fingerprint_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json EvaluationResult::to_json() const {
  nlohmann::json j = report.to_json();
  j["reference_fingerprint"] = fingerprint_hex(reference_fingerprint);
  j["generated_fingerprint"] = fingerprint_hex(generated_fingerprint);
  return j;
}

EvaluationResult run_evaluation(const fs::path& reference, const fs::path& generated,
                                const std::optional<fs::path>& json_out) {
  auto ref_sets = DatasetManifest::load(reference).load_images();
  auto gen_sets = load_image_tree(generated);
  if (ref_sets.empty()) throw Error(Errc::EmptyCorpus, "reference corpus is empty");
  if (gen_sets.empty()) throw Error(Errc::EmptyCorpus, "no generated image sets under " + generated.string());
  EvaluationResult r;
  r.report = evaluate_corpora(Corpus::from_image_sets(ref_sets), Corpus::from_image_sets(gen_sets));
  r.reference_fingerprint = corpus_fingerprint(ref_sets);
  r.generated_fingerprint = corpus_fingerprint(gen_sets);
  if (json_out) write_text(*json_out, r.to_json().dump(2) + "\n");
  return r;
}

ReconstructionResult run_reconstruct(const fs::path& sample_dir, const fs::path& out_wad,
                                     const ReconstructionConfig& cfg) {
  auto sets = load_image_tree(sample_dir);
  if (sets.empty()) throw Error(Errc::NoInput, "no image set in " + sample_dir.string());
  if (sets.size() > 1) log_message(1, "several image sets found; reconstructing the first");
  ReconstructionResult r = reconstruct(sets.front(), cfg);
  auto bytes = write_wad(level_wad({r.level}));
  if (out_wad.has_parent_path()) fs::create_directories(out_wad.parent_path());
  {
    std::ofstream out(out_wad, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + out_wad.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  auto manifest_path = out_wad;
  manifest_path += ".json";
  write_text(manifest_path, r.manifest(cfg).dump(2) + "\n");
  return r;
}

}  // namespace doomgan
