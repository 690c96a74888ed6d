#pragma once

#include "doomgan/features.hpp"
#include "doomgan/gan.hpp"
#include "doomgan/metrics.hpp"
#include "doomgan/raster.hpp"
#include "doomgan/reconstruct.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace doomgan {

// Verbosity from DOOMGAN_LOG: 0 silent, 1 progress (default), 2 detail.
int log_level();
void log_message(int level, const std::string& msg);

struct ManifestEntry {
  std::string id;
  std::string source;  // WAD path as scanned
  std::string marker;  // empty when the WAD itself could not be read
  bool included = false;
  std::string reason;  // exclusion reason, empty when included
  std::string image_stem;  // relative to the manifest directory
  std::optional<FeatureVector> features;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  RasterConfig raster;
  std::optional<NormalizationStats> stats;
  std::filesystem::path root;  // directory holding manifest.json

  std::size_t included_count() const;
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j, const std::filesystem::path& root);

  void save() const;  // root/manifest.json and root/features.csv
  static DatasetManifest load(const std::filesystem::path& path);  // file or directory

  std::vector<LevelImageSet> load_images() const;  // included entries, manifest order
  Dataset load_dataset() const;
};

DatasetManifest build_dataset(const std::filesystem::path& input_dir, const RasterConfig& raster,
                              const std::filesystem::path& output_dir);

struct TrainingRun {
  GanModel model;
  std::filesystem::path checkpoint;
  bool resumed = false;
};

// Resumes from model_dir/latest.ckpt when present and compatible.
TrainingRun run_training(const std::filesystem::path& manifest_path, TrainingConfig cfg,
                         const std::filesystem::path& model_dir, bool resume = true);

struct GenerationOptions {
  int count = 8;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> conditioning_manifest;
  bool reconstruct = false;
  ReconstructionConfig reconstruction;
};

struct GeneratedSample {
  std::string stem;  // sample<i>
  std::optional<std::string> conditioning_id;
  std::optional<double> reconstruction_iou;
  std::optional<std::size_t> reconstruction_defects;
};

std::vector<GeneratedSample> run_generation(const std::filesystem::path& checkpoint,
                                            const std::filesystem::path& out_dir,
                                            const GenerationOptions& opts);

// Image sets under dir: a dataset directory (manifest.json) or any tree of
// <stem>_<maptype>.png files, in sorted path order.
std::vector<LevelImageSet> load_image_tree(const std::filesystem::path& dir);

std::uint64_t corpus_fingerprint(const std::vector<LevelImageSet>& sets);

struct EvaluationResult {
  MetricsReport report;
  std::uint64_t reference_fingerprint = 0;
  std::uint64_t generated_fingerprint = 0;
  nlohmann::json to_json() const;
};

EvaluationResult run_evaluation(const std::filesystem::path& reference, const std::filesystem::path& generated,
                                const std::optional<std::filesystem::path>& json_out = std::nullopt);

ReconstructionResult run_reconstruct(const std::filesystem::path& sample_dir, const std::filesystem::path& out_wad,
                                     const ReconstructionConfig& cfg = {});

std::string fingerprint_hex(std::uint64_t h);

}  // namespace doomgan
