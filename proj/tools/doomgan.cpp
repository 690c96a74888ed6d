#include "doomgan/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace doomgan;

namespace {

constexpr int kExitData = 2;

ReconstructionConfig reconstruction_defaults() {
  ReconstructionConfig cfg;
  const fs::path defaults = fs::path(DOOMGAN_DATA_DIR) / "thing_defaults.json";
  if (fs::exists(defaults)) cfg.default_types = ReconstructionConfig::load_default_types(defaults);
  return cfg;
}

void print_reconstruction(const ReconstructionResult& r) {
  std::cout << "sectors " << r.level.sectors.size() << "  linedefs " << r.level.linedefs.size() << "  things "
            << r.level.things.size() << "  floor IoU " << r.iou << "  defects " << validate_level(r.level).defects.size()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doom level corpus, WGAN-GP training and level reconstruction"};
  app.require_subcommand(1);

  std::string in_dir, out_dir, manifest, model_dir, checkpoint, reference, generated, json_out, sample_dir, out_wad,
      conditioning;
  RasterConfig raster;
  int canvas = raster.width;

  auto* extract = app.add_subcommand("extract", "Rasterize every level under a directory of WADs");
  extract->add_option("in_dir", in_dir, "Directory scanned recursively for *.wad")->required();
  extract->add_option("out_dir", out_dir, "Dataset directory (manifest.json, features.csv, images/)")->required();
  extract->add_option("--scale", raster.scale, "Map units per pixel")->check(CLI::PositiveNumber);
  extract->add_option("--canvas", canvas, "Canvas side in pixels")->check(CLI::PositiveNumber);

  TrainingConfig tcfg;
  bool conditional = false, fresh = false;
  auto* train = app.add_subcommand("train", "Train the WGAN-GP on a dataset manifest");
  train->add_option("manifest", manifest, "manifest.json or its directory")->required();
  train->add_option("model_dir", model_dir, "Output directory for checkpoints and the loss log")->required();
  train->add_flag("--conditional", conditional, "Condition on the seven level features");
  train->add_option("--iterations", tcfg.iterations, "Total generator iterations")->check(CLI::NonNegativeNumber);
  train->add_option("--seed", tcfg.seed, "Random seed");
  train->add_option("--batch", tcfg.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_flag("--fresh", fresh, "Ignore model_dir/latest.ckpt and start over");

  GenerationOptions gopts;
  auto* generate = app.add_subcommand("generate", "Sample level image sets from a checkpoint");
  generate->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  generate->add_option("out_dir", out_dir, "Output directory, one subdirectory per sample")->required();
  generate->add_option("--n", gopts.count, "Number of samples")->check(CLI::NonNegativeNumber);
  generate->add_option("--seed", gopts.seed, "Noise seed");
  generate->add_option("--conditioning", conditioning, "Manifest whose feature rows condition the samples");
  generate->add_flag("--reconstruct", gopts.reconstruct, "Also write each sample as a PWAD");

  auto* evaluate = app.add_subcommand("evaluate", "Compare generated image sets with a reference corpus");
  evaluate->add_option("reference_manifest", reference, "Reference dataset manifest")->required();
  evaluate->add_option("generated_dir", generated, "Directory of generated image sets")->required();
  evaluate->add_option("--json", json_out, "Write the report as JSON");

  auto* rebuild = app.add_subcommand("reconstruct", "Turn one generated image set into a playable PWAD");
  rebuild->add_option("sample_dir", sample_dir, "Directory holding <stem>_<maptype>.png")->required();
  rebuild->add_option("out_wad", out_wad, "Output PWAD path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;  // --help exits 0, every parse failure 1
  }

  try {
    if (*extract) {
      raster.width = raster.height = canvas;
      DatasetManifest m = build_dataset(in_dir, raster, out_dir);
      std::cout << m.included_count() << " of " << m.entries.size() << " levels included\n";
    } else if (*train) {
      tcfg.arch.conditional = conditional;
      TrainingRun run = run_training(manifest, tcfg, model_dir, !fresh);
      std::cout << "iteration " << run.model.iteration << " checkpoint " << run.checkpoint.string() << '\n';
    } else if (*generate) {
      if (!conditioning.empty()) gopts.conditioning_manifest = conditioning;
      gopts.reconstruction = reconstruction_defaults();
      auto samples = run_generation(checkpoint, out_dir, gopts);
      for (const auto& s : samples) {
        std::cout << s.stem;
        if (s.conditioning_id) std::cout << "  conditioned on " << *s.conditioning_id;
        if (s.reconstruction_iou) std::cout << "  IoU " << *s.reconstruction_iou << "  defects " << *s.reconstruction_defects;
        std::cout << '\n';
      }
    } else if (*evaluate) {
      std::optional<fs::path> out;
      if (!json_out.empty()) out = json_out;
      EvaluationResult r = run_evaluation(reference, generated, out);
      std::cout << r.report.table();
      std::cout << "reference " << fingerprint_hex(r.reference_fingerprint) << "  generated "
                << fingerprint_hex(r.generated_fingerprint) << '\n';
    } else if (*rebuild) {
      print_reconstruction(run_reconstruct(sample_dir, out_wad, reconstruction_defaults()));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
