#pragma once

#include "doomgan/features.hpp"
#include "doomgan/nn.hpp"
#include "doomgan/raster.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace doomgan {

inline constexpr int kImageChannels = 6;  // floor, wall, height, things, triggers, rooms

struct ArchConfig {
  int image_size = 32;
  int noise_dim = 100;
  bool conditional = false;
  // Transposed-conv input channels from the projection onward; each layer
  // doubles the spatial size, the last one emits the image channels.
  std::vector<int> generator_channels{64, 32, 16};
  // Strided conv output channels; each layer halves the spatial size.
  std::vector<int> critic_channels{16, 32, 64};
  int kernel = 4;
  double leaky_slope = 0.2;

  int cond_dim() const { return conditional ? static_cast<int>(kConditioningSize) : 0; }
  void validate() const;
  nlohmann::json to_json() const;
  static ArchConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchConfig&) const = default;
};

nn::NetworkSpec generator_spec(const ArchConfig& a);
nn::NetworkSpec critic_spec(const ArchConfig& a);

struct TrainingConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  double lambda = 10.0;
  int critic_steps = 5;
  int iterations = 2000;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool rotate = true;
  double validation_fraction = 0.1;
  int log_every = 100;
  int checkpoint_every = 500;  // 0 disables periodic checkpoints
  ArchConfig arch;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

struct Dataset {
  std::vector<LevelImageSet> levels;
  std::vector<FeatureVector> features;  // empty, or one per level
};

struct LossPoint {
  std::int64_t iteration = 0;
  double critic_train = 0.0;  // mean over the iterations since the previous point
  double critic_valid = 0.0;
  double generator = 0.0;
};

struct GanModel {
  TrainingConfig config;
  nn::Network generator;
  nn::Network critic;
  std::optional<NormalizationStats> stats;
  nn::AdamState generator_opt;
  nn::AdamState critic_opt;
  std::int64_t iteration = 0;
  std::string rng_state;
  std::vector<LossPoint> curves;
  // Running sums for the current logging window.
  double window_critic = 0.0;
  double window_generator = 0.0;
  int window_count = 0;

  void save(const std::filesystem::path& path) const;
  static GanModel load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Tensor plumbing

// (N, 6, S, S) in [0, 1], channel order as kImageChannels.
nn::Tensor images_to_tensor(std::span<const LevelImageSet> sets, std::span<const std::size_t> indices);
std::vector<LevelImageSet> tensor_to_images(const nn::Tensor& t);

// k quarter turns clockwise applied to every channel of every sample.
nn::Tensor rotate90_batch(const nn::Tensor& x, int k);

// Generator input: noise concatenated with conditioning (N, noise + cond).
nn::Tensor generator_input(const nn::Tensor& z, const nn::Tensor* y);
// Critic input: images with conditioning broadcast as constant planes.
nn::Tensor critic_input(const nn::Tensor& images, const nn::Tensor* y);

// ---------------------------------------------------------------------------
// Losses. Gradients accumulate into the networks' grads().

struct PenaltyResult {
  double value = 0.0;
  std::vector<double> grad;  // d Gp / d critic params
};

// Gp = mean_n (||d critic / d xhat_n|| - 1)^2 with xhat = eps*x_true + (1-eps)*x_gen;
// the norm covers the image channels only.
PenaltyResult gradient_penalty(nn::Network& critic, const nn::Tensor& x_true, const nn::Tensor& x_gen,
                               std::span<const double> eps, const nn::Tensor* y = nullptr);

struct CriticBatch {
  nn::Tensor x_true;                // (N, 6, S, S)
  nn::Tensor z;                     // (N, noise)
  std::optional<nn::Tensor> y;      // (N, 7)
  std::vector<double> eps;          // N
};

struct LossTerms {
  double total = 0.0;
  double wgan = 0.0;
  double penalty = 0.0;
};

// L_D = mean D(G(z,y)) - mean D(x_true) + lambda * Gp. Zeroes and fills the
// critic gradients; the generator's gradients are untouched.
LossTerms critic_loss(nn::Network& generator, nn::Network& critic, const CriticBatch& b, double lambda);

// L_G = -mean D(G(z,y)). Zeroes and fills the generator gradients; the
// critic's gradients are untouched.
double generator_loss(nn::Network& generator, nn::Network& critic, const nn::Tensor& z,
                      const nn::Tensor* y);

// ---------------------------------------------------------------------------
// Training

struct TrainCallbacks {
  std::function<void(const LossPoint&)> on_log;
  std::function<void(const GanModel&)> on_checkpoint;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};
DataSplit split_dataset(std::size_t n, double valid_fraction, std::uint64_t seed);

// Networks initialized from cfg.seed; conditioning stats from the dataset
// when conditional.
GanModel init_model(const Dataset& data, const TrainingConfig& cfg);

// Continues model to `until` iterations (exclusive of already-run ones).
void train_until(GanModel& model, const Dataset& data, std::int64_t until, const TrainCallbacks& cb = {});

GanModel train(const Dataset& data, const TrainingConfig& cfg, const TrainCallbacks& cb = {});

// n generated level images. Conditional models need y rows (z-scored
// features), used cyclically.
std::vector<LevelImageSet> sample(GanModel& model, int n, std::uint64_t seed,
                                  std::span<const std::array<double, kConditioningSize>> y = {});

std::uint64_t parameter_hash(std::span<const double> params);

}  // namespace doomgan
