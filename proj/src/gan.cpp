#include "doomgan/gan.hpp"

#include "doomgan/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace doomgan {

using nn::Tensor;

void ArchConfig::validate() const {
  if (noise_dim < 1) throw Error(Errc::InvalidConfig, "noise dimension must be positive");
  if (generator_channels.empty() || critic_channels.empty())
    throw Error(Errc::InvalidConfig, "generator and critic need at least one layer");
  for (int c : generator_channels)
    if (c < 1) throw Error(Errc::InvalidConfig, "channel counts must be positive");
  for (int c : critic_channels)
    if (c < 1) throw Error(Errc::InvalidConfig, "channel counts must be positive");
  const int gdiv = 1 << generator_channels.size();
  const int cdiv = 1 << critic_channels.size();
  if (image_size < 1 || image_size % gdiv != 0 || image_size % cdiv != 0)
    throw Error(Errc::InvalidConfig, "image size " + std::to_string(image_size) +
                                         " is not divisible by the network's downsampling factor");
  if (kernel != 4) throw Error(Errc::InvalidConfig, "only kernel 4 (stride 2, pad 1) is supported");
}

nlohmann::json ArchConfig::to_json() const {
  return {{"image_size", image_size},           {"noise_dim", noise_dim},
          {"conditional", conditional},         {"generator_channels", generator_channels},
          {"critic_channels", critic_channels}, {"kernel", kernel},
          {"leaky_slope", leaky_slope}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.image_size = j.value("image_size", a.image_size);
  a.noise_dim = j.value("noise_dim", a.noise_dim);
  a.conditional = j.value("conditional", a.conditional);
  a.generator_channels = j.value("generator_channels", a.generator_channels);
  a.critic_channels = j.value("critic_channels", a.critic_channels);
  a.kernel = j.value("kernel", a.kernel);
  a.leaky_slope = j.value("leaky_slope", a.leaky_slope);
  return a;
}

nn::NetworkSpec generator_spec(const ArchConfig& a) {
  a.validate();
  using nn::LayerSpec;
  nn::NetworkSpec s;
  s.input_shape = {a.noise_dim + a.cond_dim()};
  const int s0 = a.image_size >> a.generator_channels.size();
  const int c0 = a.generator_channels.front();
  s.layers.push_back(LayerSpec::dense(c0 * s0 * s0));
  s.layers.push_back(LayerSpec::reshape_to({c0, s0, s0}));
  s.layers.push_back(LayerSpec::activation(nn::ActivationFn::Relu));
  for (std::size_t i = 1; i < a.generator_channels.size(); ++i) {
    s.layers.push_back(LayerSpec::conv_transpose(a.generator_channels[i], a.kernel, 2, 1));
    s.layers.push_back(LayerSpec::activation(nn::ActivationFn::Relu));
  }
  s.layers.push_back(LayerSpec::conv_transpose(kImageChannels, a.kernel, 2, 1));
  s.layers.push_back(LayerSpec::activation(nn::ActivationFn::Sigmoid));
  return s;
}

nn::NetworkSpec critic_spec(const ArchConfig& a) {
  a.validate();
  using nn::LayerSpec;
  nn::NetworkSpec s;
  s.input_shape = {kImageChannels + a.cond_dim(), a.image_size, a.image_size};
  for (int c : a.critic_channels) {
    s.layers.push_back(LayerSpec::conv(c, a.kernel, 2, 1));
    s.layers.push_back(LayerSpec::activation(nn::ActivationFn::LeakyRelu, a.leaky_slope));
  }
  s.layers.push_back(LayerSpec::dense(1));
  return s;
}

void TrainingConfig::validate() const {
  arch.validate();
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw Error(Errc::InvalidConfig, "Adam betas must lie in [0, 1)");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "penalty weight must be >= 0");
  if (critic_steps < 1 || batch_size < 1 || iterations < 0 || log_every < 1 || checkpoint_every < 0)
    throw Error(Errc::InvalidConfig, "step counts must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw Error(Errc::InvalidConfig, "validation fraction must lie in [0, 1)");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"lambda", lambda},
          {"critic_steps", critic_steps},
          {"iterations", iterations},
          {"batch_size", batch_size},
          {"seed", seed},
          {"rotate", rotate},
          {"validation_fraction", validation_fraction},
          {"log_every", log_every},
          {"checkpoint_every", checkpoint_every},
          {"arch", arch.to_json()}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.lambda = j.value("lambda", c.lambda);
  c.critic_steps = j.value("critic_steps", c.critic_steps);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.rotate = j.value("rotate", c.rotate);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.log_every = j.value("log_every", c.log_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("arch")) c.arch = ArchConfig::from_json(j.at("arch"));
  return c;
}

// ---------------------------------------------------------------------------

Tensor images_to_tensor(std::span<const LevelImageSet> sets, std::span<const std::size_t> indices) {
  if (indices.empty()) return Tensor({0, kImageChannels, 0, 0});
  const int S = sets[indices[0]].floor.width;
  Tensor t({static_cast<int>(indices.size()), kImageChannels, S, S});
  const std::size_t plane = static_cast<std::size_t>(S) * S;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const LevelImageSet& s = sets[indices[n]];
    for (int c = 0; c < kImageChannels; ++c) {
      const Image& img = s.channel(kAllMapTypes[static_cast<std::size_t>(c)]);
      if (img.width != S || img.height != S)
        throw Error(Errc::SizeMismatch, "all training images must be " + std::to_string(S) + "x" + std::to_string(S));
      double* dst = t.data.data() + (n * kImageChannels + static_cast<std::size_t>(c)) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = img.px[i] / 255.0;
    }
  }
  return t;
}

std::vector<LevelImageSet> tensor_to_images(const Tensor& t) {
  if (t.shape.size() != 4 || t.shape[1] != kImageChannels) throw Error(Errc::ShapeMismatch, "expected (N,6,H,W)");
  const int H = t.shape[2], W = t.shape[3];
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<LevelImageSet> out(static_cast<std::size_t>(t.batch()));
  for (std::size_t n = 0; n < out.size(); ++n)
    for (int c = 0; c < kImageChannels; ++c) {
      Image img(W, H);
      const double* src = t.data.data() + (n * kImageChannels + static_cast<std::size_t>(c)) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        img.px[i] = static_cast<std::uint8_t>(std::floor(255.0 * std::clamp(src[i], 0.0, 1.0) + 0.5));
      out[n].channel(kAllMapTypes[static_cast<std::size_t>(c)]) = std::move(img);
    }
  return out;
}

Tensor rotate90_batch(const Tensor& x, int k) {
  if (x.shape.size() != 4) throw Error(Errc::ShapeMismatch, "expected (N,C,H,W)");
  const int n = x.shape[2];
  if (x.shape[3] != n) throw Error(Errc::NonSquare, "rotation needs square rasters");
  k = ((k % 4) + 4) % 4;
  Tensor cur = x;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  const std::size_t planes = static_cast<std::size_t>(x.shape[0]) * x.shape[1];
  for (int step = 0; step < k; ++step) {
    Tensor next(cur.shape);
    for (std::size_t p = 0; p < planes; ++p) {
      const double* src = cur.data.data() + p * plane;
      double* dst = next.data.data() + p * plane;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) dst[static_cast<std::size_t>(c) * n + (n - 1 - r)] = src[static_cast<std::size_t>(r) * n + c];
    }
    cur = std::move(next);
  }
  return cur;
}

Tensor generator_input(const Tensor& z, const Tensor* y) {
  if (!y) return z;
  const int N = z.batch();
  if (y->batch() != N) throw Error(Errc::ShapeMismatch, "noise and conditioning batch sizes differ");
  const int nz = static_cast<int>(z.per_sample()), ny = static_cast<int>(y->per_sample());
  Tensor t({N, nz + ny});
  for (int i = 0; i < N; ++i) {
    std::copy_n(z.data.begin() + static_cast<std::ptrdiff_t>(i) * nz, nz, t.data.begin() + static_cast<std::ptrdiff_t>(i) * (nz + ny));
    std::copy_n(y->data.begin() + static_cast<std::ptrdiff_t>(i) * ny, ny,
                t.data.begin() + static_cast<std::ptrdiff_t>(i) * (nz + ny) + nz);
  }
  return t;
}

Tensor critic_input(const Tensor& images, const Tensor* y) {
  if (!y) return images;
  const int N = images.batch(), C = images.shape[1], H = images.shape[2], W = images.shape[3];
  if (y->batch() != N) throw Error(Errc::ShapeMismatch, "image and conditioning batch sizes differ");
  const int ny = static_cast<int>(y->per_sample());
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Tensor t({N, C + ny, H, W});
  for (int i = 0; i < N; ++i) {
    std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(i * C * plane), C * plane,
                t.data.begin() + static_cast<std::ptrdiff_t>(i * (C + ny) * plane));
    for (int j = 0; j < ny; ++j) {
      auto start = t.data.begin() + static_cast<std::ptrdiff_t>((i * (C + ny) + C + j) * plane);
      std::fill_n(start, plane, y->data[static_cast<std::size_t>(i) * ny + j]);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

namespace {

// Adds weight * dGp/dtheta to the critic gradients and returns Gp.
double penalty_accumulate(nn::Network& critic, const Tensor& x_true, const Tensor& x_gen,
                          std::span<const double> eps, const Tensor* y, double weight) {
  if (x_true.shape != x_gen.shape) throw Error(Errc::ShapeMismatch, "real and generated batches differ in shape");
  const int N = x_true.batch();
  if (eps.size() != static_cast<std::size_t>(N)) throw Error(Errc::ShapeMismatch, "one epsilon per sample required");
  if (N == 0) return 0.0;
  const std::size_t per = x_true.per_sample();
  Tensor xhat(x_true.shape);
  for (int n = 0; n < N; ++n) {
    const double e = eps[static_cast<std::size_t>(n)];
    for (std::size_t j = 0; j < per; ++j) {
      std::size_t i = static_cast<std::size_t>(n) * per + j;
      xhat.data[i] = e * x_true.data[i] + (1.0 - e) * x_gen.data[i];
    }
  }
  Tensor out = critic.forward(critic_input(xhat, y));
  if (out.per_sample() != 1) throw Error(Errc::NonScalarOutput, "critic output must be scalar");
  Tensor gin = critic.backward(Tensor(out.shape, 1.0), false, true);
  const std::size_t per_in = gin.per_sample();  // image + conditioning planes
  Tensor cot(gin.shape);
  double value = 0.0;
  for (int n = 0; n < N; ++n) {
    const double* g = gin.data.data() + static_cast<std::size_t>(n) * per_in;
    double sq = 0.0;
    for (std::size_t j = 0; j < per; ++j) sq += g[j] * g[j];
    const double norm = std::sqrt(sq);
    value += (norm - 1.0) * (norm - 1.0);
    if (norm > 0.0) {
      const double s = weight * 2.0 * (norm - 1.0) / (N * norm);
      for (std::size_t j = 0; j < per; ++j) cot.data[static_cast<std::size_t>(n) * per_in + j] = s * g[j];
    }
  }
  if (weight != 0.0) critic.double_backward(cot);
  return value / N;
}

}  // namespace

PenaltyResult gradient_penalty(nn::Network& critic, const Tensor& x_true, const Tensor& x_gen,
                               std::span<const double> eps, const Tensor* y) {
  std::vector<double> saved(critic.grads().begin(), critic.grads().end());
  critic.zero_grad();
  PenaltyResult r;
  r.value = penalty_accumulate(critic, x_true, x_gen, eps, y, 1.0);
  r.grad.assign(critic.grads().begin(), critic.grads().end());
  std::copy(saved.begin(), saved.end(), critic.grads().begin());
  return r;
}

LossTerms critic_loss(nn::Network& generator, nn::Network& critic, const CriticBatch& b, double lambda) {
  const Tensor* y = b.y ? &*b.y : nullptr;
  const int N = b.x_true.batch();
  critic.zero_grad();
  Tensor x_gen = generator.forward(generator_input(b.z, y));
  if (x_gen.shape != b.x_true.shape) throw Error(Errc::ShapeMismatch, "generator output does not match real images");

  Tensor real_in = critic_input(b.x_true, y);
  Tensor gen_in = critic_input(x_gen, y);
  Tensor both(real_in.shape);
  both.shape[0] = 2 * N;
  both.data.resize(real_in.numel() + gen_in.numel());
  std::copy(real_in.data.begin(), real_in.data.end(), both.data.begin());
  std::copy(gen_in.data.begin(), gen_in.data.end(), both.data.begin() + static_cast<std::ptrdiff_t>(real_in.numel()));

  LossTerms t;
  Tensor out = critic.forward(both);
  Tensor up(out.shape);
  for (int i = 0; i < N; ++i) {
    t.wgan += (out.data[static_cast<std::size_t>(N + i)] - out.data[static_cast<std::size_t>(i)]) / N;
    up.data[static_cast<std::size_t>(i)] = -1.0 / N;
    up.data[static_cast<std::size_t>(N + i)] = 1.0 / N;
  }
  critic.backward(up, true);
  t.penalty = penalty_accumulate(critic, b.x_true, x_gen, b.eps, y, lambda);
  t.total = t.wgan + lambda * t.penalty;
  return t;
}

double generator_loss(nn::Network& generator, nn::Network& critic, const Tensor& z, const Tensor* y) {
  generator.zero_grad();
  Tensor x_gen = generator.forward(generator_input(z, y));
  Tensor out = critic.forward(critic_input(x_gen, y));
  const int N = out.batch();
  double loss = 0.0;
  for (double v : out.data) loss -= v / N;
  Tensor gin = critic.backward(Tensor(out.shape, -1.0 / N), false);
  Tensor gimg(x_gen.shape);
  const std::size_t per_img = x_gen.per_sample(), per_in = gin.per_sample();
  for (int n = 0; n < N; ++n)
    std::copy_n(gin.data.begin() + static_cast<std::ptrdiff_t>(n * per_in), per_img,
                gimg.data.begin() + static_cast<std::ptrdiff_t>(n * per_img));
  generator.backward(gimg, true);
  return loss;
}

// ---------------------------------------------------------------------------

DataSplit split_dataset(std::size_t n, double valid_fraction, std::uint64_t seed) {
  DataSplit s;
  if (n == 0) return s;
  if (n == 1) {
    s.train = s.valid = {0};
    return s;
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  nn::Rng rng(seed ^ 0x5b1175eedULL);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[static_cast<std::size_t>(rng.below(static_cast<int>(i + 1)))]);
  std::size_t nv = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(n) + 0.5));
  nv = std::clamp<std::size_t>(nv, 1, n - 1);
  s.valid.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nv));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(nv), perm.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

namespace {

void check_dataset(const Dataset& data, const TrainingConfig& cfg) {
  if (data.levels.empty()) throw Error(Errc::EmptyDataset, "no levels to train on");
  if (cfg.arch.conditional && data.features.size() != data.levels.size())
    throw Error(Errc::MissingFeatures, "conditional training needs a feature row for every level");
  for (const auto& l : data.levels)
    for (MapType t : kAllMapTypes) {
      const Image& img = l.channel(t);
      if (img.width != cfg.arch.image_size || img.height != cfg.arch.image_size)
        throw Error(Errc::SizeMismatch, "level images must be " + std::to_string(cfg.arch.image_size) +
                                            " pixels square");
    }
}

Tensor normal_tensor(nn::Rng& rng, std::vector<int> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal();
  return t;
}

Tensor conditioning_rows(const std::vector<std::array<double, kConditioningSize>>& rows,
                         std::span<const std::size_t> idx) {
  Tensor t({static_cast<int>(idx.size()), static_cast<int>(kConditioningSize)});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(rows[idx[i]].begin(), rows[idx[i]].end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * kConditioningSize));
  return t;
}

constexpr std::uint64_t kEvalStream = 0xe7a1c0ffee5eedULL;

}  // namespace

GanModel init_model(const Dataset& data, const TrainingConfig& cfg) {
  cfg.validate();
  check_dataset(data, cfg);
  GanModel m;
  m.config = cfg;
  m.generator = nn::Network(generator_spec(cfg.arch));
  m.critic = nn::Network(critic_spec(cfg.arch));
  nn::Rng rng(cfg.seed);
  m.generator.init(rng);
  m.critic.init(rng);
  m.generator_opt = nn::AdamState::for_params(m.generator.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  m.critic_opt = nn::AdamState::for_params(m.critic.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  if (cfg.arch.conditional) m.stats = NormalizationStats::from_corpus(data.features);
  m.rng_state = rng.state();
  return m;
}

void train_until(GanModel& m, const Dataset& data, std::int64_t until, const TrainCallbacks& cb) {
  const TrainingConfig& cfg = m.config;
  check_dataset(data, cfg);
  const bool cond = cfg.arch.conditional;
  if (cond && !m.stats) throw Error(Errc::MissingFeatures, "conditional model without normalization stats");

  std::vector<std::array<double, kConditioningSize>> rows;
  if (cond)
    for (const auto& f : data.features) rows.push_back(normalize_features(f, *m.stats));

  const DataSplit split = split_dataset(data.levels.size(), cfg.validation_fraction, cfg.seed);
  nn::Rng rng;
  rng.restore(m.rng_state);
  const int B = cfg.batch_size;
  auto draw = [&] {
    std::vector<std::size_t> idx(static_cast<std::size_t>(B));
    for (auto& i : idx) i = split.train[static_cast<std::size_t>(rng.below(static_cast<int>(split.train.size())))];
    return idx;
  };

  auto validation_loss = [&] {
    nn::Rng eval(cfg.seed ^ kEvalStream);
    CriticBatch vb;
    vb.x_true = images_to_tensor(data.levels, split.valid);
    const int nv = vb.x_true.batch();
    vb.z = normal_tensor(eval, {nv, cfg.arch.noise_dim});
    if (cond) vb.y = conditioning_rows(rows, split.valid);
    vb.eps.resize(static_cast<std::size_t>(nv));
    for (double& e : vb.eps) e = eval.uniform();
    return critic_loss(m.generator, m.critic, vb, cfg.lambda).total;
  };

  while (m.iteration < until) {
    double critic_sum = 0.0;
    for (int s = 0; s < cfg.critic_steps; ++s) {
      auto idx = draw();
      CriticBatch b;
      b.x_true = images_to_tensor(data.levels, idx);
      if (cfg.rotate) b.x_true = rotate90_batch(b.x_true, rng.below(4));
      b.z = normal_tensor(rng, {B, cfg.arch.noise_dim});
      if (cond) b.y = conditioning_rows(rows, idx);
      b.eps.resize(static_cast<std::size_t>(B));
      for (double& e : b.eps) e = rng.uniform();
      critic_sum += critic_loss(m.generator, m.critic, b, cfg.lambda).total;
      nn::adam_step(m.critic.params(), m.critic.grads(), m.critic_opt);
    }
    std::optional<Tensor> y;
    if (cond) y = conditioning_rows(rows, draw());
    Tensor z = normal_tensor(rng, {B, cfg.arch.noise_dim});
    double lg = generator_loss(m.generator, m.critic, z, y ? &*y : nullptr);
    nn::adam_step(m.generator.params(), m.generator.grads(), m.generator_opt);

    ++m.iteration;
    m.window_critic += critic_sum / cfg.critic_steps;
    m.window_generator += lg;
    ++m.window_count;
    m.rng_state = rng.state();
    if (m.iteration % cfg.log_every == 0) {
      LossPoint p;
      p.iteration = m.iteration;
      p.critic_train = m.window_critic / m.window_count;
      p.generator = m.window_generator / m.window_count;
      p.critic_valid = validation_loss();
      m.curves.push_back(p);
      m.window_critic = m.window_generator = 0.0;
      m.window_count = 0;
      if (cb.on_log) cb.on_log(p);
    }
    if (cfg.checkpoint_every > 0 && m.iteration % cfg.checkpoint_every == 0 && cb.on_checkpoint) cb.on_checkpoint(m);
  }
}

GanModel train(const Dataset& data, const TrainingConfig& cfg, const TrainCallbacks& cb) {
  GanModel m = init_model(data, cfg);
  train_until(m, data, cfg.iterations, cb);
  return m;
}

std::vector<LevelImageSet> sample(GanModel& model, int n, std::uint64_t seed,
                                  std::span<const std::array<double, kConditioningSize>> y) {
  if (n <= 0) return {};
  const ArchConfig& a = model.config.arch;
  if (a.conditional && y.empty()) throw Error(Errc::MissingConditioning, "conditional model needs feature rows");
  nn::Rng rng(seed);
  std::vector<LevelImageSet> out;
  const int chunk = 64;
  for (int start = 0; start < n; start += chunk) {
    const int m = std::min(chunk, n - start);
    Tensor z = normal_tensor(rng, {m, a.noise_dim});
    std::optional<Tensor> yt;
    if (a.conditional) {
      yt = Tensor({m, static_cast<int>(kConditioningSize)});
      for (int i = 0; i < m; ++i) {
        const auto& row = y[static_cast<std::size_t>(start + i) % y.size()];
        std::copy(row.begin(), row.end(), yt->data.begin() + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(kConditioningSize));
      }
    }
    auto imgs = tensor_to_images(model.generator.forward(generator_input(z, yt ? &*yt : nullptr)));
    for (auto& s : imgs) out.push_back(std::move(s));
  }
  model.generator.clear_cache();
  return out;
}

std::uint64_t parameter_hash(std::span<const double> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoint: "DGCK", u32 version, u64 header length, JSON header, then the
// raw little-endian doubles listed in header["blocks"].

namespace {

constexpr char kMagic[4] = {'D', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json adam_json(const nn::AdamState& s) {
  return {{"t", s.t}, {"lr", s.lr}, {"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}};
}

void adam_from_json(nn::AdamState& s, const nlohmann::json& j, std::size_t n) {
  s.t = j.at("t").get<std::int64_t>();
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
}

}  // namespace

void GanModel::save(const std::filesystem::path& path) const {
  nlohmann::json h;
  h["format"] = "doomgan-checkpoint";
  h["config"] = config.to_json();
  h["generator"] = generator.spec().to_json();
  h["critic"] = critic.spec().to_json();
  if (stats) h["normalization"] = stats->to_json();
  h["generator_opt"] = adam_json(generator_opt);
  h["critic_opt"] = adam_json(critic_opt);
  h["iteration"] = iteration;
  h["rng_state"] = rng_state;
  h["window"] = {{"critic", window_critic}, {"generator", window_generator}, {"count", window_count}};
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : curves) curve.push_back({p.iteration, p.critic_train, p.critic_valid, p.generator});
  h["curves"] = curve;
  h["blocks"] = {"generator.params", "critic.params", "generator_opt.m", "generator_opt.v",
                 "critic_opt.m",     "critic_opt.v"};
  const std::string text = h.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    auto block = [&](std::span<const double> v) {
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    block(generator.params());
    block(critic.params());
    block(generator_opt.m);
    block(generator_opt.v);
    block(critic_opt.m);
    block(critic_opt.v);
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

GanModel GanModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::BadCheckpoint, path.string() + " is not a checkpoint");
  if (version != kVersion) throw Error(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  if (len > (1u << 30)) throw Error(Errc::BadCheckpoint, "corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(Errc::BadCheckpoint, "truncated checkpoint header");

  GanModel m;
  try {
    auto h = nlohmann::json::parse(text);
    m.config = TrainingConfig::from_json(h.at("config"));
    m.generator = nn::Network(nn::NetworkSpec::from_json(h.at("generator")));
    m.critic = nn::Network(nn::NetworkSpec::from_json(h.at("critic")));
    if (h.contains("normalization")) m.stats = NormalizationStats::from_json(h.at("normalization"));
    adam_from_json(m.generator_opt, h.at("generator_opt"), m.generator.param_count());
    adam_from_json(m.critic_opt, h.at("critic_opt"), m.critic.param_count());
    m.iteration = h.at("iteration").get<std::int64_t>();
    m.rng_state = h.at("rng_state").get<std::string>();
    m.window_critic = h.at("window").at("critic").get<double>();
    m.window_generator = h.at("window").at("generator").get<double>();
    m.window_count = h.at("window").at("count").get<int>();
    for (const auto& p : h.at("curves"))
      m.curves.push_back({p.at(0).get<std::int64_t>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadCheckpoint, e.what());
  }
  auto block = [&](std::span<double> v) {
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw Error(Errc::BadCheckpoint, "truncated parameter block");
  };
  block(m.generator.params());
  block(m.critic.params());
  block(m.generator_opt.m);
  block(m.generator_opt.v);
  block(m.critic_opt.m);
  block(m.critic_opt.v);
  return m;
}

}  // namespace doomgan
