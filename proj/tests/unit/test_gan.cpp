#include "../support/gradcheck.hpp"
#include "doomgan/error.hpp"
#include "doomgan/gan.hpp"
#include "doomgan/raster.hpp"
#include "doomgan/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace doomgan;
using nn::LayerSpec;
using nn::Network;
using nn::NetworkSpec;
using nn::Rng;
using nn::Tensor;
using testsupport::random_tensor;
using testsupport::rel_error;

namespace {

ArchConfig tiny_arch(bool conditional = false) {
  ArchConfig a;
  a.image_size = 8;
  a.noise_dim = 5;
  a.conditional = conditional;
  a.generator_channels = {4, 3};
  a.critic_channels = {3, 4};
  return a;
}

// Rectangles of varying size on a 16 px canvas, with features.
Dataset rect_dataset(int n, int size = 16) {
  Dataset d;
  RasterConfig rc;
  rc.width = rc.height = size;
  for (int i = 0; i < n; ++i) {
    int w = 2 + i % 5, h = 2 + (i / 5) % 4;
    LevelImageSet s = rasterize_level(rectangle_level(w * 32, h * 32, static_cast<std::int16_t>(8 * i)), rc);
    d.levels.push_back(s);
    d.features.push_back(extract_feature_vector(s));
  }
  return d;
}

TrainingConfig tiny_config(bool conditional = false) {
  TrainingConfig c;
  c.arch = tiny_arch(conditional);
  c.arch.image_size = 16;
  c.batch_size = 4;
  c.iterations = 6;
  c.log_every = 2;
  c.checkpoint_every = 0;
  c.seed = 3;
  return c;
}

// Linear critic x -> <w, x> + b over (6, s, s) inputs.
Network linear_critic(int s, double w_norm, double bias = 0.0) {
  NetworkSpec spec;
  spec.input_shape = {kImageChannels, s, s};
  spec.layers = {LayerSpec::dense(1)};
  Network net(spec);
  auto p = net.params();
  const std::size_t n = p.size() - 1;
  for (std::size_t i = 0; i < n; ++i) p[i] = w_norm / std::sqrt(static_cast<double>(n));
  p[n] = bias;
  return net;
}

Tensor unit_images(Rng& rng, int n, int s) {
  Tensor t({n, kImageChannels, s, s});
  for (double& v : t.data) v = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("linear critics: penalty closed forms") {
  Rng rng(1);
  Tensor xt = unit_images(rng, 3, 4), xg = unit_images(rng, 3, 4);
  std::vector<double> eps{0.2, 0.5, 0.7};
  Network one = linear_critic(4, 1.0);
  CHECK(std::abs(gradient_penalty(one, xt, xg, eps).value) < 1e-9);
  Network three = linear_critic(4, 3.0);
  CHECK(std::abs(gradient_penalty(three, xt, xg, eps).value - 4.0) < 1e-9);
}

TEST_CASE("constant critic: L_D equals lambda, L_G is minus the constant") {
  Rng rng(2);
  Network g(generator_spec(tiny_arch()));
  g.init(rng);
  Network c = linear_critic(8, 0.0, 0.75);
  CriticBatch b;
  b.x_true = unit_images(rng, 4, 8);
  b.z = random_tensor(rng, {4, 5});
  b.eps = {0.1, 0.3, 0.6, 0.9};
  LossTerms t = critic_loss(g, c, b, 10.0);
  CHECK(t.total == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(t.wgan == 0.0);
  CHECK(generator_loss(g, c, b.z, nullptr) == doctest::Approx(-0.75));
  for (double v : g.grads()) CHECK(v == 0.0);
}

TEST_CASE("epsilon one interpolates onto the real batch") {
  Rng rng(3);
  Network c(critic_spec(tiny_arch()));
  testsupport::randomize_params(c, rng, 0.3);
  Tensor xt = unit_images(rng, 2, 8), xg = unit_images(rng, 2, 8);
  double at_real = gradient_penalty(c, xt, xg, std::vector<double>{1.0, 1.0}).value;
  double same = gradient_penalty(c, xt, xt, std::vector<double>{0.4, 0.9}).value;
  CHECK(at_real == same);
}

TEST_CASE("identical real and generated batches leave only the penalty") {
  Rng rng(4);
  Network g(generator_spec(tiny_arch()));
  g.init(rng);
  Network c(critic_spec(tiny_arch()));
  testsupport::randomize_params(c, rng, 0.3);
  CriticBatch b;
  b.z = random_tensor(rng, {3, 5});
  b.x_true = g.forward(generator_input(b.z, nullptr));
  b.eps = {0.3, 0.5, 0.8};
  LossTerms t = critic_loss(g, c, b, 10.0);
  CHECK(std::abs(t.wgan) < 1e-12);
  CHECK(t.total == doctest::Approx(10.0 * t.penalty));
}

TEST_CASE("penalty is invariant under batch reordering") {
  Rng rng(5);
  Network c(critic_spec(tiny_arch()));
  testsupport::randomize_params(c, rng, 0.3);
  Tensor xt = unit_images(rng, 3, 8), xg = unit_images(rng, 3, 8);
  std::vector<double> eps{0.1, 0.5, 0.9};
  auto a = gradient_penalty(c, xt, xg, eps);
  Tensor rt = xt, rg = xg;
  const std::size_t per = xt.per_sample();
  std::vector<int> perm{2, 0, 1};
  std::vector<double> reps(3);
  for (int i = 0; i < 3; ++i) {
    std::copy_n(xt.data.begin() + perm[i] * per, per, rt.data.begin() + i * per);
    std::copy_n(xg.data.begin() + perm[i] * per, per, rg.data.begin() + i * per);
    reps[i] = eps[perm[i]];
  }
  auto b = gradient_penalty(c, rt, rg, reps);
  CHECK(b.value == doctest::Approx(a.value).epsilon(1e-12));
  CHECK(rel_error(a.grad, b.grad) < 1e-12);
}

TEST_CASE("critic and generator loss gradients match finite differences") {
  for (bool cond : {false, true}) {
    CAPTURE(cond);
    Rng rng(cond ? 17 : 7);
    ArchConfig a = tiny_arch(cond);
    Network g(generator_spec(a)), c(critic_spec(a));
    testsupport::randomize_params(g, rng, 0.3);
    testsupport::randomize_params(c, rng, 0.3);
    CriticBatch b;
    b.x_true = unit_images(rng, 3, 8);
    b.z = random_tensor(rng, {3, 5});
    if (cond) b.y = random_tensor(rng, {3, static_cast<int>(kConditioningSize)});
    b.eps = {0.25, 0.5, 0.75};
    const Tensor* y = b.y ? &*b.y : nullptr;

    critic_loss(g, c, b, 10.0);
    std::vector<double> an(c.grads().begin(), c.grads().end());
    // Small steps keep the leaky-relu pattern of the interpolates fixed.
    auto fd = testsupport::central_diff(c.params(), [&] { return critic_loss(g, c, b, 10.0).total; }, 1e-7);
    CHECK(rel_error(an, fd) < 1e-3);

    generator_loss(g, c, b.z, y);
    std::vector<double> ag(g.grads().begin(), g.grads().end());
    auto fg = testsupport::central_diff(g.params(), [&] { return generator_loss(g, c, b.z, y); });
    CHECK(rel_error(ag, fg) < 1e-4);
  }
}

TEST_CASE("losses only touch their own network's gradients") {
  Rng rng(8);
  Network g(generator_spec(tiny_arch())), c(critic_spec(tiny_arch()));
  g.init(rng);
  c.init(rng);
  CriticBatch b;
  b.x_true = unit_images(rng, 2, 8);
  b.z = random_tensor(rng, {2, 5});
  b.eps = {0.5, 0.5};
  g.zero_grad();
  critic_loss(g, c, b, 10.0);
  for (double v : g.grads()) CHECK(v == 0.0);
  c.zero_grad();
  generator_loss(g, c, b.z, nullptr);
  for (double v : c.grads()) CHECK(v == 0.0);
}

TEST_CASE("rotate90_batch") {
  Tensor t({1, kImageChannels, 4, 4});
  t.data[1 * 4 + 3] = 1.0;  // channel 0, row 1, col 3
  CHECK(rotate90_batch(t, 0) == t);
  Tensor r = rotate90_batch(t, 1);
  CHECK(r.data[3 * 4 + (4 - 1 - 1)] == 1.0);
  Tensor full = t;
  for (int k = 0; k < 4; ++k) full = rotate90_batch(full, 1);
  CHECK(full == t);
  try {
    rotate90_batch(Tensor({1, kImageChannels, 4, 3}), 1);
    FAIL("expected NonSquare");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonSquare);
  }
}

TEST_CASE("image tensors round-trip through 8-bit rasters") {
  Dataset d = rect_dataset(3);
  std::vector<std::size_t> idx{0, 1, 2};
  Tensor t = images_to_tensor(d.levels, idx);
  CHECK(t.shape == std::vector<int>{3, kImageChannels, 16, 16});
  auto back = tensor_to_images(t);
  for (int i = 0; i < 3; ++i)
    for (MapType m : kAllMapTypes) CHECK(back[i].channel(m) == d.levels[i].channel(m));
}

TEST_CASE("dataset split: ten percent held out, deterministic, single-level fallback") {
  auto s = split_dataset(64, 0.1, 1);
  CHECK(s.valid.size() == 6);
  CHECK(s.train.size() == 58);
  auto again = split_dataset(64, 0.1, 1);
  CHECK(again.valid == s.valid);
  auto one = split_dataset(1, 0.1, 1);
  CHECK(one.train == std::vector<std::size_t>{0});
  CHECK(one.valid == std::vector<std::size_t>{0});
}

TEST_CASE("training: zero iterations, determinism, errors") {
  Dataset d = rect_dataset(10);
  TrainingConfig c = tiny_config();
  c.iterations = 0;
  GanModel m0 = train(d, c);
  CHECK(m0.curves.empty());
  CHECK(m0.iteration == 0);

  c.iterations = 4;
  GanModel a = train(d, c), b = train(d, c);
  CHECK(parameter_hash(a.generator.params()) == parameter_hash(b.generator.params()));
  CHECK(parameter_hash(a.critic.params()) == parameter_hash(b.critic.params()));
  CHECK(a.curves.size() == 2);
  CHECK(a.curves[1].iteration == 4);

  CHECK_THROWS_AS(train(Dataset{}, c), Error);
  Dataset nofeat = d;
  nofeat.features.clear();
  try {
    train(nofeat, tiny_config(true));
    FAIL("expected MissingFeatures");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingFeatures);
  }
}

TEST_CASE("critic steps leave the generator alone") {
  Dataset d = rect_dataset(8);
  TrainingConfig c = tiny_config();
  GanModel m = init_model(d, c);
  const auto gh = parameter_hash(m.generator.params());
  CriticBatch b;
  std::vector<std::size_t> idx{0, 1, 2, 3};
  b.x_true = images_to_tensor(d.levels, idx);
  Rng rng(1);
  b.z = random_tensor(rng, {4, c.arch.noise_dim});
  b.eps = {0.1, 0.2, 0.3, 0.4};
  critic_loss(m.generator, m.critic, b, c.lambda);
  nn::adam_step(m.critic.params(), m.critic.grads(), m.critic_opt);
  CHECK(parameter_hash(m.generator.params()) == gh);
}

TEST_CASE("resuming equals training straight through") {
  Dataset d = rect_dataset(10);
  TrainingConfig c = tiny_config();
  GanModel straight = train(d, c);
  GanModel part = init_model(d, c);
  train_until(part, d, 3);
  auto path = std::filesystem::temp_directory_path() / "doomgan_resume.ckpt";
  part.save(path);
  GanModel resumed = GanModel::load(path);
  train_until(resumed, d, c.iterations);
  CHECK(parameter_hash(resumed.generator.params()) == parameter_hash(straight.generator.params()));
  CHECK(parameter_hash(resumed.critic.params()) == parameter_hash(straight.critic.params()));
  CHECK(resumed.curves.size() == straight.curves.size());
  std::filesystem::remove(path);
}

TEST_CASE("checkpoints round-trip exactly and reject junk") {
  Dataset d = rect_dataset(6);
  TrainingConfig c = tiny_config(true);
  GanModel m = train(d, c);
  auto path = std::filesystem::temp_directory_path() / "doomgan_ckpt_test.ckpt";
  m.save(path);
  GanModel l = GanModel::load(path);
  CHECK(std::equal(l.generator.params().begin(), l.generator.params().end(), m.generator.params().begin()));
  CHECK(l.critic_opt == m.critic_opt);
  CHECK(l.generator_opt == m.generator_opt);
  CHECK(l.iteration == m.iteration);
  CHECK(l.stats.has_value());
  CHECK(l.config.to_json() == m.config.to_json());
  {
    std::ofstream junk(path, std::ios::binary);
    junk << "nope";
  }
  try {
    GanModel::load(path);
    FAIL("expected BadCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadCheckpoint);
  }
  std::filesystem::remove(path);
}

TEST_CASE("sampling: empty, deterministic, conditioning required") {
  Dataset d = rect_dataset(6);
  GanModel m = init_model(d, tiny_config());
  CHECK(sample(m, 0, 1).empty());
  auto a = sample(m, 3, 42), b = sample(m, 3, 42);
  REQUIRE(a.size() == 3);
  CHECK(a == b);
  CHECK(a[0].floor.width == 16);

  GanModel mc = init_model(d, tiny_config(true));
  try {
    sample(mc, 2, 1);
    FAIL("expected MissingConditioning");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingConditioning);
  }
  std::vector<std::array<double, kConditioningSize>> y(1);
  CHECK(sample(mc, 2, 1, y).size() == 2);
}

TEST_CASE("config validation rejects impossible settings") {
  TrainingConfig c;
  c.beta2 = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  ArchConfig a;
  a.image_size = 30;
  CHECK_THROWS_AS(a.validate(), Error);
  TrainingConfig j = TrainingConfig::from_json(tiny_config(true).to_json());
  CHECK(j.to_json() == tiny_config(true).to_json());
}
