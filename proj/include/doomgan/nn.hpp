#pragma once

#include <json.hpp>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace doomgan::nn {

// Dense row-major tensor of 64-bit reals; shape[0] is the batch dimension
// whenever a tensor flows through a Network.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);

  std::size_t numel() const { return data.size(); }
  int batch() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t per_sample() const { return batch() == 0 ? 0 : data.size() / static_cast<std::size_t>(batch()); }
  bool operator==(const Tensor&) const = default;
};

std::size_t shape_numel(const std::vector<int>& s);

// Portable deterministic generator; normal() uses Box-Muller without caching
// so the whole state is the engine state.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  double uniform();  // [0, 1)
  double normal();
  std::uint64_t next_u64() { return engine_(); }
  int below(int n);  // uniform integer in [0, n)
  std::string state() const;
  void restore(const std::string& state);

private:
  std::mt19937_64 engine_;
};

enum class LayerKind { Dense, Conv, ConvTranspose, Activation, Reshape };
enum class ActivationFn { Relu, LeakyRelu, Sigmoid };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int out = 0;  // dense: features; conv/conv-transpose: channels
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  ActivationFn fn = ActivationFn::Relu;
  double slope = 0.2;
  std::vector<int> reshape;  // per-sample target shape

  static LayerSpec dense(int out);
  static LayerSpec conv(int out_channels, int kernel, int stride, int pad);
  static LayerSpec conv_transpose(int out_channels, int kernel, int stride, int pad);
  static LayerSpec activation(ActivationFn fn, double slope = 0.2);
  static LayerSpec reshape_to(std::vector<int> shape);
};

struct NetworkSpec {
  std::vector<int> input_shape;  // per sample
  std::vector<LayerSpec> layers;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

class Network {
public:
  Network() = default;
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<int>& input_shape() const { return spec_.input_shape; }
  const std::vector<int>& output_shape() const { return shapes_.back(); }
  std::size_t layer_count() const { return spec_.layers.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  std::size_t param_count() const { return params_.size(); }
  static std::size_t analytic_param_count(const NetworkSpec& spec);

  // Gaussian weights (mean 0, given std), zero biases.
  void init(Rng& rng, double weight_std = 0.02);
  void zero_grad();

  // Caches every layer input for backward().
  Tensor forward(const Tensor& input);
  // Returns the input gradient. Parameter gradients are accumulated into
  // grads() when accumulate is set. keep_upstreams retains the per-layer
  // output gradients for double_backward().
  Tensor backward(const Tensor& upstream, bool accumulate = true, bool keep_upstreams = false);
  // Given the cotangent of the input gradient produced by the last
  // backward(keep_upstreams=true), accumulates d<cot, dL/dx>/dtheta.
  void double_backward(const Tensor& input_grad_cotangent);

  // Linear response of the output to an input perturbation at the cached point.
  Tensor jvp(const Tensor& tangent) const;

  bool has_cache() const { return !acts_.empty(); }
  void clear_cache();

private:
  struct LayerGeom {
    std::size_t w_off = 0, w_size = 0, b_off = 0, b_size = 0;
  };

  Tensor layer_forward(std::size_t i, const Tensor& in) const;
  Tensor layer_backward(std::size_t i, const Tensor& in, const Tensor& out, const Tensor& up,
                        bool accumulate);
  void layer_weight_grad(std::size_t i, const Tensor& in, const Tensor& up, bool with_bias);
  Tensor layer_jvp(std::size_t i, const Tensor& in, const Tensor& out, const Tensor& t) const;

  NetworkSpec spec_;
  std::vector<std::vector<int>> shapes_;  // shapes_[i] = per-sample input of layer i; back() = output
  std::vector<LayerGeom> geom_;
  std::vector<double> params_;
  std::vector<double> grads_;
  std::vector<Tensor> acts_;       // acts_[i] = input to layer i, acts_.back() = output
  std::vector<Tensor> upstreams_;  // upstreams_[i] = gradient w.r.t. acts_[i]
};

// Parameter gradient of sum_n ||d net(x_n) / d x_n||_2 for a scalar-output
// network; samples with a zero input gradient contribute 0.
std::vector<double> grad_input_norm_grad(Network& net, const Tensor& x);

// Per-sample input gradient of a scalar-output network.
Tensor input_gradient(Network& net, const Tensor& x);

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;

  static AdamState for_params(std::size_t n, double lr, double beta1, double beta2, double eps = 1e-8);
  bool operator==(const AdamState&) const = default;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace doomgan::nn
