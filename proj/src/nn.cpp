#include "doomgan/nn.hpp"

#include "doomgan/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace doomgan::nn {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

std::size_t shape_numel(const std::vector<int>& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::below(int n) {
  if (n <= 0) return 0;
  // Rejection sampling keeps the draw unbiased and platform independent.
  std::uint64_t bound = static_cast<std::uint64_t>(n);
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do r = engine_(); while (r >= limit);
  return static_cast<int>(r % bound);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw Error(Errc::BadCheckpoint, "unreadable RNG state");
}

// ---------------------------------------------------------------------------

LayerSpec LayerSpec::dense(int out) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, int pad) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.out = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}

LayerSpec LayerSpec::conv_transpose(int out_channels, int kernel, int stride, int pad) {
  LayerSpec s = conv(out_channels, kernel, stride, pad);
  s.kind = LayerKind::ConvTranspose;
  return s;
}

LayerSpec LayerSpec::activation(ActivationFn fn, double slope) {
  LayerSpec s;
  s.kind = LayerKind::Activation;
  s.fn = fn;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::reshape_to(std::vector<int> shape) {
  LayerSpec s;
  s.kind = LayerKind::Reshape;
  s.reshape = std::move(shape);
  return s;
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv: return "conv";
    case LayerKind::ConvTranspose: return "conv_transpose";
    case LayerKind::Activation: return "activation";
    case LayerKind::Reshape: return "reshape";
  }
  return "?";
}

const char* fn_name(ActivationFn f) {
  switch (f) {
    case ActivationFn::Relu: return "relu";
    case ActivationFn::LeakyRelu: return "leaky_relu";
    case ActivationFn::Sigmoid: return "sigmoid";
  }
  return "?";
}

}  // namespace

nlohmann::json NetworkSpec::to_json() const {
  nlohmann::json j;
  j["input_shape"] = input_shape;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json e;
    e["type"] = kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Dense: e["out"] = l.out; break;
      case LayerKind::Conv:
      case LayerKind::ConvTranspose:
        e["out"] = l.out;
        e["kernel"] = l.kernel;
        e["stride"] = l.stride;
        e["pad"] = l.pad;
        break;
      case LayerKind::Activation:
        e["fn"] = fn_name(l.fn);
        if (l.fn == ActivationFn::LeakyRelu) e["slope"] = l.slope;
        break;
      case LayerKind::Reshape: e["shape"] = l.reshape; break;
    }
    j["layers"].push_back(e);
  }
  return j;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec s;
  try {
    s.input_shape = j.at("input_shape").get<std::vector<int>>();
    for (const auto& e : j.at("layers")) {
      std::string t = e.at("type").get<std::string>();
      if (t == "dense") {
        s.layers.push_back(LayerSpec::dense(e.at("out").get<int>()));
      } else if (t == "conv" || t == "conv_transpose") {
        LayerSpec l = LayerSpec::conv(e.at("out").get<int>(), e.at("kernel").get<int>(),
                                      e.at("stride").get<int>(), e.at("pad").get<int>());
        if (t == "conv_transpose") l.kind = LayerKind::ConvTranspose;
        s.layers.push_back(l);
      } else if (t == "activation") {
        std::string f = e.at("fn").get<std::string>();
        ActivationFn fn;
        if (f == "relu") fn = ActivationFn::Relu;
        else if (f == "leaky_relu") fn = ActivationFn::LeakyRelu;
        else if (f == "sigmoid") fn = ActivationFn::Sigmoid;
        else throw Error(Errc::BadCheckpoint, "unknown activation " + f);
        s.layers.push_back(LayerSpec::activation(fn, e.value("slope", 0.2)));
      } else if (t == "reshape") {
        s.layers.push_back(LayerSpec::reshape_to(e.at("shape").get<std::vector<int>>()));
      } else {
        throw Error(Errc::BadCheckpoint, "unknown layer type " + t);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::BadCheckpoint, ex.what());
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

int conv_out_size(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
int convt_out_size(int in, int k, int s, int p) { return (in - 1) * s - 2 * p + k; }

std::string shape_str(const std::vector<int>& s) {
  std::string r = "(";
  for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
  return r + ")";
}

// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, const double* b,
          double beta, double* c) {
  if (m == 0 || n == 0) return;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<Mat> C(c, m, n);
  if (beta == 0.0)
    C.setZero();
  else if (beta != 1.0)
    C *= beta;
  if (k == 0) return;
  Eigen::Map<const Mat> A(a, ta ? k : m, ta ? m : k);
  Eigen::Map<const Mat> B(b, tb ? n : k, tb ? k : n);
  if (ta && tb)
    C.noalias() += alpha * A.transpose() * B.transpose();
  else if (ta)
    C.noalias() += alpha * A.transpose() * B;
  else if (tb)
    C.noalias() += alpha * A * B.transpose();
  else
    C.noalias() += alpha * A * B;
}

// Patch geometry shared by conv (image = input) and conv-transpose
// (image = output): columns index (sample, oy, ox) over the "grid" side.
struct Patch {
  int channels, ih, iw;  // image side
  int oh, ow;            // grid side
  int k, s, p;
  int rows() const { return channels * k * k; }
  int cols_per_sample() const { return oh * ow; }
};

// col has shape (channels*k*k, batch*oh*ow).
void im2col(const Patch& g, int batch, const double* img, double* col) {
  const int ncols = batch * g.cols_per_sample();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * ncols;
        for (int n = 0; n < batch; ++n) {
          const double* plane = img + (static_cast<std::size_t>(n) * g.channels + c) * g.ih * g.iw;
          double* dst = row + static_cast<std::size_t>(n) * g.cols_per_sample();
          for (int oy = 0; oy < g.oh; ++oy) {
            int iy = oy * g.s - g.p + ki;
            if (iy < 0 || iy >= g.ih) {
              std::fill(dst + oy * g.ow, dst + (oy + 1) * g.ow, 0.0);
              continue;
            }
            for (int ox = 0; ox < g.ow; ++ox) {
              int ix = ox * g.s - g.p + kj;
              dst[oy * g.ow + ox] = (ix >= 0 && ix < g.iw) ? plane[iy * g.iw + ix] : 0.0;
            }
          }
        }
      }
}

// Adjoint of im2col: scatter-add columns back into the image (img is overwritten).
void col2im(const Patch& g, int batch, const double* col, double* img) {
  std::fill(img, img + static_cast<std::size_t>(batch) * g.channels * g.ih * g.iw, 0.0);
  const int ncols = batch * g.cols_per_sample();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * ncols;
        for (int n = 0; n < batch; ++n) {
          double* plane = img + (static_cast<std::size_t>(n) * g.channels + c) * g.ih * g.iw;
          const double* src = row + static_cast<std::size_t>(n) * g.cols_per_sample();
          for (int oy = 0; oy < g.oh; ++oy) {
            int iy = oy * g.s - g.p + ki;
            if (iy < 0 || iy >= g.ih) continue;
            for (int ox = 0; ox < g.ow; ++ox) {
              int ix = ox * g.s - g.p + kj;
              if (ix >= 0 && ix < g.iw) plane[iy * g.iw + ix] += src[oy * g.ow + ox];
            }
          }
        }
      }
}

// (batch, C, HW) <-> (C, batch*HW)
void nchw_to_cm(const double* src, int batch, int c, int hw, double* dst) {
  for (int n = 0; n < batch; ++n)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(src + (static_cast<std::size_t>(n) * c + ch) * hw, hw,
                  dst + (static_cast<std::size_t>(ch) * batch + n) * hw);
}

void cm_to_nchw(const double* src, int batch, int c, int hw, double* dst) {
  for (int n = 0; n < batch; ++n)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(src + (static_cast<std::size_t>(ch) * batch + n) * hw, hw,
                  dst + (static_cast<std::size_t>(n) * c + ch) * hw);
}

double sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  double e = std::exp(a);
  return e / (1.0 + e);
}

std::vector<int> with_batch(int batch, const std::vector<int>& per_sample) {
  std::vector<int> s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_shape.empty()) throw Error(Errc::ShapeMismatch, "empty input shape");
  shapes_.push_back(spec_.input_shape);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const std::vector<int>& in = shapes_.back();
    std::vector<int> out;
    LayerGeom g;
    switch (l.kind) {
      case LayerKind::Dense: {
        std::size_t fan_in = shape_numel(in);
        g.w_size = fan_in * static_cast<std::size_t>(l.out);
        g.b_size = static_cast<std::size_t>(l.out);
        out = {l.out};
        break;
      }
      case LayerKind::Conv:
      case LayerKind::ConvTranspose: {
        if (in.size() != 3)
          throw Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + " expects (C,H,W), got " + shape_str(in));
        int oh = l.kind == LayerKind::Conv ? conv_out_size(in[1], l.kernel, l.stride, l.pad)
                                           : convt_out_size(in[1], l.kernel, l.stride, l.pad);
        int ow = l.kind == LayerKind::Conv ? conv_out_size(in[2], l.kernel, l.stride, l.pad)
                                           : convt_out_size(in[2], l.kernel, l.stride, l.pad);
        if (oh <= 0 || ow <= 0)
          throw Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + " produces an empty output");
        g.w_size = static_cast<std::size_t>(in[0]) * l.out * l.kernel * l.kernel;
        g.b_size = static_cast<std::size_t>(l.out);
        out = {l.out, oh, ow};
        break;
      }
      case LayerKind::Activation: out = in; break;
      case LayerKind::Reshape:
        if (shape_numel(l.reshape) != shape_numel(in))
          throw Error(Errc::ShapeMismatch,
                      "reshape " + shape_str(in) + " -> " + shape_str(l.reshape));
        out = l.reshape;
        break;
    }
    g.w_off = offset;
    g.b_off = offset + g.w_size;
    offset += g.w_size + g.b_size;
    geom_.push_back(g);
    shapes_.push_back(out);
  }
  params_.assign(offset, 0.0);
  grads_.assign(offset, 0.0);
}

std::size_t Network::analytic_param_count(const NetworkSpec& spec) {
  std::size_t total = 0;
  std::vector<int> shape = spec.input_shape;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Dense:
        total += shape_numel(shape) * l.out + l.out;
        shape = {l.out};
        break;
      case LayerKind::Conv:
        total += static_cast<std::size_t>(l.out) * shape[0] * l.kernel * l.kernel + l.out;
        shape = {l.out, conv_out_size(shape[1], l.kernel, l.stride, l.pad),
                 conv_out_size(shape[2], l.kernel, l.stride, l.pad)};
        break;
      case LayerKind::ConvTranspose:
        total += static_cast<std::size_t>(shape[0]) * l.out * l.kernel * l.kernel + l.out;
        shape = {l.out, convt_out_size(shape[1], l.kernel, l.stride, l.pad),
                 convt_out_size(shape[2], l.kernel, l.stride, l.pad)};
        break;
      case LayerKind::Activation: break;
      case LayerKind::Reshape: shape = l.reshape; break;
    }
  }
  return total;
}

void Network::init(Rng& rng, double weight_std) {
  for (const auto& g : geom_) {
    for (std::size_t i = 0; i < g.w_size; ++i) params_[g.w_off + i] = weight_std * rng.normal();
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(g.b_off), g.b_size, 0.0);
  }
}

void Network::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void Network::clear_cache() {
  acts_.clear();
  upstreams_.clear();
}

Tensor Network::layer_forward(std::size_t i, const Tensor& in) const {
  const LayerSpec& l = spec_.layers[i];
  const LayerGeom& g = geom_[i];
  const int batch = in.batch();
  Tensor out(with_batch(batch, shapes_[i + 1]));
  const double* w = params_.data() + g.w_off;
  const double* b = params_.data() + g.b_off;
  switch (l.kind) {
    case LayerKind::Dense: {
      int fan_in = static_cast<int>(in.per_sample());
      for (int n = 0; n < batch; ++n) std::copy_n(b, l.out, out.data.data() + static_cast<std::size_t>(n) * l.out);
      gemm(false, true, batch, l.out, fan_in, 1.0, in.data.data(), w, 1.0, out.data.data());
      break;
    }
    case LayerKind::Conv: {
      const auto& is = shapes_[i];
      const auto& os = shapes_[i + 1];
      Patch pg{is[0], is[1], is[2], os[1], os[2], l.kernel, l.stride, l.pad};
      int ncols = batch * pg.cols_per_sample();
      std::vector<double> col(static_cast<std::size_t>(pg.rows()) * ncols);
      im2col(pg, batch, in.data.data(), col.data());
      std::vector<double> res(static_cast<std::size_t>(l.out) * ncols);
      gemm(false, false, l.out, ncols, pg.rows(), 1.0, w, col.data(), 0.0, res.data());
      for (int c = 0; c < l.out; ++c)
        for (int j = 0; j < ncols; ++j) res[static_cast<std::size_t>(c) * ncols + j] += b[c];
      cm_to_nchw(res.data(), batch, l.out, pg.cols_per_sample(), out.data.data());
      break;
    }
    case LayerKind::ConvTranspose: {
      const auto& is = shapes_[i];
      const auto& os = shapes_[i + 1];
      // Adjoint of a conv from the output image to the input grid.
      Patch pg{l.out, os[1], os[2], is[1], is[2], l.kernel, l.stride, l.pad};
      int cin = is[0];
      int ncols = batch * pg.cols_per_sample();
      std::vector<double> xm(static_cast<std::size_t>(cin) * ncols);
      nchw_to_cm(in.data.data(), batch, cin, pg.cols_per_sample(), xm.data());
      std::vector<double> col(static_cast<std::size_t>(pg.rows()) * ncols);
      gemm(true, false, pg.rows(), ncols, cin, 1.0, w, xm.data(), 0.0, col.data());
      col2im(pg, batch, col.data(), out.data.data());
      const int hw = os[1] * os[2];
      for (int n = 0; n < batch; ++n)
        for (int c = 0; c < l.out; ++c) {
          double* p = out.data.data() + (static_cast<std::size_t>(n) * l.out + c) * hw;
          for (int j = 0; j < hw; ++j) p[j] += b[c];
        }
      break;
    }
    case LayerKind::Activation:
      for (std::size_t j = 0; j < in.numel(); ++j) {
        double a = in.data[j];
        switch (l.fn) {
          case ActivationFn::Relu: out.data[j] = a > 0 ? a : 0.0; break;
          case ActivationFn::LeakyRelu: out.data[j] = a > 0 ? a : l.slope * a; break;
          case ActivationFn::Sigmoid: out.data[j] = sigmoid(a); break;
        }
      }
      break;
    case LayerKind::Reshape: out.data = in.data; break;
  }
  return out;
}

Tensor Network::forward(const Tensor& input) {
  if (input.shape.size() != spec_.input_shape.size() + 1 ||
      !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), input.shape.begin() + 1) ||
      input.numel() != shape_numel(input.shape))
    throw Error(Errc::ShapeMismatch,
                "network expects (N," + shape_str(spec_.input_shape).substr(1) + ", got " + shape_str(input.shape));
  acts_.clear();
  upstreams_.clear();
  acts_.push_back(input);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) acts_.push_back(layer_forward(i, acts_.back()));
  return acts_.back();
}

void Network::layer_weight_grad(std::size_t i, const Tensor& in, const Tensor& up, bool with_bias) {
  const LayerSpec& l = spec_.layers[i];
  const LayerGeom& g = geom_[i];
  const int batch = in.batch();
  double* dw = grads_.data() + g.w_off;
  double* db = grads_.data() + g.b_off;
  switch (l.kind) {
    case LayerKind::Dense: {
      int fan_in = static_cast<int>(in.per_sample());
      gemm(true, false, l.out, fan_in, batch, 1.0, up.data.data(), in.data.data(), 1.0, dw);
      if (with_bias)
        for (int n = 0; n < batch; ++n)
          for (int o = 0; o < l.out; ++o) db[o] += up.data[static_cast<std::size_t>(n) * l.out + o];
      break;
    }
    case LayerKind::Conv: {
      const auto& is = shapes_[i];
      const auto& os = shapes_[i + 1];
      Patch pg{is[0], is[1], is[2], os[1], os[2], l.kernel, l.stride, l.pad};
      int ncols = batch * pg.cols_per_sample();
      std::vector<double> col(static_cast<std::size_t>(pg.rows()) * ncols);
      im2col(pg, batch, in.data.data(), col.data());
      std::vector<double> um(static_cast<std::size_t>(l.out) * ncols);
      nchw_to_cm(up.data.data(), batch, l.out, pg.cols_per_sample(), um.data());
      gemm(false, true, l.out, pg.rows(), ncols, 1.0, um.data(), col.data(), 1.0, dw);
      if (with_bias)
        for (int c = 0; c < l.out; ++c) {
          double s = 0.0;
          for (int j = 0; j < ncols; ++j) s += um[static_cast<std::size_t>(c) * ncols + j];
          db[c] += s;
        }
      break;
    }
    case LayerKind::ConvTranspose: {
      const auto& is = shapes_[i];
      const auto& os = shapes_[i + 1];
      Patch pg{l.out, os[1], os[2], is[1], is[2], l.kernel, l.stride, l.pad};
      int cin = is[0];
      int ncols = batch * pg.cols_per_sample();
      std::vector<double> col(static_cast<std::size_t>(pg.rows()) * ncols);
      im2col(pg, batch, up.data.data(), col.data());
      std::vector<double> xm(static_cast<std::size_t>(cin) * ncols);
      nchw_to_cm(in.data.data(), batch, cin, pg.cols_per_sample(), xm.data());
      gemm(false, true, cin, pg.rows(), ncols, 1.0, xm.data(), col.data(), 1.0, dw);
      if (with_bias) {
        const int hw = os[1] * os[2];
        for (int n = 0; n < batch; ++n)
          for (int c = 0; c < l.out; ++c) {
            const double* p = up.data.data() + (static_cast<std::size_t>(n) * l.out + c) * hw;
            double s = 0.0;
            for (int j = 0; j < hw; ++j) s += p[j];
            db[c] += s;
          }
      }
      break;
    }
    default: break;
  }
}

Tensor Network::layer_backward(std::size_t i, const Tensor& in, const Tensor& out, const Tensor& up,
                               bool accumulate) {
  const LayerSpec& l = spec_.layers[i];
  const LayerGeom& g = geom_[i];
  const int batch = in.batch();
  const double* w = params_.data() + g.w_off;
  Tensor din(in.shape);
  switch (l.kind) {
    case LayerKind::Dense: {
      int fan_in = static_cast<int>(in.per_sample());
      gemm(false, false, batch, fan_in, l.out, 1.0, up.data.data(), w, 0.0, din.data.data());
      break;
    }
    case LayerKind::Conv: {
      const auto& is = shapes_[i];
      const auto& os = shapes_[i + 1];
      Patch pg{is[0], is[1], is[2], os[1], os[2], l.kernel, l.stride, l.pad};
      int ncols = batch * pg.cols_per_sample();
      std::vector<double> um(static_cast<std::size_t>(l.out) * ncols);
      nchw_to_cm(up.data.data(), batch, l.out, pg.cols_per_sample(), um.data());
      std::vector<double> dcol(static_cast<std::size_t>(pg.rows()) * ncols);
      gemm(true, false, pg.rows(), ncols, l.out, 1.0, w, um.data(), 0.0, dcol.data());
      col2im(pg, batch, dcol.data(), din.data.data());
      break;
    }
    case LayerKind::ConvTranspose: {
      const auto& is = shapes_[i];
      const auto& os = shapes_[i + 1];
      Patch pg{l.out, os[1], os[2], is[1], is[2], l.kernel, l.stride, l.pad};
      int cin = is[0];
      int ncols = batch * pg.cols_per_sample();
      std::vector<double> col(static_cast<std::size_t>(pg.rows()) * ncols);
      im2col(pg, batch, up.data.data(), col.data());
      std::vector<double> dm(static_cast<std::size_t>(cin) * ncols);
      gemm(false, false, cin, ncols, pg.rows(), 1.0, w, col.data(), 0.0, dm.data());
      cm_to_nchw(dm.data(), batch, cin, pg.cols_per_sample(), din.data.data());
      break;
    }
    case LayerKind::Activation:
      for (std::size_t j = 0; j < in.numel(); ++j) {
        double a = in.data[j];
        double d = 0.0;
        switch (l.fn) {
          case ActivationFn::Relu: d = a > 0 ? 1.0 : 0.0; break;
          case ActivationFn::LeakyRelu: d = a > 0 ? 1.0 : l.slope; break;
          case ActivationFn::Sigmoid: d = out.data[j] * (1.0 - out.data[j]); break;
        }
        din.data[j] = d * up.data[j];
      }
      break;
    case LayerKind::Reshape: din.data = up.data; break;
  }
  if (accumulate) layer_weight_grad(i, in, up, true);
  return din;
}

Tensor Network::backward(const Tensor& upstream, bool accumulate, bool keep_upstreams) {
  if (acts_.empty()) throw Error(Errc::NoForwardCache, "backward() before forward()");
  if (upstream.shape != acts_.back().shape)
    throw Error(Errc::ShapeMismatch, "upstream " + shape_str(upstream.shape) + " vs output " +
                                         shape_str(acts_.back().shape));
  std::vector<Tensor> ups;
  if (keep_upstreams) ups.resize(acts_.size());
  Tensor g = upstream;
  for (std::size_t i = spec_.layers.size(); i-- > 0;) {
    Tensor gin = layer_backward(i, acts_[i], acts_[i + 1], g, accumulate);
    if (keep_upstreams) ups[i + 1] = std::move(g);
    g = std::move(gin);
  }
  if (keep_upstreams) {
    ups[0] = g;
    upstreams_ = std::move(ups);
  }
  return g;
}

Tensor Network::layer_jvp(std::size_t i, const Tensor& in, const Tensor& out, const Tensor& t) const {
  const LayerSpec& l = spec_.layers[i];
  switch (l.kind) {
    case LayerKind::Dense:
    case LayerKind::Conv:
    case LayerKind::ConvTranspose: {
      // Linear part only: forward of the tangent minus the bias.
      Tensor r = layer_forward(i, t);
      const LayerGeom& g = geom_[i];
      const double* b = params_.data() + g.b_off;
      std::size_t per_ch = l.kind == LayerKind::Dense ? 1 : shape_numel(shapes_[i + 1]) / l.out;
      for (std::size_t j = 0; j < r.numel(); ++j) r.data[j] -= b[(j / per_ch) % l.out];
      return r;
    }
    case LayerKind::Activation: {
      Tensor r(t.shape);
      for (std::size_t j = 0; j < t.numel(); ++j) {
        double a = in.data[j];
        double d = 0.0;
        switch (l.fn) {
          case ActivationFn::Relu: d = a > 0 ? 1.0 : 0.0; break;
          case ActivationFn::LeakyRelu: d = a > 0 ? 1.0 : l.slope; break;
          case ActivationFn::Sigmoid: d = out.data[j] * (1.0 - out.data[j]); break;
        }
        r.data[j] = d * t.data[j];
      }
      return r;
    }
    case LayerKind::Reshape: {
      Tensor r = t;
      r.shape = with_batch(t.batch(), shapes_[i + 1]);
      return r;
    }
  }
  return {};
}

Tensor Network::jvp(const Tensor& tangent) const {
  if (acts_.empty()) throw Error(Errc::NoForwardCache, "jvp() before forward()");
  if (tangent.shape != acts_.front().shape) throw Error(Errc::ShapeMismatch, "tangent shape");
  Tensor t = tangent;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) t = layer_jvp(i, acts_[i], acts_[i + 1], t);
  return t;
}

// The input gradient is a chain u_{i} = B_i(a_i) u_{i+1}, each B_i linear in
// u_{i+1}. Differentiating <cot, u_0> walks the chain forward with the
// tangent of u_i, picking up parameter terms from linear layers and
// activation-input terms from curved activations, then pushes those through
// an ordinary backward pass.
void Network::double_backward(const Tensor& input_grad_cotangent) {
  if (acts_.empty()) throw Error(Errc::NoForwardCache, "double_backward() before forward()");
  if (upstreams_.size() != acts_.size())
    throw Error(Errc::NoForwardCache, "double_backward() needs backward(keep_upstreams=true)");
  if (input_grad_cotangent.shape != acts_.front().shape)
    throw Error(Errc::ShapeMismatch, "cotangent shape");

  const std::size_t L = spec_.layers.size();
  std::vector<Tensor> act_bar(L + 1);
  bool any_curvature = false;
  Tensor ubar = input_grad_cotangent;
  for (std::size_t i = 0; i < L; ++i) {
    const LayerSpec& l = spec_.layers[i];
    const Tensor& a_in = acts_[i];
    const Tensor& a_out = acts_[i + 1];
    const Tensor& u_out = upstreams_[i + 1];
    if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv || l.kind == LayerKind::ConvTranspose) {
      layer_weight_grad(i, ubar, u_out, false);
    } else if (l.kind == LayerKind::Activation && l.fn == ActivationFn::Sigmoid) {
      Tensor ab(a_in.shape);
      for (std::size_t j = 0; j < ab.numel(); ++j) {
        double s = a_out.data[j];
        ab.data[j] = s * (1.0 - s) * (1.0 - 2.0 * s) * u_out.data[j] * ubar.data[j];
      }
      act_bar[i] = std::move(ab);
      any_curvature = true;
    }
    ubar = layer_jvp(i, a_in, a_out, ubar);
  }
  if (!any_curvature) return;

  Tensor g(acts_.back().shape);
  for (std::size_t i = L; i-- > 0;) {
    g = layer_backward(i, acts_[i], acts_[i + 1], g, true);
    if (!act_bar[i].data.empty())
      for (std::size_t j = 0; j < g.numel(); ++j) g.data[j] += act_bar[i].data[j];
  }
}

// ---------------------------------------------------------------------------

namespace {

void require_scalar(const Network& net) {
  if (shape_numel(net.output_shape()) != 1)
    throw Error(Errc::NonScalarOutput, "network output " + shape_str(net.output_shape()) + " is not scalar");
}

}  // namespace

Tensor input_gradient(Network& net, const Tensor& x) {
  require_scalar(net);
  Tensor y = net.forward(x);
  Tensor seed(y.shape, 1.0);
  return net.backward(seed, false, false);
}

std::vector<double> grad_input_norm_grad(Network& net, const Tensor& x) {
  require_scalar(net);
  Tensor y = net.forward(x);
  Tensor seed(y.shape, 1.0);
  Tensor gx = net.backward(seed, false, true);
  Tensor cot(gx.shape);
  const std::size_t per = gx.per_sample();
  for (int n = 0; n < gx.batch(); ++n) {
    const double* p = gx.data.data() + static_cast<std::size_t>(n) * per;
    double sq = 0.0;
    for (std::size_t j = 0; j < per; ++j) sq += p[j] * p[j];
    double norm = std::sqrt(sq);
    if (norm == 0.0) continue;
    for (std::size_t j = 0; j < per; ++j) cot.data[static_cast<std::size_t>(n) * per + j] = p[j] / norm;
  }
  std::vector<double> saved(net.grads().begin(), net.grads().end());
  net.zero_grad();
  net.double_backward(cot);
  std::vector<double> out(net.grads().begin(), net.grads().end());
  std::copy(saved.begin(), saved.end(), net.grads().begin());
  return out;
}

AdamState AdamState::for_params(std::size_t n, double lr, double beta1, double beta2, double eps) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw Error(Errc::ShapeMismatch, "adam: parameter/gradient/moment sizes differ");
  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    double mhat = st.m[i] / c1;
    double vhat = st.v[i] / c2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace doomgan::nn
