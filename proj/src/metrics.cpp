#include "doomgan/metrics.hpp"

#include "doomgan/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace doomgan {

Corpus Corpus::from_image_sets(std::span<const LevelImageSet> sets) {
  Corpus c;
  for (MapType t : kAllMapTypes) {
    auto& list = c.maps[t];
    for (const auto& s : sets) list.push_back(s.channel(t));
  }
  return c;
}

const std::vector<Image>& Corpus::of(MapType t) const {
  auto it = maps.find(t);
  if (it == maps.end() || it->second.empty()) {
    throw Error(Errc::EmptyCorpus, "no " + std::string(map_type_name(t)) + " images in corpus");
  }
  return it->second;
}

std::size_t Corpus::size(MapType t) const {
  auto it = maps.find(t);
  return it == maps.end() ? 0 : it->second.size();
}

void Corpus::validate() const {
  std::optional<std::pair<int, int>> dims;
  bool any = false;
  for (const auto& [t, list] : maps) {
    for (const auto& img : list) {
      any = true;
      if (!dims) dims = std::pair{img.width, img.height};
      if (img.width != dims->first || img.height != dims->second) {
        throw Error(Errc::SizeMismatch, "corpus images have inconsistent dimensions");
      }
    }
  }
  if (!any) throw Error(Errc::EmptyCorpus, "corpus holds no images");
}

// ---------------------------------------------------------------------------

double pixel_entropy(const Image& img) {
  if (img.empty()) return 0.0;
  std::array<std::size_t, 256> hist{};
  for (auto v : img.px) hist[v]++;
  const double n = static_cast<double>(img.size());
  double h = 0.0;
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

namespace {

double mean_entropy(const std::vector<Image>& list) {
  double acc = 0.0;
  for (const auto& img : list) acc += pixel_entropy(img);
  return acc / static_cast<double>(list.size());
}

}  // namespace

double delta_entropy(const Corpus& a, const Corpus& b, MapType t) {
  return std::abs(mean_entropy(a.of(t)) - mean_entropy(b.of(t)));
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> g(size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of a w x h field.
std::vector<double> filter_valid(const std::vector<double>& f, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * f[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& x, const Image& y, const SsimParams& p) {
  if (x.width != y.width || x.height != y.height) {
    throw Error(Errc::SizeMismatch, "ssim inputs differ in size");
  }
  if (x.width < p.window || x.height < p.window) {
    throw Error(Errc::TooSmall, "ssim needs at least " + std::to_string(p.window) + "x" +
                                    std::to_string(p.window) + " pixels");
  }
  const int w = x.width, h = x.height;
  const std::size_t n = x.size();
  std::vector<double> fx(n), fy(n), fxx(n), fyy(n), fxy(n);
  for (std::size_t i = 0; i < n; ++i) {
    fx[i] = x.px[i];
    fy[i] = y.px[i];
    fxx[i] = fx[i] * fx[i];
    fyy[i] = fy[i] * fy[i];
    fxy[i] = fx[i] * fy[i];
  }
  const auto k = gaussian_kernel(p.window, p.sigma);
  const auto mx = filter_valid(fx, w, h, k);
  const auto my = filter_valid(fy, w, h, k);
  const auto sxx = filter_valid(fxx, w, h, k);
  const auto syy = filter_valid(fyy, w, h, k);
  const auto sxy = filter_valid(fxy, w, h, k);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

// ---------------------------------------------------------------------------

double encoding_error(const Image& img, const std::set<std::uint8_t>& meaningful) {
  if (meaningful.empty()) throw Error(Errc::EmptyMeaningfulSet, "no meaningful values given");
  if (img.empty()) return 0.0;
  std::array<int, 256> nearest{};
  for (int v = 0; v < 256; ++v) {
    int best = 256;
    for (auto m : meaningful) best = std::min(best, std::abs(v - static_cast<int>(m)));
    nearest[v] = best;
  }
  double acc = 0.0;
  for (auto v : img.px) acc += nearest[v];
  return acc / static_cast<double>(img.size()) / 255.0;
}

std::optional<std::set<std::uint8_t>> meaningful_values(MapType t, const ThingPalette& palette) {
  switch (t) {
    case MapType::Floor:
    case MapType::Wall: return std::set<std::uint8_t>{0, 255};
    case MapType::Things: {
      std::set<std::uint8_t> s{0};
      s.insert(palette.gray.begin(), palette.gray.end());
      return s;
    }
    case MapType::Triggers: {
      std::set<std::uint8_t> s{0};
      for (int c = 1; c <= 7; ++c) {
        for (int tag = 0; tag < 32; ++tag) s.insert(static_cast<std::uint8_t>(32 * c + tag));
      }
      return s;
    }
    case MapType::Height:
    case MapType::Rooms: return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Harris

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::vector<std::int64_t> binomial_smooth(const std::vector<std::int64_t>& f, int w, int h) {
  static constexpr std::array<std::int64_t, 5> kTaps = {1, 4, 6, 4, 1};
  std::vector<std::int64_t> tmp(f.size()), out(f.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int i = -2; i <= 2; ++i) acc += kTaps[i + 2] * f[static_cast<std::size_t>(y) * w + reflect101(x + i, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int i = -2; i <= 2; ++i) acc += kTaps[i + 2] * tmp[static_cast<std::size_t>(reflect101(y + i, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<int, int>> harris_corners(const Image& img) {
  std::vector<std::pair<int, int>> corners;
  const int w = img.width, h = img.height;
  if (img.empty()) return corners;
  const std::size_t n = img.size();
  auto p = [&](int x, int y) { return static_cast<std::int64_t>(img.at(reflect101(x, w), reflect101(y, h))); };
  std::vector<std::int64_t> a(n), b(n), c(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t gx = (p(x + 1, y - 1) + 2 * p(x + 1, y) + p(x + 1, y + 1)) -
                              (p(x - 1, y - 1) + 2 * p(x - 1, y) + p(x - 1, y + 1));
      const std::int64_t gy = (p(x - 1, y + 1) + 2 * p(x, y + 1) + p(x + 1, y + 1)) -
                              (p(x - 1, y - 1) + 2 * p(x, y - 1) + p(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      a[i] = gx * gx;
      b[i] = gy * gy;
      c[i] = gx * gy;
    }
  }
  a = binomial_smooth(a, w, h);
  b = binomial_smooth(b, w, h);
  c = binomial_smooth(c, w, h);

  // 25 * R with k = 1/25.
  std::vector<__int128> r(n);
  __int128 max_r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const __int128 det = static_cast<__int128>(a[i]) * b[i] - static_cast<__int128>(c[i]) * c[i];
    const __int128 tr = static_cast<__int128>(a[i]) + b[i];
    r[i] = 25 * det - tr * tr;
    max_r = std::max(max_r, r[i]);
  }
  if (max_r <= 0) return corners;

  auto at = [&](int x, int y) { return r[static_cast<std::size_t>(y) * w + x]; };
  std::vector<char> is_max(n, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const __int128 v = at(x, y);
      if (100 * v <= max_r) continue;
      bool ok = true;
      for (int dy = -1; dy <= 1 && ok; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((dx || dy) && nx >= 0 && ny >= 0 && nx < w && ny < h && at(nx, ny) > v) {
            ok = false;
            break;
          }
        }
      }
      is_max[static_cast<std::size_t>(y) * w + x] = ok;
    }
  }
  // A plateau of equal maxima counts once.
  std::vector<char> seen(n, 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!is_max[i] || seen[i]) continue;
      corners.emplace_back(x, y);
      seen[i] = 1;
      stack.push_back(static_cast<int>(i));
      while (!stack.empty()) {
        const int q = stack.back();
        stack.pop_back();
        const int qx = q % w, qy = q / w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = qx + dx, ny = qy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            if (is_max[j] && !seen[j] && r[j] == r[q]) {
              seen[j] = 1;
              stack.push_back(static_cast<int>(j));
            }
          }
        }
      }
    }
  }
  return corners;
}

std::size_t harris_corner_count(const Image& img) { return harris_corners(img).size(); }

namespace {

double mean_corners(const std::vector<Image>& list) {
  double acc = 0.0;
  for (const auto& img : list) acc += static_cast<double>(harris_corner_count(img));
  return acc / static_cast<double>(list.size());
}

}  // namespace

double corner_error(const Corpus& a, const Corpus& b, MapType t) {
  const double ma = mean_corners(a.of(t));
  const double mb = mean_corners(b.of(t));
  return std::abs(ma - mb) / std::max(ma, 1.0);
}

// ---------------------------------------------------------------------------

MetricsReport evaluate_corpora(const Corpus& reference, const Corpus& generated, const ThingPalette& palette) {
  reference.validate();
  generated.validate();
  MetricsReport report;
  report.reference_size = reference.size(MapType::Floor);
  report.generated_size = generated.size(MapType::Floor);
  for (MapType t : kEvaluatedMapTypes) {
    const auto& ref = reference.of(t);
    const auto& gen = generated.of(t);
    MapMetrics m;
    m.delta_entropy = delta_entropy(reference, generated, t);
    const std::size_t pairs = std::max(ref.size(), gen.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) acc += ssim(gen[i % gen.size()], ref[i % ref.size()]);
    m.mean_ssim = acc / static_cast<double>(pairs);
    if (const auto values = meaningful_values(t, palette)) {
      double er = 0.0, eg = 0.0;
      for (const auto& img : ref) er += encoding_error(img, *values);
      for (const auto& img : gen) eg += encoding_error(img, *values);
      m.encoding_error_reference = er / static_cast<double>(ref.size());
      m.encoding_error_generated = eg / static_cast<double>(gen.size());
    }
    if (t == MapType::Floor || t == MapType::Wall) {
      m.mean_corners_reference = mean_corners(ref);
      m.mean_corners_generated = mean_corners(gen);
      m.corner_error = std::abs(m.mean_corners_reference - m.mean_corners_generated) /
                       std::max(m.mean_corners_reference, 1.0);
    }
    report.maps[t] = m;
  }
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["reference_size"] = reference_size;
  j["generated_size"] = generated_size;
  const SsimParams sp;
  const HarrisParams hp;
  j["parameters"] = {
      {"ssim", {{"window", sp.window}, {"sigma", sp.sigma}, {"k1", sp.k1}, {"k2", sp.k2},
                {"pairing", "index, shorter list recycled"}}},
      {"harris", {{"k", hp.k}, {"sigma", hp.sigma}, {"window", "binomial-5"},
                  {"relative_threshold", hp.relative_threshold}, {"nms", hp.nms_size}}},
      {"delta_entropy", "absolute difference of corpus mean entropies"},
  };
  for (const auto& [t, m] : maps) {
    nlohmann::json e = {{"delta_entropy", m.delta_entropy}, {"mean_ssim", m.mean_ssim}};
    if (m.encoding_error_reference) {
      e["encoding_error_reference"] = *m.encoding_error_reference;
      e["encoding_error_generated"] = *m.encoding_error_generated;
    }
    if (m.corner_error) {
      e["corner_error"] = *m.corner_error;
      e["mean_corners_reference"] = m.mean_corners_reference;
      e["mean_corners_generated"] = m.mean_corners_generated;
    }
    j["maps"][std::string(map_type_name(t))] = e;
  }
  return j;
}

std::string MetricsReport::table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %10s %10s %10s %10s %10s\n", "map", "dE", "SSIM", "EE_ref",
                "EE_gen", "CE");
  os << line;
  auto fmt = [](const std::optional<double>& v) {
    char buf[32];
    if (v) std::snprintf(buf, sizeof buf, "%10.4f", *v);
    else std::snprintf(buf, sizeof buf, "%10s", "-");
    return std::string(buf);
  };
  for (const auto& [t, m] : maps) {
    std::snprintf(line, sizeof line, "%-9s %10.4f %10.4f %s %s %s\n",
                  std::string(map_type_name(t)).c_str(), m.delta_entropy, m.mean_ssim,
                  fmt(m.encoding_error_reference).c_str(), fmt(m.encoding_error_generated).c_str(),
                  fmt(m.corner_error).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace doomgan
