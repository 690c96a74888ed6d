#include "doomgan/distance.hpp"

#include <limits>

namespace doomgan {

namespace {

constexpr std::int64_t kInf = std::int64_t{1} << 50;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) over one line.
void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d,
            std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = (static_cast<double>(f[q] + std::int64_t{q} * q) -
           static_cast<double>(f[p] + std::int64_t{p} * p)) /
          (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const std::int64_t dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

DistanceField distance_transform(const Image& floor) {
  DistanceField out;
  out.width = floor.width;
  out.height = floor.height;
  out.sq.assign(floor.size(), 0);
  if (floor.empty()) return out;

  // Pad by one background pixel on every side.
  const int w = floor.width + 2;
  const int h = floor.height + 2;
  std::vector<std::int64_t> grid(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < floor.height; ++y) {
    for (int x = 0; x < floor.width; ++x) {
      if (floor.at(x, y) != 0) grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = kInf;
    }
  }

  const int n = std::max(w, h);
  std::vector<std::int64_t> f(n), d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);

  for (int x = 0; x < w; ++x) {
    f.resize(h);
    d.resize(h);
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.resize(w);
    d.resize(w);
    for (int x = 0; x < w; ++x) f[x] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[x];
  }

  for (int y = 0; y < floor.height; ++y) {
    for (int x = 0; x < floor.width; ++x) {
      out.sq[static_cast<std::size_t>(y) * out.width + x] =
          floor.at(x, y) != 0 ? grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] : 0;
    }
  }
  return out;
}

}  // namespace doomgan
