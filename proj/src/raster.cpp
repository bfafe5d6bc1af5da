#include "glandseg/raster.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>

namespace glandseg {

namespace {

constexpr std::array<int, 8> kDx8 = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy8 = {0, -1, -1, -1, 0, 1, 1, 1};

bool fg(const BinaryMask& m, int x, int y) { return m.contains(x, y) && m(x, y) != 0; }

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (!a.same_shape(b)) throw ContractError(std::string(what) + ": mask dimensions differ");
}

// Union-find over provisional labels.
int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw ContractError("image dimensions must be positive");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> interleaved)
    : width_(width), height_(height), data_(std::move(interleaved)) {
  if (width < 1 || height < 1) throw ContractError("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height * 3)
    throw ContractError("RGB data length does not match width x height x 3");
}

GrayImage RgbImage::channel(int c) const {
  if (c < 0 || c > 2) throw InputDomainError("channel index must be 0, 1 or 2");
  GrayImage out(width_, height_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data_[i * 3 + static_cast<std::size_t>(c)];
  return out;
}

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  const auto bytes = img.bytes();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double luma = 0.299 * bytes[3 * i] + 0.587 * bytes[3 * i + 1] + 0.114 * bytes[3 * i + 2];
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(luma), 0L, 255L));
  }
  return out;
}

LabelMap label_components(const BinaryMask& mask, Connectivity conn) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> provisional(mask.size(), 0);
  std::vector<int> parent{0};

  // First pass over the already-visited neighbours: W, N (and NW, NE for
  // 8-connectivity).
  constexpr std::array<int, 4> dx = {-1, 0, -1, 1};
  constexpr std::array<int, 4> dy = {0, -1, -1, -1};
  const int visited = conn == Connectivity::Eight ? 4 : 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      int current = 0;
      for (int k = 0; k < visited; ++k) {
        const int nx = x + dx[k];
        const int ny = y + dy[k];
        if (!mask.contains(nx, ny)) continue;
        const int other = provisional[static_cast<std::size_t>(ny) * w + nx];
        if (other == 0) continue;
        if (current == 0) {
          current = find_root(parent, other);
        } else {
          const int a = find_root(parent, current);
          const int b = find_root(parent, other);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
          current = std::min(a, b);
        }
      }
      if (current == 0) {
        current = static_cast<int>(parent.size());
        parent.push_back(current);
      }
      provisional[static_cast<std::size_t>(y) * w + x] = current;
    }
  }

  // Second pass: renumber roots in raster order of first appearance.
  std::vector<int> final_label(parent.size(), 0);
  std::vector<std::int32_t> labels(mask.size(), 0);
  int count = 0;
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] == 0) continue;
    const int root = find_root(parent, provisional[i]);
    if (final_label[root] == 0) final_label[root] = ++count;
    labels[i] = final_label[root];
  }
  return LabelMap(w, h, std::move(labels), count);
}

std::vector<std::size_t> component_sizes(const LabelMap& lm) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(lm.count) + 1, 0);
  for (const auto label : lm.pixels()) ++sizes[static_cast<std::size_t>(label)];
  return sizes;
}

std::vector<Centroid> centroids(const LabelMap& lm) {
  const auto n = static_cast<std::size_t>(lm.count);
  std::vector<double> sx(n + 1, 0.0), sy(n + 1, 0.0);
  std::vector<std::size_t> cnt(n + 1, 0);
  for (int y = 0; y < lm.height(); ++y) {
    for (int x = 0; x < lm.width(); ++x) {
      const auto l = static_cast<std::size_t>(lm(x, y));
      if (l == 0) continue;
      sx[l] += x;
      sy[l] += y;
      ++cnt[l];
    }
  }
  std::vector<Centroid> out;
  out.reserve(n);
  for (std::size_t l = 1; l <= n; ++l) {
    if (cnt[l] == 0) continue;
    out.push_back({static_cast<int>(l), sx[l] / static_cast<double>(cnt[l]),
                   sy[l] / static_cast<double>(cnt[l])});
  }
  return out;
}

int count_neighbors8(const BinaryMask& mask, int x, int y) {
  int n = 0;
  for (int k = 0; k < 8; ++k) n += fg(mask, x + kDx8[k], y + kDy8[k]) ? 1 : 0;
  return n;
}

bool is_simple_pixel(const BinaryMask& mask, int x, int y) {
  // Yokoi connectivity number for 8-connected foreground; neighbours are
  // taken counter-clockwise starting east, off-image pixels are background.
  std::array<int, 9> bg{};
  for (int k = 0; k < 8; ++k) bg[k] = fg(mask, x + kDx8[k], y + kDy8[k]) ? 0 : 1;
  bg[8] = bg[0];
  int connectivity = 0;
  for (int k = 0; k < 8; k += 2) connectivity += bg[k] - bg[k] * bg[k + 1] * bg[k + 2];
  return connectivity == 1;
}

BinaryMask thin(const BinaryMask& mask) {
  BinaryMask m = mask;
  const int w = m.width();
  const int h = m.height();
  // Two directional sub-iterations (south-east borders, then north-west
  // borders). Candidates are collected from the state at the start of the
  // sub-iteration and removed one by one, re-checking simplicity so that
  // every individual deletion preserves topology.
  std::vector<Point> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      candidates.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!m(x, y)) continue;
          const bool border = pass == 0 ? (!fg(m, x + 1, y) || !fg(m, x, y + 1))
                                        : (!fg(m, x - 1, y) || !fg(m, x, y - 1));
          if (border && count_neighbors8(m, x, y) >= 2 && is_simple_pixel(m, x, y))
            candidates.push_back({x, y});
        }
      }
      for (const Point p : candidates) {
        if (count_neighbors8(m, p.x, p.y) >= 2 && is_simple_pixel(m, p.x, p.y)) {
          m(p.x, p.y) = 0;
          changed = true;
        }
      }
    }
  }
  return m;
}

bool is_endpoint(const BinaryMask& mask, int x, int y) {
  int ring = 0;
  for (int k = 0; k < 8; ++k) ring |= fg(mask, x + kDx8[k], y + kDy8[k]) ? 1 << k : 0;
  const int n = std::popcount(static_cast<unsigned>(ring));
  if (n <= 1) return true;
  if (n > 3) return false;
  // A tip: every neighbour inside one arc of three consecutive ring cells.
  // The neighbours must form one unbroken run around the ring; a gap means
  // the pixel sits on a corner or a crossing rather than at a tip.
  const int run = (1 << n) - 1;
  for (int k = 0; k < 8; ++k)
    if (ring == ((run << k | run >> (8 - k)) & 0xff)) return true;
  return false;
}

std::vector<Point> endpoints(const BinaryMask& skeleton) {
  std::vector<Point> out;
  for (int y = 0; y < skeleton.height(); ++y)
    for (int x = 0; x < skeleton.width(); ++x)
      if (skeleton(x, y) && is_endpoint(skeleton, x, y)) out.push_back({x, y});
  return out;
}

BinaryMask majority_filter(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      int votes = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) votes += mask.clamped(x + dx, y + dy) ? 1 : 0;
      out(x, y) = votes >= 5 ? 1 : 0;
    }
  }
  return out;
}

BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask outside(w, h, 0);
  std::vector<Point> stack;
  auto seed = [&](int x, int y) {
    if (!mask(x, y) && !outside(x, y)) {
      outside(x, y) = 1;
      stack.push_back({x, y});
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  constexpr std::array<int, 4> dx = {1, -1, 0, 0};
  constexpr std::array<int, 4> dy = {0, 0, 1, -1};
  while (!stack.empty()) {
    const Point p = stack.back();
    stack.pop_back();
    for (int k = 0; k < 4; ++k) {
      const int nx = p.x + dx[k];
      const int ny = p.y + dy[k];
      if (mask.contains(nx, ny)) seed(nx, ny);
    }
  }
  BinaryMask out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

BinaryMask area_filter(const BinaryMask& mask, std::size_t min_area) {
  if (min_area == 0) return mask;
  const LabelMap lm = label_components(mask);
  const auto sizes = component_sizes(lm);
  BinaryMask out(mask.width(), mask.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto l = static_cast<std::size_t>(lm[i]);
    out[i] = (l != 0 && sizes[l] >= min_area) ? 1 : 0;
  }
  return out;
}

GradientField sobel(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  GradientField g{RealImage(w, h, 0.0), RealImage(w, h, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto v = [&](int dx, int dy) { return mask.clamped(x + dx, y + dy) ? 1.0 : 0.0; };
      const double gx = (v(1, -1) + 2 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2 * v(-1, 0) + v(-1, 1));
      const double gy = (v(-1, 1) + 2 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2 * v(0, -1) + v(1, -1));
      const double mag = std::hypot(gx, gy);
      g.magnitude(x, y) = mag;
      g.direction(x, y) = mag > 0 ? std::atan2(gy, gx) : 0.0;
    }
  }
  return g;
}

std::vector<Point> line_pixels(Point p1, Point p2) {
  // Always rasterize from the raster-order-smaller point so that the
  // pixel set does not depend on argument order.
  if (p2 < p1) std::swap(p1, p2);
  std::vector<Point> out;
  const int dx = std::abs(p2.x - p1.x);
  const int dy = -std::abs(p2.y - p1.y);
  const int sx = p1.x < p2.x ? 1 : -1;
  const int sy = p1.y < p2.y ? 1 : -1;
  int err = dx + dy;
  int x = p1.x;
  int y = p1.y;
  out.reserve(static_cast<std::size_t>(std::max(dx, -dy)) + 1);
  while (true) {
    out.push_back({x, y});
    if (x == p2.x && y == p2.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

void draw_line_inplace(BinaryMask& mask, Point p1, Point p2) {
  if (!mask.contains(p1) || !mask.contains(p2))
    throw InputDomainError("draw_line: endpoint outside the image");
  for (const Point p : line_pixels(p1, p2)) mask(p.x, p.y) = 1;
}

BinaryMask draw_line(const BinaryMask& mask, Point p1, Point p2) {
  BinaryMask out = mask;
  draw_line_inplace(out, p1, p2);
  return out;
}

std::size_t count(const BinaryMask& mask) {
  std::size_t n = 0;
  for (const auto v : mask.pixels()) n += v ? 1 : 0;
  return n;
}

bool is_subset(const BinaryMask& inner, const BinaryMask& outer) {
  require_same_shape(inner, outer, "is_subset");
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) return false;
  return true;
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "mask_union");
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "mask_difference");
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && !b[i]) ? 1 : 0;
  return out;
}

BinaryMask mask_of_label(const LabelMap& lm, int label) {
  BinaryMask out(lm.width(), lm.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lm[i] == label ? 1 : 0;
  return out;
}

BinaryMask foreground(const LabelMap& lm) {
  BinaryMask out(lm.width(), lm.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lm[i] != 0 ? 1 : 0;
  return out;
}

namespace {

constexpr double kFar = 1e20;

// Squared distance transform of a sampled function along one axis
// (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kFar;
  z[1] = kFar;
  for (int q = 1; q < n; ++q) {
    double s = 0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[0] = q;
      z[0] = -kFar;
      z[1] = kFar;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kFar;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

RealImage distance_transform(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  if (count(mask) == 0) return RealImage(w, h, std::numeric_limits<double>::infinity());
  RealImage sq(w, h, kFar);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) sq[i] = 0.0;

  const auto n = static_cast<std::size_t>(std::max(w, h));
  std::vector<double> f, d;
  std::vector<int> v(n);
  std::vector<double> z(n + 1);

  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = sq(x, y);
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq(x, y) = d[y];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = sq(x, y);
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq(x, y) = std::sqrt(d[x]);
  }
  return sq;
}

}  // namespace glandseg
