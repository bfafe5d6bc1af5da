#include "glandseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace glandseg {

namespace {

// Draws are taken straight from the engine so phantoms are identical across
// standard library implementations.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 eng_;
};

struct Gland {
  double cx, cy;
  double outer;  // ground-truth radius
  double lumen;
};

constexpr Rgb kLumen{242, 236, 242};
constexpr Rgb kStroma{222, 160, 196};
constexpr Rgb kCytoplasm{150, 96, 166};
constexpr Rgb kNucleus{74, 44, 116};

std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Rgb shade(Rgb c, double delta) { return {clamp8(c.r + delta), clamp8(c.g + delta), clamp8(c.b + delta)}; }

// Smooth lattice noise in [-1, 1], bilinearly interpolated over `cell` pixels.
RealImage lattice_noise(int w, int h, int cell, Draw& rnd) {
  const int gw = w / cell + 2;
  const int gh = h / cell + 2;
  std::vector<double> grid(static_cast<std::size_t>(gw * gh));
  for (auto& v : grid) v = rnd.uniform(-1.0, 1.0);
  RealImage out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int gy = static_cast<int>(fy);
    const double ty = fy - gy;
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int gx = static_cast<int>(fx);
      const double tx = fx - gx;
      auto g = [&](int i, int j) { return grid[static_cast<std::size_t>(j * gw + i)]; };
      out(x, y) = (1 - ty) * ((1 - tx) * g(gx, gy) + tx * g(gx + 1, gy)) +
                  ty * ((1 - tx) * g(gx, gy + 1) + tx * g(gx + 1, gy + 1));
    }
  }
  return out;
}

void paint_ellipse(RgbImage& img, double cx, double cy, double a, double b, double angle, Rgb colour,
                   Draw& rnd) {
  const double c = std::cos(angle), s = std::sin(angle);
  const int r = static_cast<int>(std::ceil(std::max(a, b))) + 1;
  const double tone = rnd.uniform(-6.0, 6.0);
  for (int y = static_cast<int>(cy) - r; y <= static_cast<int>(cy) + r; ++y) {
    for (int x = static_cast<int>(cx) - r; x <= static_cast<int>(cx) + r; ++x) {
      if (!img.contains(x, y)) continue;
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * c + dy * s) / a;
      const double v = (-dx * s + dy * c) / b;
      if (u * u + v * v <= 1.0) img.set(x, y, shade(colour, tone + rnd.uniform(-3.0, 3.0)));
    }
  }
}

// Nuclei evenly spaced on a circle, long axis tangential.
void paint_ring(RgbImage& img, const Gland& g, double radius, double spacing, double phase, double a, double b,
                Draw& rnd) {
  const int n = std::max(6, static_cast<int>(std::lround(2 * std::numbers::pi * radius / spacing)));
  for (int i = 0; i < n; ++i) {
    const double t = phase + 2 * std::numbers::pi * i / n + rnd.uniform(-0.04, 0.04);
    const double rr = radius + rnd.uniform(-0.7, 0.7);
    paint_ellipse(img, g.cx + rr * std::cos(t), g.cy + rr * std::sin(t), a * rnd.uniform(0.92, 1.08),
                  b * rnd.uniform(0.92, 1.08), t + std::numbers::pi / 2, kNucleus, rnd);
  }
}

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
  Draw rnd(spec.seed * 0x9e3779b97f4a7c15ULL + (spec.style == RimStyle::Dense ? 7 : 3));
  const int w = spec.width, h = spec.height;
  const bool dense = spec.style == RimStyle::Dense;

  // Gland layout: radii first, then non-overlapping centres with a stroma gap.
  std::vector<Gland> glands;
  const int wanted = spec.max_glands <= 1 ? 1 : 1 + static_cast<int>(rnd.uniform() * spec.max_glands);
  for (int attempt = 0; attempt < 200 && static_cast<int>(glands.size()) < wanted; ++attempt) {
    Gland g{};
    if (dense) {
      g.lumen = rnd.uniform(16.0, 24.0);
      g.outer = g.lumen + 16.0;
    } else {
      const double ring = rnd.uniform(30.0, 42.0);
      g.lumen = ring - 2.0;
      g.outer = ring + 1.5;
    }
    const double margin = g.outer + 12.0;
    if (2 * margin >= std::min(w, h)) {
      g.outer = std::min(w, h) / 2.0 - 12.0;
      g.lumen = dense ? g.outer - 16.0 : g.outer - 3.5;
    }
    g.cx = rnd.uniform(g.outer + 12.0, w - g.outer - 12.0);
    g.cy = rnd.uniform(g.outer + 12.0, h - g.outer - 12.0);
    const bool clear = std::all_of(glands.begin(), glands.end(), [&](const Gland& o) {
      return std::hypot(o.cx - g.cx, o.cy - g.cy) > o.outer + g.outer + 40.0;
    });
    if (clear) glands.push_back(g);
  }

  Phantom ph;
  ph.intended = dense ? GlandKind::Thick : GlandKind::Thin;
  ph.image = RgbImage(w, h, kStroma);
  ph.truth = LabelMap(w, h);
  ph.truth.count = static_cast<int>(glands.size());

  const RealImage coarse = lattice_noise(w, h, 7, rnd);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ph.image.set(x, y, shade(kStroma, 16.0 * coarse(x, y) + rnd.uniform(-7.0, 7.0)));

  for (std::size_t k = 0; k < glands.size(); ++k) {
    const Gland& g = glands[k];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d = std::hypot(x - g.cx, y - g.cy);
        if (d <= g.outer) ph.truth(x, y) = static_cast<std::int32_t>(k + 1);
        if (d <= g.lumen)
          ph.image.set(x, y, shade(kLumen, rnd.uniform(-4.0, 4.0)));
        else if (dense && d <= g.outer)
          ph.image.set(x, y, shade(kCytoplasm, rnd.uniform(-6.0, 6.0)));
      }
    }
    const double phase = rnd.uniform(0.0, 2 * std::numbers::pi);
    if (dense) {
      paint_ring(ph.image, g, g.lumen + 4.0, 10.5, phase, 3.6, 2.9, rnd);
      paint_ring(ph.image, g, g.outer - 4.5, 10.5, phase + 0.5 * 10.5 / (g.outer - 4.5), 3.6, 2.9, rnd);
    } else {
      paint_ring(ph.image, g, g.outer - 1.5, 17.0, phase, 4.2, 3.0, rnd);
    }
  }

  // Isolated stromal nuclei, kept clear of the glands and of each other.
  std::vector<Point> placed;
  const int wanted_stromal = std::max(4, w * h / 4500);
  for (int attempt = 0; attempt < 2000 && static_cast<int>(placed.size()) < wanted_stromal; ++attempt) {
    const double x = rnd.uniform(8.0, w - 8.0), y = rnd.uniform(8.0, h - 8.0);
    const bool near_gland = std::any_of(glands.begin(), glands.end(), [&](const Gland& g) {
      return std::hypot(x - g.cx, y - g.cy) < g.outer + 25.0;
    });
    const bool crowded = std::any_of(placed.begin(), placed.end(),
                                     [&](Point p) { return std::hypot(x - p.x, y - p.y) < 24.0; });
    if (near_gland || crowded) continue;
    placed.push_back({static_cast<int>(x), static_cast<int>(y)});
    paint_ellipse(ph.image, x, y, rnd.uniform(3.6, 4.6), rnd.uniform(2.6, 3.4), rnd.uniform(0.0, std::numbers::pi),
                  kNucleus, rnd);
  }
  return ph;
}

std::vector<Phantom> phantom_suite(std::size_t count, std::uint64_t seed, const std::string& prefix, int size) {
  std::vector<Phantom> out;
  for (std::size_t i = 0; i < count; ++i) {
    PhantomSpec spec;
    spec.style = i % 2 == 0 ? RimStyle::Thin : RimStyle::Dense;
    spec.width = spec.height = size;
    spec.seed = seed * 1000 + i;
    Phantom p = make_phantom(spec);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%02zu", prefix.c_str(), i);
    p.id = id;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace glandseg
