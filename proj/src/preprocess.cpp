#include "glandseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <spdlog/spdlog.h>

namespace glandseg {

Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (const auto v : img.pixels()) ++h[v];
  return h;
}

std::vector<int> multi_otsu_thresholds(const Histogram& hist, int classes) {
  if (classes < 2 || classes > 256) throw ParameterError("multi_otsu: classes must be in [2, 256]");
  const int distinct = static_cast<int>(std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; }));
  if (distinct < classes)
    throw DegenerateInputError("multi_otsu: image has " + std::to_string(distinct) +
                               " distinct intensities, fewer than " + std::to_string(classes) +
                               " classes");

  // Prefix pixel counts and intensity sums; class [a, b) contributes
  // S^2 / N to the objective, which differs from the between-class
  // variance only by terms constant over all tuples.
  std::array<double, 257> n{}, s{};
  for (int i = 0; i < 256; ++i) {
    n[i + 1] = n[i] + static_cast<double>(hist[i]);
    s[i + 1] = s[i] + static_cast<double>(hist[i]) * i;
  }
  auto cost = [&](int a, int b) {
    const double cnt = n[b] - n[a];
    if (cnt <= 0) return 0.0;
    const double sum = s[b] - s[a];
    return sum * sum / cnt;
  };

  // best[c][i]: optimum for bins [i, 256) split into c non-empty bin ranges.
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<std::array<double, 257>> best(static_cast<std::size_t>(classes) + 1);
  for (auto& row : best) row.fill(kNone);
  for (int i = 0; i < 256; ++i) best[1][i] = cost(i, 256);
  for (int c = 2; c <= classes; ++c) {
    for (int i = 0; i + c <= 256; ++i) {
      double top = kNone;
      for (int j = i + 1; j + (c - 1) <= 256; ++j) top = std::max(top, cost(i, j) + best[c - 1][j]);
      best[c][i] = top;
    }
  }

  // Walk forward taking the smallest cut that still attains the optimum.
  std::vector<int> thresholds;
  int start = 0;
  for (int c = classes; c >= 2; --c) {
    int arg = -1;
    double top = kNone;
    for (int j = start + 1; j + (c - 1) <= 256; ++j) {
      const double v = cost(start, j) + best[c - 1][j];
      if (v > top) {
        top = v;
        arg = j;
      }
    }
    thresholds.push_back(arg);
    start = arg;
  }
  return thresholds;
}

OtsuResult multi_otsu(const GrayImage& img, int classes) {
  OtsuResult r;
  r.thresholds = multi_otsu_thresholds(histogram(img), classes);
  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v) {
    lut[v] = static_cast<std::uint8_t>(
        std::count_if(r.thresholds.begin(), r.thresholds.end(), [v](int t) { return t <= v; }));
  }
  r.class_of = ClassMap(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) r.class_of[i] = lut[img[i]];
  return r;
}

BinaryMask darkest_segment(const GrayImage& img, const OtsuResult& otsu) {
  if (!otsu.class_of.same_shape(img)) throw ContractError("darkest_segment: Otsu result is for another image");
  BinaryMask mask(img.width(), img.height());
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    mask[i] = otsu.class_of[i] == 0 ? 1 : 0;
    n += mask[i];
  }
  if (n == 0) spdlog::warn("darkest Otsu class is empty");
  return mask;
}

void DiffusionParams::validate() const {
  if (iterations < 1) throw ParameterError("diffusion iterations must be >= 1");
  if (!(kappa > 0)) throw ParameterError("diffusion kappa must be > 0");
  if (!(step > 0 && step <= 0.25)) throw ParameterError("diffusion step must be in (0, 0.25]");
}

RealImage to_real(const GrayImage& img) {
  RealImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i];
  return out;
}

RealImage perona_malik_real(const RealImage& img, const DiffusionParams& params) {
  params.validate();
  const int w = img.width();
  const int h = img.height();
  RealImage cur = img;
  RealImage next(w, h);
  const double inv_k2 = 1.0 / (params.kappa * params.kappa);
  auto flux = [inv_k2](double d) { return std::exp(-d * d * inv_k2) * d; };
  for (int it = 0; it < params.iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double c = cur(x, y);
        // Differences across the image border are zero (no flux).
        const double dn = y > 0 ? cur(x, y - 1) - c : 0.0;
        const double ds = y + 1 < h ? cur(x, y + 1) - c : 0.0;
        const double de = x + 1 < w ? cur(x + 1, y) - c : 0.0;
        const double dw = x > 0 ? cur(x - 1, y) - c : 0.0;
        next(x, y) = c + params.step * (flux(dn) + flux(ds) + flux(de) + flux(dw));
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

RealImage perona_malik_real(const GrayImage& img, const DiffusionParams& params) {
  return perona_malik_real(to_real(img), params);
}

GrayImage perona_malik(const GrayImage& img, const DiffusionParams& params) {
  const RealImage r = perona_malik_real(img, params);
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(r[i]), 0L, 255L));
  return out;
}

}  // namespace glandseg
