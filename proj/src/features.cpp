#include "glandseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

namespace glandseg {

Window extract_window(const RgbImage& img, double cx, double cy, int z) {
  if (z < 16) throw ParameterError("window side z must be >= 16");
  const Point center{static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy))};
  const int x0 = center.x - z / 2;
  const int y0 = center.y - z / 2;
  RgbImage patch(z, z);
  for (int y = 0; y < z; ++y) {
    const int sy = std::clamp(y0 + y, 0, img.height() - 1);
    for (int x = 0; x < z; ++x) {
      const int sx = std::clamp(x0 + x, 0, img.width() - 1);
      patch.set(x, y, img.at(sx, sy));
    }
  }
  return {std::move(patch), center, z};
}

std::vector<double> channel_histogram(const GrayImage& channel, int bins) {
  if (bins < 1 || 256 % bins != 0) throw ParameterError("histogram bin count must divide 256");
  const int width = 256 / bins;
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (const auto v : channel.pixels()) h[static_cast<std::size_t>(v / width)] += 1.0;
  return h;
}

Glcm glcm(const GrayImage& channel, int levels) {
  if (levels < 2 || levels > 256) throw ParameterError("GLCM levels must be in [2, 256]");
  Glcm g;
  g.levels = levels;
  g.p.assign(static_cast<std::size_t>(levels) * levels, 0.0);
  auto quantize = [levels](int v) { return v * levels / 256; };

  // 0, 45, 90 and 135 degrees with y pointing down.
  constexpr std::array<Point, 4> offsets = {Point{1, 0}, Point{1, -1}, Point{0, -1}, Point{-1, -1}};
  double total = 0.0;
  for (int y = 0; y < channel.height(); ++y) {
    for (int x = 0; x < channel.width(); ++x) {
      const int a = quantize(channel(x, y));
      for (const Point o : offsets) {
        const int nx = x + o.x;
        const int ny = y + o.y;
        if (!channel.contains(nx, ny)) continue;
        const int b = quantize(channel(nx, ny));
        g(a, b) += 1.0;
        g(b, a) += 1.0;
        total += 2.0;
      }
    }
  }
  if (total > 0) {
    for (auto& v : g.p) v /= total;
    g.normalized = true;
  }
  return g;
}

namespace {

double plogp(double v) { return v > 0 ? v * std::log(v) : 0.0; }

}  // namespace

HaralickFeatures haralick13(const Glcm& g) {
  if (!g.normalized) throw ContractError("haralick13 requires a normalized GLCM");
  const int n = g.levels;
  double mass = 0.0;
  for (const double v : g.p) mass += v;
  if (std::abs(mass - 1.0) > 1e-9) throw ContractError("haralick13: GLCM does not sum to 1");

  std::vector<double> px(n, 0.0), py(n, 0.0), psum(2 * n - 1, 0.0), pdiff(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = g(i, j);
      px[i] += v;
      py[j] += v;
      psum[i + j] += v;
      pdiff[std::abs(i - j)] += v;
    }
  }

  double mux = 0, muy = 0;
  for (int i = 0; i < n; ++i) {
    mux += i * px[i];
    muy += i * py[i];
  }
  double varx = 0, vary = 0;
  for (int i = 0; i < n; ++i) {
    varx += (i - mux) * (i - mux) * px[i];
    vary += (i - muy) * (i - muy) * py[i];
  }

  HaralickFeatures f{};
  double asm_ = 0, contrast = 0, cross = 0, sos = 0, idm = 0, entropy = 0, hxy1 = 0, hxy2 = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = g(i, j);
      const double d = i - j;
      asm_ += v * v;
      contrast += d * d * v;
      cross += static_cast<double>(i) * j * v;
      sos += (i - mux) * (i - mux) * v;
      idm += v / (1.0 + d * d);
      entropy -= plogp(v);
      const double marg = px[i] * py[j];
      if (v > 0) hxy1 -= v * std::log(marg);
      hxy2 -= plogp(marg);
    }
  }
  const double sd = std::sqrt(varx) * std::sqrt(vary);

  double sum_avg = 0, sum_entropy = 0;
  for (int k = 0; k < 2 * n - 1; ++k) {
    sum_avg += k * psum[k];
    sum_entropy -= plogp(psum[k]);
  }
  double sum_var = 0;
  for (int k = 0; k < 2 * n - 1; ++k) sum_var += (k - sum_avg) * (k - sum_avg) * psum[k];

  double diff_mean = 0, diff_entropy = 0;
  for (int k = 0; k < n; ++k) {
    diff_mean += k * pdiff[k];
    diff_entropy -= plogp(pdiff[k]);
  }
  double diff_var = 0;
  for (int k = 0; k < n; ++k) diff_var += (k - diff_mean) * (k - diff_mean) * pdiff[k];

  double hx = 0, hy = 0;
  for (int i = 0; i < n; ++i) {
    hx -= plogp(px[i]);
    hy -= plogp(py[i]);
  }
  const double hmax = std::max(hx, hy);

  f[0] = asm_;
  f[1] = contrast;
  f[2] = sd > 0 ? (cross - mux * muy) / sd : 0.0;
  f[3] = sos;
  f[4] = idm;
  f[5] = sum_avg;
  f[6] = sum_var;
  f[7] = sum_entropy;
  f[8] = entropy;
  f[9] = diff_var;
  f[10] = diff_entropy;
  f[11] = hmax > 0 ? (entropy - hxy1) / hmax : 0.0;
  f[12] = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - entropy))));
  return f;
}

FeatureVector feature_vector(const Window& w, int glcm_levels) {
  FeatureVector out{};
  for (int c = 0; c < 3; ++c) {
    const GrayImage plane = w.patch.channel(c);
    const auto hist = channel_histogram(plane, kHistogramBins);
    std::copy(hist.begin(), hist.end(), out.begin() + c * kHistogramBins);
    const auto har = haralick13(glcm(plane, glcm_levels));
    std::copy(har.begin(), har.end(), out.begin() + 3 * kHistogramBins + c * kHaralickCount);
  }
  return out;
}

void FeatureMatrix::append(std::span<const double> row) {
  if (row.size() != cols_) throw ContractError("feature row has the wrong length");
  values_.insert(values_.end(), row.begin(), row.end());
}

NucleusDetection detect_nuclei(const RgbImage& img, int classes) {
  NucleusDetection d;
  d.gray = to_grayscale(img);
  try {
    const OtsuResult otsu = multi_otsu(d.gray, classes);
    d.thresholds = otsu.thresholds;
    d.nuclei = darkest_segment(d.gray, otsu);
  } catch (const DegenerateInputError& e) {
    spdlog::warn("{}; no epithelial nuclei detected", e.what());
    d.nuclei = BinaryMask(img.width(), img.height(), 0);
  }
  d.components = label_components(d.nuclei);
  d.centers = centroids(d.components);
  return d;
}

Point anchor_pixel(const Centroid& c, int width, int height) {
  return {std::clamp(static_cast<int>(std::lround(c.x)), 0, width - 1),
          std::clamp(static_cast<int>(std::lround(c.y)), 0, height - 1)};
}

TrainingSet build_training_set(std::span<const AnnotatedImage> images, int z, int glcm_levels) {
  TrainingSet set;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const auto& item = images[k];
    if (!item.truth.same_shape(item.image.width(), item.image.height()))
      throw IngestionError(item.id + ": annotation size does not match the image");
    const NucleusDetection det = detect_nuclei(item.image);
    for (const Centroid& c : det.centers) {
      const FeatureVector fv = feature_vector(extract_window(item.image, c.x, c.y, z), glcm_levels);
      const Point a = anchor_pixel(c, item.image.width(), item.image.height());
      set.features.append(fv);
      set.labels.push_back(item.truth(a.x, a.y) != 0 ? 1 : 0);
      set.origin.emplace_back(k, c.label);
    }
  }
  return set;
}

std::string training_set_csv(const TrainingSet& set, std::span<const AnnotatedImage> images) {
  std::ostringstream out;
  out.precision(17);
  out << "image_id,component";
  for (std::size_t c = 0; c < set.features.cols(); ++c) out << ",f" << c;
  out << ",label\n";
  for (std::size_t r = 0; r < set.features.rows(); ++r) {
    const auto [img, comp] = set.origin[r];
    out << (img < images.size() ? images[img].id : std::to_string(img)) << ',' << comp;
    for (const double v : set.features.row(r)) out << ',' << v;
    out << ',' << set.labels[r] << '\n';
  }
  return out.str();
}

}  // namespace glandseg
