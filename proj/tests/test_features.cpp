#include <doctest.h>

#include <cmath>
#include <sstream>

#include "glandseg/features.hpp"
#include "oracles.hpp"

using namespace glandseg;
using oracle::Gen;

namespace {

GrayImage plane(const RgbImage& img, int c) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb p = img.at(x, y);
      out(x, y) = c == 0 ? p.r : c == 1 ? p.g : p.b;
    }
  return out;
}

Glcm from_nested(const std::vector<std::vector<double>>& p) {
  Glcm g;
  g.levels = static_cast<int>(p.size());
  for (const auto& row : p) g.p.insert(g.p.end(), row.begin(), row.end());
  g.normalized = true;
  return g;
}

// Textured background with dark discs at the given centres.
RgbImage blob_image(Gen& g, int w, int h, const std::vector<Point>& centres, int r) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(g.range(150, 250));
      img.set(x, y, {v, static_cast<std::uint8_t>(v - 20), v});
    }
  for (const Point c : centres)
    for (int y = c.y - r; y <= c.y + r; ++y)
      for (int x = c.x - r; x <= c.x + r; ++x)
        if ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r * r) img.set(x, y, {30, 10, 60});
  return img;
}

}  // namespace

TEST_CASE("extract_window interior crop") {
  Gen g(1);
  const RgbImage img = oracle::random_rgb(g, 64, 48);
  const Window w = extract_window(img, 32.2, 20.7, 24);
  REQUIRE(w.patch.width() == 24);
  REQUIRE(w.patch.height() == 24);
  CHECK(w.center == Point{32, 21});
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) REQUIRE(w.patch.at(x, y) == img.at(32 - 12 + x, 21 - 12 + y));
}

TEST_CASE("extract_window replicates edges at a corner") {
  Gen g(2);
  const RgbImage img = oracle::random_rgb(g, 40, 40);
  const Window w = extract_window(img, 0, 0, 24);
  REQUIRE(w.patch.width() == 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x)
      REQUIRE(w.patch.at(x, y) == img.at(std::clamp(x - 12, 0, 39), std::clamp(y - 12, 0, 39)));
  // The top-left quadrant is all the corner pixel.
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) REQUIRE(w.patch.at(x, y) == img.at(0, 0));
}

TEST_CASE("extract_window on a constant image and bad sizes") {
  RgbImage img(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) img.set(x, y, {5, 6, 7});
  Gen g(3);
  for (int c = 0; c < 30; ++c) {
    const Window w = extract_window(img, g.real(-10, 30), g.real(-10, 30), g.range(16, 40));
    for (int y = 0; y < w.z; ++y)
      for (int x = 0; x < w.z; ++x) REQUIRE(w.patch.at(x, y) == Rgb{5, 6, 7});
  }
  CHECK_THROWS_AS(extract_window(img, 5, 5, 15), ParameterError);
}

TEST_CASE("channel histogram") {
  CHECK(channel_histogram(GrayImage(24, 24, 0))[0] == 576);
  const auto top = channel_histogram(GrayImage(24, 24, 255));
  CHECK(top[31] == 576);
  for (int b = 0; b < 31; ++b) CHECK(top[static_cast<std::size_t>(b)] == 0);
  Gen g(4);
  for (int c = 0; c < 100; ++c) {
    const int z = g.range(16, 40);
    const GrayImage p = oracle::random_gray(g, z, z);
    const auto h = channel_histogram(p);
    REQUIRE(h.size() == 32);
    std::vector<double> want(32, 0.0);
    for (const auto v : p.pixels()) want[static_cast<std::size_t>(v) / 8] += 1;
    REQUIRE(h == want);
    double s = 0;
    for (const double v : h) s += v;
    REQUIRE(s == z * z);
  }
  CHECK_THROWS_AS(channel_histogram(GrayImage(4, 4), 3), ParameterError);
}

TEST_CASE("glcm of a two-column patch by hand") {
  GrayImage p(2, 2);
  p(0, 0) = 0, p(1, 0) = 255, p(0, 1) = 0, p(1, 1) = 255;
  const Glcm g = glcm(p, 2);
  // Horizontal pairs: two 0-1; vertical: one 0-0 and one 1-1; each diagonal:
  // one 0-1. Counted both ways that is 4/4 on the diagonal, 8/4 off it.
  REQUIRE(g.normalized);
  CHECK(g(0, 0) == doctest::Approx(1.0 / 6));
  CHECK(g(1, 1) == doctest::Approx(1.0 / 6));
  CHECK(g(0, 1) == doctest::Approx(1.0 / 3));
  CHECK(g(1, 0) == doctest::Approx(1.0 / 3));
}

TEST_CASE("glcm matches pair enumeration and is symmetric") {
  Gen g(5);
  for (int c = 0; c < 100; ++c) {
    const int levels = g.range(2, 32);
    const GrayImage p = oracle::random_gray(g, g.range(1, 12), g.range(1, 12));
    const Glcm m = glcm(p, levels);
    const auto want = oracle::glcm_pairs(p, levels);
    double mass = 0;
    for (int i = 0; i < levels; ++i)
      for (int j = 0; j < levels; ++j) {
        REQUIRE(m(i, j) == doctest::Approx(want[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]).epsilon(1e-12));
        REQUIRE(m(i, j) == m(j, i));
        mass += m(i, j);
      }
    if (p.size() > 1) REQUIRE(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Glcm flat = glcm(GrayImage(8, 8, 77), 32);
  CHECK(flat(77 * 32 / 256, 77 * 32 / 256) == 1.0);
  CHECK_THROWS_AS(glcm(GrayImage(2, 2), 1), ParameterError);
}

TEST_CASE("haralick features agree with the direct formulas") {
  Gen g(6);
  for (int c = 0; c < 200; ++c) {
    const int levels = g.range(2, 32);
    const int w = g.range(2, 16), h = g.range(2, 16);
    // Mix of noise and low-contrast patches so both tails are exercised.
    const GrayImage p = g.chance(0.5) ? oracle::random_gray(g, w, h) : oracle::random_gray(g, w, h, 100, 140);
    const HaralickFeatures f = haralick13(glcm(p, levels));
    const auto want = oracle::haralick_direct(oracle::glcm_pairs(p, levels));
    for (int k = 0; k < 13; ++k) {
      INFO("feature " << k);
      REQUIRE(std::isfinite(f[static_cast<std::size_t>(k)]));
      REQUIRE(std::abs(f[static_cast<std::size_t>(k)] - want[static_cast<std::size_t>(k)]) <= 1e-9);
    }
    REQUIRE(f[0] > 0);
    REQUIRE(f[0] <= 1 + 1e-15);
    REQUIRE(f[8] >= 0);
  }
}

TEST_CASE("haralick on a constant patch") {
  for (const int v : {0, 17, 128, 255}) {
    const HaralickFeatures f = haralick13(glcm(GrayImage(8, 8, static_cast<std::uint8_t>(v)), 32));
    CHECK(f[0] == 1.0);
    CHECK(f[8] == 0.0);
    CHECK(f[1] == 0.0);
    CHECK(f[2] == 0.0);
    for (const double x : f) CHECK(std::isfinite(x));
  }
}

TEST_CASE("haralick on a uniform matrix and a checkerboard") {
  const HaralickFeatures u = haralick13(from_nested(std::vector(4, std::vector(4, 1.0 / 16))));
  CHECK(u[8] == doctest::Approx(std::log(16.0)).epsilon(1e-14));
  CHECK(u[0] == doctest::Approx(1.0 / 16));

  GrayImage board(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) board(x, y) = (x + y) % 2 ? 255 : 0;
  const Glcm g = glcm(board, 2);
  double contrast = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) contrast += g(i, j) * (i - j) * (i - j);
  CHECK(haralick13(g)[1] == doctest::Approx(contrast).epsilon(1e-15));
}

TEST_CASE("haralick is transpose invariant and rejects unnormalised input") {
  Gen g(8);
  for (int c = 0; c < 50; ++c) {
    // Transposing the image swaps the 0 and 90 degree offsets and maps the
    // two diagonals onto themselves, so the GLCM must be the same matrix.
    const GrayImage img = oracle::random_gray(g, g.range(2, 14), g.range(2, 14));
    GrayImage tr(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) tr(y, x) = img(x, y);
    const int levels = g.range(2, 16);
    const Glcm a = glcm(img, levels), b = glcm(tr, levels);
    Glcm at = a;
    for (int i = 0; i < levels; ++i)
      for (int j = 0; j < levels; ++j) at(i, j) = a(j, i);
    const HaralickFeatures fa = haralick13(a), fb = haralick13(b), ft = haralick13(at);
    for (std::size_t k = 0; k < 13; ++k) {
      REQUIRE(fa[k] == doctest::Approx(fb[k]).epsilon(1e-12));
      REQUIRE(fa[k] == ft[k]);
    }
  }
  Glcm raw = glcm(GrayImage(4, 4, 9), 4);
  raw.normalized = false;
  CHECK_THROWS_AS(haralick13(raw), ContractError);
  Glcm heavy = glcm(GrayImage(4, 4, 9), 4);
  heavy.p[0] += 1;
  CHECK_THROWS_AS(haralick13(heavy), ContractError);
}

TEST_CASE("feature vector layout") {
  Gen g(10);
  RgbImage img = oracle::random_rgb(g, 60, 60);
  const Window w = extract_window(img, 30, 30, 24);
  const FeatureVector f = feature_vector(w);
  for (int c = 0; c < 3; ++c) {
    const GrayImage ch = plane(w.patch, c);
    const auto h = channel_histogram(ch);
    for (int b = 0; b < 32; ++b) REQUIRE(f[static_cast<std::size_t>(32 * c + b)] == h[static_cast<std::size_t>(b)]);
    const HaralickFeatures hf = haralick13(glcm(ch));
    for (int k = 0; k < 13; ++k) REQUIRE(f[static_cast<std::size_t>(96 + 13 * c + k)] == hf[static_cast<std::size_t>(k)]);
  }
  for (const double v : f) REQUIRE(std::isfinite(v));

  RgbImage gray(30, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) gray.set(x, y, {90, 90, 90});
  const FeatureVector k = feature_vector(extract_window(gray, 15, 15, 24));
  for (int c = 0; c < 3; ++c) {
    CHECK(k[static_cast<std::size_t>(32 * c + 90 / 8)] == 576);
    CHECK(k[static_cast<std::size_t>(96 + 13 * c)] == 1.0);
  }
}

TEST_CASE("feature vector is translation consistent") {
  Gen g(11);
  const RgbImage patch = oracle::random_rgb(g, 24, 24);
  RgbImage img = oracle::random_rgb(g, 100, 80);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      img.set(5 + x, 7 + y, patch.at(x, y));
      img.set(60 + x, 50 + y, patch.at(x, y));
    }
  CHECK(feature_vector(extract_window(img, 17, 19, 24)) == feature_vector(extract_window(img, 72, 62, 24)));
}

TEST_CASE("training set labels come from the centroid pixel") {
  Gen g(12);
  const std::vector<Point> blobs = {{20, 20}, {44, 22}, {30, 50}};
  AnnotatedImage a{"blobs", blob_image(g, 64, 64, blobs, 3), LabelMap(64, 64)};
  // Gland region covers the first two blobs only.
  for (int y = 10; y < 32; ++y)
    for (int x = 10; x < 56; ++x) a.truth(x, y) = 1;
  a.truth.count = 1;
  const std::vector<AnnotatedImage> one{a};
  const TrainingSet set = build_training_set(one);
  REQUIRE(set.labels.size() == 3);
  REQUIRE(set.features.rows() == 3);
  std::vector<int> by_blob(3, -1);
  const NucleusDetection det = detect_nuclei(a.image);
  REQUIRE(det.components.count == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto& c = det.centers[static_cast<std::size_t>(set.origin[r].second - 1)];
    for (std::size_t b = 0; b < 3; ++b)
      if (std::abs(c.x - blobs[b].x) < 1 && std::abs(c.y - blobs[b].y) < 1) by_blob[b] = set.labels[r];
  }
  CHECK(by_blob == std::vector<int>{1, 1, 0});

  AnnotatedImage blank = a;
  blank.truth = LabelMap(64, 64);
  const std::vector<AnnotatedImage> two{a, blank};
  const TrainingSet both = build_training_set(two);
  CHECK(both.labels.size() == 6);
  for (std::size_t r = 3; r < 6; ++r) CHECK(both.labels[r] == 0);

  AnnotatedImage bad = a;
  bad.truth = LabelMap(10, 10);
  const std::vector<AnnotatedImage> mismatch{bad};
  CHECK_THROWS_AS(build_training_set(mismatch), IngestionError);
}

TEST_CASE("training set on a flat image has no rows; CSV header") {
  RgbImage flat(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) flat.set(x, y, {200, 200, 200});
  const std::vector<AnnotatedImage> imgs{{"flat", flat, LabelMap(32, 32)}};
  const TrainingSet set = build_training_set(imgs);
  CHECK(set.labels.empty());

  Gen g(13);
  const std::vector<AnnotatedImage> one{{"b", blob_image(g, 48, 48, {{12, 12}, {34, 30}}, 3), LabelMap(48, 48)}};
  const TrainingSet two = build_training_set(one);
  const std::string csv = training_set_csv(two, one);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("image_id,component,f0,f1,", 0) == 0);
  CHECK(header.size() > 10);
  CHECK(header.substr(header.size() - 11) == ",f134,label");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.rfind("b,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 137);
  }
  CHECK(rows == static_cast<int>(two.labels.size()));
}
