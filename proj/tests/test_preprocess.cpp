#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glandseg/preprocess.hpp"
#include "oracles.hpp"

using namespace glandseg;
using oracle::Gen;

namespace {

// Narrow spikes at the given centres, each spread over +-2 grey levels.
GrayImage spike_image(Gen& g, const std::vector<int>& centres, int w, int h) {
  GrayImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int c = centres[static_cast<std::size_t>(g.range(0, static_cast<int>(centres.size()) - 1))];
    img[i] = static_cast<std::uint8_t>(c + g.range(-2, 2));
  }
  return img;
}

double mean_of(const RealImage& r) {
  double s = 0;
  for (const double v : r.pixels()) s += v;
  return s / static_cast<double>(r.size());
}

}  // namespace

TEST_CASE("otsu on a two-valued image separates the values") {
  GrayImage img(8, 8, 10);
  for (int x = 0; x < 8; ++x) img(x, 3) = 200;
  const OtsuResult r = multi_otsu(img, 2);
  REQUIRE(r.thresholds.size() == 1);
  CHECK(r.thresholds[0] > 10);
  CHECK(r.thresholds[0] <= 200);
  // Lexicographically smallest: the first cut past the dark value.
  CHECK(r.thresholds[0] == 11);
  const BinaryMask t = darkest_segment(img, r);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(t[i] == (img[i] == 10 ? 1 : 0));
}

TEST_CASE("otsu with two classes equals the single-threshold search") {
  Gen g(101);
  for (int c = 0; c < 100; ++c) {
    const GrayImage img = oracle::random_gray(g, 32, 32, g.range(0, 60), g.range(120, 255));
    const Histogram h = histogram(img);
    const OtsuResult r = multi_otsu(img, 2);
    REQUIRE(r.thresholds.size() == 1);
    REQUIRE(r.thresholds[0] == oracle::otsu_single(h));
  }
}

TEST_CASE("otsu with five classes equals the exhaustive tuple search") {
  Gen g(7);
  const std::vector<int> spikes = {20, 70, 120, 170, 220};
  for (int c = 0; c < 20; ++c) {
    const GrayImage img = spike_image(g, spikes, 32, 32);
    const Histogram h = histogram(img);
    const OtsuResult r = multi_otsu(img, 5);
    const std::vector<int> want = oracle::otsu_exhaustive(h, 5);
    REQUIRE(r.thresholds == want);
    // Each spike lands in its own class.
    for (std::size_t i = 0; i < img.size(); ++i) {
      const int spike = static_cast<int>(std::lround((img[i] - 20) / 50.0));
      REQUIRE(r.class_of[i] == spike);
    }
    const BinaryMask t = darkest_segment(img, r);
    for (std::size_t i = 0; i < img.size(); ++i) REQUIRE(t[i] == (img[i] <= 22 ? 1 : 0));
  }
}

TEST_CASE("otsu on random histograms, three and four classes") {
  Gen g(55);
  for (int c = 0; c < 30; ++c) {
    // Few distinct levels keep the exhaustive oracle cheap.
    std::vector<int> levels;
    const int k = g.range(5, 14);
    for (int i = 0; i < k; ++i) levels.push_back(g.range(0, 255));
    GrayImage img(16, 16);
    for (std::size_t i = 0; i < img.size(); ++i)
      img[i] = static_cast<std::uint8_t>(levels[static_cast<std::size_t>(g.range(0, k - 1))]);
    const Histogram h = histogram(img);
    const int distinct = static_cast<int>(std::count_if(h.begin(), h.end(), [](auto v) { return v > 0; }));
    for (int classes = 3; classes <= std::min(4, distinct); ++classes) {
      const std::vector<int> got = multi_otsu_thresholds(h, classes);
      const std::vector<int> want = oracle::otsu_exhaustive(h, classes);
      REQUIRE(oracle::between_class_variance(h, got) ==
              doctest::Approx(oracle::between_class_variance(h, want)).epsilon(1e-12));
      REQUIRE(got == want);
    }
  }
}

TEST_CASE("otsu result invariants") {
  Gen g(9);
  for (int c = 0; c < 50; ++c) {
    const GrayImage img = oracle::random_gray(g, g.range(4, 24), g.range(4, 24));
    const OtsuResult r = multi_otsu(img, 5);
    REQUIRE(r.thresholds.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      REQUIRE(r.thresholds[i] >= 1);
      REQUIRE(r.thresholds[i] <= 255);
      if (i) REQUIRE(r.thresholds[i] > r.thresholds[i - 1]);
    }
    const BinaryMask t = darkest_segment(img, r);
    int dark_max = -1, other_min = 256;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const int want = static_cast<int>(
          std::count_if(r.thresholds.begin(), r.thresholds.end(), [&](int th) { return th <= img[i]; }));
      REQUIRE(r.class_of[i] == want);
      if (t[i])
        dark_max = std::max(dark_max, static_cast<int>(img[i]));
      else
        other_min = std::min(other_min, static_cast<int>(img[i]));
    }
    REQUIRE(dark_max < other_min);
  }
}

TEST_CASE("otsu rejects degenerate input") {
  CHECK_THROWS_AS(multi_otsu(GrayImage(4, 4, 128), 5), DegenerateInputError);
  GrayImage four(4, 1);
  for (int x = 0; x < 4; ++x) four(x, 0) = static_cast<std::uint8_t>(x * 50);
  CHECK_THROWS_AS(multi_otsu(four, 5), DegenerateInputError);
  CHECK_NOTHROW(multi_otsu(four, 4));
  CHECK_THROWS_AS(multi_otsu(four, 1), ParameterError);
  const OtsuResult other = multi_otsu(four, 2);
  CHECK_THROWS_AS(darkest_segment(GrayImage(3, 3), other), ContractError);
}

TEST_CASE("perona-malik leaves a constant image alone") {
  Gen g(4);
  for (int c = 0; c < 20; ++c) {
    const GrayImage img(g.range(1, 12), g.range(1, 12), static_cast<std::uint8_t>(g.range(0, 255)));
    const DiffusionParams p{g.range(1, 20), g.real(0.5, 100), g.real(0.01, 0.25)};
    CHECK(perona_malik(img, p) == img);
  }
}

TEST_CASE("perona-malik single step by hand") {
  GrayImage img(3, 3, 0);
  img(1, 1) = 30;
  const DiffusionParams p{1, 30.0, 0.2};
  const RealImage r = perona_malik_real(img, p);
  // Centre loses 0.2 * 4 * 30 * exp(-1); each edge neighbour gains a quarter
  // of that; corners see no gradient.
  const double loss = 0.2 * 4 * 30 * std::exp(-1.0);
  CHECK(r(1, 1) == doctest::Approx(30 - loss).epsilon(1e-14));
  for (const auto& [x, y] : {std::pair{1, 0}, {0, 1}, {2, 1}, {1, 2}})
    CHECK(r(x, y) == doctest::Approx(loss / 4).epsilon(1e-14));
  for (const auto& [x, y] : {std::pair{0, 0}, {2, 0}, {0, 2}, {2, 2}}) CHECK(r(x, y) == 0.0);
  const GrayImage q = perona_malik(img, p);
  CHECK(q(1, 1) == 21);
  CHECK(q(1, 0) == 2);
}

TEST_CASE("perona-malik conserves the mean and obeys the maximum principle") {
  Gen g(12);
  for (int c = 0; c < 60; ++c) {
    const GrayImage img = oracle::random_gray(g, g.range(2, 20), g.range(2, 20));
    const DiffusionParams p{g.range(1, 25), g.real(1, 80), g.real(0.02, 0.25)};
    const RealImage in = to_real(img);
    const RealImage out = perona_malik_real(img, p);
    REQUIRE(mean_of(out) == doctest::Approx(mean_of(in)).epsilon(1e-10));
    const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    for (const double v : out.pixels()) {
      REQUIRE(v >= *lo - 1e-9);
      REQUIRE(v <= *hi + 1e-9);
    }
    const GrayImage q = perona_malik(img, p);
    double qs = 0;
    for (const auto v : q.pixels()) qs += v;
    REQUIRE(std::abs(qs / static_cast<double>(q.size()) - mean_of(in)) <= 0.5);
  }
}

TEST_CASE("perona-malik smooths more as kappa grows") {
  GrayImage step(16, 16, 60);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x) step(x, y) = 180;
  const RealImage in = to_real(step);
  std::vector<double> dist;
  for (const double kappa : {1.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 1e4}) {
    const RealImage out = perona_malik_real(step, DiffusionParams{10, kappa, 0.2});
    double d = 0;
    for (std::size_t i = 0; i < in.size(); ++i) d += (out[i] - in[i]) * (out[i] - in[i]);
    dist.push_back(d);
  }
  // Tiny kappa is numerically the identity; from there on the change grows.
  CHECK(dist.front() < 1e-12);
  for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i] >= dist[i - 1]);
  for (std::size_t i = 3; i < dist.size(); ++i) CHECK(dist[i] > dist[i - 1]);
}

TEST_CASE("diffusion params are validated") {
  CHECK_THROWS_AS((DiffusionParams{0, 30, 0.2}.validate()), ParameterError);
  CHECK_THROWS_AS((DiffusionParams{1, 0, 0.2}.validate()), ParameterError);
  CHECK_THROWS_AS((DiffusionParams{1, 30, 0.0}.validate()), ParameterError);
  CHECK_THROWS_AS((DiffusionParams{1, 30, 0.26}.validate()), ParameterError);
  CHECK_NOTHROW((DiffusionParams{1, 30, 0.25}.validate()));
  CHECK_THROWS_AS(perona_malik(GrayImage(2, 2), DiffusionParams{1, -1, 0.2}), ParameterError);
}
