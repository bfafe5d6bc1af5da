#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "glandseg/metrics.hpp"
#include "oracles.hpp"

using namespace glandseg;
using oracle::Gen;

namespace {

LabelMap boxes(int w, int h, const std::vector<std::array<int, 4>>& rects) {
  LabelMap lm(w, h);
  int label = 0;
  for (const auto& [x0, y0, x1, y1] : rects) {
    ++label;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) lm(x, y) = label;
  }
  lm.count = label;
  return lm;
}

// Relabel objects with a random permutation of 1..count.
LabelMap permuted(Gen& g, const LabelMap& lm) {
  std::vector<int> perm(static_cast<std::size_t>(lm.count));
  std::iota(perm.begin(), perm.end(), 1);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(g.range(0, static_cast<int>(i) - 1))]);
  LabelMap out = lm;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i]) out[i] = perm[static_cast<std::size_t>(out[i] - 1)];
  return out;
}

// GlaS object Dice from pixel counts.
double object_dice_brute(const LabelMap& s, const LabelMap& g) {
  auto side = [](const LabelMap& self, const LabelMap& other) {
    std::map<int, std::size_t> area, other_area;
    std::map<std::pair<int, int>, std::size_t> ov;
    for (std::size_t i = 0; i < self.size(); ++i) {
      if (self[i]) ++area[self[i]];
      if (other[i]) ++other_area[other[i]];
      if (self[i] && other[i]) ++ov[{self[i], other[i]}];
    }
    double total = 0;
    for (const auto& [l, a] : area) total += static_cast<double>(a);
    double acc = 0;
    for (const auto& [l, a] : area) {
      int partner = 0;
      std::size_t best = 0;
      for (const auto& [o, oa] : other_area) {
        const auto it = ov.find({l, o});
        const std::size_t v = it == ov.end() ? 0 : it->second;
        if (v > best) best = v, partner = o;
      }
      const double d = partner ? 2.0 * static_cast<double>(best) / static_cast<double>(a + other_area[partner]) : 0.0;
      acc += static_cast<double>(a) / total * d;
    }
    return acc;
  };
  return 0.5 * (side(g, s) + side(s, g));
}

}  // namespace

TEST_CASE("object matching examples") {
  const LabelMap gt = boxes(30, 30, {{0, 0, 5, 5}, {10, 10, 15, 15}, {20, 20, 28, 28}});
  const ObjectMatch same = match_objects(gt, gt);
  CHECK(same.tp == 3);
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  CHECK(same.pairs.size() == 3);

  const ObjectMatch none = match_objects(LabelMap(30, 30), gt);
  CHECK(none.tp == 0);
  CHECK(none.fp == 0);
  CHECK(none.fn == 3);

  // 4 of 10 columns of a 10x10 object: 40% coverage.
  const LabelMap one = boxes(20, 20, {{0, 0, 10, 10}});
  const LabelMap part = boxes(20, 20, {{0, 0, 4, 10}});
  const ObjectMatch m = match_objects(part, one);
  CHECK(m.tp == 0);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  // Exactly half counts.
  CHECK(match_objects(boxes(20, 20, {{0, 0, 5, 10}}), one).tp == 1);
  CHECK_THROWS_AS(match_objects(LabelMap(3, 3), one), ContractError);
}

TEST_CASE("one prediction claims at most one object") {
  // A prediction covering two small objects entirely matches only one.
  const LabelMap gt = boxes(20, 10, {{0, 0, 4, 4}, {6, 0, 10, 4}});
  const LabelMap pred = boxes(20, 10, {{0, 0, 10, 4}});
  const ObjectMatch m = match_objects(pred, gt);
  CHECK(m.tp == 1);
  CHECK(m.fp == 0);
  CHECK(m.fn == 1);
  CHECK(m.tp + m.fp == 1);
  CHECK(m.tp + m.fn == 2);
}

TEST_CASE("detection score examples") {
  ObjectMatch m;
  m.tp = 1, m.fp = 1, m.fn = 1;
  DetectionScore s = object_f1(m);
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 0.5);
  m.tp = 0, m.fp = 0, m.fn = 0;
  s = object_f1(m);
  CHECK(s.f1 == 0.0);
  CHECK(s.precision == 0.0);
  m.tp = 3, m.fp = 1, m.fn = 0;
  s = object_f1(m);
  CHECK(s.precision == 0.75);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == doctest::Approx(2 * 0.75 / 1.75).epsilon(1e-15));
}

TEST_CASE("pixel dice") {
  BinaryMask a(8, 8), b(8, 8);
  CHECK(dice(a, b) == 1.0);
  for (int x = 0; x < 8; ++x) a(x, 0) = 1;
  CHECK(dice(a, a) == 1.0);
  for (int x = 0; x < 8; ++x) b(x, 1) = 1;
  CHECK(dice(a, b) == 0.0);
  BinaryMask c(8, 8);
  for (int x = 4; x < 8; ++x) c(x, 0) = c(x, 1) = 1;
  CHECK(dice(a, c) == 0.5);
  CHECK(dice(c, a) == 0.5);
  CHECK_THROWS_AS(dice(a, BinaryMask(2, 2)), ContractError);
}

TEST_CASE("object dice examples") {
  const LabelMap gt = boxes(8, 8, {{0, 0, 4, 4}, {4, 4, 8, 8}});
  CHECK(object_dice(gt, gt) == 1.0);
  CHECK(object_dice(LabelMap(8, 8), gt) == 0.0);

  // Toy: S1 = columns 0-2 of the top-left box, S2 = bottom-right box grown by
  // one row upward. G1 (16 px) pairs with S1 (12 px, overlap 12); G2 (16 px)
  // with S2 (20 px, overlap 16).
  const LabelMap pred = boxes(8, 8, {{0, 0, 3, 4}, {4, 3, 8, 8}});
  const double g_side = 0.5 * (2.0 * 12 / 28) + 0.5 * (2.0 * 16 / 36);
  const double s_side = 12.0 / 32 * (2.0 * 12 / 28) + 20.0 / 32 * (2.0 * 16 / 36);
  CHECK(object_dice(pred, gt) == doctest::Approx(0.5 * (g_side + s_side)).epsilon(1e-14));
  CHECK(object_dice(pred, gt) == doctest::Approx(object_dice_brute(pred, gt)).epsilon(1e-14));
}

TEST_CASE("object dice equals the pixel-count oracle") {
  Gen g(1);
  for (int c = 0; c < 200; ++c) {
    const int w = g.range(4, 32), h = g.range(4, 32);
    const LabelMap s = oracle::random_labels(g, w, h, g.range(0, 6));
    const LabelMap t = oracle::random_labels(g, w, h, g.range(1, 6));
    REQUIRE(object_dice(s, t) == doctest::Approx(object_dice_brute(s, t)).epsilon(1e-12));
  }
}

TEST_CASE("hausdorff examples") {
  LabelMap a(20, 20), b(20, 20);
  a(3, 4) = 1;
  b(3, 9) = 1;
  a.count = b.count = 1;
  CHECK(object_hausdorff(a, b) == 5.0);
  CHECK(object_hausdorff(a, a) == 0.0);
  const double diag = std::hypot(20.0, 20.0);
  CHECK(object_hausdorff(LabelMap(20, 20), b) == doctest::Approx(0.5 * diag));
  BinaryMask p(6, 6), q(6, 6);
  p(0, 0) = 1;
  q(3, 4) = 1;
  CHECK(hausdorff(p, q, 99) == 5.0);
  CHECK(hausdorff(p, BinaryMask(6, 6), 99) == 99);
  CHECK(hausdorff(BinaryMask(6, 6), BinaryMask(6, 6), 99) == 0);
}

TEST_CASE("object hausdorff equals the all-pairs oracle") {
  Gen g(2);
  for (int c = 0; c < 150; ++c) {
    const int w = g.range(2, 24), h = g.range(2, 24);
    const LabelMap s = oracle::random_labels(g, w, h, g.range(0, 5));
    const LabelMap t = oracle::random_labels(g, w, h, g.range(0, 5));
    REQUIRE(std::abs(object_hausdorff(s, t) - oracle::object_hausdorff_brute(s, t)) <= 1e-9);
  }
}

TEST_CASE("perfect prediction and label permutation") {
  Gen g(3);
  for (int c = 0; c < 60; ++c) {
    const int w = g.range(8, 40), h = g.range(8, 40);
    const LabelMap gt = oracle::random_labels(g, w, h, g.range(1, 6));
    const ImageMetrics perfect = evaluate_image(gt, gt, "x");
    REQUIRE(perfect.f1 == 1.0);
    REQUIRE(perfect.object_dice == 1.0);
    REQUIRE(perfect.object_hausdorff == 0.0);

    const LabelMap pred = oracle::random_labels(g, w, h, g.range(0, 6));
    const ImageMetrics base = evaluate_image(pred, gt, "x");
    const ImageMetrics pp = evaluate_image(permuted(g, pred), permuted(g, gt), "x");
    REQUIRE(pp.tp == base.tp);
    REQUIRE(pp.fp == base.fp);
    REQUIRE(pp.fn == base.fn);
    // Dice and Hausdorff pick the max-overlap partner with ties going to the
    // smaller label, so only a tie-free relabelling (pred = permuted gt) is
    // guaranteed to leave them unchanged.
    const LabelMap relabelled = permuted(g, gt);
    const ImageMetrics self = evaluate_image(relabelled, gt, "x");
    REQUIRE(self.f1 == 1.0);
    REQUIRE(self.object_dice == 1.0);
    REQUIRE(object_hausdorff(relabelled, gt) == object_hausdorff(gt, relabelled));
    REQUIRE(self.object_hausdorff == 0.0);
  }
}

TEST_CASE("metric ranges on random label maps") {
  Gen g(4);
  for (int c = 0; c < 100; ++c) {
    const int w = g.range(1, 64), h = g.range(1, 64);
    const LabelMap s = oracle::random_labels(g, w, h, g.range(0, 8));
    const LabelMap t = oracle::random_labels(g, w, h, g.range(0, 8));
    const ImageMetrics m = evaluate_image(s, t, "r");
    for (const double v : {m.f1, m.precision, m.recall, m.object_dice}) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
    REQUIRE(m.object_hausdorff >= 0.0);
    REQUIRE(std::isfinite(m.object_hausdorff));
    REQUIRE(m.tp + m.fp == static_cast<std::size_t>(s.count));
    REQUIRE(m.tp + m.fn == static_cast<std::size_t>(t.count));
    BinaryMask a = foreground(s), b = foreground(t);
    REQUIRE(dice(a, b) == dice(b, a));
  }
}

TEST_CASE("evaluate_split aggregates per split") {
  const LabelMap gt = boxes(16, 16, {{0, 0, 6, 6}});
  const std::vector<LabelMap> preds{gt, LabelMap(16, 16), gt};
  const std::vector<LabelMap> gts{gt, gt, gt};
  const std::vector<std::string> ids{"testA_1", "testA_2", "testB_1"};
  const std::vector<std::string> splits{"testA", "testA", "testB"};
  const MetricsReport r = evaluate_split(preds, gts, ids, splits);
  REQUIRE(r.per_image.size() == 3);
  REQUIRE(r.aggregate.size() == 2);
  CHECK(r.aggregate[0].split == "testA");
  CHECK(r.aggregate[0].images == 2);
  CHECK(r.aggregate[0].f1 == 0.5);
  CHECK(r.aggregate[1].f1 == 1.0);
  CHECK(r.aggregate[1].object_hausdorff == 0.0);

  const MetricsReport single = evaluate_split(std::vector<LabelMap>{gt}, std::vector<LabelMap>{gt},
                                              std::vector<std::string>{"only"});
  REQUIRE(single.aggregate.size() == 1);
  CHECK(single.aggregate[0].split == "all");
  CHECK(single.per_image[0].object_dice == 1.0);

  CHECK_THROWS_AS(evaluate_split(preds, std::vector<LabelMap>{gt}, ids), ContractError);
}

TEST_CASE("report serialisation") {
  Gen g(5);
  std::vector<LabelMap> preds, gts;
  std::vector<std::string> ids, splits;
  for (int i = 0; i < 5; ++i) {
    gts.push_back(oracle::random_labels(g, 24, 24, 3));
    preds.push_back(oracle::random_labels(g, 24, 24, 3));
    ids.push_back("img" + std::to_string(i));
    splits.push_back(i < 3 ? "testA" : "testB");
  }
  const MetricsReport r = evaluate_split(preds, gts, ids, splits);
  const MetricsReport back = report_from_json(report_to_json(r));
  REQUIRE(back.per_image.size() == r.per_image.size());
  for (std::size_t i = 0; i < r.per_image.size(); ++i) {
    CHECK(back.per_image[i].id == r.per_image[i].id);
    CHECK(back.per_image[i].split == r.per_image[i].split);
    CHECK(back.per_image[i].f1 == r.per_image[i].f1);
    CHECK(back.per_image[i].object_dice == r.per_image[i].object_dice);
    CHECK(back.per_image[i].object_hausdorff == r.per_image[i].object_hausdorff);
    CHECK(back.per_image[i].tp == r.per_image[i].tp);
  }
  REQUIRE(back.aggregate.size() == 2);
  CHECK(back.aggregate[1].object_dice == r.aggregate[1].object_dice);
  CHECK_THROWS(report_from_json("{not json"));

  const std::string table = report_to_table(r);
  CHECK(table.find("testA") != std::string::npos);
  CHECK(table.find("testB") != std::string::npos);
  CHECK(table.find("F1-SCORE") != std::string::npos);
  CHECK(table.find("OBJECT HAUSDORFF") != std::string::npos);
}
