#include "glandseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace glandseg {

namespace {

void require_same_shape(const LabelMap& a, const LabelMap& b, const char* what) {
  if (!a.same_shape(b)) throw ContractError(std::string(what) + ": label maps differ in size");
}

struct OverlapTable {
  std::vector<std::size_t> pred_area;
  std::vector<std::size_t> gt_area;
  std::map<std::pair<int, int>, std::size_t> overlap;  // (pred, gt) -> pixels
};

OverlapTable overlaps(const LabelMap& pred, const LabelMap& gt) {
  OverlapTable t;
  t.pred_area = component_sizes(pred);
  t.gt_area = component_sizes(gt);
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] != 0 && gt[i] != 0) ++t.overlap[{pred[i], gt[i]}];
  return t;
}

// Partner of maximal overlap for every object on one side; 0 when none.
// Ties resolve to the smaller partner label.
std::vector<int> best_partner(const OverlapTable& t, bool for_gt, std::size_t n) {
  std::vector<int> partner(n + 1, 0);
  std::vector<std::size_t> best(n + 1, 0);
  for (const auto& [key, ov] : t.overlap) {
    const int self = for_gt ? key.second : key.first;
    const int other = for_gt ? key.first : key.second;
    const auto s = static_cast<std::size_t>(self);
    if (ov > best[s] || (ov == best[s] && other < partner[s])) {
      best[s] = ov;
      partner[s] = other;
    }
  }
  return partner;
}

double diagonal(const LabelMap& lm) {
  return std::hypot(static_cast<double>(lm.width()), static_cast<double>(lm.height()));
}

struct Box {
  int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
  int x1 = -1, y1 = -1;
  void add(int x, int y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
};

// Hausdorff between label `a` of `la` and label `b` of `lb`, computed on
// the bounding box of the union (all nearest points lie inside it).
double object_pair_hausdorff(const LabelMap& la, int a, const LabelMap& lb, int b) {
  Box box;
  for (int y = 0; y < la.height(); ++y)
    for (int x = 0; x < la.width(); ++x)
      if (la(x, y) == a || lb(x, y) == b) box.add(x, y);
  const int w = box.x1 - box.x0 + 1;
  const int h = box.y1 - box.y0 + 1;
  BinaryMask ma(w, h), mb(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      ma(x, y) = la(box.x0 + x, box.y0 + y) == a ? 1 : 0;
      mb(x, y) = lb(box.x0 + x, box.y0 + y) == b ? 1 : 0;
    }
  }
  return hausdorff(ma, mb, 0.0);
}

}  // namespace

ObjectMatch match_objects(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred, gt, "match_objects");
  const OverlapTable t = overlaps(pred, gt);
  struct Candidate {
    std::size_t overlap;
    int gt;
    int pred;
  };
  std::vector<Candidate> cands;
  for (const auto& [key, ov] : t.overlap) {
    const std::size_t g_area = t.gt_area[static_cast<std::size_t>(key.second)];
    if (2 * ov >= g_area) cands.push_back({ov, key.second, key.first});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.pred < b.pred;
  });
  std::vector<bool> pred_used(t.pred_area.size(), false), gt_used(t.gt_area.size(), false);
  ObjectMatch m;
  for (const auto& c : cands) {
    if (pred_used[static_cast<std::size_t>(c.pred)] || gt_used[static_cast<std::size_t>(c.gt)]) continue;
    pred_used[static_cast<std::size_t>(c.pred)] = true;
    gt_used[static_cast<std::size_t>(c.gt)] = true;
    m.pairs.emplace_back(c.pred, c.gt);
  }
  std::sort(m.pairs.begin(), m.pairs.end());
  // Labels with no pixels (possible in externally supplied maps) are not objects.
  std::size_t n_pred = 0, n_gt = 0;
  for (std::size_t l = 1; l < t.pred_area.size(); ++l) n_pred += t.pred_area[l] > 0 ? 1 : 0;
  for (std::size_t l = 1; l < t.gt_area.size(); ++l) n_gt += t.gt_area[l] > 0 ? 1 : 0;
  m.tp = m.pairs.size();
  m.fp = n_pred - m.tp;
  m.fn = n_gt - m.tp;
  return m;
}

DetectionScore object_f1(const ObjectMatch& m) {
  DetectionScore s;
  const double tp = static_cast<double>(m.tp);
  s.precision = (m.tp + m.fp) == 0 ? 0.0 : tp / static_cast<double>(m.tp + m.fp);
  s.recall = (m.tp + m.fn) == 0 ? 0.0 : tp / static_cast<double>(m.tp + m.fn);
  const double denom = s.precision + s.recall;
  s.f1 = denom == 0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ContractError("dice: mask dimensions differ");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] ? 1 : 0;
    nb += b[i] ? 1 : 0;
    both += (a[i] && b[i]) ? 1 : 0;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double object_dice(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred, gt, "object_dice");
  const OverlapTable t = overlaps(pred, gt);
  const auto gt_best = best_partner(t, true, t.gt_area.size() - 1);
  const auto pred_best = best_partner(t, false, t.pred_area.size() - 1);
  auto side = [&](const std::vector<std::size_t>& area, const std::vector<std::size_t>& other_area,
                  const std::vector<int>& partner, bool is_gt) {
    double total = 0.0;
    for (std::size_t l = 1; l < area.size(); ++l) total += static_cast<double>(area[l]);
    if (total == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t l = 1; l < area.size(); ++l) {
      if (area[l] == 0 || partner[l] == 0) continue;
      const auto o = static_cast<std::size_t>(partner[l]);
      const std::pair<int, int> key = is_gt ? std::pair{partner[l], static_cast<int>(l)}
                                            : std::pair{static_cast<int>(l), partner[l]};
      const double ov = static_cast<double>(t.overlap.at(key));
      const double d = 2.0 * ov / static_cast<double>(area[l] + other_area[o]);
      acc += static_cast<double>(area[l]) * d;
    }
    return acc / total;
  };
  const bool gt_empty = t.gt_area.size() == 1 || std::all_of(t.gt_area.begin() + 1, t.gt_area.end(), [](auto v) { return v == 0; });
  const bool pred_empty = t.pred_area.size() == 1 || std::all_of(t.pred_area.begin() + 1, t.pred_area.end(), [](auto v) { return v == 0; });
  if (gt_empty && pred_empty) return 1.0;
  return 0.5 * (side(t.gt_area, t.pred_area, gt_best, true) + side(t.pred_area, t.gt_area, pred_best, false));
}

double hausdorff(const BinaryMask& a, const BinaryMask& b, double empty_value) {
  if (!a.same_shape(b)) throw ContractError("hausdorff: mask dimensions differ");
  const std::size_t na = count(a), nb = count(b);
  if (na == 0 && nb == 0) return 0.0;
  if (na == 0 || nb == 0) return empty_value;
  const RealImage to_b = distance_transform(b);
  const RealImage to_a = distance_transform(a);
  double h = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) h = std::max(h, to_b[i]);
    if (b[i]) h = std::max(h, to_a[i]);
  }
  return h;
}

double object_hausdorff(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred, gt, "object_hausdorff");
  const OverlapTable t = overlaps(pred, gt);
  const auto gt_best = best_partner(t, true, t.gt_area.size() - 1);
  const auto pred_best = best_partner(t, false, t.pred_area.size() - 1);
  const double diag = diagonal(gt);
  auto side = [&](const LabelMap& self, const std::vector<std::size_t>& area, const LabelMap& other,
                  const std::vector<std::size_t>& other_area, const std::vector<int>& partner) {
    double total = 0.0;
    for (std::size_t l = 1; l < area.size(); ++l) total += static_cast<double>(area[l]);
    if (total == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t l = 1; l < area.size(); ++l) {
      if (area[l] == 0) continue;
      double h = diag;
      if (partner[l] != 0) {
        h = object_pair_hausdorff(self, static_cast<int>(l), other, partner[l]);
      } else {
        // No overlapping partner: fall back to the nearest object on the
        // other side; only an empty other side costs the diagonal.
        for (std::size_t o = 1; o < other_area.size(); ++o)
          if (other_area[o] > 0)
            h = std::min(h, object_pair_hausdorff(self, static_cast<int>(l), other, static_cast<int>(o)));
      }
      acc += static_cast<double>(area[l]) * h;
    }
    return acc / total;
  };
  return 0.5 * (side(gt, t.gt_area, pred, t.pred_area, gt_best) + side(pred, t.pred_area, gt, t.gt_area, pred_best));
}

ImageMetrics evaluate_image(const LabelMap& pred, const LabelMap& gt, std::string id, std::string split) {
  ImageMetrics m;
  m.id = std::move(id);
  m.split = std::move(split);
  const ObjectMatch match = match_objects(pred, gt);
  const DetectionScore s = object_f1(match);
  m.f1 = s.f1;
  m.precision = s.precision;
  m.recall = s.recall;
  m.tp = match.tp;
  m.fp = match.fp;
  m.fn = match.fn;
  m.object_dice = object_dice(pred, gt);
  m.object_hausdorff = object_hausdorff(pred, gt);
  return m;
}

std::vector<SplitSummary> summarize(std::span<const ImageMetrics> rows) {
  std::vector<SplitSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SplitSummary& s) { return s.split == r.split; });
    if (it == out.end()) {
      out.push_back({r.split});
      it = out.end() - 1;
    }
    ++it->images;
    it->f1 += r.f1;
    it->precision += r.precision;
    it->recall += r.recall;
    it->object_dice += r.object_dice;
    it->object_hausdorff += r.object_hausdorff;
  }
  for (auto& s : out) {
    const double n = static_cast<double>(s.images);
    s.f1 /= n;
    s.precision /= n;
    s.recall /= n;
    s.object_dice /= n;
    s.object_hausdorff /= n;
  }
  return out;
}

MetricsReport evaluate_split(std::span<const LabelMap> preds, std::span<const LabelMap> gts,
                             std::span<const std::string> ids, std::span<const std::string> splits) {
  if (preds.size() != gts.size() || preds.size() != ids.size() ||
      (!splits.empty() && splits.size() != preds.size()))
    throw ContractError("evaluate_split: prediction, ground-truth and id lists differ in length");
  MetricsReport report;
  for (std::size_t i = 0; i < preds.size(); ++i)
    report.per_image.push_back(evaluate_image(preds[i], gts[i], ids[i], splits.empty() ? "all" : splits[i]));
  report.aggregate = summarize(report.per_image);
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["images"] = nlohmann::ordered_json::array();
  for (const auto& r : report.per_image) {
    j["images"].push_back({{"id", r.id},
                           {"split", r.split},
                           {"f1", r.f1},
                           {"precision", r.precision},
                           {"recall", r.recall},
                           {"object_dice", r.object_dice},
                           {"object_hausdorff", r.object_hausdorff},
                           {"tp", r.tp},
                           {"fp", r.fp},
                           {"fn", r.fn},
                           {"missing_prediction", r.missing_prediction}});
  }
  j["aggregate"] = nlohmann::ordered_json::array();
  for (const auto& s : report.aggregate) {
    j["aggregate"].push_back({{"split", s.split},
                              {"images", s.images},
                              {"f1", s.f1},
                              {"precision", s.precision},
                              {"recall", s.recall},
                              {"object_dice", s.object_dice},
                              {"object_hausdorff", s.object_hausdorff}});
  }
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  MetricsReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& r : j.at("images")) {
      ImageMetrics m;
      m.id = r.at("id").get<std::string>();
      m.split = r.at("split").get<std::string>();
      m.f1 = r.at("f1").get<double>();
      m.precision = r.at("precision").get<double>();
      m.recall = r.at("recall").get<double>();
      m.object_dice = r.at("object_dice").get<double>();
      m.object_hausdorff = r.at("object_hausdorff").get<double>();
      m.tp = r.at("tp").get<std::size_t>();
      m.fp = r.at("fp").get<std::size_t>();
      m.fn = r.at("fn").get<std::size_t>();
      m.missing_prediction = r.at("missing_prediction").get<bool>();
      report.per_image.push_back(std::move(m));
    }
    for (const auto& a : j.at("aggregate")) {
      SplitSummary s;
      s.split = a.at("split").get<std::string>();
      s.images = a.at("images").get<std::size_t>();
      s.f1 = a.at("f1").get<double>();
      s.precision = a.at("precision").get<double>();
      s.recall = a.at("recall").get<double>();
      s.object_dice = a.at("object_dice").get<double>();
      s.object_hausdorff = a.at("object_hausdorff").get<double>();
      report.aggregate.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed metrics report: ") + e.what());
  }
  return report;
}

std::string report_to_table(const MetricsReport& report) {
  const auto& agg = report.aggregate;
  // Each metric group must be wide enough for its title.
  const int splits = static_cast<int>(std::max<std::size_t>(agg.size(), 1));
  const int col = std::max(10, (18 + splits - 1) / splits);
  std::ostringstream out;
  char buf[64];
  auto cell = [&](const std::string& s, int width) {
    std::snprintf(buf, sizeof buf, "%-*s", width, s.c_str());
    out << buf;
  };
  const int group = col * splits;
  cell("", 12);
  cell("F1-SCORE", group);
  cell("OBJECT DICE", group);
  cell("OBJECT HAUSDORFF", group);
  out << "\n";
  cell("", 12);
  for (int g = 0; g < 3; ++g)
    for (const auto& s : agg) cell(s.split, col);
  out << "\n";
  cell("images", 12);
  for (int g = 0; g < 3; ++g)
    for (const auto& s : agg) cell(std::to_string(s.images), col);
  out << "\n";
  cell("score", 12);
  for (const auto& s : agg) {
    std::snprintf(buf, sizeof buf, "%.4f", s.f1);
    cell(buf, col);
  }
  for (const auto& s : agg) {
    std::snprintf(buf, sizeof buf, "%.4f", s.object_dice);
    cell(buf, col);
  }
  for (const auto& s : agg) {
    std::snprintf(buf, sizeof buf, "%.2f", s.object_hausdorff);
    cell(buf, col);
  }
  out << "\n";
  return out.str();
}

}  // namespace glandseg
