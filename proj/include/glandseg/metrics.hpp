#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glandseg/raster.hpp"

namespace glandseg {

struct ObjectMatch {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<std::pair<int, int>> pairs;  // (predicted label, ground-truth label)
};

struct DetectionScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// A prediction matches a ground-truth object it covers by at least half of
/// the object's area; candidates are claimed greedily by descending overlap.
ObjectMatch match_objects(const LabelMap& pred, const LabelMap& gt);

DetectionScore object_f1(const ObjectMatch& m);

/// 2|a & b| / (|a| + |b|); two empty masks score 1.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Area-weighted two-sided object Dice (GlaS contest definition).
double object_dice(const LabelMap& pred, const LabelMap& gt);

/// Symmetric Hausdorff distance between two pixel sets; `empty_value` when
/// either set is empty (0 when both are).
double hausdorff(const BinaryMask& a, const BinaryMask& b, double empty_value);

/// Area-weighted two-sided object Hausdorff. Each object is paired with its
/// maximal-overlap partner, or the nearest object when nothing overlaps it;
/// only an empty opposite side charges the image diagonal.
double object_hausdorff(const LabelMap& pred, const LabelMap& gt);

struct ImageMetrics {
  std::string id;
  std::string split;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double object_dice = 0.0;
  double object_hausdorff = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool missing_prediction = false;
};

struct SplitSummary {
  std::string split;
  std::size_t images = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double object_dice = 0.0;
  double object_hausdorff = 0.0;
};

struct MetricsReport {
  std::vector<ImageMetrics> per_image;
  std::vector<SplitSummary> aggregate;
};

ImageMetrics evaluate_image(const LabelMap& pred, const LabelMap& gt, std::string id,
                            std::string split = "all");

/// Per-image metrics plus unweighted means per split (in first-seen order).
/// `splits` may be empty, in which case every image belongs to "all".
MetricsReport evaluate_split(std::span<const LabelMap> preds, std::span<const LabelMap> gts,
                             std::span<const std::string> ids,
                             std::span<const std::string> splits = {});

/// Recomputes the aggregate block from per-image rows.
std::vector<SplitSummary> summarize(std::span<const ImageMetrics> rows);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

/// Fixed-width table: one row per split with F1, object Dice and object Hausdorff.
std::string report_to_table(const MetricsReport& report);

}  // namespace glandseg
