#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "glandseg/preprocess.hpp"
#include "glandseg/raster.hpp"

namespace glandseg {

inline constexpr int kHistogramBins = 32;
inline constexpr int kHaralickCount = 13;
inline constexpr int kFeatureCount = 3 * kHistogramBins + 3 * kHaralickCount;  // 135
inline constexpr int kDefaultWindow = 24;
inline constexpr int kDefaultGlcmLevels = 32;

struct Window {
  RgbImage patch;
  Point center;
  int z = 0;
};

/// z x z crop anchored at the rounded center; the top-left corner sits at
/// center - z/2. Off-image coordinates replicate the nearest edge pixel.
Window extract_window(const RgbImage& img, double cx, double cy, int z = kDefaultWindow);

/// Raw counts; bin b holds intensities [b * 256/bins, (b + 1) * 256/bins).
std::vector<double> channel_histogram(const GrayImage& channel, int bins = kHistogramBins);

/// Gray-level co-occurrence matrix, row-major levels x levels.
struct Glcm {
  int levels = 0;
  std::vector<double> p;
  bool normalized = false;

  double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * levels + j]; }
  double& operator()(int i, int j) { return p[static_cast<std::size_t>(i) * levels + j]; }
};

/// Symmetric co-occurrences at distance 1 over 0, 45, 90 and 135 degrees,
/// summed over the four offsets and normalised to unit mass. Intensities are
/// quantised to `levels` equal-width bins.
Glcm glcm(const GrayImage& channel, int levels = kDefaultGlcmLevels);

using HaralickFeatures = std::array<double, kHaralickCount>;

/// Haralick's 13 texture statistics in their customary order:
///  0 angular second moment   1 contrast            2 correlation
///  3 sum of squares variance 4 inverse diff moment 5 sum average
///  6 sum variance            7 sum entropy         8 entropy
///  9 difference variance    10 difference entropy 11 info. measure of corr. 1
/// 12 info. measure of corr. 2
/// Gray levels are indexed from 0; logs are natural with 0 log 0 = 0.
HaralickFeatures haralick13(const Glcm& g);

/// Layout: [R hist(32), G hist(32), B hist(32), R haralick(13), G haralick(13), B haralick(13)].
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector feature_vector(const Window& w, int glcm_levels = kDefaultGlcmLevels);

/// Dense row-major sample matrix.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(std::size_t cols = kFeatureCount) : cols_(cols) {}

  std::size_t rows() const { return cols_ == 0 ? 0 : values_.size() / cols_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  void append(std::span<const double> row);

 private:
  std::size_t cols_;
  std::vector<double> values_;
};

/// Epithelial-nucleus detection shared by training and segmentation:
/// grayscale, five-class Otsu, darkest class, 8-connected components.
struct NucleusDetection {
  GrayImage gray;
  BinaryMask nuclei;  // image T
  LabelMap components;
  std::vector<Centroid> centers;
  std::vector<int> thresholds;  // empty when the image was too flat to threshold
};

NucleusDetection detect_nuclei(const RgbImage& img, int classes = 5);

/// Pixel a centroid anchors to: rounded, then clamped into the image.
Point anchor_pixel(const Centroid& c, int width, int height);

struct TrainingSet {
  FeatureMatrix features{kFeatureCount};
  std::vector<int> labels;
  /// Per-row provenance: (image index, component label).
  std::vector<std::pair<std::size_t, int>> origin;
};

struct AnnotatedImage {
  std::string id;
  RgbImage image;
  LabelMap truth;
};

/// One row per epithelial component; label 1 iff the anchored centroid pixel
/// lies on a ground-truth object.
TrainingSet build_training_set(std::span<const AnnotatedImage> images, int z = kDefaultWindow,
                               int glcm_levels = kDefaultGlcmLevels);

/// CSV with header `image_id,component,f0..f134,label`.
std::string training_set_csv(const TrainingSet& set, std::span<const AnnotatedImage> images);

}  // namespace glandseg
