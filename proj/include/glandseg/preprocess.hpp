#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "glandseg/raster.hpp"

namespace glandseg {

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const GrayImage& img);

struct ClassTag;
using ClassMap = Raster<std::uint8_t, ClassTag>;

struct OtsuResult {
  /// Ascending cut points; a pixel's class is the number of thresholds <= its value.
  std::vector<int> thresholds;
  ClassMap class_of;
};

/// Exact multi-level Otsu: maximises between-class variance over all
/// threshold tuples on the 256-bin histogram. Among optimal tuples the
/// lexicographically smallest is returned.
std::vector<int> multi_otsu_thresholds(const Histogram& hist, int classes);

/// Throws DegenerateInputError when the image has fewer distinct
/// intensities than requested classes.
OtsuResult multi_otsu(const GrayImage& img, int classes = 5);

/// Mask of class 0, i.e. the darkest Otsu segment.
BinaryMask darkest_segment(const GrayImage& img, const OtsuResult& otsu);

struct DiffusionParams {
  int iterations = 15;
  double kappa = 30.0;
  double step = 0.20;

  void validate() const;
};

/// Perona-Malik diffusion with exponential conduction exp(-(|grad|/kappa)^2)
/// on the four compass differences; zero-flux (reflective) boundary.
RealImage perona_malik_real(const RealImage& img, const DiffusionParams& params);
RealImage perona_malik_real(const GrayImage& img, const DiffusionParams& params);

/// Same iteration, rounded and clamped to 8 bits on output.
GrayImage perona_malik(const GrayImage& img, const DiffusionParams& params);

RealImage to_real(const GrayImage& img);

}  // namespace glandseg
