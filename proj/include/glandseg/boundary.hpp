#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "glandseg/forest.hpp"
#include "glandseg/preprocess.hpp"
#include "glandseg/raster.hpp"

namespace glandseg {

enum class GlandKind { Thick, Thin };

const char* to_string(GlandKind kind);

struct BoundaryKind {
  GlandKind kind = GlandKind::Thin;
  double ratio = 0.0;      // r of the classified image
  double threshold = 0.0;  // N_th it was compared against
};

struct LineGrowParams {
  int window = 5;          // W
  double k = 45.0;         // mean-difference threshold
  int bins = 8;
  int max_steps = 100;

  void validate() const;
};

struct ThinLinkParams {
  double p = 10.0;   // endpoint neighbourhood radius used for the thick/thin ratio
  double p2 = 20.0;  // linking radius
  int n = 5;         // linking iterations

  void validate() const;
};

struct HoleParams {
  double border_fraction = 0.5;
  double proximity = 3.0;  // pixels; how close a hole-boundary pixel must be to C
  std::size_t min_area = 0;
};

struct Intermediates {
  BinaryMask nuclei;      // T
  BinaryMask border;      // C
  BinaryMask connected;   // line-grown (thick) or linked mesh (thin)
};

struct GlandSegmentation {
  LabelMap regions;
  BoundaryKind kind;
  std::optional<Intermediates> intermediates;
};

/// Endpoint statistics of a thinned mask: lambda_j counts endpoints of other
/// skeleton components within Euclidean distance p of endpoint j.
struct EndpointStats {
  std::size_t endpoints = 0;
  std::size_t neighbor_total = 0;  // sum of lambda_j

  double ratio() const {
    return endpoints == 0 ? 0.0 : static_cast<double>(neighbor_total) / static_cast<double>(endpoints);
  }
};

EndpointStats endpoint_stats(const BinaryMask& mask, double p);

/// r = (sum of cross-component neighbours) / (number of endpoints); 0 without endpoints.
double endpoint_neighbor_ratio(const BinaryMask& mask, double p);

/// Mean over training masks of the per-mask endpoint ratio; masks without
/// endpoints contribute 0.
double compute_threshold_nth(std::span<const BinaryMask> training_masks, double p);

/// Thin iff r < N_th.
BoundaryKind classify_boundary_kind(const BinaryMask& nuclei, double n_th, double p);

/// Unit step of each of the `bins` direction bins; bin b is centred on
/// b * 360/bins degrees, diagonal bins step both coordinates.
Point direction_step(double angle, int bins = 8);

/// Mean of `img` over the w x w window centred at (x, y), edge-replicated.
double window_mean(const RealImage& img, int x, int y, int w);

/// Walks outward from every edge pixel of C along the quantised outward
/// normal while the smoothed-red window mean stays within k of the mean at
/// the start pixel. Returns C plus all walked pixels.
BinaryMask grow_lines_thick(const BinaryMask& border, const RealImage& smoothed_red,
                            const LineGrowParams& params);

GlandSegmentation construct_thick(const BinaryMask& border, const RgbImage& img,
                                  const LineGrowParams& params, const DiffusionParams& diffusion,
                                  std::size_t min_area);

/// Iterative endpoint linking from C's skeleton endpoints to T's skeleton
/// endpoints within p2; returns the union mesh after n rounds.
BinaryMask link_endpoints_thin(const BinaryMask& border, const BinaryMask& nuclei,
                               const ThinLinkParams& params,
                               std::vector<BinaryMask>* history = nullptr);

/// Enclosed holes of the mesh whose boundary lies mostly next to C.
GlandSegmentation identify_gland_holes(const BinaryMask& mesh, const BinaryMask& border,
                                       const HoleParams& params);

struct SegmentParams {
  int z = kDefaultWindow;
  int glcm_levels = kDefaultGlcmLevels;
  LineGrowParams line;
  ThinLinkParams link;
  DiffusionParams diffusion;
  double border_fraction = 0.5;
  double proximity = 3.0;
  double min_area_fraction = 0.001;
  std::size_t min_area_pixels = 0;  // overrides the fraction when > 0
  double n_th = 0.0;
  bool keep_intermediates = false;

  std::size_t min_area_for(int width, int height) const;
};

/// Full pipeline for one image.
GlandSegmentation segment(const RgbImage& img, const Forest& forest, const SegmentParams& params);

}  // namespace glandseg
