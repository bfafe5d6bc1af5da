#include "glandseg/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

namespace glandseg {

const char* to_string(GlandKind kind) { return kind == GlandKind::Thick ? "thick" : "thin"; }

void LineGrowParams::validate() const {
  if (window < 3 || window % 2 == 0) throw ParameterError("W must be odd and >= 3");
  if (!(k > 0)) throw ParameterError("k must be > 0");
  if (bins != 8) throw ParameterError("line growing uses 8 direction bins");
  if (max_steps < 1) throw ParameterError("max_steps must be >= 1");
}

void ThinLinkParams::validate() const {
  if (!(p > 0)) throw ParameterError("p must be > 0");
  if (!(p2 > 0)) throw ParameterError("p2 must be > 0");
  if (n < 1) throw ParameterError("n must be >= 1");
}

EndpointStats endpoint_stats(const BinaryMask& mask, double p) {
  if (!(p > 0)) throw ParameterError("endpoint radius p must be > 0");
  const BinaryMask skeleton = thin(mask);
  const std::vector<Point> ends = endpoints(skeleton);
  const LabelMap edges = label_components(skeleton);
  const double r2 = p * p;
  EndpointStats s;
  s.endpoints = ends.size();
  for (std::size_t i = 0; i < ends.size(); ++i) {
    const int li = edges(ends[i].x, ends[i].y);
    for (std::size_t j = i + 1; j < ends.size(); ++j) {
      if (edges(ends[j].x, ends[j].y) == li) continue;
      const double dx = ends[i].x - ends[j].x;
      const double dy = ends[i].y - ends[j].y;
      if (dx * dx + dy * dy <= r2) s.neighbor_total += 2;  // counted from both ends
    }
  }
  return s;
}

double endpoint_neighbor_ratio(const BinaryMask& mask, double p) { return endpoint_stats(mask, p).ratio(); }

double compute_threshold_nth(std::span<const BinaryMask> training_masks, double p) {
  if (training_masks.empty()) throw ParameterError("compute_threshold_nth needs at least one training mask");
  double sum = 0.0;
  for (const auto& m : training_masks) sum += endpoint_neighbor_ratio(m, p);
  return sum / static_cast<double>(training_masks.size());
}

BoundaryKind classify_boundary_kind(const BinaryMask& nuclei, double n_th, double p) {
  if (!(n_th >= 0)) throw ParameterError("N_th must be >= 0");
  BoundaryKind k;
  k.ratio = endpoint_neighbor_ratio(nuclei, p);
  k.threshold = n_th;
  k.kind = k.ratio < n_th ? GlandKind::Thin : GlandKind::Thick;
  return k;
}

Point direction_step(double angle, int bins) {
  const double width = 2.0 * std::numbers::pi / bins;
  long bin = std::lround(angle / width) % bins;
  if (bin < 0) bin += bins;
  const double centre = static_cast<double>(bin) * width;
  return {static_cast<int>(std::lround(std::cos(centre))), static_cast<int>(std::lround(std::sin(centre)))};
}

double window_mean(const RealImage& img, int x, int y, int w) {
  const int half = w / 2;
  double sum = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) sum += img.clamped(x + dx, y + dy);
  return sum / static_cast<double>(w * w);
}

BinaryMask grow_lines_thick(const BinaryMask& border, const RealImage& smoothed_red,
                            const LineGrowParams& params) {
  params.validate();
  if (!border.same_shape(smoothed_red)) throw ContractError("grow_lines_thick: raster dimensions differ");
  const GradientField grad = sobel(border);
  BinaryMask out = border;
  for (int y = 0; y < border.height(); ++y) {
    for (int x = 0; x < border.width(); ++x) {
      if (grad.magnitude(x, y) <= 0) continue;
      // The Sobel gradient of the mask points into the nucleus; the walk
      // follows the opposite (outward) normal.
      const Point step = direction_step(grad.direction(x, y) + std::numbers::pi, params.bins);
      const double m1 = window_mean(smoothed_red, x, y, params.window);
      Point cur{x, y};
      for (int s = 0; s < params.max_steps; ++s) {
        cur = {cur.x + step.x, cur.y + step.y};
        if (!border.contains(cur) || border(cur.x, cur.y)) break;
        const double m2 = window_mean(smoothed_red, cur.x, cur.y, params.window);
        if (!(std::abs(m1 - m2) < params.k)) break;
        out(cur.x, cur.y) = 1;
      }
    }
  }
  return out;
}

GlandSegmentation construct_thick(const BinaryMask& border, const RgbImage& img,
                                  const LineGrowParams& params, const DiffusionParams& diffusion,
                                  std::size_t min_area) {
  if (!border.same_shape(img.width(), img.height())) throw ContractError("construct_thick: raster dimensions differ");
  const RealImage red = perona_malik_real(img.channel(0), diffusion);
  const BinaryMask grown = grow_lines_thick(border, red, params);
  const BinaryMask cleaned = majority_filter(grown);
  const BinaryMask filled = area_filter(fill_holes(cleaned), min_area);
  GlandSegmentation seg;
  seg.regions = label_components(filled);
  seg.kind.kind = GlandKind::Thick;
  seg.intermediates = Intermediates{BinaryMask(), border, grown};
  return seg;
}

BinaryMask link_endpoints_thin(const BinaryMask& border, const BinaryMask& nuclei,
                               const ThinLinkParams& params, std::vector<BinaryMask>* history) {
  params.validate();
  if (!border.same_shape(nuclei)) throw ContractError("link_endpoints_thin: mask dimensions differ");
  const std::vector<Point> targets = endpoints(thin(nuclei));
  const double r2 = params.p2 * params.p2;
  BinaryMask mesh = border;
  for (int it = 0; it < params.n; ++it) {
    const std::vector<Point> sources = endpoints(thin(mesh));
    const LabelMap pieces = label_components(mesh);
    BinaryMask next = mesh;
    for (const Point e : sources) {
      const int piece = pieces(e.x, e.y);
      for (const Point t : targets) {
        const double dx = e.x - t.x;
        const double dy = e.y - t.y;
        if (dx * dx + dy * dy > r2) continue;
        if (mesh(t.x, t.y) && pieces(t.x, t.y) == piece) continue;
        draw_line_inplace(next, e, t);
      }
    }
    mesh = std::move(next);
    if (history) history->push_back(mesh);
  }
  return mesh;
}

GlandSegmentation identify_gland_holes(const BinaryMask& mesh, const BinaryMask& border,
                                       const HoleParams& params) {
  if (!(params.border_fraction > 0 && params.border_fraction <= 1))
    throw ParameterError("border_fraction must be in (0, 1]");
  if (!mesh.same_shape(border)) throw ContractError("identify_gland_holes: mask dimensions differ");
  const int w = mesh.width();
  const int h = mesh.height();
  const BinaryMask holes = mask_difference(fill_holes(mesh), mesh);
  // Background regions are 4-connected; holes separated by a diagonal
  // mesh line stay distinct.
  const LabelMap hole_labels = label_components(holes, Connectivity::Four);
  const RealImage near_border = distance_transform(border);
  const auto sizes = component_sizes(hole_labels);

  std::vector<std::size_t> rim(sizes.size(), 0), rim_near(sizes.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = hole_labels(x, y);
      if (l == 0) continue;
      const bool on_rim = (x > 0 && mesh(x - 1, y)) || (x + 1 < w && mesh(x + 1, y)) ||
                          (y > 0 && mesh(x, y - 1)) || (y + 1 < h && mesh(x, y + 1));
      if (!on_rim) continue;
      ++rim[static_cast<std::size_t>(l)];
      if (near_border(x, y) <= params.proximity) ++rim_near[static_cast<std::size_t>(l)];
    }
  }

  std::vector<int> relabel(sizes.size(), 0);
  int count = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    if (rim[l] == 0 || sizes[l] < params.min_area) continue;
    const double fraction = static_cast<double>(rim_near[l]) / static_cast<double>(rim[l]);
    if (fraction >= params.border_fraction) relabel[l] = ++count;
  }
  std::vector<std::int32_t> labels(hole_labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = relabel[static_cast<std::size_t>(hole_labels[i])];

  GlandSegmentation seg;
  seg.regions = LabelMap(w, h, std::move(labels), count);
  seg.kind.kind = GlandKind::Thin;
  return seg;
}

std::size_t SegmentParams::min_area_for(int width, int height) const {
  if (min_area_pixels > 0) return min_area_pixels;
  return static_cast<std::size_t>(std::llround(min_area_fraction * static_cast<double>(width) * height));
}

GlandSegmentation segment(const RgbImage& img, const Forest& forest, const SegmentParams& params) {
  if (forest.n_features != static_cast<std::size_t>(kFeatureCount))
    throw ContractError("segment: forest was not trained on window feature vectors");
  if (img.width() < params.z || img.height() < params.z)
    throw DegenerateInputError("image is smaller than the feature window");

  const NucleusDetection det = detect_nuclei(img);
  BinaryMask border(img.width(), img.height(), 0);
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(det.components.count) + 1, 0);
  for (const Centroid& c : det.centers) {
    const FeatureVector fv = feature_vector(extract_window(img, c.x, c.y, params.z), params.glcm_levels);
    keep[static_cast<std::size_t>(c.label)] = forest.predict(fv) == 1 ? 1 : 0;
  }
  for (std::size_t i = 0; i < border.size(); ++i)
    border[i] = keep[static_cast<std::size_t>(det.components[i])] && det.components[i] != 0 ? 1 : 0;

  const BoundaryKind kind = classify_boundary_kind(det.nuclei, params.n_th, params.link.p);
  const std::size_t min_area = params.min_area_for(img.width(), img.height());
  GlandSegmentation seg;
  BinaryMask connected;
  if (kind.kind == GlandKind::Thick) {
    seg = construct_thick(border, img, params.line, params.diffusion, min_area);
    connected = seg.intermediates->connected;
  } else {
    connected = link_endpoints_thin(border, det.nuclei, params.link);
    seg = identify_gland_holes(connected, border, {params.border_fraction, params.proximity, min_area});
  }
  seg.kind = kind;
  if (params.keep_intermediates)
    seg.intermediates = Intermediates{det.nuclei, border, std::move(connected)};
  else
    seg.intermediates.reset();
  spdlog::debug("segment: {} nuclei, {} border, r = {:.4f} vs N_th = {:.4f} -> {}, {} regions",
                det.components.count, count(border), kind.ratio, kind.threshold, to_string(kind.kind),
                seg.regions.count);
  return seg;
}

}  // namespace glandseg
