#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "glandseg/error.hpp"

namespace glandseg {

struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  // Raster order: row first, then column.
  friend std::strong_ordering operator<=>(const Point& a, const Point& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// Row-major 2-D raster. The Tag parameter keeps masks, gray images and
/// label maps from silently converting into one another.
template <class T, class Tag>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(checked_area(width, height)))
      throw ContractError("raster data length does not match width x height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(Point p) const { return contains(p.x, p.y); }
  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <class R>
  bool same_shape(const R& other) const {
    return other.width() == width_ && other.height() == height_;
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Edge-replicating access: coordinates are clamped into the image.
  const T& clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return data_[index(x, y)];
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static long long checked_area(int w, int h) {
    if (w < 1 || h < 1) throw ContractError("raster dimensions must be positive");
    return static_cast<long long>(w) * h;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct GrayTag;
struct MaskTag;
struct RealTag;
struct LabelTag;

using GrayImage = Raster<std::uint8_t, GrayTag>;
/// Boolean raster stored as 0/1 bytes.
using BinaryMask = Raster<std::uint8_t, MaskTag>;
using RealImage = Raster<double, RealTag>;

/// Connected components; 0 is background, objects are 1..count.
class LabelMap : public Raster<std::int32_t, LabelTag> {
 public:
  LabelMap() = default;
  LabelMap(int width, int height) : Raster(width, height, 0) {}
  LabelMap(int width, int height, std::vector<std::int32_t> labels, int count)
      : Raster(width, height, std::move(labels)), count(count) {}

  int count = 0;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Interleaved 8-bit RGB image.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});
  RgbImage(int width, int height, std::vector<std::uint8_t> interleaved);

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb at(int x, int y) const {
    const std::size_t i = offset(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = offset(x, y);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }
  std::span<const std::uint8_t> bytes() const { return data_; }

  /// Channel 0 = red, 1 = green, 2 = blue.
  GrayImage channel(int c) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct GradientField {
  RealImage magnitude;
  /// atan2(gy, gx) with y pointing down; meaningful only where magnitude > 0.
  RealImage direction;
};

struct Centroid {
  int label = 0;
  double x = 0.0;
  double y = 0.0;
};

GrayImage to_grayscale(const RgbImage& img);

enum class Connectivity { Four, Eight };

/// Connected-component labelling (8-connected unless asked otherwise);
/// labels are numbered in raster order of each component's first pixel.
LabelMap label_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight);

/// Pixel count per label; index 0 holds the background count.
std::vector<std::size_t> component_sizes(const LabelMap& lm);

std::vector<Centroid> centroids(const LabelMap& lm);

/// Topology-preserving thinning to an 8-connected, one-pixel-wide skeleton.
BinaryMask thin(const BinaryMask& mask);

/// True when deleting (x, y) changes neither the number of 8-connected
/// foreground components nor the number of 4-connected background components.
bool is_simple_pixel(const BinaryMask& mask, int x, int y);

int count_neighbors8(const BinaryMask& mask, int x, int y);

/// Line end: no or one 8-neighbour, or two or three neighbours forming one
/// unbroken run around the 8-ring (the tip of a 4-connected arm). On fully
/// thinned masks this reduces to "at most one neighbour".
bool is_endpoint(const BinaryMask& mask, int x, int y);
/// Endpoints in raster order.
std::vector<Point> endpoints(const BinaryMask& skeleton);

BinaryMask majority_filter(const BinaryMask& mask);

/// Background not 4-connected to the image border becomes foreground.
BinaryMask fill_holes(const BinaryMask& mask);

BinaryMask area_filter(const BinaryMask& mask, std::size_t min_area);

GradientField sobel(const BinaryMask& mask);

/// Bresenham segment from p1 to p2 OR-ed into mask. Symmetric in its endpoints.
BinaryMask draw_line(const BinaryMask& mask, Point p1, Point p2);
void draw_line_inplace(BinaryMask& mask, Point p1, Point p2);

/// Pixels of the discrete segment, ordered from the canonical start point.
std::vector<Point> line_pixels(Point p1, Point p2);

// Small set-algebra helpers shared across modules.
std::size_t count(const BinaryMask& mask);
bool is_subset(const BinaryMask& inner, const BinaryMask& outer);
BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_of_label(const LabelMap& lm, int label);
BinaryMask foreground(const LabelMap& lm);

/// Euclidean distance (in pixels) from every pixel to the nearest foreground
/// pixel of mask; +infinity everywhere when the mask is empty.
RealImage distance_transform(const BinaryMask& mask);

}  // namespace glandseg
