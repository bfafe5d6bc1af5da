#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glandseg/boundary.hpp"
#include "glandseg/raster.hpp"

namespace glandseg {

/// Synthetic H&E-like tissue with known gland geometry.
///
/// Thin rim: a single ring of well separated nuclei around a pale lumen.
/// Dense rim: a band of epithelial cytoplasm packed with two staggered rings
/// of nuclei. Both sit on textured pink stroma sprinkled with isolated
/// stromal nuclei.
enum class RimStyle { Thin, Dense };

struct PhantomSpec {
  RimStyle style = RimStyle::Thin;
  int width = 256;
  int height = 256;
  int max_glands = 2;
  std::uint64_t seed = 1;
};

struct Phantom {
  std::string id;
  RgbImage image;
  LabelMap truth;  // one label per gland disk
  GlandKind intended = GlandKind::Thin;
};

Phantom make_phantom(const PhantomSpec& spec);

/// `count` phantoms alternating thin and dense rims, ids `<prefix>_NN`.
std::vector<Phantom> phantom_suite(std::size_t count, std::uint64_t seed, const std::string& prefix = "phantom",
                                   int size = 256);

}  // namespace glandseg
