#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "glandseg/raster.hpp"

namespace glandseg::io {

using Bytes = std::vector<std::uint8_t>;

// Decoders sniff the format from the leading bytes (PNG signature or "BM")
// and throw ImageDecodeError naming the path on any failure.
RgbImage read_rgb(const std::filesystem::path& path);

/// Reads an annotation whose pixel values are object indices (0 = background).
/// Palette images use the palette index; gray images the gray value; RGB
/// images must be gray (R = G = B). Values are compacted to 1..count in
/// ascending order.
LabelMap read_label_map(const std::filesystem::path& path);

RgbImage decode_rgb(std::span<const std::uint8_t> bytes);
LabelMap decode_label_map(std::span<const std::uint8_t> bytes);

Bytes encode_png(const RgbImage& img);
Bytes encode_png(const GrayImage& img);
/// 16-bit gray PNG holding the raw label values.
Bytes encode_label_png(const LabelMap& lm);
/// 0/1 mask rendered as 0/255.
Bytes encode_mask_png(const BinaryMask& mask);

Bytes encode_bmp(const RgbImage& img);
/// 8-bit palette BMP with a gray ramp palette; labels must be < 256.
Bytes encode_label_bmp(const LabelMap& lm);

/// Writes to a sibling temporary file and renames it over path, so readers
/// never observe a partially written file.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);

}  // namespace glandseg::io
