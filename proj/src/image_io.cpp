#include "glandseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <string>

namespace glandseg::io {

namespace {

// Format-neutral decoded pixels: either palette indices, gray samples, or
// interleaved RGB samples (alpha dropped).
struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  bool palette = false;
  std::vector<std::uint16_t> samples;
  std::vector<Rgb> colors;  // palette entries
};

// ---------------------------------------------------------------- PNG

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->pos + len > src->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, src->bytes.data() + src->pos, len);
  src->pos += len;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_cb(png_structp) {}

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

Decoded decode_png(std::span<const std::uint8_t> bytes) {
  std::string message = "malformed PNG";
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_cb, png_warning_cb);
  if (!png) throw ImageDecodeError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  PngReadSource src{bytes, 0};
  Decoded d;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raw;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageDecodeError(message);
  }
  png_set_read_fn(png, &src, png_read_cb);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth < 8) png_set_packing(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host-order little endian samples
  png_read_update_info(png, info);

  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  const int out_channels = png_get_channels(png, info);
  d.palette = color == PNG_COLOR_TYPE_PALETTE;
  d.channels = (color & PNG_COLOR_MASK_COLOR) && !d.palette ? 3 : 1;
  if (out_channels != d.channels) png_error(png, "unsupported PNG channel layout");

  if (d.palette) {
    png_colorp pal = nullptr;
    int n = 0;
    png_get_PLTE(png, info, &pal, &n);
    for (int i = 0; i < n; ++i) d.colors.push_back({pal[i].red, pal[i].green, pal[i].blue});
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * static_cast<std::size_t>(d.height));
  rows.resize(static_cast<std::size_t>(d.height));
  for (int y = 0; y < d.height; ++y) rows[y] = raw.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(d.width) * d.height * d.channels;
  d.samples.resize(n);
  if (out_depth == 16) {
    for (std::size_t i = 0; i < n; ++i)
      d.samples[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
  } else {
    for (std::size_t i = 0; i < n; ++i) d.samples[i] = raw[i];
  }
  return d;
}

Bytes encode_png_raw(int width, int height, int color_type, int depth,
                     const std::vector<std::uint8_t>& rowdata) {
  Bytes out;
  std::string message = "PNG encoding failed";
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_cb, png_warning_cb);
  if (!png) throw Error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(message);
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = rowdata.size() / static_cast<std::size_t>(height);
  for (int y = 0; y < height; ++y) rows[y] = rowdata.data() + stride * y;
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// ---------------------------------------------------------------- BMP

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

Decoded decode_bmp(std::span<const std::uint8_t> b) {
  if (b.size() < 54) throw ImageDecodeError("BMP header truncated");
  const std::uint32_t data_offset = le32(b, 10);
  const std::uint32_t header_size = le32(b, 14);
  if (header_size < 40) throw ImageDecodeError("unsupported BMP header (OS/2 bitmaps)");
  const auto width = static_cast<std::int32_t>(le32(b, 18));
  const auto raw_height = static_cast<std::int32_t>(le32(b, 22));
  const std::uint16_t bpp = le16(b, 28);
  const std::uint32_t compression = le32(b, 30);
  std::uint32_t palette_size = le32(b, 46);
  if (width <= 0 || raw_height == 0) throw ImageDecodeError("BMP has invalid dimensions");
  if (compression != 0 && !(compression == 3 && bpp == 32))
    throw ImageDecodeError("compressed BMP is not supported");
  if (bpp != 8 && bpp != 24 && bpp != 32)
    throw ImageDecodeError("unsupported BMP bit depth " + std::to_string(bpp));

  const bool bottom_up = raw_height > 0;
  const int height = bottom_up ? raw_height : -raw_height;
  Decoded d;
  d.width = width;
  d.height = height;
  d.palette = bpp == 8;
  d.channels = bpp == 8 ? 1 : 3;

  if (d.palette) {
    if (palette_size == 0) palette_size = 256;
    const std::size_t pal_at = 14 + header_size;
    if (pal_at + 4ULL * palette_size > b.size()) throw ImageDecodeError("BMP palette truncated");
    for (std::uint32_t i = 0; i < palette_size; ++i) {
      const std::size_t at = pal_at + 4 * i;
      d.colors.push_back({b[at + 2], b[at + 1], b[at]});
    }
  }

  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (static_cast<std::size_t>(width) * bytes_pp + 3) & ~std::size_t{3};
  if (data_offset + stride * static_cast<std::size_t>(height) > b.size())
    throw ImageDecodeError("BMP pixel data truncated");

  d.samples.resize(static_cast<std::size_t>(width) * height * d.channels);
  for (int y = 0; y < height; ++y) {
    const int src_row = bottom_up ? height - 1 - y : y;
    const std::size_t row_at = data_offset + stride * static_cast<std::size_t>(src_row);
    for (int x = 0; x < width; ++x) {
      const std::size_t px = row_at + bytes_pp * static_cast<std::size_t>(x);
      const std::size_t dst = (static_cast<std::size_t>(y) * width + x) * d.channels;
      if (d.palette) {
        d.samples[dst] = b[px];
      } else {
        d.samples[dst] = b[px + 2];
        d.samples[dst + 1] = b[px + 1];
        d.samples[dst + 2] = b[px];
      }
    }
  }
  return d;
}

Bytes encode_bmp_raw(int width, int height, int bpp, const std::vector<Rgb>& palette,
                     const std::function<void(Bytes&, int, int)>& put_pixel) {
  const std::size_t bytes_pp = static_cast<std::size_t>(bpp) / 8;
  const std::size_t stride = (static_cast<std::size_t>(width) * bytes_pp + 3) & ~std::size_t{3};
  const auto data_offset = static_cast<std::uint32_t>(54 + 4 * palette.size());
  const auto image_size = static_cast<std::uint32_t>(stride * static_cast<std::size_t>(height));
  Bytes out;
  out.reserve(data_offset + image_size);
  out.push_back('B');
  out.push_back('M');
  put32(out, data_offset + image_size);
  put32(out, 0);
  put32(out, data_offset);
  put32(out, 40);
  put32(out, static_cast<std::uint32_t>(width));
  put32(out, static_cast<std::uint32_t>(height));
  put16(out, 1);
  put16(out, static_cast<std::uint16_t>(bpp));
  put32(out, 0);
  put32(out, image_size);
  put32(out, 2835);
  put32(out, 2835);
  put32(out, static_cast<std::uint32_t>(palette.size()));
  put32(out, 0);
  for (const Rgb c : palette) {
    out.push_back(c.b);
    out.push_back(c.g);
    out.push_back(c.r);
    out.push_back(0);
  }
  for (int y = height - 1; y >= 0; --y) {
    const std::size_t row_start = out.size();
    for (int x = 0; x < width; ++x) put_pixel(out, x, y);
    while (out.size() - row_start < stride) out.push_back(0);
  }
  return out;
}

Decoded decode_any(std::span<const std::uint8_t> bytes) {
  static constexpr std::array<std::uint8_t, 8> png_sig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), bytes.begin()))
    return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return decode_bmp(bytes);
  throw ImageDecodeError("unrecognised image format (expected PNG or BMP)");
}

RgbImage to_rgb(const Decoded& d) {
  RgbImage img(d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * d.width + x) * d.channels;
      if (d.palette) {
        const std::uint16_t idx = d.samples[i];
        if (idx >= d.colors.size()) throw ImageDecodeError("palette index out of range");
        img.set(x, y, d.colors[idx]);
      } else if (d.channels == 1) {
        const auto v = static_cast<std::uint8_t>(std::min<std::uint16_t>(d.samples[i], 255));
        img.set(x, y, {v, v, v});
      } else {
        img.set(x, y, {static_cast<std::uint8_t>(d.samples[i]),
                       static_cast<std::uint8_t>(d.samples[i + 1]),
                       static_cast<std::uint8_t>(d.samples[i + 2])});
      }
    }
  }
  return img;
}

LabelMap to_labels(const Decoded& d) {
  const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
  std::vector<std::uint16_t> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (d.channels == 1) {
      raw[i] = d.samples[i];
    } else {
      const auto r = d.samples[3 * i], g = d.samples[3 * i + 1], b = d.samples[3 * i + 2];
      if (r != g || g != b) throw ImageDecodeError("annotation must be a gray or palette label map");
      raw[i] = r;
    }
  }
  std::map<std::uint16_t, int> compact;
  for (const auto v : raw)
    if (v != 0) compact.emplace(v, 0);
  int next = 0;
  for (auto& [value, label] : compact) label = ++next;
  std::vector<std::int32_t> labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) labels[i] = raw[i] == 0 ? 0 : compact.at(raw[i]);
  return LabelMap(d.width, d.height, std::move(labels), next);
}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageDecodeError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) { return to_rgb(decode_any(bytes)); }

LabelMap decode_label_map(std::span<const std::uint8_t> bytes) {
  return to_labels(decode_any(bytes));
}

RgbImage read_rgb(const std::filesystem::path& path) {
  try {
    return decode_rgb(read_file(path));
  } catch (const Error& e) {
    throw ImageDecodeError(path.string() + ": " + e.what());
  }
}

LabelMap read_label_map(const std::filesystem::path& path) {
  try {
    return decode_label_map(read_file(path));
  } catch (const Error& e) {
    throw ImageDecodeError(path.string() + ": " + e.what());
  }
}

Bytes encode_png(const RgbImage& img) {
  const auto bytes = img.bytes();
  return encode_png_raw(img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8,
                        std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

Bytes encode_png(const GrayImage& img) {
  const auto px = img.pixels();
  return encode_png_raw(img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 8,
                        std::vector<std::uint8_t>(px.begin(), px.end()));
}

Bytes encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> rows(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) rows[i] = mask[i] ? 255 : 0;
  return encode_png_raw(mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 8, rows);
}

Bytes encode_label_png(const LabelMap& lm) {
  if (lm.count > 65535) throw ContractError("label map has too many objects for 16-bit PNG");
  std::vector<std::uint8_t> rows(lm.size() * 2);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(lm[i]);
    rows[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big endian
    rows[2 * i + 1] = static_cast<std::uint8_t>(v);
  }
  return encode_png_raw(lm.width(), lm.height(), PNG_COLOR_TYPE_GRAY, 16, rows);
}

Bytes encode_bmp(const RgbImage& img) {
  return encode_bmp_raw(img.width(), img.height(), 24, {}, [&](Bytes& out, int x, int y) {
    const Rgb c = img.at(x, y);
    out.push_back(c.b);
    out.push_back(c.g);
    out.push_back(c.r);
  });
}

Bytes encode_label_bmp(const LabelMap& lm) {
  if (lm.count > 255) throw ContractError("label map has too many objects for an 8-bit BMP");
  std::vector<Rgb> palette(256);
  for (int i = 0; i < 256; ++i) {
    const auto v = static_cast<std::uint8_t>(i);
    palette[static_cast<std::size_t>(i)] = {v, v, v};
  }
  return encode_bmp_raw(lm.width(), lm.height(), 8, palette, [&](Bytes& out, int x, int y) {
    out.push_back(static_cast<std::uint8_t>(lm(x, y)));
  });
}

void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace glandseg::io
