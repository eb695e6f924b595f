#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>

#include "sdss/dataset_io.hpp"

namespace sdss {
namespace {

struct ErrorSink {
  char message[256] = {};
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  if (sink != nullptr) std::strncpy(sink->message, msg, sizeof(sink->message) - 1);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct MemoryReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->size - r->pos < len) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, r->data + r->pos, len);
  r->pos += len;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

enum class DecodeStatus { Ok, LibpngError, NotSingleChannel, BitDepth };

struct DecodedPng {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> pixels;  // big-endian samples for 16-bit
};

// Only trivially destructible locals live past setjmp; `out` and `rows`
// are owned by the caller.
DecodeStatus decode_raw(const MemoryReader& input, DecodedPng& out, std::vector<png_bytep>& rows,
                        ErrorSink& sink) {
  MemoryReader reader = input;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
  if (png == nullptr) return DecodeStatus::LibpngError;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return DecodeStatus::LibpngError;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return DecodeStatus::LibpngError;
  }
  png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    return DecodeStatus::NotSingleChannel;
  }
  if (depth != 8 && depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    return DecodeStatus::BitDepth;
  }
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.bit_depth = depth;
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  out.pixels.resize(row_bytes * out.height);
  rows.resize(out.height);
  for (png_uint_32 y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return DecodeStatus::Ok;
}

bool encode_raw(const std::uint8_t* pixels, png_uint_32 width, png_uint_32 height, int bit_depth,
                std::vector<std::uint8_t>& out, std::vector<png_bytep>& rows, ErrorSink& sink) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * (bit_depth / 8);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = const_cast<std::uint8_t*>(pixels) + y * row_bytes;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

LabelMap decode_label_png(std::span<const std::uint8_t> bytes, std::size_t num_classes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(ErrorCode::BadImage, "not a PNG stream");
  DecodedPng img;
  std::vector<png_bytep> rows;
  ErrorSink sink;
  switch (decode_raw(MemoryReader{bytes.data(), bytes.size(), 0}, img, rows, sink)) {
    case DecodeStatus::Ok: break;
    case DecodeStatus::LibpngError: throw Error(ErrorCode::BadImage, std::string("libpng: ") + sink.message);
    case DecodeStatus::NotSingleChannel: throw Error(ErrorCode::BadImage, "label PNG must be single-channel");
    case DecodeStatus::BitDepth: throw Error(ErrorCode::UnsupportedBitDepth, "label PNG must be 8- or 16-bit");
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<Label> data(n);
  if (img.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) data[i] = img.pixels[i] == 0xFF ? kIgnore : img.pixels[i];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      data[i] = static_cast<Label>((img.pixels[2 * i] << 8) | img.pixels[2 * i + 1]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_ignore(data[i]) && data[i] >= num_classes)
      throw Error(ErrorCode::ClassOutOfRange, "value " + std::to_string(data[i]) + " at pixel " + std::to_string(i) +
                                                  " is not below K=" + std::to_string(num_classes));
  }
  return LabelMap(img.width, img.height, num_classes, std::move(data));
}

std::vector<std::uint8_t> encode_label_png(const LabelMap& map) {
  if (map.width() == 0 || map.height() == 0) throw Error(ErrorCode::BadImage, "cannot encode an empty label map");
  const bool narrow = map.num_classes() <= kMax8BitClasses;
  std::vector<std::uint8_t> pixels;
  if (narrow) {
    pixels.resize(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      const Label v = map[i];
      if (!is_ignore(v) && v > 0xFE)
        throw Error(ErrorCode::ClassOutOfRange, "value " + std::to_string(v) + " does not fit 8-bit storage");
      pixels[i] = is_ignore(v) ? 0xFF : static_cast<std::uint8_t>(v);
    }
  } else {
    pixels.resize(2 * map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      pixels[2 * i] = static_cast<std::uint8_t>(map[i] >> 8);
      pixels[2 * i + 1] = static_cast<std::uint8_t>(map[i] & 0xFF);
    }
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows;
  ErrorSink sink;
  if (!encode_raw(pixels.data(), static_cast<png_uint_32>(map.width()), static_cast<png_uint_32>(map.height()),
                  narrow ? 8 : 16, out, rows, sink))
    throw Error(ErrorCode::IoError, std::string("libpng: ") + sink.message);
  return out;
}

LabelMap load_label_png(const fs::path& path, std::size_t num_classes) {
  try {
    return decode_label_png(read_bytes(path), num_classes);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

LabelMap load_raw_label_png(const fs::path& path) { return load_label_png(path, kMaxClasses); }

void save_label_png(const LabelMap& map, const fs::path& path) { write_bytes(path, encode_label_png(map)); }

}  // namespace sdss
