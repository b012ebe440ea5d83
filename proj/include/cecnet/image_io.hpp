#pragma once

// Minimal 8-bit image writers: binary PGM (P5) and PNG (grayscale or RGB,
// deflate via zlib).

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cecnet/errors.hpp"

namespace cecnet {

struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;    // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;  // row-major, interleaved channels

  void validate() const {
    if (channels != 1 && channels != 3) throw ParameterError("Image8: channels must be 1 or 3");
    if (width == 0 || height == 0 || pixels.size() != width * height * channels) {
      throw DimensionError("Image8: pixel buffer does not match " + std::to_string(width) + "x" + std::to_string(height));
    }
  }
};

/// Maps a value in [-1, 1] linearly to [0, 255], clamping outside values.
inline std::uint8_t signed_unit_to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5));
}

inline std::uint8_t unit_to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

/// Nearest-neighbour enlargement by an integer factor.
inline Image8 upsample_nearest(const Image8& img, std::size_t factor) {
  img.validate();
  if (factor == 0) throw ParameterError("upsample_nearest: factor must be positive");
  Image8 out{img.width * factor, img.height * factor, img.channels, {}};
  out.pixels.resize(out.width * out.height * out.channels);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.pixels[(y * out.width + x) * img.channels + c] = img.pixels[((y / factor) * img.width + x / factor) * img.channels + c];
  return out;
}

/// Binary PGM with the single-line header "P5 <w> <h> 255".
inline void write_pgm(const std::filesystem::path& path, const Image8& img) {
  img.validate();
  if (img.channels != 1) throw ParameterError("write_pgm: grayscale only");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << "P5 " << img.width << ' ' << img.height << " 255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

namespace detail {

inline void put_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) buf.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void png_chunk(std::vector<std::uint8_t>& file, const char* type, const std::vector<std::uint8_t>& body) {
  put_be32(file, static_cast<std::uint32_t>(body.size()));
  const std::size_t start = file.size();
  file.insert(file.end(), type, type + 4);
  file.insert(file.end(), body.begin(), body.end());
  const auto crc = crc32(0L, file.data() + start, static_cast<uInt>(file.size() - start));
  put_be32(file, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image8& img) {
  img.validate();
  std::vector<std::uint8_t> raw;
  const std::size_t stride = img.width * img.channels;
  raw.reserve((stride + 1) * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
               img.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw IoError("encode_png: deflate failed");
  }
  packed.resize(packed_size);

  std::vector<std::uint8_t> file{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                            // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);   // gray / truecolour
  ihdr.insert(ihdr.end(), {0, 0, 0});          // deflate, adaptive filtering, no interlace
  detail::png_chunk(file, "IHDR", ihdr);
  detail::png_chunk(file, "IDAT", packed);
  detail::png_chunk(file, "IEND", {});
  return file;
}

inline void write_png(const std::filesystem::path& path, const Image8& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace cecnet
