#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpd/fringe_image.h"

namespace fpd {

enum class ImageFormat { Pgm, Fpd1 };

// Round half away from zero, then clamp to [0, 255]. Throws DataError on NaN.
std::uint8_t to_u8(double v);

// "P5\n<w> <h>\n255\n" followed by one byte per pixel.
std::vector<std::uint8_t> encode_pgm(const FringeImage& img);
// "FPD1", u32 width, u32 height, little-endian f32 per pixel.
std::vector<std::uint8_t> encode_fpd1(const FringeImage& img);

// Accepts any P5 header (comments and arbitrary whitespace) with maxval 255.
FringeImage decode_pgm(const std::vector<std::uint8_t>& bytes);
FringeImage decode_fpd1(const std::vector<std::uint8_t>& bytes);
// Dispatches on the magic bytes.
FringeImage decode_image(const std::vector<std::uint8_t>& bytes);

FringeImage read_image(const std::string& path);
void write_image(const FringeImage& img, const std::string& path, ImageFormat format);
// Format from the extension: ".pgm" selects PGM, anything else FPD1.
void write_image(const FringeImage& img, const std::string& path);
ImageFormat format_for_path(const std::string& path);

}  // namespace fpd
