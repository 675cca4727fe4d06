#include "fpd/image_io.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>

#include "fpd/binary_io.h"
#include "fpd/error.h"

namespace fpd {

std::uint8_t to_u8(double v) {
    if (std::isnan(v)) throw DataError("cannot export NaN to an 8-bit image");
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

std::vector<std::uint8_t> encode_pgm(const FringeImage& img) {
    std::vector<std::uint8_t> out;
    binio::put_bytes(out, "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n");
    for (double v : img.data()) out.push_back(to_u8(v));
    return out;
}

std::vector<std::uint8_t> encode_fpd1(const FringeImage& img) {
    if (img.width() > std::numeric_limits<std::uint32_t>::max() || img.height() > std::numeric_limits<std::uint32_t>::max()) {
        throw ShapeError("image too large for FPD1");
    }
    std::vector<std::uint8_t> out;
    out.reserve(12 + 4 * img.size());
    binio::put_bytes(out, "FPD1");
    binio::put_u32(out, static_cast<std::uint32_t>(img.width()));
    binio::put_u32(out, static_cast<std::uint32_t>(img.height()));
    for (double v : img.data()) binio::put_f32(out, static_cast<float>(v));
    return out;
}

namespace {

// Reads one unsigned decimal header field, skipping whitespace and comments.
std::size_t pgm_field(const std::vector<std::uint8_t>& b, std::size_t& pos, const char* what) {
    for (;;) {
        if (pos >= b.size()) throw ParseError(ParseErrorKind::Truncated, std::string("PGM header ends before ") + what);
        if (std::isspace(b[pos])) {
            ++pos;
        } else if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    if (!std::isdigit(b[pos])) throw ParseError(ParseErrorKind::BadHeader, std::string("PGM ") + what + " is not a number");
    std::size_t v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + (b[pos] - '0');
        if (v > (1u << 30)) throw ParseError(ParseErrorKind::BadHeader, std::string("PGM ") + what + " is too large");
        ++pos;
    }
    return v;
}

}  // namespace

FringeImage decode_pgm(const std::vector<std::uint8_t>& b) {
    if (b.size() < 2 || b[0] != 'P' || b[1] != '5') throw ParseError(ParseErrorKind::BadMagic, "not a binary PGM (P5)");
    std::size_t pos = 2;
    const std::size_t w = pgm_field(b, pos, "width");
    const std::size_t h = pgm_field(b, pos, "height");
    const std::size_t maxval = pgm_field(b, pos, "maxval");
    if (maxval != 255) throw ParseError(ParseErrorKind::BadMaxval, "maxval " + std::to_string(maxval) + ", expected 255");
    if (pos >= b.size() || !std::isspace(b[pos])) throw ParseError(ParseErrorKind::Truncated, "PGM header ends without a separator");
    ++pos;
    if (b.size() - pos < w * h) {
        throw ParseError(ParseErrorKind::Truncated,
                         "PGM payload has " + std::to_string(b.size() - pos) + " bytes, expected " + std::to_string(w * h));
    }
    FringeImage img(w, h);
    for (std::size_t k = 0; k < w * h; ++k) img.data()[k] = b[pos + k];
    return img;
}

FringeImage decode_fpd1(const std::vector<std::uint8_t>& b) {
    if (b.size() < 4 || !std::equal(b.begin(), b.begin() + 4, "FPD1")) throw ParseError(ParseErrorKind::BadMagic, "not an FPD1 image");
    if (b.size() < 12) throw ParseError(ParseErrorKind::Truncated, "FPD1 header is incomplete");
    const std::size_t w = binio::get_u32(b.data() + 4);
    const std::size_t h = binio::get_u32(b.data() + 8);
    if ((b.size() - 12) / 4 < w * h) {
        throw ParseError(ParseErrorKind::Truncated,
                         "FPD1 payload has " + std::to_string(b.size() - 12) + " bytes, expected " + std::to_string(4 * w * h));
    }
    FringeImage img(w, h);
    for (std::size_t k = 0; k < w * h; ++k) img.data()[k] = binio::get_f32(b.data() + 12 + 4 * k);
    return img;
}

FringeImage decode_image(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
    if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "FPD1")) return decode_fpd1(bytes);
    throw ParseError(ParseErrorKind::BadMagic, "unrecognized image format");
}

FringeImage read_image(const std::string& path) {
    return decode_image(binio::read_file(path));
}

ImageFormat format_for_path(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".pgm" ? ImageFormat::Pgm : ImageFormat::Fpd1;
}

void write_image(const FringeImage& img, const std::string& path, ImageFormat format) {
    const auto bytes = format == ImageFormat::Pgm ? encode_pgm(img) : encode_fpd1(img);
    binio::write_file_atomic(path, bytes);
}

void write_image(const FringeImage& img, const std::string& path) {
    write_image(img, path, format_for_path(path));
}

}  // namespace fpd
