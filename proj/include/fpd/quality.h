#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "fpd/fringe_image.h"

namespace fpd {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

struct MetricsReport {
    double psnr = 0.0; // dB
    double ssim = 0.0;
    double mae = 0.0;
};

// 10 log10(peak^2 / MSE); +inf for identical images.
double psnr(const FringeImage& a, const FringeImage& b, double peak = 255.0);

struct SsimOptions {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;
};

// Mean of the local SSIM map over every fully contained window. Throws
// ShapeError when an image is smaller than the window.
double ssim_mean(const FringeImage& a, const FringeImage& b, const SsimOptions& options = {});

double mae(const FringeImage& a, const FringeImage& b);

MetricsReport compare(const FringeImage& reference, const FringeImage& test);

class BinaryImage {
public:
    BinaryImage() = default;
    BinaryImage(std::size_t width, std::size_t height) : width_(width), height_(height), bits_(width * height, 0) {}

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::uint8_t& at(std::size_t row, std::size_t col) { return bits_[row * width_ + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return bits_[row * width_ + col]; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
    std::size_t count() const noexcept;

    bool operator==(const BinaryImage&) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Histogram over the 256 levels of round(clamp(v, 0, 255)); returns the level
// t maximizing the between-class variance of {<= t} versus {> t}, or -1 for a
// single-level image.
int otsu_threshold(const FringeImage& img);

// Pixels whose quantized level exceeds the Otsu threshold become 1.
BinaryImage binarize(const FringeImage& img);

// Zhang-Suen parallel thinning, iterated until stable. Pixels on the image
// border are treated as having background outside the frame.
BinaryImage thin(const BinaryImage& bin);

// Number of 8-connected foreground components.
std::size_t count_components(const BinaryImage& bin);

// Foreground 255, background 0.
FringeImage to_fringe_image(const BinaryImage& bin);

}  // namespace fpd
