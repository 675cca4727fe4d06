#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fpd {

// Real-valued intensity field, row-major. Row index is i, column index is j.
class FringeImage {
public:
    FringeImage() = default;
    FringeImage(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width), height_(height), data_(width * height, fill) {}
    FringeImage(std::size_t width, std::size_t height, std::vector<double> data);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
    double at(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const;
    double min() const;
    double max() const;
    double mean() const;
    double column_mean(std::size_t col) const;

    bool operator==(const FringeImage&) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

// Throws ShapeError unless a and b have identical dimensions.
void require_same_dims(const FringeImage& a, const FringeImage& b, const char* context);

}  // namespace fpd
