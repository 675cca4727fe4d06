#include "fpd/fringe_image.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fpd/error.h"

namespace fpd {

FringeImage::FringeImage(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_) {
        throw ShapeError("FringeImage: " + std::to_string(data_.size()) + " values for " +
                         std::to_string(width_) + "x" + std::to_string(height_));
    }
}

bool FringeImage::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double FringeImage::min() const {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double FringeImage::max() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double FringeImage::mean() const {
    if (data_.empty()) return 0.0;
    double sum = 0.0;
    for (double v : data_) sum += v;
    return sum / static_cast<double>(data_.size());
}

double FringeImage::column_mean(std::size_t col) const {
    if (col >= width_) throw ShapeError("column_mean: column " + std::to_string(col) + " out of range");
    double sum = 0.0;
    for (std::size_t r = 0; r < height_; ++r) sum += at(r, col);
    return sum / static_cast<double>(height_);
}

void require_same_dims(const FringeImage& a, const FringeImage& b, const char* context) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw ShapeError(std::string(context) + ": dimension mismatch " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()));
    }
}

}  // namespace fpd
