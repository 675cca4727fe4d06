#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fpd/error.h"

namespace fpd {

struct Shape4 {
    std::size_t n = 0; // batch
    std::size_t c = 0; // channels
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t count() const noexcept { return n * c * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense (batch, channel, height, width) array, row-major within each plane and
// channel-major within each sample.
template <typename T>
class Tensor4 {
public:
    using value_type = T;

    Tensor4() = default;
    explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(shape), data_(shape.count(), fill) {}
    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
        : Tensor4(Shape4{n, c, h, w}, fill) {}

    const Shape4& shape() const noexcept { return shape_; }
    std::size_t batch() const noexcept { return shape_.n; }
    std::size_t channels() const noexcept { return shape_.c; }
    std::size_t height() const noexcept { return shape_.h; }
    std::size_t width() const noexcept { return shape_.w; }
    std::size_t size() const noexcept { return data_.size(); }

    T& at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) {
        return data_[((b * shape_.c + ch) * shape_.h + y) * shape_.w + x];
    }
    T at(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const {
        return data_[((b * shape_.c + ch) * shape_.h + y) * shape_.w + x];
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    std::span<T> sample(std::size_t b) { return std::span<T>(data_).subspan(b * shape_.c * shape_.plane(), shape_.c * shape_.plane()); }
    std::span<const T> sample(std::size_t b) const {
        return std::span<const T>(data_).subspan(b * shape_.c * shape_.plane(), shape_.c * shape_.plane());
    }
    std::span<T> plane(std::size_t b, std::size_t ch) {
        return std::span<T>(data_).subspan((b * shape_.c + ch) * shape_.plane(), shape_.plane());
    }
    std::span<const T> plane(std::size_t b, std::size_t ch) const {
        return std::span<const T>(data_).subspan((b * shape_.c + ch) * shape_.plane(), shape_.plane());
    }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Tensor4&) const = default;

private:
    Shape4 shape_;
    std::vector<T> data_;
};

template <typename To, typename From>
Tensor4<To> tensor_cast(const Tensor4<From>& t) {
    Tensor4<To> out(t.shape());
    auto src = t.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<To>(src[k]);
    return out;
}

inline void require_shape(const Shape4& got, const Shape4& want, const char* context) {
    if (got != want) throw ShapeError(std::string(context) + ": shape " + got.str() + " does not match " + want.str());
}

}  // namespace fpd
