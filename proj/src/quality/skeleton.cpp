#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "fpd/quality.h"

namespace fpd {

std::size_t BinaryImage::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

int quantize(double v) {
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

int otsu_threshold(const FringeImage& img) {
    std::array<double, 256> hist{};
    for (double v : img.data()) hist[quantize(v)] += 1.0;
    const double total = static_cast<double>(img.size());
    int levels = 0;
    double sum_all = 0.0;
    for (int t = 0; t < 256; ++t) {
        if (hist[t] > 0) ++levels;
        sum_all += t * hist[t];
    }
    if (levels < 2) return -1;

    double w0 = 0.0;
    double sum0 = 0.0;
    double best = -1.0;
    int best_t = -1;
    for (int t = 0; t < 255; ++t) {
        w0 += hist[t];
        sum0 += t * hist[t];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {
            best = between;
            best_t = t;
        }
    }
    return best_t;
}

BinaryImage binarize(const FringeImage& img) {
    BinaryImage out(img.width(), img.height());
    const int t = otsu_threshold(img);
    if (t < 0) return out;
    for (std::size_t r = 0; r < img.height(); ++r) {
        for (std::size_t c = 0; c < img.width(); ++c) {
            out.at(r, c) = quantize(img.at(r, c)) > t ? 1 : 0;
        }
    }
    return out;
}

BinaryImage thin(const BinaryImage& bin) {
    BinaryImage img = bin;
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(img.height());
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(img.width());
    auto px = [&](std::ptrdiff_t r, std::ptrdiff_t c) -> int {
        if (r < 0 || c < 0 || r >= h || c >= w) return 0;
        return img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };
    std::vector<std::size_t> marked;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            marked.clear();
            for (std::ptrdiff_t r = 0; r < h; ++r) {
                for (std::ptrdiff_t c = 0; c < w; ++c) {
                    if (!px(r, c)) continue;
                    // P2..P9 clockwise from north.
                    const std::array<int, 8> p{px(r - 1, c),     px(r - 1, c + 1), px(r, c + 1), px(r + 1, c + 1),
                                               px(r + 1, c),     px(r + 1, c - 1), px(r, c - 1), px(r - 1, c - 1)};
                    int b = 0;
                    int a = 0;
                    for (int k = 0; k < 8; ++k) {
                        b += p[k];
                        if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
                    }
                    if (b < 2 || b > 6 || a != 1) continue;
                    const int p2 = p[0], p4 = p[2], p6 = p[4], p8 = p[6];
                    const bool keep = pass == 0 ? (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0)
                                                : (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0);
                    if (!keep) marked.push_back(static_cast<std::size_t>(r * w + c));
                }
            }
            for (std::size_t k : marked) img.at(k / img.width(), k % img.width()) = 0;
            if (!marked.empty()) changed = true;
        }
    }
    return img;
}

std::size_t count_components(const BinaryImage& bin) {
    const std::size_t h = bin.height();
    const std::size_t w = bin.width();
    std::vector<std::uint8_t> seen(w * h, 0);
    std::vector<std::size_t> stack;
    std::size_t components = 0;
    for (std::size_t start = 0; start < w * h; ++start) {
        if (!bin.bits()[start] || seen[start]) continue;
        ++components;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t k = stack.back();
            stack.pop_back();
            const std::size_t r = k / w;
            const std::size_t c = k % w;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(r) + dr;
                    const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(c) + dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(h) || nc >= static_cast<std::ptrdiff_t>(w)) continue;
                    const std::size_t n = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
                    if (bin.bits()[n] && !seen[n]) {
                        seen[n] = 1;
                        stack.push_back(n);
                    }
                }
            }
        }
    }
    return components;
}

FringeImage to_fringe_image(const BinaryImage& bin) {
    FringeImage out(bin.width(), bin.height());
    for (std::size_t r = 0; r < bin.height(); ++r) {
        for (std::size_t c = 0; c < bin.width(); ++c) out.at(r, c) = bin.at(r, c) ? 255.0 : 0.0;
    }
    return out;
}

}  // namespace fpd
