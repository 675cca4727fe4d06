#include <cmath>
#include <string>
#include <vector>

#include "fpd/error.h"
#include "fpd/quality.h"

namespace fpd {

double psnr(const FringeImage& a, const FringeImage& b, double peak) {
    require_same_dims(a, b, "psnr");
    if (a.empty()) throw ShapeError("psnr: empty images");
    auto x = a.data();
    auto y = b.data();
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        sum += d * d;
    }
    if (sum == 0.0) return kPsnrIdentical;
    const double mse = sum / static_cast<double>(x.size());
    return 10.0 * std::log10(peak * peak / mse);
}

double mae(const FringeImage& a, const FringeImage& b) {
    require_same_dims(a, b, "mae");
    if (a.empty()) throw ShapeError("mae: empty images");
    auto x = a.data();
    auto y = b.data();
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sum += std::abs(x[k] - y[k]);
    return sum / static_cast<double>(x.size());
}

namespace {

std::vector<double> gaussian_kernel(std::size_t n, double sigma) {
    std::vector<double> g(n);
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = static_cast<double>(k) - c;
        g[k] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += g[k];
    }
    for (double& v : g) v /= total;
    return g;
}

// Valid-mode separable filtering of a row-major w x h field.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::vector<double>& g) {
    const std::size_t n = g.size();
    const std::size_t ow = w - n + 1;
    const std::size_t oh = h - n + 1;
    std::vector<double> rows(ow * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += g[k] * src[y * w + x + k];
            rows[y * ow + x] = s;
        }
    }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += g[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

double ssim_mean(const FringeImage& a, const FringeImage& b, const SsimOptions& options) {
    require_same_dims(a, b, "ssim");
    const std::size_t n = options.window;
    if (n == 0 || !(options.sigma > 0.0)) throw ParameterError("ssim: window and sigma must be positive");
    if (a.width() < n || a.height() < n) {
        throw ShapeError("ssim: image " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " is smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
    }
    const std::size_t w = a.width();
    const std::size_t h = a.height();
    const auto g = gaussian_kernel(n, options.sigma);

    std::vector<double> x(a.data().begin(), a.data().end());
    std::vector<double> y(b.data().begin(), b.data().end());
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        xx[k] = x[k] * x[k];
        yy[k] = y[k] * y[k];
        xy[k] = x[k] * y[k];
    }
    const auto mx = filter_valid(x, w, h, g);
    const auto my = filter_valid(y, w, h, g);
    const auto sxx = filter_valid(xx, w, h, g);
    const auto syy = filter_valid(yy, w, h, g);
    const auto sxy = filter_valid(xy, w, h, g);

    const double c1 = std::pow(options.k1 * options.dynamic_range, 2);
    const double c2 = std::pow(options.k2 * options.dynamic_range, 2);
    double total = 0.0;
    for (std::size_t k = 0; k < mx.size(); ++k) {
        const double vx = sxx[k] - mx[k] * mx[k];
        const double vy = syy[k] - my[k] * my[k];
        const double cov = sxy[k] - mx[k] * my[k];
        const double num = (2.0 * mx[k] * my[k] + c1) * (2.0 * cov + c2);
        const double den = (mx[k] * mx[k] + my[k] * my[k] + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / static_cast<double>(mx.size());
}

MetricsReport compare(const FringeImage& reference, const FringeImage& test) {
    return {psnr(reference, test), ssim_mean(reference, test), mae(reference, test)};
}

}  // namespace fpd
