#pragma once

// Independent reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "fpd/layers.h"
#include "fpd/tensor.h"

namespace oracle {

using fpd::Tensor4;

inline Tensor4<double> random_tensor(fpd::Shape4 s, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Tensor4<double> t(s);
    for (double& v : t.data()) v = u(rng);
    return t;
}

inline void randomize(std::vector<double>& v, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& x : v) x = u(rng);
}

// Six nested loops over the zero-padded input.
inline Tensor4<double> naive_conv(const Tensor4<double>& in, const fpd::nn::ConvParams<double>& p) {
    const long k = static_cast<long>(p.kernel);
    const long pad = k / 2;
    const long h = static_cast<long>(in.height());
    const long w = static_cast<long>(in.width());
    Tensor4<double> out(in.batch(), p.out_channels, in.height(), in.width());
    for (std::size_t b = 0; b < in.batch(); ++b) {
        for (std::size_t m = 0; m < p.out_channels; ++m) {
            for (long y = 0; y < h; ++y) {
                for (long x = 0; x < w; ++x) {
                    double s = p.bias[m];
                    for (std::size_t c = 0; c < p.in_channels; ++c) {
                        for (long u = 0; u < k; ++u) {
                            for (long v = 0; v < k; ++v) {
                                const long yy = y + u - pad;
                                const long xx = x + v - pad;
                                if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
                                s += p.weights[((m * p.in_channels + c) * p.kernel + u) * p.kernel + v] *
                                     in.at(b, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                            }
                        }
                    }
                    out.at(b, m, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
                }
            }
        }
    }
    return out;
}

inline double dot(const Tensor4<double>& a, const Tensor4<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a.data()[k] * b.data()[k];
    return s;
}

// Central difference of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
    const double keep = x;
    x = keep + h;
    const double up = f();
    x = keep - h;
    const double down = f();
    x = keep;
    return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

}  // namespace oracle
