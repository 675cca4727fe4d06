#include <cmath>

#include "doctest.h"
#include "oracles.h"

#include "fpd/error.h"
#include "fpd/network.h"

using namespace fpd;
using oracle::central_difference;

namespace {

NetworkConfig small_config(StageWiring wiring = StageWiring::NoiseChain) {
    NetworkConfig c;
    c.stages = 2;
    c.layers_per_stage = 3;
    c.filters = 4;
    c.kernel = 5;
    c.wiring = wiring;
    return c;
}

NetworkParams<double> random_params(const NetworkConfig& c, std::uint64_t seed) {
    Rng rng(seed);
    auto p = build_network<double>(c, rng);
    std::mt19937_64 r2(seed + 1);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for_each_tensor(p, [&](const TensorInfo& info, std::vector<double>& data) {
        if (info.name.ends_with(".bias") || info.name.ends_with(".beta")) {
            for (double& v : data) v = u(r2);
        }
        if (info.name.ends_with(".gamma")) {
            for (double& v : data) v = 1.0 + u(r2);
        }
    });
    return p;
}

double loss_of(const Tensor4<double>& z, NetworkParams<double>& params, const NetworkConfig& c, const Tensor4<double>& y) {
    auto copy = params;
    return oracle::dot(network_forward(z, copy, c, nn::Mode::Train).residual, y);
}

}  // namespace

TEST_CASE("parameter layout") {
    SUBCASE("default configuration count by enumeration") {
        const NetworkConfig c;
        const auto p = zero_network<float>(c);
        const std::size_t per_stage = (64 * 25 + 64) + 6 * (64 * 64 * 25 + 64 + 2 * 64) + (64 * 25 + 1);
        CHECK(learnable_parameter_count(p) == 3 * per_stage);
        CHECK(learnable_parameter_count(c) == 3 * per_stage);
        CHECK(3 * per_stage == 1856451);
    }
    SUBCASE("minimal network shapes") {
        NetworkConfig c;
        c.stages = 1;
        c.layers_per_stage = 3;
        c.filters = 1;
        c.kernel = 1;
        const auto p = zero_network<double>(c);
        std::vector<std::string> names;
        std::vector<std::vector<std::size_t>> shapes;
        for_each_tensor(p, [&](const TensorInfo& info, const std::vector<double>&) {
            names.push_back(info.name);
            shapes.push_back(info.shape);
        });
        CHECK(names == std::vector<std::string>{"stage1.layer1.weight", "stage1.layer1.bias", "stage1.layer2.weight",
                                                "stage1.layer2.bias", "stage1.layer2.bn.gamma", "stage1.layer2.bn.beta",
                                                "stage1.layer2.bn.running_mean", "stage1.layer2.bn.running_var",
                                                "stage1.layer3.weight", "stage1.layer3.bias"});
        CHECK(shapes[0] == std::vector<std::size_t>{1, 1, 1, 1});
        CHECK(shapes[2] == std::vector<std::size_t>{1, 1, 1, 1});
        CHECK(shapes[4] == std::vector<std::size_t>{1});
        CHECK(shapes[8] == std::vector<std::size_t>{1, 1, 1, 1});
    }
    SUBCASE("deterministic initialization") {
        const NetworkConfig c = small_config();
        Rng a(5), b(5);
        const auto p = build_network<float>(c, a);
        CHECK(p == build_network<float>(c, b));
        for (const auto& s : p.stages) {
            for (float v : s.first.bias) CHECK(v == 0.0f);
            for (const auto& bn : s.middle_bn) {
                for (float v : bn.gamma) CHECK(v == 1.0f);
                for (float v : bn.beta) CHECK(v == 0.0f);
            }
        }
    }
    SUBCASE("invalid configurations") {
        NetworkConfig c;
        c.layers_per_stage = 2;
        CHECK_THROWS_AS(c.validate(), ParameterError);
        c = NetworkConfig{};
        c.stages = 0;
        CHECK_THROWS_AS(c.validate(), ParameterError);
        c = NetworkConfig{};
        c.kernel = 4;
        CHECK_THROWS_AS(c.validate(), ParameterError);
    }
    SUBCASE("json round trip") {
        NetworkConfig c = small_config(StageWiring::ImageChain);
        c.alpha_first = 0.0;
        CHECK(network_config_from_json(to_json(c)) == c);
        auto doc = to_json(c);
        doc["stage_wiring"] = "sideways";
        CHECK_THROWS_AS(network_config_from_json(doc), DataError);
    }
    SUBCASE("layout checks") {
        const auto p = zero_network<float>(small_config());
        NetworkConfig other = small_config();
        other.stages = 3;
        CHECK_THROWS_AS(check_layout(p, other), ShapeError);
        CHECK_NOTHROW(check_layout(p, small_config()));
    }
}

TEST_CASE("network forward") {
    const NetworkConfig c = small_config();
    SUBCASE("zero map") {
        auto p = zero_network<double>(c);
        std::mt19937_64 rng(1);
        const auto z = oracle::random_tensor({2, 1, 9, 9}, rng, 100.0);
        const auto v = network_forward(z, p, c, nn::Mode::Train).residual;
        for (double x : v.data()) CHECK(x == 0.0);
    }
    SUBCASE("spatial dims are preserved") {
        auto p = random_params(c, 2);
        for (auto [h, w] : {std::pair<std::size_t, std::size_t>{80, 80}, {105, 140}}) {
            Tensor4<double> z(1, 1, h, w, 3.0);
            CHECK(network_infer(z, p, c).shape() == z.shape());
        }
    }
    SUBCASE("one stage equals the stage alone") {
        NetworkConfig one = c;
        one.stages = 1;
        auto p = random_params(one, 3);
        auto q = p;
        std::mt19937_64 rng(3);
        const auto z = oracle::random_tensor({2, 1, 10, 10}, rng, 50.0);
        const auto net = network_forward(z, p, one, nn::Mode::Train).residual;
        const auto stage = stage_forward(z, q.stages[0], one, nn::Mode::Train, static_cast<StageCache<double>*>(nullptr));
        CHECK(net == stage);
        CHECK(p == q);
    }
    SUBCASE("multi-channel input is rejected") {
        auto p = random_params(c, 4);
        CHECK_THROWS_AS(network_infer(Tensor4<double>(1, 2, 8, 8), p, c), ShapeError);
    }
    SUBCASE("inference ignores batch composition") {
        auto p = random_params(c, 5);
        std::mt19937_64 rng(5);
        const auto a = oracle::random_tensor({1, 1, 12, 12}, rng, 100.0);
        const auto b = oracle::random_tensor({1, 1, 12, 12}, rng, 100.0);
        Tensor4<double> both(2, 1, 12, 12);
        std::copy(a.data().begin(), a.data().end(), both.sample(0).begin());
        std::copy(b.data().begin(), b.data().end(), both.sample(1).begin());
        const auto alone = network_infer(a, p, c);
        const auto batched = network_infer(both, p, c);
        for (std::size_t k = 0; k < alone.size(); ++k) CHECK(alone.data()[k] == doctest::Approx(batched.data()[k]).epsilon(1e-12));
    }
    SUBCASE("receptive field") {
        NetworkConfig rc = c;
        rc.kernel = 3;
        auto p = random_params(rc, 6);
        std::mt19937_64 rng(6);
        auto z = oracle::random_tensor({1, 1, 31, 31}, rng, 10.0);
        const auto before = network_infer(z, p, rc);
        z.at(0, 0, 15, 15) += 7.0;
        const auto after = network_infer(z, p, rc);
        const long r = static_cast<long>(rc.receptive_radius());
        CHECK(r == 6);
        bool inside_changed = false;
        for (long y = 0; y < 31; ++y) {
            for (long x = 0; x < 31; ++x) {
                const bool outside = std::abs(y - 15) > r || std::abs(x - 15) > r;
                const double d = after.at(0, 0, y, x) - before.at(0, 0, y, x);
                if (outside) CHECK(d == 0.0);
                if (!outside && d != 0.0) inside_changed = true;
            }
        }
        CHECK(inside_changed);
    }
    SUBCASE("translation covariance away from the border") {
        auto p = random_params(c, 7);
        std::mt19937_64 rng(7);
        const auto z = oracle::random_tensor({1, 1, 48, 48}, rng, 50.0);
        Tensor4<double> shifted(z.shape());
        const std::size_t dy = 3, dx = 5;
        for (std::size_t y = dy; y < 48; ++y) {
            for (std::size_t x = dx; x < 48; ++x) shifted.at(0, 0, y, x) = z.at(0, 0, y - dy, x - dx);
        }
        const auto a = network_infer(z, p, c);
        const auto b = network_infer(shifted, p, c);
        const std::size_t r = c.receptive_radius();
        for (std::size_t y = r + dy; y + r < 48; ++y) {
            for (std::size_t x = r + dx; x + r < 48; ++x) {
                CHECK(b.at(0, 0, y, x) == doctest::Approx(a.at(0, 0, y - dy, x - dx)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("network backward") {
    SUBCASE("zero upstream gradient") {
        const NetworkConfig c = small_config();
        auto p = random_params(c, 8);
        std::mt19937_64 rng(8);
        const auto z = oracle::random_tensor({2, 1, 8, 8}, rng, 10.0);
        const auto fwd = network_forward(z, p, c, nn::Mode::Train);
        const auto g = network_backward(fwd.cache, Tensor4<double>(z.shape()), p, c);
        for_each_tensor(g, [](const TensorInfo&, const std::vector<double>& data) {
            for (double v : data) CHECK(v == 0.0);
        });
    }
    SUBCASE("inference cache is rejected") {
        const NetworkConfig c = small_config();
        auto p = random_params(c, 9);
        const Tensor4<double> z(1, 1, 8, 8, 1.0);
        const auto fwd = network_forward(z, p, c, nn::Mode::Infer);
        CHECK_THROWS_AS(network_backward(fwd.cache, z, p, c), ContractError);
    }
    for (StageWiring wiring : {StageWiring::NoiseChain, StageWiring::ImageChain}) {
        CAPTURE(static_cast<int>(wiring));
        const NetworkConfig c = small_config(wiring);
        auto p = random_params(c, 10);
        std::mt19937_64 rng(10);
        const auto z = oracle::random_tensor({2, 1, 12, 12}, rng, 5.0);
        const auto y = oracle::random_tensor(z.shape(), rng);
        auto copy = p;
        const auto fwd = network_forward(z, copy, c, nn::Mode::Train);
        const auto g = network_backward(fwd.cache, y, p, c);

        std::vector<std::vector<double>*> params;
        std::vector<const std::vector<double>*> grads;
        std::vector<std::string> names;
        for_each_tensor(p, [&](const TensorInfo& info, std::vector<double>& d) {
            if (info.learnable) {
                params.push_back(&d);
                names.push_back(info.name);
            }
        });
        for_each_tensor(g, [&](const TensorInfo& info, const std::vector<double>& d) {
            if (info.learnable) grads.push_back(&d);
        });
        // Conv biases feeding a BN layer have zero true gradient; their error is
        // measured against the largest gradient instead of against zero.
        double scale = 0.0;
        for (const auto* gt : grads)
            for (double v : *gt) scale = std::max(scale, std::abs(v));
        double worst = 0.0;
        std::string worst_name;
        for (std::size_t t = 0; t < params.size(); ++t) {
            for (std::size_t i = 0; i < params[t]->size(); i += 7) {
                const double fd = central_difference([&] { return loss_of(z, p, c, y); }, (*params[t])[i], 1e-5);
                const double a = (*grads[t])[i];
                const double e = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6 * scale});
                if (e > worst) {
                    worst = e;
                    worst_name = names[t];
                }
            }
        }
        CAPTURE(worst_name);
        CHECK(worst < 1e-4);

        double stage1 = 0.0;
        for (double v : g.stages[0].first.weights) stage1 += std::abs(v);
        CHECK(stage1 > 0.0);
    }
}

TEST_CASE("denoise") {
    const NetworkConfig c = small_config();
    SUBCASE("zero network is the identity") {
        const auto p = zero_network<float>(c);
        FringeImage z(13, 11);
        for (std::size_t k = 0; k < z.size(); ++k) z.data()[k] = std::sin(0.37 * k) * 100.0 + 100.0;
        CHECK(denoise(z, p, c) == z);
    }
    SUBCASE("too small for the kernel") {
        const auto p = zero_network<float>(c);
        CHECK_THROWS_AS(denoise(FringeImage(4, 9), p, c), ShapeError);
    }
    SUBCASE("subtracts the residual without clamping") {
        auto p = zero_network<double>(c);
        p.stages[1].last.bias[0] = -40.0;
        FringeImage z(8, 8, 250.0);
        const FringeImage x = denoise(z, p, c);
        for (double v : x.data()) CHECK(v == 290.0);
    }
}
