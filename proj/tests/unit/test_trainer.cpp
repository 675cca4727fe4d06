#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.h"

#include "fpd/binary_io.h"
#include "fpd/checkpoint.h"
#include "fpd/error.h"
#include "fpd/simulate.h"
#include "fpd/trainer.h"

using namespace fpd;
namespace fs = std::filesystem;

namespace {

NetworkConfig tiny_net() {
    NetworkConfig c;
    c.stages = 1;
    c.layers_per_stage = 3;
    c.filters = 4;
    c.kernel = 3;
    return c;
}

PatchDataset tiny_dataset(std::size_t images = 4, std::size_t size = 32) {
    CorpusConfig cfg;
    cfg.width = size;
    cfg.height = size;
    const auto corpus = simulate_corpus(cfg, 21, images);
    std::vector<ImagePair> pairs;
    for (const auto& p : corpus) pairs.push_back({p.clean, p.noisy});
    DatasetOptions opt;
    opt.patch_size = 16;
    opt.stride = 8;
    return build_dataset(pairs, opt);
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fpd_trainer_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("euclidean loss") {
    SUBCASE("perfect residual") {
        std::mt19937_64 rng(1);
        const auto z = oracle::random_tensor({3, 1, 4, 4}, rng, 100.0);
        const auto x = oracle::random_tensor({3, 1, 4, 4}, rng, 100.0);
        Tensor4<double> v(z.shape());
        for (std::size_t k = 0; k < v.size(); ++k) v.data()[k] = z.data()[k] - x.data()[k];
        const auto r = euclid_loss(v, z, x);
        CHECK(r.loss == 0.0);
        for (double g : r.grad.data()) CHECK(g == 0.0);
    }
    SUBCASE("frobenius arithmetic") {
        const Tensor4<double> z(Shape4{1, 1, 4, 4}, 1.0);
        const Tensor4<double> x(Shape4{1, 1, 4, 4}, 0.0);
        const Tensor4<double> v(Shape4{1, 1, 4, 4}, 0.0);
        CHECK(euclid_loss(v, z, x).loss == 8.0);
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(2);
        auto v = oracle::random_tensor({3, 1, 5, 5}, rng, 3.0);
        const auto z = oracle::random_tensor(v.shape(), rng, 3.0);
        const auto x = oracle::random_tensor(v.shape(), rng, 3.0);
        const auto r = euclid_loss(v, z, x);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double fd = oracle::central_difference([&] { return euclid_loss(v, z, x).loss; }, v.data()[i], 1e-5);
            CHECK(oracle::relative_error(r.grad.data()[i], fd) < 1e-6);
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(euclid_loss(Tensor4<double>(1, 1, 2, 2), Tensor4<double>(1, 1, 2, 3), Tensor4<double>(1, 1, 2, 2)),
                        ShapeError);
    }
    SUBCASE("invariant under reordering within the batch") {
        std::mt19937_64 rng(3);
        const auto v = oracle::random_tensor({4, 1, 3, 3}, rng);
        const auto z = oracle::random_tensor(v.shape(), rng);
        const auto x = oracle::random_tensor(v.shape(), rng);
        auto permute = [](const Tensor4<double>& t) {
            Tensor4<double> out(t.shape());
            const std::size_t order[4] = {2, 0, 3, 1};
            for (std::size_t b = 0; b < 4; ++b) std::copy(t.sample(order[b]).begin(), t.sample(order[b]).end(), out.sample(b).begin());
            return out;
        };
        CHECK(euclid_loss(permute(v), permute(z), permute(x)).loss == doctest::Approx(euclid_loss(v, z, x).loss).epsilon(1e-14));
    }
}

TEST_CASE("adam") {
    NetworkConfig c;
    c.stages = 1;
    c.layers_per_stage = 3;
    c.filters = 1;
    c.kernel = 1;
    TrainConfig cfg;
    SUBCASE("first step with unit gradient") {
        auto p = zero_network<double>(c);
        auto g = zeros_like(p);
        for_each_tensor(g, [](const TensorInfo& info, std::vector<double>& d) {
            if (info.learnable) std::fill(d.begin(), d.end(), 1.0);
        });
        auto state = adam_init(p);
        const auto before = p;
        adam_step(p, g, state, cfg);
        CHECK(state.step == 1);
        std::vector<double> now, then;
        for_each_tensor(p, [&](const TensorInfo& info, const std::vector<double>& d) {
            if (info.learnable) now.insert(now.end(), d.begin(), d.end());
        });
        for_each_tensor(before, [&](const TensorInfo& info, const std::vector<double>& d) {
            if (info.learnable) then.insert(then.end(), d.begin(), d.end());
        });
        for (std::size_t k = 0; k < now.size(); ++k) {
            CHECK(now[k] - then[k] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-9));
        }
        CHECK(p.stages[0].middle_bn[0].running_mean == before.stages[0].middle_bn[0].running_mean);
        CHECK(p.stages[0].middle_bn[0].running_var == before.stages[0].middle_bn[0].running_var);
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        Rng rng(4);
        auto p = build_network<double>(c, rng);
        const auto before = p;
        auto state = adam_init(p);
        adam_step(p, zeros_like(p), state, cfg);
        CHECK(p == before);
    }
    SUBCASE("scalar quadratic") {
        // f(w) = w^2 / 2 on the single first-layer weight; every other gradient stays zero.
        auto p = zero_network<double>(c);
        p.stages[0].first.weights[0] = 1.0;
        auto state = adam_init(p);
        TrainConfig q = cfg;
        q.learning_rate = 0.1;
        for (int k = 0; k < 100; ++k) {
            auto g = zeros_like(p);
            g.stages[0].first.weights[0] = p.stages[0].first.weights[0];
            adam_step(p, g, state, q);
        }
        CHECK(std::abs(p.stages[0].first.weights[0]) < 0.05);
    }
}

TEST_CASE("a small step decreases the loss on its batch") {
    const NetworkConfig net = tiny_net();
    const PatchDataset data = tiny_dataset(2);
    TrainConfig cfg;
    cfg.learning_rate = 1e-5;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        auto p = build_network<double>(net, rng);
        Tensor4<double> z(8, 1, 16, 16), x(8, 1, 16, 16);
        for (std::size_t b = 0; b < 8; ++b) {
            auto zn = data.noisy(b * 2 + seed % 2);
            auto xc = data.clean(b * 2 + seed % 2);
            std::copy(zn.begin(), zn.end(), z.sample(b).begin());
            std::copy(xc.begin(), xc.end(), x.sample(b).begin());
        }
        auto fwd = network_forward(z, p, net, nn::Mode::Train);
        const auto loss = euclid_loss(fwd.residual, z, x);
        const auto g = network_backward(fwd.cache, loss.grad, p, net);
        auto state = adam_init(p);
        adam_step(p, g, state, cfg);
        const double after = euclid_loss(network_forward(z, p, net, nn::Mode::Train).residual, z, x).loss;
        CHECK(after < loss.loss);
    }
}

TEST_CASE("held-out split by source image") {
    const PatchDataset data = tiny_dataset(10);
    const DataSplit s = split_by_source(data, 0.1, 3);
    CHECK(s.train.size() + s.heldout.size() == data.size());
    std::set<std::uint32_t> held, trained;
    for (auto k : s.heldout) held.insert(data.records()[k].source_id);
    for (auto k : s.train) trained.insert(data.records()[k].source_id);
    CHECK(held.size() == 1);
    for (auto id : held) CHECK(trained.count(id) == 0);
    CHECK(split_by_source(data, 0.0, 3).heldout.empty());
}

TEST_CASE("training loop") {
    const NetworkConfig net = tiny_net();
    const PatchDataset data = tiny_dataset(4);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.heldout_fraction = 0.25;
    cfg.seed = 9;

    SUBCASE("batch larger than the training split") {
        TrainConfig big = cfg;
        big.batch_size = 1000;
        CHECK_THROWS_AS(train(data, net, big), ParameterError);
    }
    SUBCASE("zero learning rate keeps learnable parameters") {
        TrainConfig frozen = cfg;
        frozen.learning_rate = 0.0;
        frozen.epochs = 1;
        const TrainState init = initial_state(net, frozen);
        const TrainResult r = train(data, net, frozen);
        auto a = r.state.params;
        auto b = init.params;
        for (std::size_t s = 0; s < a.stages.size(); ++s) {
            CHECK(a.stages[s].first == b.stages[s].first);
            CHECK(a.stages[s].middle_conv == b.stages[s].middle_conv);
            CHECK(a.stages[s].last == b.stages[s].last);
            for (std::size_t l = 0; l < a.stages[s].middle_bn.size(); ++l) {
                CHECK(a.stages[s].middle_bn[l].gamma == b.stages[s].middle_bn[l].gamma);
                CHECK(a.stages[s].middle_bn[l].beta == b.stages[s].middle_bn[l].beta);
            }
        }
    }
    SUBCASE("log rows") {
        std::vector<EpochLog> seen;
        const TrainResult r = train(data, net, cfg, nullptr, [&](const EpochLog& row) { seen.push_back(row); });
        CHECK(seen.size() == 2);
        CHECK(r.state.epoch == 2);
        const DataSplit split = split_by_source(data, cfg.heldout_fraction, cfg.seed);
        CHECK(split.train.size() == 27);
        CHECK(r.state.adam.step == 2 * (27 / 8));
        for (const auto& row : seen) {
            CHECK(row.evaluated);
            CHECK(std::isfinite(row.mean_loss));
            CHECK(row.metrics.mae > 0.0);
        }
        std::ostringstream csv;
        write_log_header(csv);
        write_log_row(csv, seen[0]);
        CHECK(csv.str().rfind("epoch,mean_loss,psnr,ssim,mae,seconds\n1,", 0) == 0);
    }
    SUBCASE("resume equals an uninterrupted run") {
        const fs::path dir = temp_dir("resume");
        TrainConfig three = cfg;
        three.epochs = 3;
        const TrainResult full = train(data, net, three);

        TrainConfig two = cfg;
        two.epochs = 2;
        two.checkpoint_dir = dir.string();
        train(data, net, two);
        const Checkpoint ckpt = load_checkpoint(checkpoint_path(dir.string(), 2), net);
        CHECK(ckpt.epoch == 2);
        const TrainState state = to_train_state(ckpt);
        const TrainResult resumed = train(data, net, three, &state);
        CHECK(resumed.state.params == full.state.params);
        CHECK(resumed.state.adam.m == full.state.adam.m);
        CHECK(resumed.state.adam.v == full.state.adam.v);
        CHECK(resumed.state.adam.step == full.state.adam.step);
        CHECK(resumed.log.size() == 1);
        CHECK(resumed.log[0].mean_loss == full.log[2].mean_loss);
        fs::remove_all(dir);
    }
}

TEST_CASE("checkpoint files") {
    const NetworkConfig net = tiny_net();
    TrainConfig cfg;
    cfg.seed = 17;
    Checkpoint ckpt{net, cfg, 4, {}, {}};
    TrainState st = initial_state(net, cfg);
    ckpt.params = st.params;
    ckpt.adam = st.adam;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for_each_tensor(ckpt.params, [&](const TensorInfo&, std::vector<float>& d) {
        for (float& v : d) v = u(rng);
    });
    for_each_tensor(ckpt.adam.m, [&](const TensorInfo&, std::vector<float>& d) {
        for (float& v : d) v = u(rng);
    });
    for_each_tensor(ckpt.adam.v, [&](const TensorInfo& info, std::vector<float>& d) {
        for (float& v : d) v = info.learnable ? std::abs(u(rng)) : 0.0f;
    });
    for_each_tensor(ckpt.adam.m, [&](const TensorInfo& info, std::vector<float>& d) {
        if (!info.learnable) std::fill(d.begin(), d.end(), 0.0f);
    });
    ckpt.adam.step = 77;
    const fs::path dir = temp_dir("ckpt");
    const std::string path = (dir / "a.fpdc").string();

    SUBCASE("round trip") {
        save_checkpoint(ckpt, path);
        const Checkpoint back = load_checkpoint(path);
        CHECK(back.network == net);
        CHECK(back.epoch == 4);
        CHECK(back.train.seed == 17);
        CHECK(back.params == ckpt.params);
        CHECK(back.adam.m == ckpt.adam.m);
        CHECK(back.adam.v == ckpt.adam.v);
        CHECK(back.adam.step == 77);
        CHECK(encode_checkpoint(back) == binio::read_file(path));
        CHECK_FALSE(fs::exists(path + ".tmp"));
    }
    SUBCASE("distinct failure kinds") {
        auto bytes = encode_checkpoint(ckpt);
        auto kind_of = [](const std::vector<std::uint8_t>& b) {
            try {
                decode_checkpoint(b);
            } catch (const CheckpointError& e) {
                return e.kind();
            }
            FAIL("no error");
            return CheckpointErrorKind::Malformed;
        };
        auto bad_magic = bytes;
        bad_magic[0] = 'X';
        CHECK(kind_of(bad_magic) == CheckpointErrorKind::BadMagic);
        auto bad_version = bytes;
        bad_version[4] = 9;
        CHECK(kind_of(bad_version) == CheckpointErrorKind::UnsupportedVersion);
        auto truncated = bytes;
        truncated.resize(truncated.size() - 5);
        CHECK(kind_of(truncated) == CheckpointErrorKind::Truncated);
        auto header_cut = bytes;
        header_cut.resize(20);
        CHECK(kind_of(header_cut) == CheckpointErrorKind::Truncated);

        save_checkpoint(ckpt, path);
        NetworkConfig other = net;
        other.stages = 2;
        try {
            load_checkpoint(path, other);
            FAIL("no error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind() == CheckpointErrorKind::ArchitectureMismatch);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("train config json") {
    TrainConfig c;
    c.batch_size = 32;
    c.learning_rate = 5e-4;
    const TrainConfig back = train_config_from_json(to_json(c));
    CHECK(back.batch_size == 32);
    CHECK(back.learning_rate == 5e-4);
    auto doc = to_json(c);
    doc["momentum"] = 0.5;
    CHECK_THROWS_AS(train_config_from_json(doc), DataError);
    doc = to_json(c);
    doc["batch_size"] = 1;
    CHECK_THROWS_AS(train_config_from_json(doc), ParameterError);
    TrainConfig longer = c;
    longer.epochs = 99;
    CHECK(train_config_digest(longer) == train_config_digest(c));
    longer.learning_rate = 1e-2;
    CHECK(train_config_digest(longer) != train_config_digest(c));
}
