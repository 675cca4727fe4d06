#include "fpd/cli.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fpd/binary_io.h"
#include "fpd/checkpoint.h"
#include "fpd/error.h"
#include "fpd/hash.h"
#include "fpd/image_io.h"
#include "fpd/packed_dataset.h"
#include "fpd/quality.h"
#include "fpd/run_config.h"
#include "fpd/simulate.h"
#include "fpd/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fpd {

std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_json(const json& doc, const std::string& path) {
    const std::string text = doc.dump(2) + "\n";
    binio::write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

RunConfig resolve_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    if (!config_path.empty()) return load_run_config(config_path, seed);
    if (!seed) throw UsageError("either --config or --seed is required");
    return default_run_config(*seed);
}

std::string pair_name(std::size_t id, const char* member) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%05zu_%s.fpd", id, member);
    return buf;
}

// --------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::size_t count = 0;
    std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
    const RunConfig run = resolve_config(a.config, a.seed);
    const CorpusConfig& cfg = run.simulate;
    cfg.validate();
    fs::create_directories(a.out);

    json pairs = json::array();
    auto emit = [&](const SimulatedPair& p) {
        const std::string clean = pair_name(p.record.id, "clean");
        const std::string noisy = pair_name(p.record.id, "noisy");
        const auto clean_bytes = encode_fpd1(p.clean);
        const auto noisy_bytes = encode_fpd1(p.noisy);
        binio::write_file_atomic((fs::path(a.out) / clean).string(), clean_bytes);
        binio::write_file_atomic((fs::path(a.out) / noisy).string(), noisy_bytes);
        pairs.push_back({{"record", to_json(p.record)},
                         {"clean", clean},
                         {"clean_sha256", sha256_hex(clean_bytes)},
                         {"noisy", noisy},
                         {"noisy_sha256", sha256_hex(noisy_bytes)}});
    };

    const auto selected = awgn_selection(cfg, run.seed, a.count);
    for (std::size_t id = 0; id < a.count; ++id) {
        SimulatedPair p = simulate_pair(cfg, run.seed, id);
        if (cfg.awgn_mode == AwgnMode::InPlace && std::binary_search(selected.begin(), selected.end(), id)) {
            p = make_awgn_pair(cfg, run.seed, p, id);
        }
        emit(p);
    }
    if (cfg.awgn_mode == AwgnMode::Extra) {
        std::size_t next = a.count;
        for (std::size_t id : selected) emit(make_awgn_pair(cfg, run.seed, simulate_pair(cfg, run.seed, id), next++));
    }

    const json manifest = {{"command", "simulate"},
                           {"seed", run.seed},
                           {"count", a.count},
                           {"config", to_json(run)},
                           {"width", cfg.width},
                           {"height", cfg.height},
                           {"pairs", pairs}};
    write_json(manifest, (fs::path(a.out) / "manifest.json").string());
    out << "simulated " << pairs.size() << " pairs into " << a.out << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------------

struct DatasetArgs {
    std::string corpus;
    std::string out;
    std::string config;
    std::optional<std::size_t> patch;
    std::optional<std::size_t> stride;
    std::optional<std::uint64_t> seed;
};

int run_dataset(const DatasetArgs& a, std::ostream& out) {
    const std::string corpus_manifest_path = (fs::path(a.corpus) / "manifest.json").string();
    const json corpus = read_json(corpus_manifest_path);
    std::optional<std::uint64_t> seed = a.seed;
    if (!seed && a.config.empty()) {
        if (!corpus.contains("seed") || !corpus.at("seed").is_number_unsigned()) throw DataError("corpus manifest has no seed");
        seed = corpus.at("seed").get<std::uint64_t>();
    }
    RunConfig run = resolve_config(a.config, seed);
    if (a.patch) run.dataset.patch_size = *a.patch;
    if (a.stride) run.dataset.stride = *a.stride;
    run.dataset.validate();

    std::vector<std::string> clean_files;
    std::vector<std::string> noisy_files;
    std::vector<ImageDims> dims;
    try {
        const std::size_t w = corpus.at("width").get<std::size_t>();
        const std::size_t h = corpus.at("height").get<std::size_t>();
        for (const auto& p : corpus.at("pairs")) {
            clean_files.push_back((fs::path(a.corpus) / p.at("clean").get<std::string>()).string());
            noisy_files.push_back((fs::path(a.corpus) / p.at("noisy").get<std::string>()).string());
            dims.push_back({w, h});
        }
    } catch (const json::exception& e) {
        throw DataError("corpus manifest is malformed: " + std::string(e.what()));
    }

    const auto records = plan_patches(dims, run.dataset);
    write_packed_dataset_streaming(a.out, run.dataset.patch_size, run.dataset.stride, records, [&](std::size_t id) {
        ImagePair pair{read_image(clean_files[id]), read_image(noisy_files[id])};
        if (pair.clean.width() != dims[id].width || pair.clean.height() != dims[id].height) {
            throw DataError("corpus image " + clean_files[id] + " does not match the manifest dimensions");
        }
        return pair;
    });

    const json manifest = {{"command", "dataset"},
                           {"seed", run.seed},
                           {"config", to_json(run)},
                           {"corpus_manifest_sha256", sha256_file(corpus_manifest_path)},
                           {"source_images", dims.size()},
                           {"patch_count", records.size()},
                           {"artifacts", json::array({{{"path", fs::path(a.out).filename().string()}, {"sha256", sha256_file(a.out)}}})}};
    write_json(manifest, a.out + ".manifest.json");
    out << "wrote " << records.size() << " patch pairs to " << a.out << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::string resume;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a, std::ostream& out) {
    RunConfig run = resolve_config(a.config, a.seed);
    if (a.epochs) run.train.epochs = *a.epochs;
    run.train.checkpoint_dir = a.out;
    run.network.validate();
    run.train.validate();
    const PatchDataset data = read_packed_dataset(a.data);

    std::optional<TrainState> resume;
    if (!a.resume.empty()) {
        const Checkpoint ckpt = load_checkpoint(a.resume, run.network);
        if (ckpt.train.seed != run.seed || train_config_digest(ckpt.train) != train_config_digest(run.train)) {
            throw DataError("checkpoint '" + a.resume + "' was trained with different settings or seed");
        }
        resume = to_train_state(ckpt);
    }

    fs::create_directories(a.out);
    const std::string log_path = (fs::path(a.out) / "train_log.csv").string();
    const bool append = resume && fs::exists(log_path);
    std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw Error("cannot open '" + log_path + "'");
    if (!append) write_log_header(log);

    const TrainResult result = train(data, run.network, run.train, resume ? &*resume : nullptr, [&](const EpochLog& row) {
        write_log_row(log, row);
        log.flush();
        write_log_row(out, row);
    });

    json checkpoints = json::array();
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a.out)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("epoch_") && name.ends_with(".fpdc")) names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        checkpoints.push_back({{"path", name}, {"sha256", sha256_file((fs::path(a.out) / name).string())}});
    }
    const json manifest = {{"command", "train"},
                           {"seed", run.seed},
                           {"config", to_json(run)},
                           {"data_sha256", sha256_file(a.data)},
                           {"epochs_completed", result.state.epoch},
                           {"checkpoints", checkpoints}};
    write_json(manifest, (fs::path(a.out) / "manifest.json").string());
    return kExitOk;
}

// --------------------------------------------------------------------------

int run_denoise(const std::string& model, const std::string& in, const std::string& dst, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(model);
    const FringeImage z = read_image(in);
    const FringeImage x = denoise(z, ckpt.params, ckpt.network);
    write_image(x, dst);
    out << "denoised " << in << " -> " << dst << "\n";
    return kExitOk;
}

int run_metrics(const std::string& ref, const std::string& test, const std::string& config, const std::string& format,
                std::ostream& out) {
    EvalConfig eval;
    if (!config.empty()) {
        const json doc = read_json(config);
        if (doc.is_object() && doc.contains("eval")) eval = eval_config_from_json(doc.at("eval"));
    }
    const FringeImage a = read_image(ref);
    const FringeImage b = read_image(test);
    const auto t0 = std::chrono::steady_clock::now();
    const MetricsReport r{psnr(a, b, eval.psnr_peak), ssim_mean(a, b, eval.ssim), mae(a, b)};
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (format == "table") {
        out << "Average quantification results\n";
        out << std::left << std::setw(8) << "PSNR" << format_metric(r.psnr) << " dB\n";
        out << std::setw(8) << "SSIM" << format_metric(r.ssim) << "\n";
        out << std::setw(8) << "MAE" << format_metric(r.mae) << "\n";
        out << std::setw(8) << "Time" << format_metric(seconds) << " s\n";
    } else {
        out << "psnr,ssim,mae,seconds\n";
        out << format_metric(r.psnr) << ',' << format_metric(r.ssim) << ',' << format_metric(r.mae) << ','
            << format_metric(seconds) << "\n";
    }
    return kExitOk;
}

int run_skeletonize(const std::string& in, const std::string& dst, std::ostream& out) {
    const FringeImage img = read_image(in);
    const BinaryImage skeleton = thin(binarize(img));
    write_image(to_fringe_image(skeleton), dst);
    out << "skeleton pixels: " << skeleton.count() << "\n";
    return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fringe pattern denoising: simulation, training, inference and evaluation", "fpdnet"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Render clean/noisy speckle fringe pairs");
    simulate->add_option("--config", sim.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--count", sim.count, "Number of speckle pairs")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "Master seed (overrides the config)");

    DatasetArgs ds;
    auto* dataset = app.add_subcommand("dataset", "Cut a simulated corpus into aligned patch pairs");
    dataset->add_option("--corpus", ds.corpus, "Corpus directory written by simulate")->required()->check(CLI::ExistingDirectory);
    dataset->add_option("--out", ds.out, "Packed dataset file")->required();
    dataset->add_option("--config", ds.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    dataset->add_option("--patch", ds.patch, "Patch size in pixels")->check(CLI::PositiveNumber);
    dataset->add_option("--stride", ds.stride, "Grid stride in pixels")->check(CLI::PositiveNumber);
    dataset->add_option("--seed", ds.seed, "Master seed (defaults to the corpus seed)");

    TrainArgs tr;
    auto* training = app.add_subcommand("train", "Train the network on a packed dataset");
    training->add_option("--data", tr.data, "Packed dataset file")->required()->check(CLI::ExistingFile);
    training->add_option("--config", tr.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    training->add_option("--out", tr.out, "Checkpoint and log directory")->required();
    training->add_option("--resume", tr.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
    training->add_option("--epochs", tr.epochs, "Total epochs (overrides the config)");
    training->add_option("--seed", tr.seed, "Master seed (overrides the config)");

    std::string model, den_in, den_out;
    auto* denoise_cmd = app.add_subcommand("denoise", "Denoise an image with a trained checkpoint");
    denoise_cmd->add_option("--model", model, "Checkpoint file")->required()->check(CLI::ExistingFile);
    denoise_cmd->add_option("--in", den_in, "Noisy image (PGM or FPD1)")->required()->check(CLI::ExistingFile);
    denoise_cmd->add_option("--out", den_out, "Output image (.pgm for 8-bit, otherwise FPD1)")->required();

    std::string ref, test, met_config, format = "csv";
    auto* metrics = app.add_subcommand("metrics", "PSNR, mean SSIM and MAE of a test image against a reference");
    metrics->add_option("--ref", ref, "Reference image")->required()->check(CLI::ExistingFile);
    metrics->add_option("--test", test, "Test image")->required()->check(CLI::ExistingFile);
    metrics->add_option("--config", met_config, "Run configuration (JSON); only the eval section is used")->check(CLI::ExistingFile);
    metrics->add_option("--format", format, "csv or table")->check(CLI::IsMember({"csv", "table"}));

    std::string sk_in, sk_out;
    auto* skeletonize = app.add_subcommand("skeletonize", "Otsu binarization followed by Zhang-Suen thinning");
    skeletonize->add_option("--in", sk_in, "Input image")->required()->check(CLI::ExistingFile);
    skeletonize->add_option("--out", sk_out, "Skeleton image, foreground 255")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim, out);
        if (dataset->parsed()) return run_dataset(ds, out);
        if (training->parsed()) return run_train(tr, out);
        if (denoise_cmd->parsed()) return run_denoise(model, den_in, den_out, out);
        if (metrics->parsed()) return run_metrics(ref, test, met_config, format, out);
        if (skeletonize->parsed()) return run_skeletonize(sk_in, sk_out, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace fpd
