#include "fpd/run_config.h"

#include <fstream>
#include <sstream>

#include "fpd/error.h"
#include "fpd/json_util.h"

namespace fpd {

nlohmann::json to_json(const EvalConfig& c) {
    return {{"psnr_peak", c.psnr_peak},
            {"ssim_window", c.ssim.window},
            {"ssim_sigma", c.ssim.sigma},
            {"ssim_k1", c.ssim.k1},
            {"ssim_k2", c.ssim.k2},
            {"ssim_dynamic_range", c.ssim.dynamic_range}};
}

EvalConfig eval_config_from_json(const nlohmann::json& doc) {
    using namespace json_util;
    require_object(doc, "eval");
    reject_unknown_keys(doc, {"psnr_peak", "ssim_window", "ssim_sigma", "ssim_k1", "ssim_k2", "ssim_dynamic_range"}, "eval");
    EvalConfig c;
    c.psnr_peak = get_number(doc, "psnr_peak", c.psnr_peak);
    c.ssim.window = get_uint(doc, "ssim_window", c.ssim.window);
    c.ssim.sigma = get_number(doc, "ssim_sigma", c.ssim.sigma);
    c.ssim.k1 = get_number(doc, "ssim_k1", c.ssim.k1);
    c.ssim.k2 = get_number(doc, "ssim_k2", c.ssim.k2);
    c.ssim.dynamic_range = get_number(doc, "ssim_dynamic_range", c.ssim.dynamic_range);
    if (!(c.psnr_peak > 0.0) || c.ssim.window == 0 || !(c.ssim.sigma > 0.0) || !(c.ssim.dynamic_range > 0.0)) {
        throw DataError("eval: peak, window, sigma and dynamic range must be positive");
    }
    return c;
}

RunConfig default_run_config(std::uint64_t seed) {
    RunConfig c;
    c.seed = seed;
    c.dataset.seed = seed;
    c.train.seed = seed;
    return c;
}

RunConfig run_config_from_json(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override) {
    using namespace json_util;
    require_object(doc, "config");
    reject_unknown_keys(doc, {"seed", "simulate", "dataset", "network", "train", "eval"}, "config");
    std::uint64_t seed = 0;
    if (seed_override) {
        seed = *seed_override;
    } else if (doc.contains("seed")) {
        seed = get_uint(doc, "seed", 0);
    } else {
        throw DataError("config: 'seed' is mandatory");
    }
    RunConfig c = default_run_config(seed);
    if (doc.contains("simulate")) c.simulate = corpus_config_from_json(doc.at("simulate"));
    if (doc.contains("dataset")) c.dataset = dataset_options_from_json(doc.at("dataset"));
    if (doc.contains("network")) c.network = network_config_from_json(doc.at("network"));
    if (doc.contains("train")) c.train = train_config_from_json(doc.at("train"));
    if (doc.contains("eval")) c.eval = eval_config_from_json(doc.at("eval"));
    c.dataset.seed = seed;
    c.train.seed = seed;
    return c;
}

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config '" + path + "'");
    std::stringstream text;
    text << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return run_config_from_json(doc, seed_override);
}

nlohmann::json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"simulate", to_json(c.simulate)},
            {"dataset", to_json(c.dataset)},
            {"network", to_json(c.network)},
            {"train", to_json(c.train)},
            {"eval", to_json(c.eval)}};
}

}  // namespace fpd
