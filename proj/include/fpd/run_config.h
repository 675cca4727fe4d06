#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "fpd/dataset.h"
#include "fpd/network.h"
#include "fpd/quality.h"
#include "fpd/simulate.h"
#include "fpd/trainer.h"

namespace fpd {

struct EvalConfig {
    double psnr_peak = 255.0;
    SsimOptions ssim;
};

nlohmann::json to_json(const EvalConfig& config);
EvalConfig eval_config_from_json(const nlohmann::json& doc);

// Every pipeline setting plus the master seed, which is copied into the
// dataset and train sections.
struct RunConfig {
    std::uint64_t seed = 0;
    CorpusConfig simulate;
    DatasetOptions dataset;
    NetworkConfig network;
    TrainConfig train;
    EvalConfig eval;
};

// Sections are optional and filled with defaults; unknown keys are rejected.
// `seed_override` replaces the document seed; without either, throws DataError.
RunConfig run_config_from_json(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);
// Defaults-only configuration for runs without a config file.
RunConfig default_run_config(std::uint64_t seed);

// Fully materialized document, suitable for manifests.
nlohmann::json to_json(const RunConfig& config);

}  // namespace fpd
