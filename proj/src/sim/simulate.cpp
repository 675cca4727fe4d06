#include "fpd/simulate.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "fpd/error.h"
#include "fpd/json_util.h"

namespace fpd {

void SimulationParams::validate() const {
    if (!(a0c_sq > 0.0)) throw ParameterError("a0c_sq must be > 0");
    if (!(ned_lambda >= 0.0)) throw ParameterError("ned_lambda must be >= 0");
    if (!(ar_sq > 0.0)) throw ParameterError("ar_sq must be > 0");
    if (width == 0 || height == 0) throw ParameterError("image dimensions must be positive");
}

double ned_from_uniform(double lambda, double u) {
    if (!(lambda >= 0.0)) throw ParameterError("NED expectation must be >= 0, got " + std::to_string(lambda));
    if (lambda == 0.0) return 0.0;
    return -lambda * std::log1p(-u);
}

double sample_ned(double lambda, Rng& rng) {
    if (!(lambda >= 0.0)) throw ParameterError("NED expectation must be >= 0, got " + std::to_string(lambda));
    return ned_from_uniform(lambda, uniform01(rng));
}

double speckle_noise_term(double a0_sq, double ar_sq, double dphi, double phi0, double phi_r) {
    // phi0(t) = phi0(t0) + dphi, so phi0(t0) + phi0(t) = 2 phi0(t0) + dphi.
    return -4.0 * a0_sq * ar_sq * (1.0 - std::cos(dphi)) * std::cos(2.0 * phi0 + dphi - 2.0 * phi_r);
}

double speckle_intensity(double a0_sq, double ar_sq, double dphi, double phi0, double phi_r) {
    const double amp = 4.0 * a0_sq * ar_sq;
    return amp + amp * std::cos(dphi + std::numbers::pi) + speckle_noise_term(a0_sq, ar_sq, dphi, phi0, phi_r);
}

FringeImage render_clean(const SimulationParams& params, const PhaseSpec& spec) {
    params.validate();
    spec.validate();
    FringeImage img(params.width, params.height);
    const double amp = 4.0 * params.a0c_sq * params.ar_sq;
    for (std::size_t r = 0; r < params.height; ++r) {
        for (std::size_t c = 0; c < params.width; ++c) {
            const double dphi =
                eval_phase(spec, static_cast<double>(r) + params.origin, static_cast<double>(c) + params.origin);
            img.at(r, c) = amp + amp * std::cos(dphi + std::numbers::pi);
        }
    }
    return img;
}

FringeImage render_noisy(const SimulationParams& params, const PhaseSpec& spec, Rng& rng) {
    params.validate();
    spec.validate();
    FringeImage img(params.width, params.height);
    for (std::size_t r = 0; r < params.height; ++r) {
        for (std::size_t c = 0; c < params.width; ++c) {
            const double dphi =
                eval_phase(spec, static_cast<double>(r) + params.origin, static_cast<double>(c) + params.origin);
            // pi - 2 pi u maps [0, 1) onto (-pi, pi].
            const double phi0 = std::numbers::pi - 2.0 * std::numbers::pi * uniform01(rng);
            const double a0_sq = params.a0c_sq + sample_ned(params.ned_lambda, rng);
            img.at(r, c) = speckle_intensity(a0_sq, params.ar_sq, dphi, phi0, params.phi_r);
        }
    }
    return img;
}

FringeImage render_noisy(const SimulationParams& params, const PhaseSpec& spec) {
    Rng rng(params.seed);
    return render_noisy(params, spec, rng);
}

FringeImage normalize_to_range(const FringeImage& img) {
    FringeImage out(img.width(), img.height());
    if (img.empty()) return out;
    const double lo = img.min();
    const double hi = img.max();
    if (!(hi > lo)) return out;
    const double scale = 255.0 / (hi - lo);
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = (src[k] - lo) * scale;
    // Pin the extremes so rounding in the affine map cannot leave [0, 255].
    for (std::size_t k = 0; k < src.size(); ++k) {
        if (src[k] == hi) dst[k] = 255.0;
    }
    return out;
}

FringeImage add_awgn(const FringeImage& img, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw ParameterError("AWGN sigma must be >= 0, got " + std::to_string(sigma));
    FringeImage out = img;
    if (sigma == 0.0) return out;
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& v : out.data()) v += noise(rng);
    return out;
}

void CorpusConfig::validate() const {
    if (width == 0 || height == 0) throw ParameterError("simulate: image dimensions must be positive");
    if (!(a0c_sq_min > 0.0) || a0c_sq_max < a0c_sq_min) throw ParameterError("simulate: need 0 < a0c_sq_min <= a0c_sq_max");
    if (!(lambda_min >= 0.0) || lambda_max < lambda_min) throw ParameterError("simulate: need 0 <= lambda_min <= lambda_max");
    if (!(ar_sq > 0.0)) throw ParameterError("simulate: ar_sq must be > 0");
    if (!(awgn_sigma >= 0.0)) throw ParameterError("simulate: awgn_sigma must be >= 0");
    if (!(awgn_fraction >= 0.0 && awgn_fraction <= 1.0)) throw ParameterError("simulate: awgn_fraction must lie in [0, 1]");
    phase.validate();
}

SimulatedPair simulate_pair(const CorpusConfig& config, std::uint64_t seed, std::size_t id) {
    config.validate();
    Rng scene = derive_rng(seed, stream::kScene, id);
    Rng phase_rng = derive_rng(seed, stream::kPhase, id);
    Rng speckle = derive_rng(seed, stream::kSpeckle, id);

    SimulationParams params;
    params.a0c_sq = uniform(scene, config.a0c_sq_min, config.a0c_sq_max);
    params.ned_lambda = uniform(scene, config.lambda_min, config.lambda_max);
    params.ar_sq = config.ar_sq;
    params.phi_r = config.phi_r;
    params.width = config.width;
    params.height = config.height;
    params.origin = config.origin;

    SimulatedPair pair;
    pair.record.id = id;
    pair.record.source_id = id;
    pair.record.a0c_sq = params.a0c_sq;
    pair.record.ned_lambda = params.ned_lambda;
    pair.record.phase = random_phase_spec(config.phase, config.width, config.height, config.origin, phase_rng);
    pair.clean = normalize_to_range(render_clean(params, pair.record.phase));
    pair.noisy = normalize_to_range(render_noisy(params, pair.record.phase, speckle));
    return pair;
}

std::vector<std::size_t> awgn_selection(const CorpusConfig& config, std::uint64_t seed, std::size_t count) {
    std::vector<std::size_t> ids(count);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    Rng rng = derive_rng(seed, stream::kAwgnSelect);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(config.awgn_fraction * static_cast<double>(count)));
    ids.resize(std::min(take, count));
    std::sort(ids.begin(), ids.end());
    return ids;
}

SimulatedPair make_awgn_pair(const CorpusConfig& config, std::uint64_t seed, const SimulatedPair& source,
                             std::size_t new_id) {
    Rng rng = derive_rng(seed, stream::kAwgn, source.record.id);
    SimulatedPair out;
    out.clean = source.clean;
    out.noisy = add_awgn(source.clean, config.awgn_sigma, rng);
    out.record = source.record;
    out.record.id = new_id;
    out.record.source_id = source.record.id;
    out.record.awgn = true;
    return out;
}

std::vector<SimulatedPair> simulate_corpus(const CorpusConfig& config, std::uint64_t seed, std::size_t count) {
    config.validate();
    std::vector<SimulatedPair> pairs;
    pairs.reserve(count);
    for (std::size_t id = 0; id < count; ++id) pairs.push_back(simulate_pair(config, seed, id));
    const auto selected = awgn_selection(config, seed, count);
    for (std::size_t id : selected) {
        if (config.awgn_mode == AwgnMode::InPlace) {
            pairs[id] = make_awgn_pair(config, seed, pairs[id], id);
        } else {
            pairs.push_back(make_awgn_pair(config, seed, pairs[id], pairs.size()));
        }
    }
    return pairs;
}

using nlohmann::json;

json to_json(const CorpusConfig& c) {
    return {{"width", c.width},
            {"height", c.height},
            {"a0c_sq_min", c.a0c_sq_min},
            {"a0c_sq_max", c.a0c_sq_max},
            {"lambda_min", c.lambda_min},
            {"lambda_max", c.lambda_max},
            {"ar_sq", c.ar_sq},
            {"phi_r", c.phi_r},
            {"origin", c.origin},
            {"phase",
             {{"min_terms", c.phase.min_terms},
              {"max_terms", c.phase.max_terms},
              {"min_gradient", c.phase.min_gradient},
              {"max_gradient", c.phase.max_gradient}}},
            {"awgn_sigma", c.awgn_sigma},
            {"awgn_fraction", c.awgn_fraction},
            {"awgn_mode", c.awgn_mode == AwgnMode::InPlace ? "in_place" : "extra"}};
}

CorpusConfig corpus_config_from_json(const json& doc) {
    using namespace json_util;
    require_object(doc, "simulate");
    reject_unknown_keys(doc,
                        {"width", "height", "a0c_sq_min", "a0c_sq_max", "lambda_min", "lambda_max", "ar_sq", "phi_r",
                         "origin", "phase", "awgn_sigma", "awgn_fraction", "awgn_mode"},
                        "simulate");
    CorpusConfig c;
    c.width = get_uint(doc, "width", c.width);
    c.height = get_uint(doc, "height", c.height);
    c.a0c_sq_min = get_number(doc, "a0c_sq_min", c.a0c_sq_min);
    c.a0c_sq_max = get_number(doc, "a0c_sq_max", c.a0c_sq_max);
    c.lambda_min = get_number(doc, "lambda_min", c.lambda_min);
    c.lambda_max = get_number(doc, "lambda_max", c.lambda_max);
    c.ar_sq = get_number(doc, "ar_sq", c.ar_sq);
    c.phi_r = get_number(doc, "phi_r", c.phi_r);
    c.origin = static_cast<int>(get_number(doc, "origin", c.origin));
    if (c.origin != 0 && c.origin != 1) throw DataError("simulate: origin must be 0 or 1");
    if (doc.contains("phase")) {
        const json& p = require_object(doc.at("phase"), "simulate.phase");
        reject_unknown_keys(p, {"min_terms", "max_terms", "min_gradient", "max_gradient"}, "simulate.phase");
        c.phase.min_terms = get_uint(p, "min_terms", c.phase.min_terms);
        c.phase.max_terms = get_uint(p, "max_terms", c.phase.max_terms);
        c.phase.min_gradient = get_number(p, "min_gradient", c.phase.min_gradient);
        c.phase.max_gradient = get_number(p, "max_gradient", c.phase.max_gradient);
    }
    c.awgn_sigma = get_number(doc, "awgn_sigma", c.awgn_sigma);
    c.awgn_fraction = get_number(doc, "awgn_fraction", c.awgn_fraction);
    const std::string mode = get_string(doc, "awgn_mode", "in_place");
    if (mode == "in_place") {
        c.awgn_mode = AwgnMode::InPlace;
    } else if (mode == "extra") {
        c.awgn_mode = AwgnMode::Extra;
    } else {
        throw DataError("simulate: awgn_mode must be 'in_place' or 'extra'");
    }
    c.validate();
    return c;
}

json to_json(const PairRecord& r) {
    return {{"id", r.id},
            {"source_id", r.source_id},
            {"a0c_sq", r.a0c_sq},
            {"ned_lambda", r.ned_lambda},
            {"awgn", r.awgn},
            {"phase", phase_spec_to_json(r.phase)}};
}

}  // namespace fpd
