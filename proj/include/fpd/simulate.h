#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"

#include "fpd/fringe_image.h"
#include "fpd/phase_spec.h"
#include "fpd/rng.h"

namespace fpd {

// Parameters of one speckle-correlation fringe rendering.
struct SimulationParams {
    double a0c_sq = 45.0;    // clean object-beam intensity
    double ned_lambda = 0.0; // expectation of the negative-exponential intensity perturbation
    double ar_sq = 1.0;      // reference-beam intensity
    double phi_r = 0.0;      // reference-beam phase
    std::size_t width = 256;
    std::size_t height = 256;
    std::uint64_t seed = 0;
    // Coordinate of the first row/column when evaluating the phase.
    int origin = 1;

    void validate() const;
};

// Negative-exponential sample by inverse CDF: -lambda * ln(1 - u).
double ned_from_uniform(double lambda, double u);
double sample_ned(double lambda, Rng& rng);

// Speckle term of one pixel:
// -4 a0^2 ar^2 (1 - cos dphi) cos(2 phi0 + dphi - 2 phi_r)
double speckle_noise_term(double a0_sq, double ar_sq, double dphi, double phi0, double phi_r);

// Noisy intensity of one pixel: 4A + 4A cos(dphi + pi) + noise, A = a0^2 ar^2.
double speckle_intensity(double a0_sq, double ar_sq, double dphi, double phi0, double phi_r);

// Noise-free correlation fringes, not normalized.
FringeImage render_clean(const SimulationParams& params, const PhaseSpec& spec);

// Per pixel (row-major) draws phi0 ~ U(-pi, pi] then a0^2 = a0c^2 + NED(lambda).
FringeImage render_noisy(const SimulationParams& params, const PhaseSpec& spec, Rng& rng);
// Same, with a generator seeded from params.seed.
FringeImage render_noisy(const SimulationParams& params, const PhaseSpec& spec);

// Affine map onto [0, 255]; a constant image maps to zeros.
FringeImage normalize_to_range(const FringeImage& img);

// Adds i.i.d. N(0, sigma^2) without clipping.
FringeImage add_awgn(const FringeImage& img, double sigma, Rng& rng);

enum class AwgnMode { InPlace, Extra };

// Settings for building a simulated training corpus.
struct CorpusConfig {
    std::size_t width = 256;
    std::size_t height = 256;
    double a0c_sq_min = 1.0;
    double a0c_sq_max = 150.0;
    double lambda_min = 0.0;
    double lambda_max = 50.0;
    double ar_sq = 1.0;
    double phi_r = 0.0;
    int origin = 1;
    PhaseGenConfig phase;
    double awgn_sigma = 10.0;
    // Share of pairs whose clean image receives the Gaussian-noise treatment.
    double awgn_fraction = 500.0 / 1700.0;
    AwgnMode awgn_mode = AwgnMode::InPlace;

    void validate() const;
};

struct PairRecord {
    std::size_t id = 0;
    std::size_t source_id = 0; // equals id except for appended AWGN pairs
    double a0c_sq = 0.0;
    double ned_lambda = 0.0;
    bool awgn = false;
    PhaseSpec phase;
};

struct SimulatedPair {
    FringeImage clean;
    FringeImage noisy;
    PairRecord record;
};

// Speckle pair `id`, both members normalized to [0, 255]. Each id owns its
// generators, so the result does not depend on which other ids are produced.
SimulatedPair simulate_pair(const CorpusConfig& config, std::uint64_t seed, std::size_t id);

// Ids of the pairs selected for the AWGN treatment, ascending.
std::vector<std::size_t> awgn_selection(const CorpusConfig& config, std::uint64_t seed, std::size_t count);

// Replaces (InPlace) or complements (Extra) a pair with (clean, clean + AWGN).
SimulatedPair make_awgn_pair(const CorpusConfig& config, std::uint64_t seed, const SimulatedPair& source,
                             std::size_t new_id);

// `count` speckle pairs plus the AWGN treatment per config.awgn_mode.
std::vector<SimulatedPair> simulate_corpus(const CorpusConfig& config, std::uint64_t seed, std::size_t count);

nlohmann::json to_json(const CorpusConfig& config);
CorpusConfig corpus_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PairRecord& record);

}  // namespace fpd
