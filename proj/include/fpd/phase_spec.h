#pragma once

#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fpd/rng.h"

namespace fpd {

// An infinite denominator removes that axis from a term, so a 1-D profile
// such as exp(-(i-110)^2/50000) is a Gaussian2D with denom_j = +inf.
inline constexpr double kUnusedAxis = std::numeric_limits<double>::infinity();

// amplitude * exp(-(i-center_i)^2/denom_i - (j-center_j)^2/denom_j)
struct Gaussian2D {
    double amplitude = 1.0;
    double center_i = 0.0;
    double center_j = 0.0;
    double denom_i = kUnusedAxis;
    double denom_j = kUnusedAxis;
};

// (scale_i*i - center_i)^2/denom_i + (scale_j*j - center_j)^2/denom_j
struct Poly2 {
    double scale_i = 1.0;
    double center_i = 0.0;
    double denom_i = kUnusedAxis;
    double scale_j = 1.0;
    double center_j = 0.0;
    double denom_j = kUnusedAxis;
};

struct Product {
    Poly2 poly;
    Gaussian2D gauss;
};

struct Constant {
    double value = 0.0;
};

using PhaseTerm = std::variant<Gaussian2D, Poly2, Product, Constant>;

struct WeightedTerm {
    double coefficient = 1.0;
    PhaseTerm term;
};

// Phase difference as a weighted sum of compound terms.
struct PhaseSpec {
    std::vector<WeightedTerm> terms;

    // Throws ParameterError on an empty term list, a non-positive denominator
    // or a non-finite coefficient.
    void validate() const;
};

double eval_term(const PhaseTerm& term, double i, double j);

// Sum over terms of coefficient * term(i, j). (i, j) are coordinates, not
// buffer indices; the caller applies its index origin.
double eval_phase(const PhaseSpec& spec, double i, double j);

// The noise-free/noisy contrast example: 10e^{-(i-110)^2/50000} + 180e^{-(j-10)^2/50000} - pi.
PhaseSpec contrast_example_phase();

// Knobs for random phase generation. Term coefficients are rescaled so the
// steepest phase gradient on the pixel grid equals a target drawn uniformly
// from [min_gradient, max_gradient] rad/pixel, which fixes the finest fringe
// period at 2*pi/target pixels.
struct PhaseGenConfig {
    std::size_t min_terms = 2;
    std::size_t max_terms = 4;
    double min_gradient = 0.05;
    double max_gradient = 1.25;

    void validate() const;
};

PhaseSpec random_phase_spec(const PhaseGenConfig& config, std::size_t width, std::size_t height, int origin,
                            Rng& rng);

// Largest central-difference gradient magnitude of the phase over the grid.
double max_phase_gradient(const PhaseSpec& spec, std::size_t width, std::size_t height, int origin);

nlohmann::json phase_spec_to_json(const PhaseSpec& spec);
// Throws DataError on unknown term kinds or keys.
PhaseSpec phase_spec_from_json(const nlohmann::json& doc);

}  // namespace fpd
