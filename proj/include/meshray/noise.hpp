#pragma once

// Post-processing noise for simulated ranges. All randomness is counter
// based: the variates for element i depend only on (seed, i), so results do
// not depend on processing order or thread count.

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>

#include "meshray/sensors.hpp"
#include "meshray/simulation.hpp"

namespace meshray {

struct GaussianNoise {
    double sigma = 0.0;  // m
};

/// sigma(r) = sigma_a + sigma_b * r^exponent
struct RelGaussianNoise {
    double sigma_a = 0.0;
    double sigma_b = 0.0;
    double exponent = 1.0;
};

/// Each hit is replaced with probability 1 - (1 - rho)^r by a phantom return
/// uniform in [t_min, r).
struct DustNoise {
    double rho = 0.0;  // per meter
};

struct NoiseSpec {
    std::variant<GaussianNoise, RelGaussianNoise, DustNoise> model;
    std::uint64_t seed = 0;

    /// "gaussian:sigma=0.01", "relgaussian:a=0.005,b=0.002,exp=1", "dust:rho=0.01".
    /// Throws Error(InvalidSpec).
    static NoiseSpec parse(std::string_view text, std::uint64_t seed = 0);
};

/// Throws Error(InvalidSpec) when sigma < 0, rho outside [0, 1) or exponent <= 0.
void validate(const NoiseSpec& spec);

/// Uniform variate in [0, 1), a pure function of (seed, index).
double noise_rng(std::uint64_t seed, std::uint64_t index);

struct NoiseBounds {
    double t_min = 0.0;      // lower end of dust phantom returns
    double range_min = 0.0;  // Gaussian results are clamped to [range_min, range_max]
    double range_max = 0.0;

    static NoiseBounds of(const RangeInterval& r) { return {ray_t_min(r), r.min, r.max}; }
};

/// Noisy value of element `index`. Non-finite ranges (misses) pass through.
float apply_noise_at(float range, const NoiseSpec& spec, const NoiseBounds& bounds, std::uint64_t index);

/// In place; element i uses counter i.
void apply_noise(std::span<float> ranges, const NoiseSpec& spec, const NoiseBounds& bounds, unsigned threads = 0);

/// Perturbs the ranges of a simulation result and moves any points along
/// their rays to match. Hit flags, normals and ids are unchanged.
void apply_noise(SimResult& result, const NoiseSpec& spec, const SensorRig& rig, unsigned threads = 0);

}  // namespace meshray
