#include "meshray/noise.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "meshray/error.hpp"
#include "meshray/parallel.hpp"

namespace meshray {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Per-element counters: four variates per element.
constexpr std::uint64_t kGaussA = 0;
constexpr std::uint64_t kGaussB = 1;
constexpr std::uint64_t kDustTrigger = 2;
constexpr std::uint64_t kDustRange = 3;

double standard_normal(std::uint64_t seed, std::uint64_t index)
{
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - noise_rng(seed, 4 * index + kGaussA);
    const double u2 = noise_rng(seed, 4 * index + kGaussB);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

float gaussian(float range, double sigma, const NoiseSpec& spec, const NoiseBounds& b, std::uint64_t index)
{
    if (sigma == 0.0) return range;
    const double r = static_cast<double>(range) + sigma * standard_normal(spec.seed, index);
    return static_cast<float>(std::clamp(r, b.range_min, b.range_max));
}

[[noreturn]] void bad_spec(const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); }

}  // namespace

double noise_rng(std::uint64_t seed, std::uint64_t index)
{
    const std::uint64_t h = splitmix64(splitmix64(seed) ^ splitmix64(index ^ 0xD1B54A32D192ED03ull));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void validate(const NoiseSpec& spec)
{
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                if (!(m.sigma >= 0.0) || !std::isfinite(m.sigma)) bad_spec("gaussian sigma must be >= 0");
            } else if constexpr (std::is_same_v<T, RelGaussianNoise>) {
                if (!(m.sigma_a >= 0.0) || !(m.sigma_b >= 0.0)) bad_spec("relgaussian a and b must be >= 0");
                if (!(m.exponent > 0.0)) bad_spec("relgaussian exp must be > 0");
            } else {
                if (!(m.rho >= 0.0 && m.rho < 1.0)) bad_spec("dust rho must be in [0, 1)");
            }
        },
        spec.model);
}

NoiseSpec NoiseSpec::parse(std::string_view text, std::uint64_t seed)
{
    const auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    std::map<std::string, double> params;
    std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) bad_spec("expected key=value in '" + std::string(item) + "'");
        const std::string key(item.substr(0, eq));
        const std::string_view val = item.substr(eq + 1);
        double d = 0.0;
        auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), d);
        if (ec != std::errc{} || p != val.data() + val.size()) bad_spec("invalid number for '" + key + "'");
        params[key] = d;
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    auto take = [&](const std::string& key, std::optional<double> fallback = std::nullopt) {
        auto it = params.find(key);
        if (it == params.end()) {
            if (!fallback) bad_spec(std::string(kind) + " noise needs '" + key + "'");
            return *fallback;
        }
        const double v = it->second;
        params.erase(it);
        return v;
    };

    NoiseSpec spec;
    spec.seed = seed;
    if (kind == "gaussian") {
        spec.model = GaussianNoise{take("sigma")};
    } else if (kind == "relgaussian") {
        spec.model = RelGaussianNoise{take("a"), take("b"), take("exp", 1.0)};
    } else if (kind == "dust") {
        spec.model = DustNoise{take("rho")};
    } else {
        bad_spec("unknown noise model '" + std::string(kind) + "'");
    }
    if (!params.empty()) bad_spec("unknown parameter '" + params.begin()->first + "'");
    validate(spec);
    return spec;
}

float apply_noise_at(float range, const NoiseSpec& spec, const NoiseBounds& bounds, std::uint64_t index)
{
    if (!std::isfinite(range)) return range;
    return std::visit(
        [&](const auto& m) -> float {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                return gaussian(range, m.sigma, spec, bounds, index);
            } else if constexpr (std::is_same_v<T, RelGaussianNoise>) {
                const double sigma = m.sigma_a + m.sigma_b * std::pow(static_cast<double>(range), m.exponent);
                return gaussian(range, sigma, spec, bounds, index);
            } else {
                if (m.rho == 0.0) return range;
                const double r = range;
                const double p = 1.0 - std::pow(1.0 - m.rho, r);
                if (noise_rng(spec.seed, 4 * index + kDustTrigger) >= p) return range;
                if (!(r > bounds.t_min)) return range;
                const double u = noise_rng(spec.seed, 4 * index + kDustRange);
                const float phantom = static_cast<float>(bounds.t_min + u * (r - bounds.t_min));
                // Keep the phantom strictly in front of the surface after rounding.
                return phantom < range ? phantom : std::nextafter(range, 0.0f);
            }
        },
        spec.model);
}

void apply_noise(std::span<float> ranges, const NoiseSpec& spec, const NoiseBounds& bounds, unsigned threads)
{
    validate(spec);
    constexpr std::size_t kChunk = 1 << 14;
    const std::size_t n_chunks = (ranges.size() + kChunk - 1) / kChunk;
    parallel_for(n_chunks, threads, [&](std::size_t c) {
        const std::size_t end = std::min(ranges.size(), (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) ranges[i] = apply_noise_at(ranges[i], spec, bounds, i);
    });
}

void apply_noise(SimResult& result, const NoiseSpec& spec, const SensorRig& rig, unsigned threads)
{
    if (!result.selection.ranges) throw Error(ErrorCode::MissingAttributes, "noise needs the ranges attribute");
    const std::vector<float> before = result.selection.points ? result.ranges : std::vector<float>{};
    apply_noise(std::span<float>(result.ranges), spec, NoiseBounds::of(model_range(rig.model)), threads);
    if (!result.selection.points) return;
    const std::vector<Ray> rays = generate_rays(rig.model);
    for (std::size_t i = 0; i < result.size(); ++i) {
        const float range = result.ranges[i];
        if (!std::isfinite(range) || range == before[i]) continue;
        const Ray& s = rays[i % result.n_rays];
        const Vec3 p = s.origin + s.dir * static_cast<double>(range);
        result.points[3 * i] = static_cast<float>(p.x);
        result.points[3 * i + 1] = static_cast<float>(p.y);
        result.points[3 * i + 2] = static_cast<float>(p.z);
    }
}

}  // namespace meshray
