#include "meshray/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "meshray/error.hpp"
#include "meshray/parallel.hpp"

namespace meshray {

namespace {

Rotation random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Rotation q{g(rng), g(rng), g(rng), g(rng)};
    return q.normalized();
}

}  // namespace

std::vector<Transform> sample_poses_in_ball(std::size_t n, const Vec3& center, double radius, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Transform> poses;
    poses.reserve(n);
    while (poses.size() < n) {
        const Vec3 p{u(rng), u(rng), u(rng)};
        if (dot(p, p) > 1.0) continue;
        Transform t;
        t.translation = center + p * radius;
        t.rotation = random_rotation(rng);
        poses.push_back(t);
    }
    return poses;
}

std::vector<Transform> sample_poses_in_box(std::size_t n, const Aabb& box, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Transform> poses;
    poses.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Transform t;
        t.translation = box.min + hadamard(box.extent(), Vec3{u(rng), u(rng), u(rng)});
        t.rotation = random_rotation(rng);
        poses.push_back(t);
    }
    return poses;
}

double time_scans(const Simulator& sim, std::span<const Transform> poses, unsigned threads)
{
    AttrSelection sel;
    sel.ranges = true;
    const auto start = std::chrono::steady_clock::now();
    const SimResult r = sim.simulate(poses, sel, {threads});
    const auto stop = std::chrono::steady_clock::now();
    if (r.rays_cast != r.size()) throw Error(ErrorCode::CountMismatch, "ray cast count mismatch");
    return std::chrono::duration<double>(stop - start).count();
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::CountMismatch, "fit needs >= 2 paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error(ErrorCode::InvalidSpec, "fit needs distinct x values");
    LinearFit f;
    f.b = sxy / sxx;
    f.a = my - f.b * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

double median(std::vector<double> values)
{
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of nothing");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

std::string device_label(unsigned threads) { return "cpu-" + std::to_string(resolve_threads(threads)) + "t"; }

std::string bench_csv_header(const char* workload_column)
{
    return std::string(workload_column) + ",reps,seconds,scans_per_second";
}

std::string bench_csv_row(const BenchRecord& r)
{
    std::ostringstream os;
    os.precision(9);
    os << r.workload << ',' << r.reps << ',' << r.seconds << ',' << r.scans_per_second;
    return os.str();
}

}  // namespace meshray
