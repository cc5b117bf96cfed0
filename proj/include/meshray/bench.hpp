#pragma once

// Benchmark helpers shared by the CLI and the test suites.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meshray/math3d.hpp"
#include "meshray/simulation.hpp"

namespace meshray {

/// One timed workload. `workload` is a scan count or a face count.
struct BenchRecord {
    std::string device;
    std::uint64_t workload = 0;
    std::uint32_t reps = 0;
    double seconds = 0.0;            // total over all reps
    double scans_per_second = 0.0;   // n_scans * reps / seconds
};

/// Poses uniform in a ball, orientations uniform on SO(3). Seeded.
std::vector<Transform> sample_poses_in_ball(std::size_t n, const Vec3& center, double radius, std::uint64_t seed);

/// Poses uniform in a box, orientations uniform on SO(3). Seeded.
std::vector<Transform> sample_poses_in_box(std::size_t n, const Aabb& box, std::uint64_t seed);

/// Wall time in seconds for one ranges-only simulation of `poses`.
double time_scans(const Simulator& sim, std::span<const Transform> poses, unsigned threads);

struct LinearFit {
    double a = 0.0;   // intercept
    double b = 0.0;   // slope
    double r2 = 0.0;  // coefficient of determination
};

/// Least squares y = a + b x. Needs at least two distinct x values.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

/// "cpu-<threads>t"
std::string device_label(unsigned threads);

/// "count,reps,seconds,scans_per_second" or "faces,reps,seconds,scans_per_second".
std::string bench_csv_header(const char* workload_column);
std::string bench_csv_row(const BenchRecord& r);

}  // namespace meshray
