#pragma once

// Batch range-sensor simulation. For every base pose the rig's rays are cast
// once each and only the requested attribute buffers are filled. Results are
// expressed in the sensor frame.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshray/math3d.hpp"
#include "meshray/scene.hpp"
#include "meshray/sensors.hpp"

namespace meshray {

struct AttrSelection {
    bool hits = false;
    bool ranges = false;
    bool points = false;
    bool normals = false;
    bool prim_ids = false;
    bool geom_ids = false;
    bool inst_ids = false;

    static constexpr std::uint8_t kAllMask = 0x7F;

    /// Bit order: hits, ranges, points, normals, prim_ids, geom_ids, inst_ids.
    static AttrSelection from_mask(std::uint8_t mask);
    std::uint8_t mask() const;
    bool any() const { return mask() != 0; }
    static AttrSelection all() { return from_mask(kAllMask); }

    /// Comma-separated names: hits, ranges, points, normals, prim_ids,
    /// geom_ids, inst_ids, or "all". Throws Error(InvalidSpec).
    static AttrSelection parse(std::string_view list);
    std::string to_string() const;
};

/// Structure-of-arrays output. Every buffer is pose-major, then ray index
/// v * W + h; points and normals are xyz triples. Unselected buffers stay empty.
///
/// Miss encoding: hit 0, range +inf, point/normal NaN, ids kNoInstance.
struct SimResult {
    std::uint32_t n_poses = 0;
    std::uint32_t n_rays = 0;
    AttrSelection selection;

    std::vector<std::uint8_t> hits;
    std::vector<float> ranges;
    std::vector<float> points;
    std::vector<float> normals;
    std::vector<std::uint32_t> prim_ids;
    std::vector<std::uint32_t> geom_ids;
    std::vector<std::uint32_t> inst_ids;

    /// Closest-hit queries issued; always n_poses * n_rays.
    std::uint64_t rays_cast = 0;

    std::size_t size() const { return static_cast<std::size_t>(n_poses) * n_rays; }
};

struct SimOptions {
    /// Worker threads; 0 uses the hardware concurrency. Output does not depend on it.
    unsigned threads = 0;
};

/// A sensor bound to a map. Sensor-frame rays are generated once at
/// construction; the scene must stay committed while simulate runs.
class Simulator {
public:
    Simulator(std::shared_ptr<const Scene> scene, SensorRig rig);

    /// poses are base -> map, rigid. The world ray is (pose ∘ t_sb) applied to
    /// each sensor-frame ray. Throws DirtyScene, EmptyPoseBatch, EmptySelection,
    /// InvalidSpec (non-rigid pose).
    SimResult simulate(std::span<const Transform> poses, AttrSelection selection, SimOptions options = {}) const;

    const SensorRig& rig() const { return rig_; }
    const std::vector<Ray>& sensor_rays() const { return rays_; }

private:
    std::shared_ptr<const Scene> scene_;
    SensorRig rig_;
    std::vector<Ray> rays_;
};

SimResult simulate(const Scene& scene, const SensorRig& rig, std::span<const Transform> poses,
                   AttrSelection selection, SimOptions options = {});

/// Ranges only; identical to simulate(..., {ranges}).ranges.
std::vector<float> simulate_ranges(const Scene& scene, const SensorRig& rig, std::span<const Transform> poses,
                                   SimOptions options = {});

/// Number of hits whose point differs from origin + range * dir (sensor frame)
/// by more than `tolerance`. Throws Error(MissingAttributes) unless the result
/// holds ranges and points.
std::size_t point_consistency_violations(const SimResult& result, const SensorRig& rig, double tolerance = 1e-4);

}  // namespace meshray
