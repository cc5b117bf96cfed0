#pragma once

// Sensor models and ray-pattern generation in the sensor frame
// (x forward, y left, z up).
//
// Every model lays out its measurements scanline-major: the measurement at
// vertical index v and horizontal index h has linear index v * width + h.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "meshray/math3d.hpp"

namespace meshray {

/// Values min + i * increment for i in [0, count).
struct DiscreteInterval {
    double min = 0.0;
    double increment = 0.0;
    std::uint32_t count = 1;

    double value(std::uint32_t i) const { return min + static_cast<double>(i) * increment; }
};

struct RangeInterval {
    double min = 0.0;
    double max = 100.0;
};

/// theta is horizontal (about z, 0 = forward), phi vertical (elevation). Radians.
struct SphericalModel {
    DiscreteInterval theta;
    DiscreteInterval phi;
    RangeInterval range;
};

/// Depth camera. Pixel (h, v) addresses the ray through integer pixel
/// coordinates; cx, cy use the same convention (no half-pixel offset).
struct PinholeModel {
    std::uint32_t width = 1;
    std::uint32_t height = 1;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    RangeInterval range;
};

/// Ring of horizontal rays (theta, radians) repeated at several heights
/// (z, meters along the sensor z axis).
struct CylindricalModel {
    DiscreteInterval theta;
    DiscreteInterval z;
    RangeInterval range;
};

/// One origin, N directions. `width` declares the horizontal count used for
/// the v * width + h layout; 0 means a single scanline of all directions.
struct O1DnModel {
    Vec3 origin;
    std::vector<Vec3> dirs;
    std::uint32_t width = 0;
    RangeInterval range;
};

/// N origins, N directions; ray i is (origins[i], dirs[i]).
struct OnDnModel {
    std::vector<Vec3> origins;
    std::vector<Vec3> dirs;
    std::uint32_t width = 0;
    RangeInterval range;
};

using SensorModel = std::variant<SphericalModel, PinholeModel, CylindricalModel, O1DnModel, OnDnModel>;

std::uint32_t model_ray_count(const SensorModel& m);
/// Horizontal count W of the v * W + h layout.
std::uint32_t model_width(const SensorModel& m);
std::uint32_t model_height(const SensorModel& m);
RangeInterval model_range(const SensorModel& m);
std::string model_kind(const SensorModel& m);

/// Throws Error(InvalidModel) describing the first violated invariant.
void validate(const SensorModel& m);

/// Lower ray bound used for every generated ray: max(kDefaultTMin, range.min).
double ray_t_min(const RangeInterval& r);

/// Throws Error(IndexOutOfRange) if (v, h) is outside the pattern.
Ray generate_ray(const SensorModel& m, std::uint32_t v, std::uint32_t h);

/// All rays of the pattern in the sensor frame, index v * W + h.
std::vector<Ray> generate_rays(const SensorModel& m);

/// Velodyne VLP-16: 16 scanlines from -15 deg in 2 deg steps, a full
/// horizontal revolution starting at -180 deg, range [0, 100] m.
/// Throws Error(ResolutionOutOfRange) unless resolution is within [0.1, 0.4] deg.
SphericalModel vlp16_preset(double horizontal_resolution_rad = deg_to_rad(0.4));

struct SensorRig {
    SensorModel model;
    /// Sensor frame to robot base frame; rigid.
    Transform t_sb;
};

/// Throws Error(InvalidModel) for an invalid model or non-rigid mounting.
void validate(const SensorRig& rig);

/// Pattern rays mapped through t_sb into the base frame.
std::vector<Ray> rig_rays_in_base(const SensorRig& rig);

/// Loads a sensor description (TOML). Angles in the file are degrees,
/// lengths meters; direction CSVs are resolved relative to the file.
SensorRig load_sensor_config(const std::filesystem::path& path);
SensorRig parse_sensor_config(const std::string& text, const std::filesystem::path& base_dir = {},
                              const std::string& source = "<string>");

}  // namespace meshray
