#include "meshray/sensors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "meshray/csv.hpp"
#include "meshray/error.hpp"
#include "meshray/scene.hpp"
#include "meshray/toml_lite.hpp"

namespace meshray {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidModel, msg); }

void check_interval(const DiscreteInterval& d, const char* name)
{
    if (d.count < 1) invalid(std::string(name) + ".count must be >= 1");
    if (!std::isfinite(d.min) || !std::isfinite(d.increment)) invalid(std::string(name) + " must be finite");
    if (d.count > 1 && !(d.increment > 0.0)) invalid(std::string(name) + ".increment must be > 0");
}

void check_range(const RangeInterval& r)
{
    if (!(r.min >= 0.0) || !(r.min < r.max)) invalid("range must satisfy 0 <= min < max");
}

void check_theta(const DiscreteInterval& theta)
{
    check_interval(theta, "theta");
    // Spans beyond one revolution would duplicate rays.
    if (theta.count > 1 && theta.increment * theta.count > 2.0 * kPi * (1.0 + 1e-9)) {
        invalid("theta spans more than 360 degrees");
    }
}

void check_dirs(const std::vector<Vec3>& dirs)
{
    if (dirs.empty()) invalid("at least one direction is required");
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (std::abs(norm(dirs[i]) - 1.0) > 1e-6) invalid("direction " + std::to_string(i) + " is not unit length");
    }
}

void check_width(std::uint32_t width, std::size_t n)
{
    if (width != 0 && n % width != 0) {
        invalid("width " + std::to_string(width) + " does not divide ray count " + std::to_string(n));
    }
}

std::uint32_t custom_width(std::uint32_t width, std::size_t n)
{
    return width == 0 ? static_cast<std::uint32_t>(n) : width;
}

Vec3 spherical_dir(double theta, double phi)
{
    return {std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
}

}  // namespace

std::uint32_t model_ray_count(const SensorModel& m)
{
    return std::visit(Overloaded{
                          [](const SphericalModel& s) { return s.theta.count * s.phi.count; },
                          [](const PinholeModel& p) { return p.width * p.height; },
                          [](const CylindricalModel& c) { return c.theta.count * c.z.count; },
                          [](const O1DnModel& o) { return static_cast<std::uint32_t>(o.dirs.size()); },
                          [](const OnDnModel& o) { return static_cast<std::uint32_t>(o.dirs.size()); },
                      },
                      m);
}

std::uint32_t model_width(const SensorModel& m)
{
    return std::visit(Overloaded{
                          [](const SphericalModel& s) { return s.theta.count; },
                          [](const PinholeModel& p) { return p.width; },
                          [](const CylindricalModel& c) { return c.theta.count; },
                          [](const O1DnModel& o) { return custom_width(o.width, o.dirs.size()); },
                          [](const OnDnModel& o) { return custom_width(o.width, o.dirs.size()); },
                      },
                      m);
}

std::uint32_t model_height(const SensorModel& m)
{
    const std::uint32_t w = model_width(m);
    return w == 0 ? 0 : model_ray_count(m) / w;
}

RangeInterval model_range(const SensorModel& m)
{
    return std::visit([](const auto& x) { return x.range; }, m);
}

std::string model_kind(const SensorModel& m)
{
    return std::visit(Overloaded{
                          [](const SphericalModel&) { return std::string("spherical"); },
                          [](const PinholeModel&) { return std::string("pinhole"); },
                          [](const CylindricalModel&) { return std::string("cylindrical"); },
                          [](const O1DnModel&) { return std::string("o1dn"); },
                          [](const OnDnModel&) { return std::string("ondn"); },
                      },
                      m);
}

void validate(const SensorModel& m)
{
    std::visit(Overloaded{
                   [](const SphericalModel& s) {
                       check_theta(s.theta);
                       check_interval(s.phi, "phi");
                       check_range(s.range);
                   },
                   [](const PinholeModel& p) {
                       if (p.width == 0 || p.height == 0) invalid("image size must be at least 1x1");
                       if (!(p.fx > 0.0) || !(p.fy > 0.0)) invalid("focal lengths must be > 0");
                       if (!std::isfinite(p.cx) || !std::isfinite(p.cy)) invalid("principal point must be finite");
                       check_range(p.range);
                   },
                   [](const CylindricalModel& c) {
                       check_theta(c.theta);
                       check_interval(c.z, "z");
                       check_range(c.range);
                   },
                   [](const O1DnModel& o) {
                       check_dirs(o.dirs);
                       if (!is_finite(o.origin)) invalid("origin must be finite");
                       check_width(o.width, o.dirs.size());
                       check_range(o.range);
                   },
                   [](const OnDnModel& o) {
                       check_dirs(o.dirs);
                       if (o.origins.size() != o.dirs.size()) invalid("origins and dirs differ in length");
                       for (const Vec3& p : o.origins) {
                           if (!is_finite(p)) invalid("origins must be finite");
                       }
                       check_width(o.width, o.dirs.size());
                       check_range(o.range);
                   },
               },
               m);
}

double ray_t_min(const RangeInterval& r) { return std::max(Scene::kDefaultTMin, r.min); }

Ray generate_ray(const SensorModel& m, std::uint32_t v, std::uint32_t h)
{
    const std::uint32_t w = model_width(m);
    if (h >= w || v >= model_height(m)) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "ray (v=" + std::to_string(v) + ", h=" + std::to_string(h) + ") outside the pattern");
    }
    const RangeInterval range = model_range(m);
    Ray r;
    r.t_min = ray_t_min(range);
    r.t_max = range.max;
    const std::size_t i = static_cast<std::size_t>(v) * w + h;
    std::visit(Overloaded{
                   [&](const SphericalModel& s) { r.dir = spherical_dir(s.theta.value(h), s.phi.value(v)); },
                   [&](const PinholeModel& p) {
                       r.dir = normalized(Vec3{1.0, -(static_cast<double>(h) - p.cx) / p.fx,
                                               -(static_cast<double>(v) - p.cy) / p.fy});
                   },
                   [&](const CylindricalModel& c) {
                       const double theta = c.theta.value(h);
                       r.origin = {0.0, 0.0, c.z.value(v)};
                       r.dir = {std::cos(theta), std::sin(theta), 0.0};
                   },
                   [&](const O1DnModel& o) {
                       r.origin = o.origin;
                       r.dir = o.dirs[i];
                   },
                   [&](const OnDnModel& o) {
                       r.origin = o.origins[i];
                       r.dir = o.dirs[i];
                   },
               },
               m);
    return r;
}

std::vector<Ray> generate_rays(const SensorModel& m)
{
    const std::uint32_t w = model_width(m);
    const std::uint32_t hgt = model_height(m);
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(w) * hgt);
    for (std::uint32_t v = 0; v < hgt; ++v) {
        for (std::uint32_t h = 0; h < w; ++h) rays.push_back(generate_ray(m, v, h));
    }
    return rays;
}

SphericalModel vlp16_preset(double horizontal_resolution_rad)
{
    const double res_deg = rad_to_deg(horizontal_resolution_rad);
    if (!(res_deg >= 0.1 - 1e-9 && res_deg <= 0.4 + 1e-9)) {
        throw Error(ErrorCode::ResolutionOutOfRange,
                    "VLP-16 horizontal resolution " + std::to_string(res_deg) + " deg outside [0.1, 0.4]");
    }
    SphericalModel m;
    m.phi = {deg_to_rad(-15.0), deg_to_rad(2.0), 16};
    m.theta = {deg_to_rad(-180.0), horizontal_resolution_rad,
               static_cast<std::uint32_t>(std::lround(360.0 / res_deg))};
    m.range = {0.0, 100.0};
    return m;
}

void validate(const SensorRig& rig)
{
    validate(rig.model);
    if (!rig.t_sb.is_rigid(1e-9)) invalid("sensor mounting t_sb must be rigid (scale 1)");
}

std::vector<Ray> rig_rays_in_base(const SensorRig& rig)
{
    std::vector<Ray> rays = generate_rays(rig.model);
    for (Ray& r : rays) {
        r.origin = rig.t_sb.apply(r.origin);
        r.dir = rig.t_sb.rotation.rotate(r.dir);
    }
    return rays;
}

namespace {

DiscreteInterval read_interval(const toml::Table& t, const std::string& key, double scale)
{
    const std::string ctx = "sensor." + key;
    const toml::Table& d = toml::require(t, key, "sensor").as_table(ctx);
    DiscreteInterval out;
    out.min = toml::require(d, "min", ctx).as_number(ctx + ".min") * scale;
    const auto count = toml::require(d, "count", ctx).as_integer(ctx + ".count");
    if (count < 1) invalid(ctx + ".count must be >= 1");
    out.count = static_cast<std::uint32_t>(count);
    const toml::Value* inc = toml::find(d, "increment");
    out.increment = inc ? inc->as_number(ctx + ".increment") * scale : 0.0;
    return out;
}

RangeInterval read_range(const toml::Table& t)
{
    const toml::Value* v = toml::find(t, "range");
    if (!v) return {};
    if (v->is_array()) {
        const auto& a = v->as_array("sensor.range");
        if (a.size() != 2) invalid("sensor.range must be [min, max]");
        return {a[0].as_number("sensor.range"), a[1].as_number("sensor.range")};
    }
    const toml::Table& r = v->as_table("sensor.range");
    return {toml::require(r, "min", "sensor.range").as_number("sensor.range.min"),
            toml::require(r, "max", "sensor.range").as_number("sensor.range.max")};
}

Vec3 read_vec3(const toml::Value& v, const std::string& what)
{
    const auto& a = v.as_array(what);
    if (a.size() != 3) invalid(what + " must have 3 components");
    return {a[0].as_number(what), a[1].as_number(what), a[2].as_number(what)};
}

std::vector<Vec3> read_vec3_list(const toml::Value& v, const std::string& what)
{
    std::vector<Vec3> out;
    for (const auto& e : v.as_array(what)) out.push_back(read_vec3(e, what));
    return out;
}

std::uint32_t read_width(const toml::Table& t)
{
    const toml::Value* v = toml::find(t, "width");
    return v ? static_cast<std::uint32_t>(v->as_integer("sensor.width")) : 0u;
}

void normalize_all(std::vector<Vec3>& dirs)
{
    for (Vec3& d : dirs) {
        const double n = norm(d);
        if (!(n > 0.0) || !std::isfinite(n)) invalid("zero or non-finite direction");
        d = d / n;
    }
}

std::vector<Vec3> dirs_from(const toml::Table& t, const std::filesystem::path& base_dir, std::size_t column)
{
    if (const toml::Value* v = toml::find(t, "dirs")) return read_vec3_list(*v, "sensor.dirs");
    if (const toml::Value* v = toml::find(t, "dirs_csv")) {
        std::vector<Vec3> out;
        for (const auto& row : read_numeric_csv(base_dir / v->as_string("sensor.dirs_csv"), 3)) {
            out.push_back({row[column], row[column + 1], row[column + 2]});
        }
        return out;
    }
    invalid("sensor needs 'dirs' or 'dirs_csv'");
}

}  // namespace

SensorRig parse_sensor_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source)
{
    const toml::Table root = toml::parse(text, source);
    const toml::Table& t = toml::require(root, "sensor", source).as_table("sensor");
    const std::string kind = toml::require(t, "kind", "sensor").as_string("sensor.kind");
    constexpr double kDeg = kPi / 180.0;

    SensorRig rig;
    if (kind == "spherical") {
        SphericalModel m;
        m.theta = read_interval(t, "theta", kDeg);
        m.phi = read_interval(t, "phi", kDeg);
        m.range = read_range(t);
        rig.model = m;
    } else if (kind == "pinhole") {
        PinholeModel m;
        m.width = static_cast<std::uint32_t>(toml::require(t, "width", "sensor").as_integer("sensor.width"));
        m.height = static_cast<std::uint32_t>(toml::require(t, "height", "sensor").as_integer("sensor.height"));
        m.fx = toml::require(t, "fx", "sensor").as_number("sensor.fx");
        m.fy = toml::require(t, "fy", "sensor").as_number("sensor.fy");
        m.cx = toml::require(t, "cx", "sensor").as_number("sensor.cx");
        m.cy = toml::require(t, "cy", "sensor").as_number("sensor.cy");
        m.range = read_range(t);
        rig.model = m;
    } else if (kind == "cylindrical") {
        CylindricalModel m;
        m.theta = read_interval(t, "theta", kDeg);
        m.z = read_interval(t, "z", 1.0);
        m.range = read_range(t);
        rig.model = m;
    } else if (kind == "o1dn") {
        O1DnModel m;
        if (const toml::Value* o = toml::find(t, "origin")) m.origin = read_vec3(*o, "sensor.origin");
        m.dirs = dirs_from(t, base_dir, 0);
        normalize_all(m.dirs);
        m.width = read_width(t);
        m.range = read_range(t);
        rig.model = m;
    } else if (kind == "ondn") {
        OnDnModel m;
        if (const toml::Value* v = toml::find(t, "rays_csv")) {
            for (const auto& row : read_numeric_csv(base_dir / v->as_string("sensor.rays_csv"), 6)) {
                m.origins.push_back({row[0], row[1], row[2]});
                m.dirs.push_back({row[3], row[4], row[5]});
            }
        } else {
            m.origins = read_vec3_list(toml::require(t, "origins", "sensor"), "sensor.origins");
            m.dirs = read_vec3_list(toml::require(t, "dirs", "sensor"), "sensor.dirs");
        }
        normalize_all(m.dirs);
        m.width = read_width(t);
        m.range = read_range(t);
        rig.model = m;
    } else {
        invalid("unknown sensor kind '" + kind + "'");
    }

    if (const toml::Value* v = toml::find(t, "t_sb")) {
        const auto& a = v->as_array("sensor.t_sb");
        if (a.size() != 6) invalid("sensor.t_sb must be [x, y, z, roll, pitch, yaw]");
        double n[6];
        for (int i = 0; i < 6; ++i) n[i] = a[i].as_number("sensor.t_sb");
        rig.t_sb.translation = {n[0], n[1], n[2]};
        rig.t_sb.rotation = Rotation::from_rpy(n[3] * kDeg, n[4] * kDeg, n[5] * kDeg);
    }
    validate(rig);
    return rig;
}

SensorRig load_sensor_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open sensor file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_sensor_config(ss.str(), path.parent_path(), path.string());
}

}  // namespace meshray
