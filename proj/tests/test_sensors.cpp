#include <doctest.h>

#include <cmath>
#include <set>

#include "meshray/error.hpp"
#include "meshray/sensors.hpp"
#include "support.hpp"

using namespace meshray;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

void check_dir(const Vec3& a, const Vec3& b, double tol)
{
    CHECK(std::abs(a.x - b.x) <= tol);
    CHECK(std::abs(a.y - b.y) <= tol);
    CHECK(std::abs(a.z - b.z) <= tol);
}

SphericalModel small_spherical()
{
    SphericalModel m;
    m.theta = {deg_to_rad(-30), deg_to_rad(10), 7};
    m.phi = {deg_to_rad(-10), deg_to_rad(5), 5};
    m.range = {0.5, 50};
    return m;
}

}  // namespace

TEST_SUITE("sensors")
{
    TEST_CASE("model_ray_count")
    {
        CHECK(model_ray_count(vlp16_preset()) == 14400);
        PinholeModel p;
        p.width = 640;
        p.height = 480;
        CHECK(model_ray_count(p) == 307200);
        O1DnModel o;
        o.dirs.assign(7, Vec3{1, 0, 0});
        CHECK(model_ray_count(o) == 7);
        CylindricalModel c;
        c.theta = {0, 0.1, 30};
        c.z = {-1, 0.5, 5};
        CHECK(model_ray_count(c) == 150);
        OnDnModel n;
        n.origins.assign(4, Vec3{});
        n.dirs.assign(4, Vec3{0, 0, 1});
        CHECK(model_ray_count(n) == 4);
    }

    TEST_CASE("vlp16 preset")
    {
        const SphericalModel m = vlp16_preset(deg_to_rad(0.4));
        CHECK(m.theta.count == 900);
        CHECK(m.phi.count == 16);
        CHECK(m.phi.min == doctest::Approx(deg_to_rad(-15)));
        CHECK(m.phi.increment == doctest::Approx(deg_to_rad(2)));
        CHECK(m.theta.min == doctest::Approx(deg_to_rad(-180)));
        CHECK(m.range.min == 0.0);
        CHECK(m.range.max == 100.0);
        const SphericalModel fine = vlp16_preset(deg_to_rad(0.1));
        CHECK(fine.theta.count == 3600);
        CHECK(model_ray_count(fine) == 57600);
        CHECK(code_of([] { vlp16_preset(deg_to_rad(1.0)); }) == ErrorCode::ResolutionOutOfRange);
        CHECK(code_of([] { vlp16_preset(deg_to_rad(0.05)); }) == ErrorCode::ResolutionOutOfRange);
    }

    TEST_CASE("generate_ray examples")
    {
        SphericalModel s;
        s.theta = {0, 0, 1};
        s.phi = {0, 0, 1};
        check_dir(generate_ray(s, 0, 0).dir, {1, 0, 0}, 1e-15);

        const SphericalModel v = vlp16_preset();
        const std::uint32_t h0 = 450;  // theta = -180 + 450 * 0.4 = 0
        const double c15 = std::cos(deg_to_rad(15)), s15 = std::sin(deg_to_rad(15));
        check_dir(generate_ray(v, 0, h0).dir, {c15, 0, -s15}, 1e-9);
        CHECK(generate_ray(v, 0, h0).dir.x == doctest::Approx(0.9659).epsilon(1e-4));

        PinholeModel p;
        p.width = 64;
        p.height = 48;
        p.fx = p.fy = 50;
        p.cx = 32;
        p.cy = 24;
        check_dir(generate_ray(p, 24, 32).dir, {1, 0, 0}, 1e-15);
        // Columns to the right look toward -y, rows further down toward -z.
        const Vec3 d = generate_ray(p, 30, 40).dir;
        CHECK(d.y < 0);
        CHECK(d.z < 0);
        check_dir(d, normalized(Vec3{1, -8.0 / 50, -6.0 / 50}), 1e-12);

        CHECK(code_of([&] { generate_ray(p, 48, 0); }) == ErrorCode::IndexOutOfRange);
        CHECK(code_of([&] { generate_ray(v, 0, 900); }) == ErrorCode::IndexOutOfRange);
    }

    TEST_CASE("cylindrical, o1dn and ondn rays")
    {
        CylindricalModel c;
        c.theta = {0, kPi / 2, 4};
        c.z = {-1, 1, 3};
        const Ray r = generate_ray(c, 2, 1);
        check_dir(r.origin, {0, 0, 1}, 1e-15);
        check_dir(r.dir, {0, 1, 0}, 1e-15);

        O1DnModel o;
        o.origin = {0.1, 0, 0.2};
        o.dirs = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
        o.width = 3;
        CHECK(model_width(o) == 3);
        CHECK(model_height(o) == 2);
        check_dir(generate_ray(o, 1, 2).dir, {0, 0, -1}, 0);
        check_dir(generate_ray(o, 1, 2).origin, {0.1, 0, 0.2}, 0);

        OnDnModel n;
        n.origins = {{0, 0, 0}, {1, 2, 3}};
        n.dirs = {{1, 0, 0}, {0, 1, 0}};
        const Ray q = generate_ray(n, 0, 1);
        check_dir(q.origin, {1, 2, 3}, 0);
        check_dir(q.dir, {0, 1, 0}, 0);
    }

    TEST_CASE("ray bounds follow the range interval")
    {
        SphericalModel s = small_spherical();
        const Ray r = generate_ray(s, 0, 0);
        CHECK(r.t_min == 0.5);
        CHECK(r.t_max == 50);
        s.range.min = 0.0;
        CHECK(generate_ray(s, 0, 0).t_min == doctest::Approx(1e-4));
    }

    TEST_CASE("all directions are unit and the index layout is a bijection")
    {
        PinholeModel p;
        p.width = 17;
        p.height = 9;
        p.fx = 3;
        p.fy = 4;
        p.cx = 8;
        p.cy = 4.5;
        const SensorModel models[] = {vlp16_preset(), small_spherical(), p};
        for (const auto& m : models) {
            const auto rays = generate_rays(m);
            REQUIRE(rays.size() == model_ray_count(m));
            const std::uint32_t w = model_width(m);
            std::set<std::uint32_t> idx;
            for (std::uint32_t v = 0; v < model_height(m); ++v)
                for (std::uint32_t h = 0; h < w; ++h) {
                    idx.insert(v * w + h);
                    const Ray r = generate_ray(m, v, h);
                    CHECK(std::abs(norm(r.dir) - 1.0) <= 1e-6);
                    CHECK(r.dir == rays[v * w + h].dir);
                }
            CHECK(idx.size() == rays.size());
            CHECK(*idx.rbegin() == rays.size() - 1);
        }
        for (const auto& r : generate_rays(p)) CHECK(r.dir.x > 0);
    }

    TEST_CASE("symmetric theta gives a mirror-symmetric pattern")
    {
        SphericalModel s;
        s.theta = {deg_to_rad(-40), deg_to_rad(10), 9};
        s.phi = {deg_to_rad(-5), deg_to_rad(5), 3};
        for (std::uint32_t v = 0; v < 3; ++v)
            for (std::uint32_t h = 0; h < 9; ++h) {
                const Vec3 a = generate_ray(s, v, h).dir;
                const Vec3 b = generate_ray(s, v, 8 - h).dir;
                CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
                CHECK(a.y == doctest::Approx(-b.y).epsilon(1e-12));
                CHECK(a.z == doctest::Approx(b.z).epsilon(1e-12));
            }
    }

    TEST_CASE("validation")
    {
        SphericalModel s = small_spherical();
        s.theta = {0, deg_to_rad(1), 361};
        CHECK(code_of([&] { validate(SensorModel{s}); }) == ErrorCode::InvalidModel);
        s = small_spherical();
        s.range = {10, 5};
        CHECK(code_of([&] { validate(SensorModel{s}); }) == ErrorCode::InvalidModel);
        PinholeModel p;
        p.fx = 0;
        CHECK(code_of([&] { validate(SensorModel{p}); }) == ErrorCode::InvalidModel);
        OnDnModel n;
        n.origins = {{0, 0, 0}};
        n.dirs = {{1, 0, 0}, {0, 1, 0}};
        CHECK(code_of([&] { validate(SensorModel{n}); }) == ErrorCode::InvalidModel);
        SensorRig rig{small_spherical(), {}};
        rig.t_sb.scale = {2, 2, 2};
        CHECK(code_of([&] { validate(rig); }) == ErrorCode::InvalidModel);
    }

    TEST_CASE("rig_rays_in_base")
    {
        SensorRig rig{small_spherical(), Transform::identity()};
        const auto sensor = generate_rays(rig.model);
        auto base = rig_rays_in_base(rig);
        for (std::size_t i = 0; i < sensor.size(); ++i) {
            CHECK(base[i].dir == sensor[i].dir);
            CHECK(base[i].origin == sensor[i].origin);
        }
        rig.t_sb = Transform::from_translation({0, 0, 0.5});
        base = rig_rays_in_base(rig);
        for (const auto& r : base) CHECK(r.origin.z == 0.5);

        SphericalModel fwd;
        fwd.theta = {0, 0, 1};
        fwd.phi = {0, 0, 1};
        rig = {fwd, {Rotation::from_rpy(0, 0, kPi / 2), {}, {1, 1, 1}}};
        base = rig_rays_in_base(rig);
        check_dir(base[0].dir, {0, 1, 0}, 1e-12);
        CHECK(std::abs(norm(base[0].dir) - 1.0) <= 1e-12);
    }

    TEST_CASE("bundled vlp16 config equals the preset")
    {
        const SensorRig rig = load_sensor_config(std::filesystem::path(MESHRAY_DATA_DIR) / "vlp16.toml");
        const auto& m = std::get<SphericalModel>(rig.model);
        const SphericalModel p = vlp16_preset();
        CHECK(m.theta.count == p.theta.count);
        CHECK(m.phi.count == p.phi.count);
        CHECK(m.theta.min == doctest::Approx(p.theta.min).epsilon(1e-12));
        CHECK(m.theta.increment == doctest::Approx(p.theta.increment).epsilon(1e-12));
        CHECK(m.phi.increment == doctest::Approx(p.phi.increment).epsilon(1e-12));
        CHECK(m.range.max == 100.0);
    }

    TEST_CASE("config parsing for each model kind")
    {
        auto pin = parse_sensor_config(R"(
[sensor]
kind = "pinhole"
width = 4
height = 3
fx = 2.0
fy = 2.0
cx = 1.5
cy = 1.0
range = [0.1, 8.0]
t_sb = [0.0, 0.0, 0.5, 0.0, 0.0, 90.0]
)");
        CHECK(model_ray_count(pin.model) == 12);
        CHECK(pin.t_sb.translation.z == 0.5);
        check_dir(pin.t_sb.rotation.rotate({1, 0, 0}), {0, 1, 0}, 1e-12);
        CHECK(model_range(pin.model).min == doctest::Approx(0.1));

        auto cyl = parse_sensor_config(R"(
[sensor]
kind = "cylindrical"
theta = { min = 0.0, increment = 90.0, count = 4 }
z = { min = -0.5, increment = 0.5, count = 3 }
)");
        CHECK(model_ray_count(cyl.model) == 12);
        CHECK(std::get<CylindricalModel>(cyl.model).theta.increment == doctest::Approx(kPi / 2));

        auto o1 = parse_sensor_config(R"(
[sensor]
kind = "o1dn"
origin = [0.0, 0.0, 1.0]
dirs = [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0]]
)");
        CHECK(model_ray_count(o1.model) == 2);
        check_dir(generate_ray(o1.model, 0, 1).dir, {0, 1, 0}, 0);

        testing::TempDir dir("sensor");
        testing::write_text(dir / "rays.csv", "ox,oy,oz,dx,dy,dz\n0,0,0,1,0,0\n1,1,1,0,0,-1\n");
        testing::write_text(dir / "ondn.toml", "[sensor]\nkind = \"ondn\"\nrays_csv = \"rays.csv\"\n");
        auto on = load_sensor_config(dir / "ondn.toml");
        CHECK(model_ray_count(on.model) == 2);
        check_dir(generate_ray(on.model, 0, 1).origin, {1, 1, 1}, 0);

        CHECK(code_of([] { parse_sensor_config("[sensor]\nkind = \"radar\"\n"); }) == ErrorCode::InvalidModel);
        CHECK(code_of([] { parse_sensor_config("[sensor]\nkind = \n"); }) == ErrorCode::ParseError);
        CHECK(code_of([] { load_sensor_config("/nonexistent/x.toml"); }) == ErrorCode::Io);
    }
}
