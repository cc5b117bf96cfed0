#include <doctest.h>

#include <cmath>
#include <cstring>
#include <memory>
#include <random>

#include "meshray/assets.hpp"
#include "meshray/error.hpp"
#include "meshray/simulation.hpp"
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

std::shared_ptr<Scene> sphere_scene(std::uint32_t faces, double radius)
{
    auto s = std::make_shared<Scene>();
    s->add_geometry(make_icosphere(faces, radius));
    s->commit();
    return s;
}

SensorRig coarse_rig()
{
    SphericalModel m;
    m.theta = {deg_to_rad(-180), deg_to_rad(6), 60};
    m.phi = {deg_to_rad(-45), deg_to_rad(10), 10};
    m.range = {0.0, 100.0};
    return {m, Transform::identity()};
}

// Mixed scene: walls, a box and an instanced soup; every id kind appears.
std::shared_ptr<Scene> mixed_scene()
{
    std::mt19937_64 rng(31);
    auto sub = std::make_shared<Scene>();
    sub->add_geometry(testing::random_soup(rng, 200, 1.0));
    sub->commit();
    auto s = std::make_shared<Scene>();
    s->add_geometry(testing::wall_x(6, 6));
    s->add_geometry(testing::box_mesh({-4, -1, -1}, {-3, 1, 1}));
    s->add_instance(sub, Transform::from_translation({0, 4, 0}));
    Transform t;
    t.rotation = Rotation::from_rpy(0.1, 0.2, 0.3);
    t.translation = {0, -4, 0.5};
    s->add_instance(sub, t);
    s->commit();
    return s;
}

}  // namespace

TEST_SUITE("simulation")
{
    TEST_CASE("sphere center: every VLP-16 ray hits within the chord bound")
    {
        const auto scene = sphere_scene(20480, 10.0);
        const SensorRig rig{vlp16_preset(), Transform::identity()};
        const Transform pose = Transform::identity();
        const SimResult r = simulate(*scene, rig, std::span(&pose, 1), AttrSelection::parse("hits,ranges"));
        REQUIRE(r.ranges.size() == 14400);
        const double lo = 10.0 * (1.0 - icosphere_chord_error_bound(5));
        CHECK(lo >= 9.9);
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(r.hits[i] == 1);
            CHECK(r.ranges[i] >= lo - 1e-5);
            CHECK(r.ranges[i] <= 10.0 + 1e-5);
        }
    }

    TEST_CASE("ground plane: the -15 degree scan line is uniform")
    {
        auto scene = std::make_shared<Scene>();
        scene->add_geometry(make_ground_plane(1000.0));
        scene->commit();
        const SensorRig rig{vlp16_preset(), Transform::identity()};
        const Transform pose = Transform::from_translation({0, 0, 0.5});
        const auto ranges = simulate_ranges(*scene, rig, std::span(&pose, 1));
        const double want = 0.5 / std::sin(deg_to_rad(15));
        CHECK(want == doctest::Approx(1.9319).epsilon(1e-4));
        for (std::uint32_t h = 0; h < 900; ++h) CHECK(std::abs(ranges[h] - want) <= 1e-4);
    }

    TEST_CASE("empty scene: all misses with the sentinel encoding")
    {
        Scene scene;
        scene.commit();
        const Transform pose = Transform::identity();
        const SimResult r = simulate(scene, coarse_rig(), std::span(&pose, 1), AttrSelection::all());
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(r.hits[i] == 0);
            CHECK(std::isinf(r.ranges[i]));
            CHECK(r.ranges[i] > 0);
            for (int k = 0; k < 3; ++k) {
                CHECK(std::isnan(r.points[3 * i + k]));
                CHECK(std::isnan(r.normals[3 * i + k]));
            }
            CHECK(r.prim_ids[i] == 0xFFFFFFFFu);
            CHECK(r.geom_ids[i] == 0xFFFFFFFFu);
            CHECK(r.inst_ids[i] == 0xFFFFFFFFu);
        }
    }

    TEST_CASE("errors")
    {
        auto scene = sphere_scene(20, 5.0);
        const Transform pose = Transform::identity();
        CHECK(code_of([&] { simulate(*scene, coarse_rig(), {}, AttrSelection::all()); }) == ErrorCode::EmptyPoseBatch);
        CHECK(code_of([&] { simulate(*scene, coarse_rig(), std::span(&pose, 1), AttrSelection{}); }) ==
              ErrorCode::EmptySelection);
        Transform scaled;
        scaled.scale = {2, 2, 2};
        CHECK(code_of([&] { simulate(*scene, coarse_rig(), std::span(&scaled, 1), AttrSelection::all()); }) ==
              ErrorCode::InvalidSpec);
        scene->add_geometry(testing::wall_x(1, 1));
        CHECK(code_of([&] { simulate(*scene, coarse_rig(), std::span(&pose, 1), AttrSelection::all()); }) ==
              ErrorCode::DirtyScene);
    }

    TEST_CASE("simulate_ranges equals the ranges of a fuller selection")
    {
        const auto scene = mixed_scene();
        const std::vector<Transform> poses{Transform::identity(), Transform::from_translation({1, 0, 0}),
                                           {Rotation::from_rpy(0, 0, 1), {0, 1, 0}, {1, 1, 1}}};
        const auto ranges = simulate_ranges(*scene, coarse_rig(), poses);
        CHECK(ranges.size() == 3 * 600);
        const auto full = simulate(*scene, coarse_rig(), poses, AttrSelection::parse("ranges,points"));
        CHECK(std::memcmp(ranges.data(), full.ranges.data(), ranges.size() * sizeof(float)) == 0);
        const SensorRig vlp{vlp16_preset(), Transform::identity()};
        CHECK(simulate_ranges(*scene, vlp, poses).size() == 43200);
    }

    TEST_CASE("points, normals and ids are consistent and in the sensor frame")
    {
        const auto scene = mixed_scene();
        SensorRig rig = coarse_rig();
        rig.t_sb = {Rotation::from_rpy(0.05, -0.1, 0.4), {0.2, 0.1, 0.3}, {1, 1, 1}};
        const std::vector<Transform> poses{Transform::identity(),
                                           {Rotation::from_rpy(0.1, 0, -0.7), {0.5, -0.5, 0}, {1, 1, 1}}};
        const SimResult r = simulate(*scene, rig, poses, AttrSelection::all());
        CHECK(point_consistency_violations(r, rig) == 0);
        const auto sensor_rays = generate_rays(rig.model);
        std::size_t hits = 0;
        bool saw[3] = {false, false, false};
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK((r.hits[i] == 1) == std::isfinite(r.ranges[i]));
            if (!r.hits[i]) continue;
            ++hits;
            const Vec3 n{r.normals[3 * i], r.normals[3 * i + 1], r.normals[3 * i + 2]};
            CHECK(std::abs(norm(n) - 1.0) <= 1e-5);
            CHECK(dot(n, sensor_rays[i % r.n_rays].dir) <= 1e-6);
            if (r.inst_ids[i] == kNoInstance) saw[r.geom_ids[i]] = true;
            else saw[2] = true;
        }
        CHECK(hits > 0);
        CHECK(saw[0]);
        CHECK(saw[1]);
        CHECK(saw[2]);

        // World-frame oracle: recompute a sample of rays against the brute force.
        const auto world = testing::flatten_world(*scene);
        for (std::size_t i = 0; i < r.size(); i += 7) {
            const Transform chain = compose(poses[i / r.n_rays], rig.t_sb);
            const Ray& s = sensor_rays[i % r.n_rays];
            const auto ref = testing::brute_force(world, chain.apply(s.origin), chain.apply_vector(s.dir), s.t_min,
                                                  s.t_max);
            REQUIRE(ref.hit() == (r.hits[i] == 1));
            if (!ref.hit()) continue;
            CHECK(std::abs(r.ranges[i] - ref.t) <= 1e-5 * std::max(1.0, ref.t));
            CHECK(r.prim_ids[i] == ref.prim);
            CHECK(r.geom_ids[i] == ref.geom);
            CHECK(r.inst_ids[i] == ref.inst);
        }
    }

    TEST_CASE("hits outside the range interval are misses")
    {
        auto scene = std::make_shared<Scene>();
        scene->add_geometry(testing::wall_x(2, 50));
        scene->add_geometry(testing::wall_x(20, 50));
        scene->commit();
        O1DnModel m;
        m.dirs = {{1, 0, 0}};
        m.range = {3.0, 100.0};
        const Transform pose = Transform::identity();
        auto r = simulate(*scene, {m, {}}, std::span(&pose, 1), AttrSelection::parse("ranges,geom_ids"));
        CHECK(r.ranges[0] == doctest::Approx(20.0));
        CHECK(r.geom_ids[0] == 1);
        m.range = {0.0, 10.0};
        r = simulate(*scene, {m, {}}, std::span(&pose, 1), AttrSelection::parse("ranges"));
        CHECK(r.ranges[0] == doctest::Approx(2.0));
        m.range = {0.0, 1.5};
        r = simulate(*scene, {m, {}}, std::span(&pose, 1), AttrSelection::parse("ranges"));
        CHECK(std::isinf(r.ranges[0]));
    }

    TEST_CASE("sensor-frame invariance under a rigid motion of scene and poses")
    {
        // Integer geometry and translations keep every transformed coordinate exact.
        auto make = [](const Vec3& offset) {
            auto s = std::make_shared<Scene>();
            Mesh box = testing::box_mesh(Vec3{-8, -8, -8} + offset, Vec3{8, 8, 8} + offset);
            s->add_geometry(box);
            s->add_geometry(testing::box_mesh(Vec3{2, 1, -1} + offset, Vec3{4, 3, 1} + offset));
            s->commit();
            return s;
        };
        const Vec3 offset{16, -32, 8};
        const auto a = make({0, 0, 0});
        const auto b = make(offset);
        const std::vector<Transform> pa{Transform::from_translation({1, 0, 0}), Transform::from_translation({-2, 1, 0})};
        std::vector<Transform> pb = pa;
        for (auto& p : pb) p.translation += offset;
        const auto ra = simulate(*a, coarse_rig(), pa, AttrSelection::all());
        const auto rb = simulate(*b, coarse_rig(), pb, AttrSelection::all());
        CHECK(std::memcmp(ra.ranges.data(), rb.ranges.data(), ra.ranges.size() * sizeof(float)) == 0);
        for (std::size_t i = 0; i < ra.points.size(); ++i) {
            if (std::isnan(ra.points[i])) continue;
            CHECK(std::abs(ra.points[i] - rb.points[i]) <= 1e-5);
        }
        CHECK(ra.prim_ids == rb.prim_ids);
    }

    TEST_CASE("results do not depend on the thread count")
    {
        const auto scene = sphere_scene(5000, 10.0);
        const SensorRig rig{vlp16_preset(), Transform::identity()};
        std::vector<Transform> poses;
        for (int i = 0; i < 4; ++i) poses.push_back(Transform::from_translation({0.5 * i, -0.3 * i, 0.1 * i}));
        const auto one = simulate(*scene, rig, poses, AttrSelection::all(), {1});
        for (unsigned t : {2u, 3u, 8u}) {
            const auto many = simulate(*scene, rig, poses, AttrSelection::all(), {t});
            CHECK(std::memcmp(one.ranges.data(), many.ranges.data(), one.ranges.size() * sizeof(float)) == 0);
            CHECK(std::memcmp(one.points.data(), many.points.data(), one.points.size() * sizeof(float)) == 0);
            CHECK(std::memcmp(one.normals.data(), many.normals.data(), one.normals.size() * sizeof(float)) == 0);
            CHECK(one.prim_ids == many.prim_ids);
            CHECK(many.rays_cast == one.rays_cast);
        }
        CHECK(one.rays_cast == 4u * 14400u);
    }

    TEST_CASE("attribute selection parsing and buffer sizes")
    {
        const AttrSelection s = AttrSelection::parse("points,ranges");
        CHECK(s.points);
        CHECK(s.ranges);
        CHECK_FALSE(s.hits);
        CHECK(AttrSelection::parse("all").mask() == AttrSelection::kAllMask);
        CHECK(AttrSelection::from_mask(0x15).to_string() == "hits,points,prim_ids");
        CHECK(code_of([] { AttrSelection::parse("colors"); }) == ErrorCode::InvalidSpec);
        CHECK(code_of([] { AttrSelection::parse(""); }) == ErrorCode::InvalidSpec);

        const auto scene = sphere_scene(80, 3.0);
        const std::vector<Transform> poses(2);
        const auto r = simulate(*scene, coarse_rig(), poses, AttrSelection::parse("points,geom_ids"));
        CHECK(r.points.size() == 2 * 600 * 3);
        CHECK(r.geom_ids.size() == 1200);
        CHECK(r.ranges.empty());
        CHECK(r.normals.empty());
        CHECK(r.hits.empty());
    }

    TEST_CASE("point consistency check")
    {
        const auto scene = sphere_scene(320, 4.0);
        const Transform pose = Transform::identity();
        SimResult r = simulate(*scene, coarse_rig(), std::span(&pose, 1), AttrSelection::parse("ranges,points"));
        CHECK(point_consistency_violations(r, coarse_rig()) == 0);
        r.points[3 * 17] += 0.01f;
        CHECK(point_consistency_violations(r, coarse_rig()) == 1);

        Scene empty;
        empty.commit();
        const auto miss = simulate(empty, coarse_rig(), std::span(&pose, 1), AttrSelection::parse("ranges,points"));
        CHECK(point_consistency_violations(miss, coarse_rig()) == 0);
        const auto no_points = simulate(*scene, coarse_rig(), std::span(&pose, 1), AttrSelection::parse("ranges"));
        CHECK(code_of([&] { point_consistency_violations(no_points, coarse_rig()); }) ==
              ErrorCode::MissingAttributes);
    }

    TEST_CASE("Simulator reuses its sensor rays")
    {
        const auto scene = sphere_scene(320, 4.0);
        const Simulator sim(scene, coarse_rig());
        CHECK(sim.sensor_rays().size() == 600);
        const Transform pose = Transform::identity();
        const auto r = sim.simulate(std::span(&pose, 1), AttrSelection::parse("ranges"));
        CHECK(r.rays_cast == 600);
    }
}
