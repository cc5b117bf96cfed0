#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "meshray/assets.hpp"
#include "meshray/bvh.hpp"
#include "meshray/error.hpp"
#include "meshray/scene.hpp"
#include "support.hpp"

using namespace meshray;

namespace {

std::vector<Aabb> triangle_bounds(const Mesh& m)
{
    std::vector<Aabb> out;
    for (const auto& f : m.faces) {
        Aabb b;
        for (auto i : f) b.extend(m.vertices[i]);
        out.push_back(b);
    }
    return out;
}

// Walks the tree from the root, checking containment, leaf sizes and that
// every primitive slot is reached exactly once. Returns the maximum depth.
std::uint32_t audit(const Bvh& bvh, const std::vector<Aabb>& prims)
{
    const auto& nodes = bvh.nodes();
    std::vector<int> seen(bvh.prim_count(), 0);
    std::vector<int> node_seen(nodes.size(), 0);
    std::uint32_t max_depth = 0;
    struct Item {
        std::uint32_t node, depth;
    };
    std::vector<Item> stack{{0, 1}};
    while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        REQUIRE(it.node < nodes.size());
        REQUIRE(node_seen[it.node] == 0);
        node_seen[it.node] = 1;
        max_depth = std::max(max_depth, it.depth);
        const BvhNode& n = nodes[it.node];
        const Aabb nb = n.bounds();
        if (n.is_leaf()) {
            CHECK(n.count >= 1);
            CHECK(n.count <= Bvh::kMaxLeafSize);
            for (std::uint32_t k = n.index; k < n.index + n.count; ++k) {
                ++seen[k];
                CHECK(nb.contains(prims[bvh.prim_order()[k]]));
            }
        } else {
            for (std::uint32_t c = 0; c < 2; ++c) {
                CHECK(nb.contains(nodes[n.index + c].bounds()));
                stack.push_back({n.index + c, it.depth + 1});
            }
        }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(std::all_of(node_seen.begin(), node_seen.end(), [](int s) { return s == 1; }));
    std::vector<std::uint32_t> order = bvh.prim_order();
    std::sort(order.begin(), order.end());
    for (std::uint32_t i = 0; i < order.size(); ++i) CHECK(order[i] == i);
    return max_depth;
}

}  // namespace

TEST_SUITE("bvh")
{
    TEST_CASE("build on a single triangle gives one leaf with the triangle bounds")
    {
        const Aabb b{{0, 0, 0}, {1, 2, 0}};
        const Bvh bvh = Bvh::build(std::vector<Aabb>{b});
        REQUIRE(bvh.nodes().size() == 1);
        CHECK(bvh.nodes()[0].is_leaf());
        CHECK(bvh.nodes()[0].count == 1);
        const Aabb nb = bvh.bounds();
        CHECK(nb.contains(b));
        CHECK(nb.min.x == 0.0);
        CHECK(nb.max.y == 2.0);
    }

    TEST_CASE("build on two disjoint triangles gives a root and two leaves")
    {
        const std::vector<Aabb> prims{{{0, 0, 0}, {1, 1, 0}}, {{10, 0, 0}, {11, 1, 0}}};
        const Bvh bvh = Bvh::build(prims);
        REQUIRE(bvh.nodes().size() == 3);
        CHECK_FALSE(bvh.nodes()[0].is_leaf());
        CHECK(bvh.nodes()[1].is_leaf());
        CHECK(bvh.nodes()[2].is_leaf());
        CHECK(bvh.nodes()[1].count == 1);
        CHECK(bvh.nodes()[2].count == 1);
    }

    TEST_CASE("empty input is rejected")
    {
        try {
            (void)Bvh::build(std::vector<Aabb>{});
            FAIL("expected EmptyInput");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyInput);
        }
    }

    TEST_CASE("structural audit on 10k random triangles")
    {
        std::mt19937_64 rng(11);
        const Mesh m = testing::random_soup(rng, 10000, 20.0);
        const auto prims = triangle_bounds(m);
        const Bvh bvh = Bvh::build(prims);
        const std::uint32_t depth = audit(bvh, prims);
        CHECK(depth <= Bvh::kMaxDepth);
        CHECK(bvh.stats().sah_cost > 0.0);
        CHECK(bvh.stats().nodes_rebuilt == bvh.nodes().size());
    }

    TEST_CASE("coincident centroids fall back to a median split")
    {
        std::vector<Aabb> prims(37, Aabb{{-1, -1, -1}, {1, 1, 1}});
        const Bvh bvh = Bvh::build(prims);
        CHECK(audit(bvh, prims) <= Bvh::kMaxDepth);
    }

    TEST_CASE("refit keeps topology and tracks primitive motion")
    {
        std::mt19937_64 rng(12);
        Mesh m = testing::random_soup(rng, 500, 5.0);
        auto prims = triangle_bounds(m);
        Bvh bvh = Bvh::build(prims);
        const auto before = bvh.nodes();

        bvh.refit(prims);
        REQUIRE(bvh.nodes().size() == before.size());
        for (std::size_t i = 0; i < before.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                CHECK(bvh.nodes()[i].lo[a] == before[i].lo[a]);
                CHECK(bvh.nodes()[i].hi[a] == before[i].hi[a]);
            }
            CHECK(bvh.nodes()[i].index == before[i].index);
            CHECK(bvh.nodes()[i].count == before[i].count);
        }
        CHECK(bvh.stats().nodes_refit == before.size());

        for (auto& p : prims) {
            p.min.x += 1.0;
            p.max.x += 1.0;
        }
        const auto order = bvh.prim_order();
        bvh.refit(prims);
        CHECK(bvh.prim_order() == order);
        for (std::size_t i = 0; i < before.size(); ++i) {
            CHECK(bvh.nodes()[i].lo[0] == doctest::Approx(before[i].lo[0] + 1.0).epsilon(1e-6));
            CHECK(bvh.nodes()[i].hi[0] == doctest::Approx(before[i].hi[0] + 1.0).epsilon(1e-6));
            CHECK(bvh.nodes()[i].lo[1] == before[i].lo[1]);
            CHECK(bvh.nodes()[i].index == before[i].index);
        }
        audit(bvh, prims);

        prims.pop_back();
        try {
            bvh.refit(prims);
            FAIL("expected CountMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::CountMismatch);
        }
    }

    TEST_CASE("traversal only visits nodes whose bounds the ray overlaps")
    {
        std::mt19937_64 rng(13);
        const Mesh m = testing::random_soup(rng, 300, 5.0);
        const auto prims = triangle_bounds(m);
        const Bvh bvh = Bvh::build(prims);
        std::size_t visited = 0;
        for (int i = 0; i < 500; ++i) {
            Ray r;
            r.origin = testing::random_in_box(rng, {-8, -8, -8}, {8, 8, 8});
            r.dir = testing::random_unit(rng);
            r.t_min = 1e-4;
            r.t_max = i % 3 == 0 ? 4.0 : std::numeric_limits<double>::infinity();
            const double t_max = r.t_max;
            bvh.traverse(
                r.origin, r.dir, r.t_min, t_max, [](std::uint32_t, std::uint32_t) {},
                [&](std::uint32_t node) {
                    ++visited;
                    CHECK(aabb_ray_intersect(bvh.nodes()[node].bounds(), r).has_value());
                });
        }
        CHECK(visited > 0);
    }

    TEST_CASE("triangle_intersect examples")
    {
        const Vec3 v0{5, -1, -1}, v1{5, 2, -1}, v2{5, -1, 2};
        Ray r;
        r.dir = {1, 0, 0};
        auto h = triangle_intersect(r, v0, v1, v2);
        REQUIRE(h);
        CHECK(h->t == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(h->u == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(h->v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

        r.dir = {-1, 0, 0};
        CHECK_FALSE(triangle_intersect(r, v0, v1, v2));

        r.dir = {1, 0, 0};
        h = triangle_intersect(r, v0, v2, v1);
        REQUIRE(h);
        CHECK(h->t == doctest::Approx(5.0).epsilon(1e-12));
    }

    TEST_CASE("triangle_intersect accepts edge and vertex hits")
    {
        const Vec3 v0{1, 0, 0}, v1{1, 1, 0}, v2{1, 0, 1};
        Ray r;
        r.dir = {1, 0, 0};
        CHECK(triangle_intersect(r, v0, v1, v2));  // vertex v0
        r.origin = {0, 0.5, 0};
        CHECK(triangle_intersect(r, v0, v1, v2));  // edge v0-v1
        r.origin = {0, 0.5, 0.5};
        CHECK(triangle_intersect(r, v0, v1, v2));  // hypotenuse
        r.origin = {0, 0.6, 0.6};
        CHECK_FALSE(triangle_intersect(r, v0, v1, v2));
    }
}

TEST_SUITE("bvh")
{
    TEST_CASE("closest_hit: nearer of two parallel walls")
    {
        Scene s;
        s.add_geometry(testing::wall_x(10, 5));
        s.add_geometry(testing::wall_x(5, 5));
        s.commit();
        Ray r;
        r.dir = {1, 0, 0};
        const auto h = s.closest_hit(r);
        REQUIRE(h);
        CHECK(h->t == doctest::Approx(5.0));
        CHECK(h->geom_id == 1);
        CHECK(h->inst_id == kNoInstance);
        CHECK(h->normal.x == doctest::Approx(-1.0));
    }

    TEST_CASE("closest_hit: scaled icosphere instance from the center")
    {
        auto sub = std::make_shared<Scene>();
        sub->add_geometry(make_icosphere(1280, 1.0));
        sub->commit();
        Scene s;
        Transform t;
        t.scale = {3, 3, 3};
        s.add_instance(sub, t);
        s.commit();
        const double bound = icosphere_chord_error_bound(icosphere_level(1280));
        std::mt19937_64 rng(14);
        for (int i = 0; i < 200; ++i) {
            Ray r;
            r.dir = testing::random_unit(rng);
            const auto h = s.closest_hit(r);
            REQUIRE(h);
            CHECK(h->t <= 3.0 + 1e-9);
            CHECK(h->t >= 3.0 * (1.0 - bound) - 1e-9);
            CHECK(h->inst_id == 0);
            CHECK(dot(h->normal, r.dir) <= 0.0);
            CHECK(std::abs(norm(h->normal) - 1.0) <= 1e-5);
        }
    }

    TEST_CASE("closest_hit: empty space")
    {
        Scene s;
        s.add_geometry(testing::wall_x(5, 1));
        s.commit();
        Ray r;
        r.dir = {-1, 0, 0};
        CHECK_FALSE(s.closest_hit(r));
        Scene empty;
        empty.commit();
        CHECK_FALSE(empty.closest_hit(r));
    }

    TEST_CASE("closest_hit: coincident surfaces break ties by ids")
    {
        Scene s;
        s.add_geometry(testing::wall_x(5, 1));
        s.add_geometry(testing::wall_x(5, 1));
        s.commit();
        Ray r;
        r.origin = {0, 0.2, 0.3};
        r.dir = {1, 0, 0};
        const auto h = s.closest_hit(r);
        REQUIRE(h);
        CHECK(h->geom_id == 0);
        // Diagonal of the quad: both triangles report the same t; lower prim wins.
        r.origin = {0, 0.5, 0.5};
        const auto d = s.closest_hit(r);
        REQUIRE(d);
        CHECK(d->prim_id == 0);
    }

    TEST_CASE("closest_hit matches the brute-force oracle")
    {
        std::mt19937_64 rng(15);
        for (int mesh = 0; mesh < 4; ++mesh) {
            Scene s;
            s.add_geometry(testing::random_soup(rng, 1500, 6.0));
            s.add_geometry(testing::random_soup(rng, 500, 3.0));
            auto sub = std::make_shared<Scene>();
            sub->add_geometry(testing::random_soup(rng, 400, 2.0));
            sub->commit();
            Transform t;
            t.rotation = testing::random_rotation(rng);
            t.translation = {4, 0, 1};
            t.scale = {1.5, 1.5, 1.5};
            s.add_instance(sub, t);
            s.add_instance(sub, Transform::from_translation({-4, 2, 0}));
            s.commit();
            const auto world = testing::flatten_world(s);
            for (int i = 0; i < 1500; ++i) {
                Ray r;
                r.origin = testing::random_in_box(rng, {-9, -9, -9}, {9, 9, 9});
                r.dir = testing::random_unit(rng);
                r.t_min = Scene::kDefaultTMin;
                const auto h = s.closest_hit(r);
                const auto ref = testing::brute_force(world, r.origin, r.dir, r.t_min, r.t_max);
                REQUIRE(h.has_value() == ref.hit());
                if (!h) continue;
                CHECK(h->prim_id == ref.prim);
                CHECK(h->geom_id == ref.geom);
                CHECK(h->inst_id == ref.inst);
                CHECK(std::abs(h->t - ref.t) <= 1e-6);
                CHECK(h->t >= r.t_min);
                CHECK(h->u >= 0.0);
                CHECK(h->v >= 0.0);
                CHECK(h->u + h->v <= 1.0 + 1e-6);
            }
        }
    }

    TEST_CASE("no hit is reported before t_min")
    {
        Scene s;
        s.add_geometry(testing::wall_x(0.00005, 1));
        s.add_geometry(testing::wall_x(2, 1));
        s.commit();
        Ray r;
        r.dir = {1, 0, 0};
        const auto h = s.closest_hit(r);  // t_min 0 is raised to the default
        REQUIRE(h);
        CHECK(h->t == doctest::Approx(2.0));
        r.t_min = 2.5;
        CHECK_FALSE(s.closest_hit(r));
    }
}
