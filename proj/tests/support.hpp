#pragma once

// Shared helpers for the test programs: independent reference intersectors,
// random scene generators and scratch directories.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "meshray/math3d.hpp"
#include "meshray/scene.hpp"

namespace testing {

using meshray::Face;
using meshray::Mesh;
using meshray::Vec3;

struct RefHit {
    double t = std::numeric_limits<double>::infinity();
    std::uint32_t prim = 0xFFFFFFFFu;
    std::uint32_t geom = 0xFFFFFFFFu;
    std::uint32_t inst = 0xFFFFFFFFu;
    bool hit() const { return std::isfinite(t); }
};

// Plane intersection followed by same-side edge tests, written independently
// of the library kernel. Accepts both windings.
inline std::optional<double> ref_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c,
                                          double t_min, double t_max)
{
    const Vec3 n = meshray::cross(b - a, c - a);
    const double area2 = meshray::norm(n);
    if (area2 == 0.0) return std::nullopt;
    const double denom = meshray::dot(n, d);
    if (denom == 0.0) return std::nullopt;
    const double t = meshray::dot(n, a - o) / denom;
    if (!(t >= t_min && t <= t_max)) return std::nullopt;
    const Vec3 p = o + d * t;
    const double tol = -1e-9 * area2 * area2;
    if (meshray::dot(meshray::cross(b - a, p - a), n) < tol) return std::nullopt;
    if (meshray::dot(meshray::cross(c - b, p - b), n) < tol) return std::nullopt;
    if (meshray::dot(meshray::cross(a - c, p - c), n) < tol) return std::nullopt;
    return t;
}

inline bool ref_less(const RefHit& a, const RefHit& b)
{
    if (a.t != b.t) return a.t < b.t;
    if (a.inst != b.inst) return a.inst < b.inst;
    if (a.geom != b.geom) return a.geom < b.geom;
    return a.prim < b.prim;
}

// One world-space triangle soup entry per primitive of the scene.
struct WorldTriangle {
    Vec3 a, b, c;
    std::uint32_t prim, geom, inst;
};

inline std::vector<WorldTriangle> flatten_world(const meshray::Scene& scene)
{
    std::vector<WorldTriangle> out;
    auto add_mesh = [&](const Mesh& m, std::uint32_t geom, std::uint32_t inst, const meshray::Affine* place) {
        for (std::uint32_t p = 0; p < m.faces.size(); ++p) {
            const Face& f = m.faces[p];
            Vec3 a = m.vertices[f[0]], b = m.vertices[f[1]], c = m.vertices[f[2]];
            if (place) {
                a = place->apply(a);
                b = place->apply(b);
                c = place->apply(c);
            }
            out.push_back({a, b, c, p, geom, inst});
        }
    };
    for (auto g : scene.geometry_ids()) add_mesh(scene.mesh(g), g, meshray::kNoInstance, nullptr);
    for (auto i : scene.instance_ids()) {
        const auto sub = scene.instance_target(i);
        const meshray::Affine& place = scene.instance_placement(i);
        for (auto g : sub->geometry_ids()) add_mesh(sub->mesh(g), g, i, &place);
    }
    return out;
}

inline RefHit brute_force(const std::vector<WorldTriangle>& tris, const Vec3& o, const Vec3& d, double t_min,
                          double t_max)
{
    RefHit best;
    for (const auto& w : tris) {
        const auto t = ref_triangle(o, d, w.a, w.b, w.c, t_min, t_max);
        if (!t) continue;
        RefHit h{*t, w.prim, w.geom, w.inst};
        if (ref_less(h, best)) best = h;
    }
    return best;
}

inline Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    for (;;) {
        const Vec3 v{n(rng), n(rng), n(rng)};
        const double l = meshray::norm(v);
        if (l > 1e-6) return v / l;
    }
}

inline Vec3 random_in_box(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {lo.x + u(rng) * (hi.x - lo.x), lo.y + u(rng) * (hi.y - lo.y), lo.z + u(rng) * (hi.z - lo.z)};
}

inline meshray::Rotation random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    return meshray::Rotation{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

// Triangle soup of `faces` triangles of mixed sizes inside [-extent, extent]^3.
inline Mesh random_soup(std::mt19937_64& rng, std::size_t faces, double extent)
{
    Mesh m;
    std::uniform_real_distribution<double> size(0.05, 0.2 * extent);
    for (std::size_t i = 0; i < faces; ++i) {
        const Vec3 c = random_in_box(rng, {-extent, -extent, -extent}, {extent, extent, extent});
        const double s = size(rng);
        const auto base = static_cast<std::uint32_t>(m.vertices.size());
        for (int k = 0; k < 3; ++k) m.vertices.push_back(c + random_unit(rng) * s);
        m.faces.push_back({base, base + 1, base + 2});
    }
    return m;
}

// Height-field grid of nx * ny quads (2 * nx * ny triangles) over [0, sx] x [0, sy].
inline Mesh bumpy_grid(std::uint32_t nx, std::uint32_t ny, double sx, double sy, double amp, double phase)
{
    Mesh m;
    for (std::uint32_t j = 0; j <= ny; ++j)
        for (std::uint32_t i = 0; i <= nx; ++i) {
            const double x = sx * i / nx;
            const double y = sy * j / ny;
            m.vertices.push_back({x, y, amp * std::sin(3.0 * x + phase) * std::cos(2.0 * y)});
        }
    auto at = [&](std::uint32_t i, std::uint32_t j) { return j * (nx + 1) + i; };
    for (std::uint32_t j = 0; j < ny; ++j)
        for (std::uint32_t i = 0; i < nx; ++i) {
            m.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            m.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return m;
}

// Closed axis-aligned box of 12 triangles.
inline Mesh box_mesh(const Vec3& lo, const Vec3& hi)
{
    Mesh m;
    for (int k = 0; k < 8; ++k) m.vertices.push_back({k & 1 ? hi.x : lo.x, k & 2 ? hi.y : lo.y, k & 4 ? hi.z : lo.z});
    const std::uint32_t q[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1}, {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
    for (const auto& f : q) {
        m.faces.push_back({f[0], f[1], f[2]});
        m.faces.push_back({f[0], f[2], f[3]});
    }
    return m;
}

// Axis-aligned quad in the plane x = x0 covering [-h, h]^2 in y and z.
inline Mesh wall_x(double x0, double h)
{
    Mesh m;
    m.vertices = {{x0, -h, -h}, {x0, h, -h}, {x0, h, h}, {x0, -h, h}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("meshray_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    f << text;
}

inline std::string read_bytes(const std::filesystem::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace testing
