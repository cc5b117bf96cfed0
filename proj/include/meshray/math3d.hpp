#pragma once

// Value-semantic 3D math used throughout meshray.
//
// Frame convention for every body and sensor frame: right-handed, x forward,
// y left, z up.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace meshray {

constexpr double kPi = 3.14159265358979323846;

constexpr double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
constexpr double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o)
    {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o)
    {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Componentwise product.
constexpr Vec3 hadamard(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

constexpr Vec3 min(const Vec3& a, const Vec3& b)
{
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
constexpr Vec3 max(const Vec3& a, const Vec3& b)
{
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

inline bool is_finite(const Vec3& v)
{
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Row-major 3x3 matrix.
struct Mat3 {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static constexpr Mat3 identity() { return {}; }
    static constexpr Mat3 diagonal(const Vec3& d)
    {
        Mat3 r;
        r.m = {{{d.x, 0, 0}, {0, d.y, 0}, {0, 0, d.z}}};
        return r;
    }

    constexpr Vec3 operator*(const Vec3& v) const
    {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }

    constexpr Mat3 operator*(const Mat3& o) const
    {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
            }
        }
        return r;
    }

    constexpr Mat3 transposed() const
    {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        }
        return r;
    }

    constexpr double determinant() const
    {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }

    // Caller guarantees a non-singular matrix.
    Mat3 inverse() const;
};

/// Unit quaternion (w, x, y, z). q and -q describe the same rotation.
struct Rotation {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static constexpr Rotation identity() { return {}; }
    static Rotation from_axis_angle(const Vec3& axis, double angle);
    /// Fixed-axis roll (x), pitch (y), yaw (z); applied as Rz(yaw)·Ry(pitch)·Rx(roll).
    static Rotation from_rpy(double roll, double pitch, double yaw);
    /// Nearest unit quaternion to an orthonormal matrix.
    static Rotation from_matrix(const Mat3& r);

    Vec3 rotate(const Vec3& v) const;
    Rotation conjugate() const { return {w, -x, -y, -z}; }
    Mat3 to_matrix() const;
    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Rotation normalized() const;
    /// True when the rotation maps every coordinate axis onto a (signed) coordinate axis.
    bool is_axis_aligned(double tol = 1e-12) const;
};

/// Hamilton product: (a * b).rotate(v) == a.rotate(b.rotate(v)).
Rotation operator*(const Rotation& a, const Rotation& b);

/// Rigid pose with optional per-axis scale: p -> R·(scale ∘ p) + translation.
struct Transform {
    Rotation rotation;
    Vec3 translation;
    Vec3 scale{1.0, 1.0, 1.0};

    static constexpr Transform identity() { return {}; }
    static Transform from_translation(const Vec3& t) { return {Rotation::identity(), t, {1, 1, 1}}; }

    Vec3 apply(const Vec3& p) const { return rotation.rotate(hadamard(scale, p)) + translation; }
    /// Applies the linear part only (no translation).
    Vec3 apply_vector(const Vec3& v) const { return rotation.rotate(hadamard(scale, v)); }

    bool has_uniform_scale(double tol = 1e-12) const;
    bool is_rigid(double tol = 1e-12) const;
};

/// Returns a ∘ b, so that compose(a, b).apply(p) == a.apply(b.apply(p)).
/// Throws Error(NonComposableScale) when the product needs a non-uniform scale
/// that does not commute with the inner rotation.
Transform compose(const Transform& a, const Transform& b);

/// Throws Error(NonComposableScale) for a non-uniform scale under a rotation
/// that is not axis-aligned (the inverse is not of the R·(s∘p)+t form).
Transform inverse(const Transform& t);

/// General affine map p -> linear·p + translation. Used where placements may
/// carry shear after composition (instances).
struct Affine {
    Mat3 linear;
    Vec3 translation;

    static Affine identity() { return {}; }
    static Affine from(const Transform& t);

    Vec3 apply(const Vec3& p) const { return linear * p + translation; }
    Vec3 apply_vector(const Vec3& v) const { return linear * v; }

    Affine inverse() const;
    Affine operator*(const Affine& o) const { return {linear * o.linear, linear * o.translation + translation}; }
};

struct Ray {
    Vec3 origin;
    Vec3 dir{1.0, 0.0, 0.0};
    double t_min = 0.0;
    double t_max = std::numeric_limits<double>::infinity();
};

struct Aabb {
    Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
    Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};

    static constexpr Aabb empty() { return {}; }

    bool is_empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
    void extend(const Vec3& p)
    {
        min = meshray::min(min, p);
        max = meshray::max(max, p);
    }
    void extend(const Aabb& b)
    {
        min = meshray::min(min, b.min);
        max = meshray::max(max, b.max);
    }
    Vec3 extent() const { return max - min; }
    Vec3 centroid() const { return (min + max) * 0.5; }
    double surface_area() const
    {
        if (is_empty()) return 0.0;
        const Vec3 d = extent();
        return 2.0 * (d.x * d.y + d.y * d.z + d.z * d.x);
    }
    bool contains(const Vec3& p) const
    {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
               p.z <= max.z;
    }
    bool contains(const Aabb& b) const { return b.is_empty() || (contains(b.min) && contains(b.max)); }
    /// Bounds of the eight transformed corners.
    Aabb transformed(const Affine& a) const;
};

struct RayInterval {
    double t_near;
    double t_far;
};

/// Slab test clipped to [r.t_min, r.t_max]. Zero direction components are
/// handled through IEEE infinities; NaN slabs (origin on a slab plane with a
/// zero direction component) do not restrict the interval.
std::optional<RayInterval> aabb_ray_intersect(const Aabb& b, const Ray& r);

// Per-ray data for the slab test kernel shared by aabb_ray_intersect and BVH
// traversal. The far-plane reciprocal is widened by a few ulps so the test
// stays conservative under rounding.
struct SlabRay {
    static constexpr double kGrow = 1.0 + 4.0 * std::numeric_limits<double>::epsilon();

    double org[3];
    double inv[3];
    double inv_far[3];
    bool neg[3];

    SlabRay(const Vec3& origin, const Vec3& dir)
        : org{origin.x, origin.y, origin.z},
          inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z},
          inv_far{inv[0] * kGrow, inv[1] * kGrow, inv[2] * kGrow},
          neg{std::signbit(inv[0]), std::signbit(inv[1]), std::signbit(inv[2])}
    {
    }
};

template <typename T>
inline bool slab_test(const T lo[3], const T hi[3], const SlabRay& r, double t_min, double t_max, double& t_near,
                      double& t_far)
{
    double tn = t_min;
    double tf = t_max;
    auto axis = [&](int a) {
        const double t0 = (static_cast<double>(r.neg[a] ? hi[a] : lo[a]) - r.org[a]) * r.inv[a];
        const double t1 = (static_cast<double>(r.neg[a] ? lo[a] : hi[a]) - r.org[a]) * r.inv_far[a];
        // Written so that NaN comparisons leave the interval unchanged.
        tn = t0 > tn ? t0 : tn;
        tf = t1 < tf ? t1 : tf;
    };
    axis(0);
    axis(1);
    axis(2);
    t_near = tn;
    t_far = tf;
    return tn <= tf;
}

inline Vec3 reciprocal(const Vec3& d) { return {1.0 / d.x, 1.0 / d.y, 1.0 / d.z}; }

}  // namespace meshray
