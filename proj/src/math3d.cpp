#include "meshray/math3d.hpp"

#include "meshray/error.hpp"

namespace meshray {

Mat3 Mat3::inverse() const
{
    const double det = determinant();
    const double inv = 1.0 / det;
    Mat3 r;
    r.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv;
    r.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv;
    r.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv;
    r.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv;
    r.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv;
    r.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv;
    r.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv;
    r.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv;
    r.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv;
    return r;
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle)
{
    const Vec3 a = meshray::normalized(axis);
    const double s = std::sin(angle * 0.5);
    return {std::cos(angle * 0.5), a.x * s, a.y * s, a.z * s};
}

Rotation Rotation::from_rpy(double roll, double pitch, double yaw)
{
    const double cr = std::cos(roll * 0.5), sr = std::sin(roll * 0.5);
    const double cp = std::cos(pitch * 0.5), sp = std::sin(pitch * 0.5);
    const double cy = std::cos(yaw * 0.5), sy = std::sin(yaw * 0.5);
    return {cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy, cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy};
}

Rotation Rotation::from_matrix(const Mat3& r)
{
    const auto& m = r.m;
    const double trace = m[0][0] + m[1][1] + m[2][2];
    Rotation q;
    if (trace > 0.0) {
        const double s = 0.5 / std::sqrt(trace + 1.0);
        q = {0.25 / s, (m[2][1] - m[1][2]) * s, (m[0][2] - m[2][0]) * s, (m[1][0] - m[0][1]) * s};
    } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]);
        q = {(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s};
    } else if (m[1][1] > m[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]);
        q = {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]);
        q = {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s};
    }
    return q.normalized();
}

Vec3 Rotation::rotate(const Vec3& v) const
{
    // v' = v + 2w(u x v) + 2 u x (u x v), u = (x, y, z)
    const Vec3 u{x, y, z};
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * w + cross(u, t);
}

Mat3 Rotation::to_matrix() const
{
    Mat3 r;
    r.m = {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
            {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
            {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
    return r;
}

Rotation Rotation::normalized() const
{
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
}

bool Rotation::is_axis_aligned(double tol) const
{
    const Mat3 r = to_matrix();
    for (const auto& row : r.m) {
        int big = 0;
        for (double e : row) {
            if (std::abs(std::abs(e) - 1.0) <= tol) {
                ++big;
            } else if (std::abs(e) > tol) {
                return false;
            }
        }
        if (big != 1) return false;
    }
    return true;
}

Rotation operator*(const Rotation& a, const Rotation& b)
{
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z, a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x, a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

bool Transform::has_uniform_scale(double tol) const
{
    return std::abs(scale.x - scale.y) <= tol * std::abs(scale.x) &&
           std::abs(scale.x - scale.z) <= tol * std::abs(scale.x);
}

bool Transform::is_rigid(double tol) const
{
    return std::abs(scale.x - 1.0) <= tol && std::abs(scale.y - 1.0) <= tol && std::abs(scale.z - 1.0) <= tol;
}

namespace {

// For an axis-aligned rotation R, returns s' such that s ∘ (R v) == R (s' ∘ v).
Vec3 pull_scale_through(const Rotation& r, const Vec3& s)
{
    const Mat3 m = r.to_matrix();
    Vec3 out;
    // Column j of R is the image of axis j; it lands on axis i where |m[i][j]| == 1.
    for (int j = 0; j < 3; ++j) {
        int target = 0;
        for (int i = 1; i < 3; ++i) {
            if (std::abs(m.m[i][j]) > std::abs(m.m[target][j])) target = i;
        }
        out[j] = s[target];
    }
    return out;
}

}  // namespace

Transform compose(const Transform& a, const Transform& b)
{
    // a(b(p)) = Ra(sa ∘ (Rb(sb ∘ p) + tb)) + ta
    Transform out;
    out.translation = a.apply(b.translation);
    out.rotation = (a.rotation * b.rotation).normalized();
    if (a.has_uniform_scale()) {
        out.scale = b.scale * a.scale.x;
    } else if (b.rotation.is_axis_aligned()) {
        out.scale = hadamard(pull_scale_through(b.rotation, a.scale), b.scale);
    } else {
        throw Error(ErrorCode::NonComposableScale,
                    "non-uniform outer scale cannot pass through a non-axis-aligned rotation");
    }
    return out;
}

Transform inverse(const Transform& t)
{
    // p = R(s ∘ q) + tr  =>  q = s^-1 ∘ R^T (p - tr)
    const Vec3 inv_s{1.0 / t.scale.x, 1.0 / t.scale.y, 1.0 / t.scale.z};
    const Rotation rt = t.rotation.conjugate();
    Transform out;
    out.rotation = rt;
    if (t.has_uniform_scale()) {
        out.scale = inv_s;
    } else if (rt.is_axis_aligned()) {
        out.scale = pull_scale_through(rt, inv_s);
    } else {
        throw Error(ErrorCode::NonComposableScale,
                    "inverse of a non-uniform scale under a non-axis-aligned rotation");
    }
    out.translation = -out.apply_vector(t.translation);
    return out;
}

Affine Affine::from(const Transform& t)
{
    return {t.rotation.to_matrix() * Mat3::diagonal(t.scale), t.translation};
}

Affine Affine::inverse() const
{
    const Mat3 inv = linear.inverse();
    return {inv, -(inv * translation)};
}

Aabb Aabb::transformed(const Affine& a) const
{
    Aabb out;
    if (is_empty()) return out;
    for (int i = 0; i < 8; ++i) {
        const Vec3 corner{(i & 1) ? max.x : min.x, (i & 2) ? max.y : min.y, (i & 4) ? max.z : min.z};
        out.extend(a.apply(corner));
    }
    return out;
}

std::optional<RayInterval> aabb_ray_intersect(const Aabb& b, const Ray& r)
{
    const double lo[3] = {b.min.x, b.min.y, b.min.z};
    const double hi[3] = {b.max.x, b.max.y, b.max.z};
    double tn = 0.0;
    double tf = 0.0;
    if (!slab_test(lo, hi, SlabRay(r.origin, r.dir), r.t_min, r.t_max, tn, tf)) return std::nullopt;
    return RayInterval{tn, tf};
}

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonComposableScale: return "NonComposableScale";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UncommittedSubScene: return "UncommittedSubScene";
    case ErrorCode::UnsupportedNesting: return "UnsupportedNesting";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DirtyScene: return "DirtyScene";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::ResolutionOutOfRange: return "ResolutionOutOfRange";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::EmptyPoseBatch: return "EmptyPoseBatch";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::MissingAttributes: return "MissingAttributes";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::UnknownObjectName: return "UnknownObjectName";
    case ErrorCode::NonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace meshray
