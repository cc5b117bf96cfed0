#pragma once

// Binary bounding volume hierarchy: binned SAH build, bottom-up refit and
// ordered closest-first traversal. The tree stores float bounds rounded
// outward; slab tests run in double precision.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include "meshray/math3d.hpp"

namespace meshray {

inline constexpr std::uint32_t kNoInstance = 0xFFFFFFFFu;

struct BvhNode {
    float lo[3];
    float hi[3];
    // Interior: children at `index` and `index + 1`. Leaf: first slot in prim_order.
    std::uint32_t index;
    // 0 for interior nodes.
    std::uint32_t count;

    bool is_leaf() const { return count != 0; }
    Aabb bounds() const
    {
        return {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    }
};
static_assert(sizeof(BvhNode) == 32);

// Bounds of the sibling pair (2k + 1, 2k + 2), interleaved for traversal.
// Rows: lo x, y, z, hi x, y, z; column 0 is the left child.
struct BvhPairBounds {
    float b[6][2];
};

struct BvhStats {
    std::uint64_t nodes_rebuilt = 0;
    std::uint64_t nodes_refit = 0;
    double sah_cost = 0.0;
    std::uint32_t depth = 0;
};

class Bvh {
public:
    static constexpr std::uint32_t kBins = 16;
    static constexpr std::uint32_t kMaxLeafSize = 4;
    static constexpr std::uint32_t kMaxDepth = 64;
    static constexpr double kTraversalCost = 1.0;
    static constexpr double kIntersectionCost = 1.5;

    /// Throws Error(EmptyInput) for an empty span.
    static Bvh build(std::span<const Aabb> prim_bounds);

    /// Recomputes every node's bounds with the topology kept as built.
    /// Throws Error(CountMismatch) if the primitive count changed.
    void refit(std::span<const Aabb> prim_bounds);

    const std::vector<BvhNode>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& prim_order() const { return prim_order_; }
    const BvhStats& stats() const { return stats_; }
    std::size_t prim_count() const { return prim_order_.size(); }
    Aabb bounds() const { return nodes_.empty() ? Aabb::empty() : nodes_[0].bounds(); }

    /// Closest-first traversal. `leaf(first_slot, count)` is called for every
    /// reached leaf and may shrink `t_max` (read through the reference before
    /// each node test). `visit(node_index)` is called for each node whose
    /// bounds pass the slab test.
    template <typename LeafFn, typename VisitFn>
    void traverse(const Vec3& origin, const Vec3& dir, double t_min, const double& t_max, LeafFn&& leaf,
                  VisitFn&& visit) const;

    template <typename LeafFn>
    void traverse(const Vec3& origin, const Vec3& dir, double t_min, const double& t_max, LeafFn&& leaf) const
    {
        traverse(origin, dir, t_min, t_max, leaf, [](std::uint32_t) {});
    }

private:
    void sync_pairs();

    std::vector<BvhNode> nodes_;
    std::vector<BvhPairBounds> pairs_;
    std::vector<std::uint32_t> prim_order_;
    BvhStats stats_;
};

namespace detail {

inline bool node_hit(const BvhNode& n, const SlabRay& ray, double t_min, double t_max, double& t_near)
{
    double t_far = 0.0;
    return slab_test(n.lo, n.hi, ray, t_min, t_max, t_near, t_far);
}

#if defined(__SSE2__)
struct PairRay {
    __m128d org[3];
    __m128d inv[3];
    __m128d inv_far[3];
    int near_row[3];
    int far_row[3];

    explicit PairRay(const SlabRay& r)
    {
        for (int a = 0; a < 3; ++a) {
            org[a] = _mm_set1_pd(r.org[a]);
            inv[a] = _mm_set1_pd(r.inv[a]);
            inv_far[a] = _mm_set1_pd(r.inv_far[a]);
            near_row[a] = r.neg[a] ? 3 + a : a;
            far_row[a] = r.neg[a] ? a : 3 + a;
        }
    }
};

inline __m128d load_pair(const float* p)
{
    return _mm_cvtps_pd(_mm_castpd_ps(_mm_load_sd(reinterpret_cast<const double*>(p))));
}

// Bit 0 of the result is the left child, bit 1 the right. Same IEEE
// operations as slab_test, one lane per child; maxpd/minpd return the second
// operand on NaN, matching its comparisons.
inline int pair_hit(const BvhPairBounds& p, const PairRay& r, double t_min, double t_max, double& tl, double& tr)
{
    __m128d tn = _mm_set1_pd(t_min);
    __m128d tf = _mm_set1_pd(t_max);
    for (int a = 0; a < 3; ++a) {
        const __m128d t0 = _mm_mul_pd(_mm_sub_pd(load_pair(p.b[r.near_row[a]]), r.org[a]), r.inv[a]);
        const __m128d t1 = _mm_mul_pd(_mm_sub_pd(load_pair(p.b[r.far_row[a]]), r.org[a]), r.inv_far[a]);
        tn = _mm_max_pd(t0, tn);
        tf = _mm_min_pd(t1, tf);
    }
    tl = _mm_cvtsd_f64(tn);
    tr = _mm_cvtsd_f64(_mm_unpackhi_pd(tn, tn));
    return _mm_movemask_pd(_mm_cmple_pd(tn, tf));
}
#else
struct PairRay {
    const SlabRay& ray;
    explicit PairRay(const SlabRay& r) : ray(r) {}
};

inline int pair_hit(const BvhPairBounds& p, const PairRay& r, double t_min, double t_max, double& tl, double& tr)
{
    int mask = 0;
    double t_far = 0.0;
    for (int c = 0; c < 2; ++c) {
        const float lo[3] = {p.b[0][c], p.b[1][c], p.b[2][c]};
        const float hi[3] = {p.b[3][c], p.b[4][c], p.b[5][c]};
        if (slab_test(lo, hi, r.ray, t_min, t_max, c == 0 ? tl : tr, t_far)) mask |= 1 << c;
    }
    return mask;
}
#endif

}  // namespace detail

template <typename LeafFn, typename VisitFn>
void Bvh::traverse(const Vec3& origin, const Vec3& dir, double t_min, const double& t_max, LeafFn&& leaf,
                   VisitFn&& visit) const
{
    if (nodes_.empty()) return;
    const SlabRay ray(origin, dir);
    const detail::PairRay pray(ray);

    double t_root = 0.0;
    if (!detail::node_hit(nodes_[0], ray, t_min, t_max, t_root)) return;
    visit(0u);

    struct Entry {
        std::uint32_t node;
        double t_near;
    };
    Entry stack[kMaxDepth + 2];
    int top = 0;
    std::uint32_t node = 0;

    for (;;) {
        const BvhNode& n = nodes_[node];
        if (n.is_leaf()) {
            leaf(n.index, n.count);
        } else {
            double tl = 0.0;
            double tr = 0.0;
            const int mask = detail::pair_hit(pairs_[(n.index - 1) / 2], pray, t_min, t_max, tl, tr);
            if (mask & 1) visit(n.index);
            if (mask & 2) visit(n.index + 1);
            if (mask == 3) {
                // Descend into the nearer child, defer the other.
                const bool left_first = tl <= tr;
                stack[top++] = {left_first ? n.index + 1 : n.index, left_first ? tr : tl};
                node = left_first ? n.index : n.index + 1;
                continue;
            }
            if (mask != 0) {
                node = mask == 1 ? n.index : n.index + 1;
                continue;
            }
        }
        // Ties must still be visited so the caller can apply its tie-break.
        while (top > 0 && stack[top - 1].t_near > t_max) --top;
        if (top == 0) return;
        node = stack[--top].node;
    }
}

struct TriangleHit {
    double t;
    double u;
    double v;
};

inline constexpr double kBarycentricEpsilon = 1e-9;

/// Möller–Trumbore on precomputed edges e1 = v1 - v0, e2 = v2 - v0. Both
/// windings hit; edge and vertex hits are accepted within kBarycentricEpsilon.
/// `dir` need not be unit length; t is expressed in units of `dir`.
inline bool intersect_triangle_edges(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& e1,
                                     const Vec3& e2, double t_min, double t_max, TriangleHit& out)
{
    const Vec3 p = cross(dir, e2);
    const double det = dot(e1, p);
    if (det == 0.0 || !std::isfinite(det)) return false;
    const double inv_det = 1.0 / det;
    const Vec3 s = origin - v0;
    const double u = dot(s, p) * inv_det;
    if (u < -kBarycentricEpsilon || u > 1.0 + kBarycentricEpsilon) return false;
    const Vec3 q = cross(s, e1);
    const double v = dot(dir, q) * inv_det;
    if (v < -kBarycentricEpsilon || u + v > 1.0 + kBarycentricEpsilon) return false;
    const double t = dot(e2, q) * inv_det;
    if (!(t >= t_min && t <= t_max)) return false;
    out = {t, std::max(u, 0.0), std::max(v, 0.0)};
    return true;
}

std::optional<TriangleHit> triangle_intersect(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2);

/// Result of a closest-hit query against a scene.
struct Hit {
    double t = 0.0;
    std::uint32_t prim_id = 0;
    std::uint32_t geom_id = 0;
    std::uint32_t inst_id = kNoInstance;
    double u = 0.0;
    double v = 0.0;
    /// Unit geometric normal in the query frame, facing the ray origin.
    Vec3 normal;
};

}  // namespace meshray
