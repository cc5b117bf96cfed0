#include "meshray/bvh.hpp"

#include <cmath>
#include <numeric>

#include "meshray/error.hpp"

namespace meshray {

namespace {

float round_down(double x)
{
    float f = static_cast<float>(x);
    if (static_cast<double>(f) > x) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
    return f;
}

float round_up(double x)
{
    float f = static_cast<float>(x);
    if (static_cast<double>(f) < x) f = std::nextafter(f, std::numeric_limits<float>::infinity());
    return f;
}

void store_bounds(BvhNode& n, const Aabb& b)
{
    for (int a = 0; a < 3; ++a) {
        n.lo[a] = round_down(b.min[a]);
        n.hi[a] = round_up(b.max[a]);
    }
}

// Below this depth the builder stops searching for SAH splits and halves the
// range, which bounds the final depth for any input that fits in 32 bits.
constexpr std::uint32_t kForcedMedianDepth = Bvh::kMaxDepth - 32;

struct Bin {
    Aabb bounds;
    std::uint32_t count = 0;
};

struct Split {
    int axis = -1;
    std::uint32_t bin = 0;  // left side holds bins [0, bin]
    double cost = std::numeric_limits<double>::infinity();
};

class Builder {
public:
    Builder(std::span<const Aabb> bounds, std::vector<BvhNode>& nodes, std::vector<std::uint32_t>& order)
        : bounds_(bounds), nodes_(nodes), order_(order)
    {
        centroids_.reserve(bounds.size());
        for (const Aabb& b : bounds) centroids_.push_back(b.centroid());
    }

    BvhStats run()
    {
        const auto n = static_cast<std::uint32_t>(bounds_.size());
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0u);
        nodes_.clear();
        nodes_.reserve(2 * static_cast<std::size_t>(n));
        nodes_.push_back({});

        struct Task {
            std::uint32_t node, begin, end, depth;
        };
        std::vector<Task> tasks{{0, 0, n, 1}};
        BvhStats stats;
        root_area_ = 0.0;
        while (!tasks.empty()) {
            const Task t = tasks.back();
            tasks.pop_back();
            stats.depth = std::max(stats.depth, t.depth);

            Aabb node_bounds;
            Aabb centroid_bounds;
            for (std::uint32_t i = t.begin; i < t.end; ++i) {
                node_bounds.extend(bounds_[order_[i]]);
                centroid_bounds.extend(centroids_[order_[i]]);
            }
            store_bounds(nodes_[t.node], node_bounds);
            const double area = node_bounds.surface_area();
            if (t.node == 0) root_area_ = area;

            const std::uint32_t count = t.end - t.begin;
            std::uint32_t mid = t.begin;
            bool split = false;
            if (count > 1) {
                if (t.depth < kForcedMedianDepth) {
                    const Split s = find_split(t.begin, t.end, centroid_bounds, area);
                    const double leaf_cost = Bvh::kIntersectionCost * count;
                    if (s.axis >= 0 && (count > Bvh::kMaxLeafSize || s.cost < leaf_cost)) {
                        mid = partition(t.begin, t.end, s, centroid_bounds);
                        split = mid > t.begin && mid < t.end;
                    }
                }
                if (!split && count > Bvh::kMaxLeafSize) {
                    mid = median_split(t.begin, t.end, centroid_bounds);
                    split = true;
                }
            }

            if (!split) {
                nodes_[t.node].index = t.begin;
                nodes_[t.node].count = count;
                stats.sah_cost += Bvh::kIntersectionCost * count * relative_area(area);
                continue;
            }
            const auto left = static_cast<std::uint32_t>(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            nodes_[t.node].index = left;
            nodes_[t.node].count = 0;
            stats.sah_cost += Bvh::kTraversalCost * relative_area(area);
            tasks.push_back({left + 1, mid, t.end, t.depth + 1});
            tasks.push_back({left, t.begin, mid, t.depth + 1});
        }
        stats.nodes_rebuilt = nodes_.size();
        return stats;
    }

private:
    double relative_area(double area) const { return root_area_ > 0.0 ? area / root_area_ : 1.0; }

    std::uint32_t bin_of(const Vec3& c, int axis, const Aabb& cb) const
    {
        const double lo = cb.min[axis];
        const double extent = cb.max[axis] - lo;
        auto b = static_cast<std::int64_t>((c[axis] - lo) / extent * Bvh::kBins);
        return static_cast<std::uint32_t>(std::clamp<std::int64_t>(b, 0, Bvh::kBins - 1));
    }

    Split find_split(std::uint32_t begin, std::uint32_t end, const Aabb& cb, double area) const
    {
        Split best;
        for (int axis = 0; axis < 3; ++axis) {
            if (!(cb.max[axis] > cb.min[axis])) continue;
            Bin bins[Bvh::kBins];
            for (std::uint32_t i = begin; i < end; ++i) {
                const std::uint32_t p = order_[i];
                Bin& bin = bins[bin_of(centroids_[p], axis, cb)];
                bin.bounds.extend(bounds_[p]);
                ++bin.count;
            }
            double right_area[Bvh::kBins];
            std::uint32_t right_count[Bvh::kBins];
            Aabb acc;
            std::uint32_t cnt = 0;
            for (int b = Bvh::kBins - 1; b > 0; --b) {
                acc.extend(bins[b].bounds);
                cnt += bins[b].count;
                right_area[b] = acc.surface_area();
                right_count[b] = cnt;
            }
            acc = Aabb::empty();
            cnt = 0;
            for (std::uint32_t b = 0; b + 1 < Bvh::kBins; ++b) {
                acc.extend(bins[b].bounds);
                cnt += bins[b].count;
                if (cnt == 0 || right_count[b + 1] == 0) continue;
                const double cost = acc.surface_area() * cnt + right_area[b + 1] * right_count[b + 1];
                if (cost < best.cost) best = {axis, b, cost};
            }
        }
        if (best.axis >= 0) {
            best.cost = Bvh::kTraversalCost +
                        Bvh::kIntersectionCost * (area > 0.0 ? best.cost / area : static_cast<double>(end - begin));
        }
        return best;
    }

    std::uint32_t partition(std::uint32_t begin, std::uint32_t end, const Split& s, const Aabb& cb)
    {
        auto it = std::partition(order_.begin() + begin, order_.begin() + end, [&](std::uint32_t p) {
            return bin_of(centroids_[p], s.axis, cb) <= s.bin;
        });
        return static_cast<std::uint32_t>(it - order_.begin());
    }

    std::uint32_t median_split(std::uint32_t begin, std::uint32_t end, const Aabb& cb)
    {
        const Vec3 e = cb.extent();
        const int axis = (e.x >= e.y && e.x >= e.z) ? 0 : (e.y >= e.z ? 1 : 2);
        const std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double ca = centroids_[a][axis];
                             const double cb2 = centroids_[b][axis];
                             return ca < cb2 || (ca == cb2 && a < b);
                         });
        return mid;
    }

    std::span<const Aabb> bounds_;
    std::vector<Vec3> centroids_;
    std::vector<BvhNode>& nodes_;
    std::vector<std::uint32_t>& order_;
    double root_area_ = 0.0;
};

}  // namespace

Bvh Bvh::build(std::span<const Aabb> prim_bounds)
{
    if (prim_bounds.empty()) throw Error(ErrorCode::EmptyInput, "BVH build over zero primitives");
    Bvh bvh;
    Builder builder(prim_bounds, bvh.nodes_, bvh.prim_order_);
    bvh.stats_ = builder.run();
    bvh.sync_pairs();
    return bvh;
}

void Bvh::refit(std::span<const Aabb> prim_bounds)
{
    if (prim_bounds.size() != prim_order_.size()) {
        throw Error(ErrorCode::CountMismatch, "refit with " + std::to_string(prim_bounds.size()) +
                                                  " primitives, tree built over " +
                                                  std::to_string(prim_order_.size()));
    }
    // Children are always allocated after their parent.
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        BvhNode& n = nodes_[i];
        if (n.is_leaf()) {
            Aabb b;
            for (std::uint32_t k = 0; k < n.count; ++k) b.extend(prim_bounds[prim_order_[n.index + k]]);
            store_bounds(n, b);
        } else {
            const BvhNode& l = nodes_[n.index];
            const BvhNode& r = nodes_[n.index + 1];
            for (int a = 0; a < 3; ++a) {
                n.lo[a] = std::min(l.lo[a], r.lo[a]);
                n.hi[a] = std::max(l.hi[a], r.hi[a]);
            }
        }
    }
    stats_.nodes_refit += nodes_.size();
    sync_pairs();
}

void Bvh::sync_pairs()
{
    // Children are allocated in pairs right after the root.
    pairs_.resize(nodes_.size() / 2);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
        for (int c = 0; c < 2; ++c) {
            const BvhNode& n = nodes_[2 * k + 1 + c];
            for (int a = 0; a < 3; ++a) {
                pairs_[k].b[a][c] = n.lo[a];
                pairs_[k].b[3 + a][c] = n.hi[a];
            }
        }
    }
}

std::optional<TriangleHit> triangle_intersect(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2)
{
    TriangleHit hit{};
    if (!intersect_triangle_edges(ray.origin, ray.dir, v0, v1 - v0, v2 - v0, ray.t_min, ray.t_max, hit)) {
        return std::nullopt;
    }
    return hit;
}

}  // namespace meshray
