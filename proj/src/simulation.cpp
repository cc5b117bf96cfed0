#include "meshray/simulation.hpp"

#include <cmath>
#include <limits>

#include "meshray/error.hpp"
#include "meshray/parallel.hpp"

namespace meshray {

namespace {

constexpr const char* kAttrNames[] = {"hits", "ranges", "points", "normals", "prim_ids", "geom_ids", "inst_ids"};

SimResult run(const Scene& scene, const SensorRig& rig, const std::vector<Ray>& rays,
              std::span<const Transform> poses, AttrSelection sel, SimOptions options)
{
    if (!sel.any()) throw Error(ErrorCode::EmptySelection, "no attribute requested");
    if (poses.empty()) throw Error(ErrorCode::EmptyPoseBatch, "pose batch is empty");
    for (std::size_t i = 0; i < poses.size(); ++i) {
        if (!poses[i].is_rigid(1e-9)) throw Error(ErrorCode::InvalidSpec, "pose " + std::to_string(i) + " is not rigid");
    }
    if (scene.dirty()) throw Error(ErrorCode::DirtyScene, "simulate on a scene with uncommitted modifications");

    const std::uint32_t width = model_width(rig.model);
    const std::uint32_t height = model_height(rig.model);

    SimResult r;
    r.n_poses = static_cast<std::uint32_t>(poses.size());
    r.n_rays = static_cast<std::uint32_t>(rays.size());
    r.selection = sel;
    const std::size_t n = r.size();
    constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();
    if (sel.hits) r.hits.assign(n, 0);
    if (sel.ranges) r.ranges.assign(n, std::numeric_limits<float>::infinity());
    if (sel.points) r.points.assign(3 * n, kNaN);
    if (sel.normals) r.normals.assign(3 * n, kNaN);
    if (sel.prim_ids) r.prim_ids.assign(n, kNoInstance);
    if (sel.geom_ids) r.geom_ids.assign(n, kNoInstance);
    if (sel.inst_ids) r.inst_ids.assign(n, kNoInstance);

    // One task per (pose, scanline).
    const std::size_t n_tasks = poses.size() * height;
    std::vector<std::uint64_t> casts(n_tasks, 0);
    parallel_for(n_tasks, options.threads, [&](std::size_t task) {
        const std::size_t pose = task / height;
        const std::uint32_t v = static_cast<std::uint32_t>(task % height);
        const Transform sensor_to_map = compose(poses[pose], rig.t_sb);
        const Rotation& rot = sensor_to_map.rotation;
        const Rotation inv_rot = rot.conjugate();
        std::uint64_t count = 0;
        for (std::uint32_t h = 0; h < width; ++h) {
            const std::size_t ray_index = static_cast<std::size_t>(v) * width + h;
            const Ray& s = rays[ray_index];
            const Ray world{sensor_to_map.apply(s.origin), rot.rotate(s.dir), s.t_min, s.t_max};
            const auto hit = scene.closest_hit_unchecked(world);
            ++count;
            if (!hit) continue;

            const std::size_t out = pose * rays.size() + ray_index;
            if (sel.hits) r.hits[out] = 1;
            if (sel.ranges) r.ranges[out] = static_cast<float>(hit->t);
            if (sel.points) {
                const Vec3 p = s.origin + s.dir * hit->t;
                r.points[3 * out] = static_cast<float>(p.x);
                r.points[3 * out + 1] = static_cast<float>(p.y);
                r.points[3 * out + 2] = static_cast<float>(p.z);
            }
            if (sel.normals) {
                Vec3 nrm = normalized(inv_rot.rotate(hit->normal));
                if (dot(nrm, s.dir) > 0.0) nrm = -nrm;
                r.normals[3 * out] = static_cast<float>(nrm.x);
                r.normals[3 * out + 1] = static_cast<float>(nrm.y);
                r.normals[3 * out + 2] = static_cast<float>(nrm.z);
            }
            if (sel.prim_ids) r.prim_ids[out] = hit->prim_id;
            if (sel.geom_ids) r.geom_ids[out] = hit->geom_id;
            if (sel.inst_ids) r.inst_ids[out] = hit->inst_id;
        }
        casts[task] = count;
    });
    for (std::uint64_t c : casts) r.rays_cast += c;
    return r;
}

}  // namespace

AttrSelection AttrSelection::from_mask(std::uint8_t mask)
{
    AttrSelection s;
    s.hits = mask & 0x01;
    s.ranges = mask & 0x02;
    s.points = mask & 0x04;
    s.normals = mask & 0x08;
    s.prim_ids = mask & 0x10;
    s.geom_ids = mask & 0x20;
    s.inst_ids = mask & 0x40;
    return s;
}

std::uint8_t AttrSelection::mask() const
{
    return static_cast<std::uint8_t>((hits ? 0x01 : 0) | (ranges ? 0x02 : 0) | (points ? 0x04 : 0) |
                                     (normals ? 0x08 : 0) | (prim_ids ? 0x10 : 0) | (geom_ids ? 0x20 : 0) |
                                     (inst_ids ? 0x40 : 0));
}

AttrSelection AttrSelection::parse(std::string_view list)
{
    std::uint8_t mask = 0;
    while (!list.empty()) {
        const auto comma = list.find(',');
        std::string_view name = list.substr(0, comma);
        while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
        while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
        if (name == "all") {
            mask |= kAllMask;
        } else if (!name.empty()) {
            int bit = -1;
            for (int i = 0; i < 7; ++i) {
                if (name == kAttrNames[i]) bit = i;
            }
            if (bit < 0) throw Error(ErrorCode::InvalidSpec, "unknown attribute '" + std::string(name) + "'");
            mask |= static_cast<std::uint8_t>(1u << bit);
        }
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
    }
    if (mask == 0) throw Error(ErrorCode::InvalidSpec, "empty attribute list");
    return from_mask(mask);
}

std::string AttrSelection::to_string() const
{
    std::string out;
    const std::uint8_t m = mask();
    for (int i = 0; i < 7; ++i) {
        if (m & (1u << i)) {
            if (!out.empty()) out += ',';
            out += kAttrNames[i];
        }
    }
    return out;
}

Simulator::Simulator(std::shared_ptr<const Scene> scene, SensorRig rig)
    : scene_(std::move(scene)), rig_(std::move(rig))
{
    validate(rig_);
    rays_ = generate_rays(rig_.model);
}

SimResult Simulator::simulate(std::span<const Transform> poses, AttrSelection selection, SimOptions options) const
{
    return run(*scene_, rig_, rays_, poses, selection, options);
}

SimResult simulate(const Scene& scene, const SensorRig& rig, std::span<const Transform> poses,
                   AttrSelection selection, SimOptions options)
{
    validate(rig);
    return run(scene, rig, generate_rays(rig.model), poses, selection, options);
}

std::vector<float> simulate_ranges(const Scene& scene, const SensorRig& rig, std::span<const Transform> poses,
                                   SimOptions options)
{
    AttrSelection sel;
    sel.ranges = true;
    return simulate(scene, rig, poses, sel, options).ranges;
}

std::size_t point_consistency_violations(const SimResult& result, const SensorRig& rig, double tolerance)
{
    if (!result.selection.ranges || !result.selection.points) {
        throw Error(ErrorCode::MissingAttributes, "consistency check needs ranges and points");
    }
    const std::vector<Ray> rays = generate_rays(rig.model);
    if (rays.size() != result.n_rays) throw Error(ErrorCode::CountMismatch, "result does not match the rig");
    std::size_t violations = 0;
    for (std::size_t i = 0; i < result.size(); ++i) {
        const float range = result.ranges[i];
        if (!std::isfinite(range)) continue;
        const Ray& s = rays[i % result.n_rays];
        const Vec3 expected = s.origin + s.dir * static_cast<double>(range);
        const Vec3 got{result.points[3 * i], result.points[3 * i + 1], result.points[3 * i + 2]};
        if (!(norm(got - expected) <= tolerance)) ++violations;
    }
    return violations;
}

}  // namespace meshray
