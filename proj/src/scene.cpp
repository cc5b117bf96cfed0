#include "meshray/scene.hpp"

#include <set>
#include <string>

#include "meshray/error.hpp"

namespace meshray {

Aabb Mesh::bounds() const
{
    Aabb b;
    for (const Face& f : faces) {
        for (std::uint32_t i : f) b.extend(vertices[i]);
    }
    return b;
}

void validate_indices(const Mesh& mesh)
{
    const auto n = mesh.vertices.size();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (std::uint32_t i : mesh.faces[f]) {
            if (i >= n) {
                throw Error(ErrorCode::IndexOutOfRange, "face " + std::to_string(f) + " references vertex " +
                                                            std::to_string(i) + " of " + std::to_string(n));
            }
        }
    }
}

std::size_t drop_degenerate_faces(Mesh& mesh)
{
    const auto before = mesh.faces.size();
    std::erase_if(mesh.faces, [&](const Face& f) {
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) return true;
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3 n = cross(mesh.vertices[f[1]] - a, mesh.vertices[f[2]] - a);
        return !(dot(n, n) > 0.0) || !std::isfinite(dot(n, n));
    });
    return before - mesh.faces.size();
}

struct Scene::Best {
    double t;
    Id inst_id = kNoInstance;
    Id geom_id = 0;
    std::uint32_t prim = 0;
    double u = 0.0;
    double v = 0.0;
    const GeometryRecord* geometry = nullptr;
    const InstanceRecord* instance = nullptr;

    bool found() const { return geometry != nullptr; }

    // Strictly better: smaller t, or equal t with a smaller id triple.
    bool beaten_by(double t2, Id inst2, Id geom2, std::uint32_t prim2) const
    {
        if (!found()) return true;
        if (t2 != t) return t2 < t;
        if (inst2 != inst_id) return inst2 < inst_id;
        if (geom2 != geom_id) return geom2 < geom_id;
        return prim2 < prim;
    }
};

Scene::GeometryRecord& Scene::geometry_record(Id id)
{
    auto it = geometries_.find(id);
    if (it == geometries_.end()) throw Error(ErrorCode::UnknownId, "geometry " + std::to_string(id));
    return it->second;
}

const Scene::GeometryRecord& Scene::geometry_record(Id id) const
{
    auto it = geometries_.find(id);
    if (it == geometries_.end()) throw Error(ErrorCode::UnknownId, "geometry " + std::to_string(id));
    return it->second;
}

Scene::InstanceRecord& Scene::instance_record(Id id)
{
    auto it = instances_.find(id);
    if (it == instances_.end()) throw Error(ErrorCode::UnknownId, "instance " + std::to_string(id));
    return it->second;
}

const Scene::InstanceRecord& Scene::instance_record(Id id) const
{
    auto it = instances_.find(id);
    if (it == instances_.end()) throw Error(ErrorCode::UnknownId, "instance " + std::to_string(id));
    return it->second;
}

Scene::Id Scene::add_geometry(Mesh mesh)
{
    if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
    validate_indices(mesh);
    GeometryRecord rec;
    rec.degenerate_dropped = drop_degenerate_faces(mesh);
    if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has only degenerate faces");
    rec.mesh = std::move(mesh);
    const Id id = next_geometry_id_++;
    geometries_.emplace(id, std::move(rec));
    dirty_ = true;
    structure_changed_ = true;
    return id;
}

void Scene::check_sub_scene(const Scene& sub)
{
    if (sub.dirty()) throw Error(ErrorCode::UncommittedSubScene, "sub-scene has uncommitted modifications");
    if (sub.instance_count() != 0) {
        throw Error(ErrorCode::UnsupportedNesting, "instanced sub-scenes must hold geometries only");
    }
}

Scene::Id Scene::add_instance(std::shared_ptr<const Scene> sub, const Affine& placement)
{
    if (!sub) throw Error(ErrorCode::UnknownId, "null sub-scene");
    if (sub.get() == this) throw Error(ErrorCode::UnsupportedNesting, "scene cannot instance itself");
    check_sub_scene(*sub);
    InstanceRecord rec;
    rec.target = std::move(sub);
    rec.placement = placement;
    const Id id = next_instance_id_++;
    instances_.emplace(id, std::move(rec));
    dirty_ = true;
    structure_changed_ = true;
    return id;
}

void Scene::update_instance(Id inst_id, const Affine& placement)
{
    instance_record(inst_id).placement = placement;
    dirty_ = true;
    instances_moved_ = true;
}

void Scene::remove_geometry(Id geom_id)
{
    geometry_record(geom_id);
    geometries_.erase(geom_id);
    dirty_ = true;
    structure_changed_ = true;
}

void Scene::remove_instance(Id inst_id)
{
    instance_record(inst_id);
    instances_.erase(inst_id);
    dirty_ = true;
    structure_changed_ = true;
}

void Scene::update_vertices(Id geom_id, std::span<const VertexUpdate> updates)
{
    GeometryRecord& g = geometry_record(geom_id);
    for (const VertexUpdate& u : updates) {
        if (u.index >= g.mesh.vertices.size()) {
            throw Error(ErrorCode::IndexOutOfRange, "vertex " + std::to_string(u.index) + " of geometry " +
                                                        std::to_string(geom_id));
        }
    }
    for (const VertexUpdate& u : updates) g.mesh.vertices[u.index] = u.position;
    if (!g.needs_build) g.needs_refit = true;
    dirty_ = true;
}

bool Scene::dirty() const
{
    if (dirty_) return true;
    for (const auto& [id, inst] : instances_) {
        if (inst.target->generation() != inst.target_generation || inst.target->dirty()) return true;
    }
    return false;
}

void Scene::pack(GeometryRecord& g)
{
    const auto& order = g.bvh.prim_order();
    g.tris.resize(order.size());
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
        const Face& f = g.mesh.faces[order[slot]];
        const Vec3& v0 = g.mesh.vertices[f[0]];
        g.tris[slot] = {v0, g.mesh.vertices[f[1]] - v0, g.mesh.vertices[f[2]] - v0, order[slot]};
    }
}

namespace {

std::vector<Aabb> face_bounds(const Mesh& mesh)
{
    std::vector<Aabb> out(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (std::uint32_t i : mesh.faces[f]) out[f].extend(mesh.vertices[i]);
    }
    return out;
}

}  // namespace

void Scene::commit()
{
    if (!dirty()) {
        last_commit_ = {};
        return;
    }
    for (const auto& [id, inst] : instances_) check_sub_scene(*inst.target);

    CommitStats stats;
    const std::uint64_t next_generation = generation_ + 1;
    bool bounds_changed = false;

    for (auto& [id, g] : geometries_) {
        if (g.needs_build) {
            const auto prims = face_bounds(g.mesh);
            g.bvh = Bvh::build(prims);
            pack(g);
            g.bounds = g.bvh.bounds();
            g.needs_build = false;
            g.needs_refit = false;
            g.bvh_generation = next_generation;
            ++g.build_count;
            ++stats.geometries_built;
            stats.nodes_rebuilt += g.bvh.nodes().size();
        } else if (g.needs_refit) {
            const auto prims = face_bounds(g.mesh);
            g.bvh.refit(prims);
            pack(g);
            g.bounds = g.bvh.bounds();
            g.needs_refit = false;
            g.bvh_generation = next_generation;
            ++g.refit_count;
            ++stats.geometries_refit;
            stats.nodes_refit += g.bvh.nodes().size();
            bounds_changed = true;
        }
    }

    for (auto& [id, inst] : instances_) {
        const Aabb new_bounds = inst.target->bounds().transformed(inst.placement);
        if (new_bounds.is_empty() != inst.bounds.is_empty()) instances_moved_ = true;
        if (inst.target_generation != inst.target->generation() || new_bounds.min != inst.bounds.min ||
            new_bounds.max != inst.bounds.max) {
            bounds_changed = true;
        }
        inst.inverse = inst.placement.inverse();
        inst.normal_matrix = inst.inverse.linear.transposed();
        inst.target_generation = inst.target->generation();
        inst.bounds = new_bounds;
    }

    std::vector<Aabb> entry_bounds;
    if (structure_changed_ || instances_moved_) {
        entries_.clear();
        for (const auto& [id, g] : geometries_) {
            entries_.push_back({id, &g, nullptr});
            entry_bounds.push_back(g.bounds);
        }
        for (const auto& [id, inst] : instances_) {
            // Instances of an empty sub-scene can never be hit.
            if (inst.bounds.is_empty()) continue;
            entries_.push_back({id, nullptr, &inst});
            entry_bounds.push_back(inst.bounds);
        }
        top_ = entries_.empty() ? Bvh{} : Bvh::build(entry_bounds);
        stats.top_rebuilt = true;
        stats.nodes_rebuilt += top_.nodes().size();
    } else if (bounds_changed && !entries_.empty()) {
        for (const Entry& e : entries_) entry_bounds.push_back(e.geometry ? e.geometry->bounds : e.instance->bounds);
        top_.refit(entry_bounds);
        stats.top_refit = true;
        stats.nodes_refit += top_.nodes().size();
    }

    generation_ = next_generation;
    dirty_ = false;
    structure_changed_ = false;
    instances_moved_ = false;
    last_commit_ = stats;
}

void Scene::trace_geometry(const GeometryRecord& g, Id geom_id, Id inst_id, const InstanceRecord* inst,
                           const Vec3& origin, const Vec3& dir, double t_min, Best& best) const
{
    g.bvh.traverse(origin, dir, t_min, best.t, [&](std::uint32_t first, std::uint32_t count) {
        for (std::uint32_t k = first; k < first + count; ++k) {
            const PackedTriangle& tri = g.tris[k];
            TriangleHit h;
            if (!intersect_triangle_edges(origin, dir, tri.v0, tri.e1, tri.e2, t_min, best.t, h)) continue;
            if (!best.beaten_by(h.t, inst_id, geom_id, tri.prim)) continue;
            best.t = h.t;
            best.inst_id = inst_id;
            best.geom_id = geom_id;
            best.prim = tri.prim;
            best.u = h.u;
            best.v = h.v;
            best.geometry = &g;
            best.instance = inst;
        }
    });
}

void Scene::trace(const Vec3& origin, const Vec3& dir, double t_min, Best& best, Id inst_id,
                  const InstanceRecord* inst) const
{
    top_.traverse(origin, dir, t_min, best.t, [&](std::uint32_t first, std::uint32_t count) {
        for (std::uint32_t k = first; k < first + count; ++k) {
            const Entry& e = entries_[top_.prim_order()[k]];
            if (e.geometry) {
                trace_geometry(*e.geometry, e.id, inst_id, inst, origin, dir, t_min, best);
            } else {
                // Affine maps preserve the ray parameter, so t stays in world units.
                const Vec3 local_origin = e.instance->inverse.apply(origin);
                const Vec3 local_dir = e.instance->inverse.apply_vector(dir);
                e.instance->target->trace(local_origin, local_dir, t_min, best, e.id, e.instance);
            }
        }
    });
}

std::optional<Hit> Scene::closest_hit_unchecked(const Ray& ray) const
{
    Best best{ray.t_max};
    trace(ray.origin, ray.dir, ray.t_min, best, kNoInstance, nullptr);
    if (!best.found()) return std::nullopt;

    const Mesh& mesh = best.geometry->mesh;
    const Face& f = mesh.faces[best.prim];
    const Vec3& v0 = mesh.vertices[f[0]];
    Vec3 n = cross(mesh.vertices[f[1]] - v0, mesh.vertices[f[2]] - v0);
    if (best.instance) n = best.instance->normal_matrix * n;
    n = normalized(n);
    if (dot(n, ray.dir) > 0.0) n = -n;

    Hit hit;
    hit.t = best.t;
    hit.prim_id = best.prim;
    hit.geom_id = best.geom_id;
    hit.inst_id = best.inst_id;
    hit.u = best.u;
    hit.v = best.v;
    hit.normal = n;
    return hit;
}

std::optional<Hit> Scene::closest_hit(const Ray& ray) const
{
    if (dirty()) throw Error(ErrorCode::DirtyScene, "closest_hit on a scene with uncommitted modifications");
    Ray r = ray;
    if (r.t_min <= 0.0) r.t_min = kDefaultTMin;
    return closest_hit_unchecked(r);
}

std::vector<Scene::Id> Scene::geometry_ids() const
{
    std::vector<Id> ids;
    for (const auto& [id, g] : geometries_) ids.push_back(id);
    return ids;
}

std::vector<Scene::Id> Scene::instance_ids() const
{
    std::vector<Id> ids;
    for (const auto& [id, i] : instances_) ids.push_back(id);
    return ids;
}

const Mesh& Scene::mesh(Id geom_id) const { return geometry_record(geom_id).mesh; }

GeometryInfo Scene::geometry_info(Id geom_id) const
{
    const GeometryRecord& g = geometry_record(geom_id);
    return {geom_id, g.mesh.faces.size(), g.degenerate_dropped, g.bvh_generation, g.build_count, g.refit_count,
            g.bvh.stats()};
}

const Affine& Scene::instance_placement(Id inst_id) const { return instance_record(inst_id).placement; }

std::shared_ptr<const Scene> Scene::instance_target(Id inst_id) const { return instance_record(inst_id).target; }

std::size_t Scene::own_face_count() const
{
    std::size_t n = 0;
    for (const auto& [id, g] : geometries_) n += g.mesh.faces.size();
    return n;
}

std::size_t Scene::stored_face_count() const
{
    std::size_t n = own_face_count();
    std::set<const Scene*> seen;
    for (const auto& [id, inst] : instances_) {
        if (seen.insert(inst.target.get()).second) n += inst.target->stored_face_count();
    }
    return n;
}

std::size_t Scene::instanced_face_count() const
{
    std::size_t n = own_face_count();
    for (const auto& [id, inst] : instances_) n += inst.target->instanced_face_count();
    return n;
}

}  // namespace meshray
