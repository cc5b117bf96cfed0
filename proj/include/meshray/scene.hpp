#pragma once

// The map: a two-level scene of triangle-mesh geometries and instances of
// flat sub-scenes. Modifications are staged and become visible to queries
// only after commit(); querying a dirty scene throws Error(DirtyScene).

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "meshray/bvh.hpp"
#include "meshray/math3d.hpp"

namespace meshray {

using Face = std::array<std::uint32_t, 3>;

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    std::size_t face_count() const { return faces.size(); }
    Aabb bounds() const;
};

/// Throws Error(IndexOutOfRange) if any face references a missing vertex.
void validate_indices(const Mesh& mesh);

/// Removes faces with a repeated index or zero area; returns how many were dropped.
std::size_t drop_degenerate_faces(Mesh& mesh);

struct VertexUpdate {
    std::uint32_t index;
    Vec3 position;
};

struct CommitStats {
    std::uint32_t geometries_built = 0;
    std::uint32_t geometries_refit = 0;
    std::uint64_t nodes_rebuilt = 0;
    std::uint64_t nodes_refit = 0;
    bool top_rebuilt = false;
    bool top_refit = false;
};

struct GeometryInfo {
    std::uint32_t id = 0;
    std::size_t faces = 0;
    std::size_t degenerate_dropped = 0;
    /// Scene generation at which this geometry's BVH was last built or refit.
    std::uint64_t bvh_generation = 0;
    std::uint32_t build_count = 0;
    std::uint32_t refit_count = 0;
    BvhStats bvh;
};

class Scene {
public:
    using Id = std::uint32_t;

    Scene() = default;
    Scene(const Scene&) = delete;
    Scene& operator=(const Scene&) = delete;
    Scene(Scene&&) = default;
    Scene& operator=(Scene&&) = default;

    /// Stages a geometry. Degenerate faces are dropped (see geometry_info).
    /// Throws EmptyMesh if no valid face remains, IndexOutOfRange on bad indices.
    Id add_geometry(Mesh mesh);

    /// Stages an instance of a committed, flat sub-scene. The sub-scene's
    /// mesh storage is shared, not copied.
    Id add_instance(std::shared_ptr<const Scene> sub, const Affine& placement);
    Id add_instance(std::shared_ptr<const Scene> sub, const Transform& placement)
    {
        return add_instance(std::move(sub), Affine::from(placement));
    }

    void update_instance(Id inst_id, const Affine& placement);
    void update_instance(Id inst_id, const Transform& placement) { update_instance(inst_id, Affine::from(placement)); }

    void remove_geometry(Id geom_id);
    void remove_instance(Id inst_id);

    /// Moves vertices; topology is unchanged, so commit refits instead of rebuilding.
    void update_vertices(Id geom_id, std::span<const VertexUpdate> updates);

    /// Applies staged modifications. Vertex-only changes refit the affected
    /// geometry BVHs and the top level; adding or removing objects or moving
    /// instances rebuilds the top level plus BVHs of new geometries only.
    void commit();

    /// True while staged modifications exist, or a referenced sub-scene
    /// changed since the last commit.
    bool dirty() const;
    std::uint64_t generation() const { return generation_; }
    const CommitStats& last_commit() const { return last_commit_; }

    /// Minimal-t hit over both levels; ties broken by (inst_id, geom_id, prim_id).
    /// A ray t_min of 0 is raised to kDefaultTMin. Throws Error(DirtyScene).
    std::optional<Hit> closest_hit(const Ray& ray) const;

    /// Same as closest_hit without the dirty check or t_min adjustment; the
    /// caller has verified !dirty().
    std::optional<Hit> closest_hit_unchecked(const Ray& ray) const;

    std::size_t geometry_count() const { return geometries_.size(); }
    std::size_t instance_count() const { return instances_.size(); }
    std::vector<Id> geometry_ids() const;
    std::vector<Id> instance_ids() const;
    const Mesh& mesh(Id geom_id) const;
    GeometryInfo geometry_info(Id geom_id) const;
    const Affine& instance_placement(Id inst_id) const;
    std::shared_ptr<const Scene> instance_target(Id inst_id) const;

    /// Triangles held in memory: this scene's geometries plus those of each
    /// distinct referenced sub-scene, counted once.
    std::size_t stored_face_count() const;
    /// Triangles as seen in the world: direct faces plus one copy per instance.
    std::size_t instanced_face_count() const;
    std::size_t own_face_count() const;

    /// World bounds as of the last commit.
    Aabb bounds() const { return top_.bounds(); }
    const Bvh& top_level() const { return top_; }

    static constexpr double kDefaultTMin = 1e-4;

private:
    struct PackedTriangle {
        Vec3 v0;
        Vec3 e1;
        Vec3 e2;
        std::uint32_t prim;
    };

    struct GeometryRecord {
        Mesh mesh;
        Bvh bvh;
        std::vector<PackedTriangle> tris;  // BVH leaf order
        Aabb bounds;
        std::size_t degenerate_dropped = 0;
        bool needs_build = true;
        bool needs_refit = false;
        std::uint64_t bvh_generation = 0;
        std::uint32_t build_count = 0;
        std::uint32_t refit_count = 0;
    };

    struct InstanceRecord {
        std::shared_ptr<const Scene> target;
        Affine placement;
        Affine inverse;
        Mat3 normal_matrix;
        std::uint64_t target_generation = 0;
        Aabb bounds;
    };

    struct Entry {
        Id id;
        const GeometryRecord* geometry;  // exactly one of geometry / instance is set
        const InstanceRecord* instance;
    };

    struct Best;

    void trace(const Vec3& origin, const Vec3& dir, double t_min, Best& best, Id inst_id,
               const InstanceRecord* inst) const;
    void trace_geometry(const GeometryRecord& g, Id geom_id, Id inst_id, const InstanceRecord* inst,
                        const Vec3& origin, const Vec3& dir, double t_min, Best& best) const;
    static void pack(GeometryRecord& g);
    static void check_sub_scene(const Scene& sub);
    GeometryRecord& geometry_record(Id id);
    const GeometryRecord& geometry_record(Id id) const;
    InstanceRecord& instance_record(Id id);
    const InstanceRecord& instance_record(Id id) const;

    std::map<Id, GeometryRecord> geometries_;
    std::map<Id, InstanceRecord> instances_;
    Id next_geometry_id_ = 0;
    Id next_instance_id_ = 0;

    std::vector<Entry> entries_;
    Bvh top_;
    bool dirty_ = false;
    bool structure_changed_ = false;
    bool instances_moved_ = false;
    std::uint64_t generation_ = 0;
    CommitStats last_commit_;
};

}  // namespace meshray
