#pragma once

// Map ingestion and synthetic maps. Every coordinate read from a file is
// taken to be in meters; no unit conversion is applied.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meshray/scene.hpp"

namespace meshray {

enum class MeshFormat { Obj, Ply, Stl };

/// Throws Error(UnsupportedFeature) for an unknown extension.
MeshFormat format_from_path(const std::filesystem::path& path);

struct LoadReport {
    std::size_t vertices = 0;
    std::size_t faces = 0;
    std::size_t degenerate_dropped = 0;
    std::size_t submeshes = 0;
    std::string units = "m";
};

struct LoadedMesh {
    Mesh mesh;
    LoadReport report;
};

struct NamedMesh {
    std::string name;
    Mesh mesh;
};

/// OBJ: v/f records, polygons fan-triangulated, negative indices resolved.
/// PLY: ascii and binary_little_endian. STL: ascii and binary.
/// Degenerate faces are dropped and counted in the report.
/// Throws Error(ParseError) with line or byte offset, Error(UnsupportedFeature), Error(Io).
LoadedMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = std::nullopt);

/// OBJ split by `o` records. Faces before the first object record go to
/// an object named after the file stem. Object vertex indices are compacted.
std::vector<NamedMesh> load_obj_objects(const std::filesystem::path& path, LoadReport* report = nullptr);

/// Builds and commits a scene from a mesh file or a directory of mesh files.
/// Each OBJ object (or each file in a directory) becomes one geometry. A
/// placement sidecar (default: "<path>.placements.toml", or
/// "placements.toml" inside a directory) turns named objects into instanced
/// sub-scenes:
///
///     [[instance]]
///     name = "chair"
///     position = [1.0, 0.0, 0.0]   # m
///     rpy = [0.0, 0.0, 90.0]       # deg
///     scale = [1.0, 1.0, 1.0]
///
/// Objects named by the sidecar are only present through their instances.
/// Throws Error(UnknownObjectName) if the sidecar names a missing object.
std::shared_ptr<Scene> load_scene(const std::filesystem::path& path,
                                  std::optional<std::filesystem::path> sidecar = std::nullopt,
                                  LoadReport* report = nullptr);

/// Rows "x,y,z,qx,qy,qz,qw"; optional header. Quaternions with norm in
/// [0.99, 1.01] are normalized, others rejected with Error(NonUnitQuaternion).
std::vector<Transform> load_poses(const std::filesystem::path& path);

/// Writes "x,y,z,qx,qy,qz,qw" rows with a header; reloads through load_poses.
void write_poses(const std::filesystem::path& path, const std::vector<Transform>& poses);

/// Subdivided icosahedron with 20 * 4^k faces for the smallest k reaching
/// target_faces. Every vertex lies at `radius` from the origin.
Mesh make_icosphere(std::uint32_t target_faces, double radius);

/// Subdivision level make_icosphere uses for `target_faces`.
std::uint32_t icosphere_level(std::uint32_t target_faces);

/// Largest relative shortfall 1 - |p| / radius over all points p on the faces
/// of the level-k icosphere. Uses |p|^2 >= R^2 - L^2 / 3 for a triangle with
/// vertices on the sphere and longest edge L.
double icosphere_chord_error_bound(std::uint32_t level);

/// Two triangles covering [-h, h]^2 at z = 0.
Mesh make_ground_plane(double half_extent);

/// Binary little-endian PLY with float64 coordinates, so reloading is lossless.
void write_ply_mesh(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace meshray
